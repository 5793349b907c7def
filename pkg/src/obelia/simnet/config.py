"""Simulation configuration (JSON round-trippable; times in milliseconds)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from ..committee import ValidatorId

LINK_KINDS = ("core->core", "core->aux", "aux->core")


class ConfigError(ValueError):
    pass


@dataclass
class Link:
    base_ms: float = 50.0
    jitter_ms: float = 50.0


@dataclass
class Partition:
    """``group`` is cut off from everyone else during [start_ms, end_ms)."""

    start_ms: float
    end_ms: float
    group: list[str]


@dataclass
class Crash:
    node: str
    at_ms: float = 0.0
    recover_ms: float | None = None


@dataclass
class SimConfig:
    seed: int = 0
    duration_ms: float = 10_000.0
    latency: dict[str, Link] = field(default_factory=lambda: {k: Link() for k in LINK_KINDS})
    drop_prob: float = 0.0
    # before GST: drops and partitions apply; afterwards the network is reliable
    gst_ms: float | None = None
    partitions: list[Partition] = field(default_factory=list)
    crashes: list[Crash] = field(default_factory=list)
    adversaries: dict[str, str] = field(default_factory=dict)
    load_tps: float = 0.0
    load_targets: str = "core"
    inject_interval_ms: float = 10.0
    sample_interval_ms: float = 500.0
    aux_subscriptions: int = 3
    scheme: str = "mock"
    node: dict = field(default_factory=dict)
    trace: bool = False

    def __post_init__(self) -> None:
        self.latency = {
            k: (v if isinstance(v, Link) else Link(**v)) for k, v in self.latency.items()
        }
        for k in LINK_KINDS:
            self.latency.setdefault(k, Link())
        self.partitions = [p if isinstance(p, Partition) else Partition(**p) for p in self.partitions]
        self.crashes = [c if isinstance(c, Crash) else Crash(**c) for c in self.crashes]
        self.validate()

    def validate(self) -> None:
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.duration_ms <= 0:
            raise ConfigError("duration_ms must be positive")
        if not 0.0 <= self.drop_prob < 1.0:
            raise ConfigError("drop_prob must lie in [0, 1)")
        unknown = set(self.latency) - set(LINK_KINDS)
        if unknown:
            raise ConfigError(f"unknown link kinds {sorted(unknown)}")
        for link in self.latency.values():
            if link.base_ms < 0 or link.jitter_ms < 0:
                raise ConfigError("latencies must be non-negative")
        for p in self.partitions:
            if p.end_ms < p.start_ms:
                raise ConfigError("partition ends before it starts")
        for c in self.crashes:
            ValidatorId.parse(c.node)
            if c.recover_ms is not None and c.recover_ms < c.at_ms:
                raise ConfigError("recovery before crash")
        for node in self.adversaries:
            ValidatorId.parse(node)
        if self.load_targets not in ("core", "all"):
            raise ConfigError("load_targets must be 'core' or 'all'")
        if self.inject_interval_ms <= 0 or self.sample_interval_ms <= 0:
            raise ConfigError("intervals must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
