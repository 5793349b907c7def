"""Static validator roster, stake arithmetic and quorum thresholds."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import NamedTuple


class Kind(IntEnum):
    CORE = 0
    AUX = 1


class ValidatorId(NamedTuple):
    """A validator identity; ordered by (kind, index)."""

    kind: Kind
    index: int

    def __str__(self) -> str:
        return f"{'c' if self.kind == Kind.CORE else 'a'}{self.index}"

    @property
    def is_core(self) -> bool:
        return self.kind == Kind.CORE

    @classmethod
    def parse(cls, text: str) -> "ValidatorId":
        """Parse ``"c3"`` / ``"a17"`` as produced by ``str()``."""
        if len(text) < 2 or text[0] not in "ca" or not text[1:].isdigit():
            raise ValueError(f"bad validator id {text!r}")
        return cls(Kind.CORE if text[0] == "c" else Kind.AUX, int(text[1:]))


def core(index: int) -> ValidatorId:
    return ValidatorId(Kind.CORE, index)


def aux(index: int) -> ValidatorId:
    return ValidatorId(Kind.AUX, index)


class CommitteeError(ValueError):
    pass


@dataclass(frozen=True)
class Committee:
    """Immutable committee description.

    Stakes are integer units; every threshold is computed over stake so
    weighted committees work unchanged. ``leader_rotation`` is an optional
    permutation of core indices; round ``r`` is led by
    ``leader_rotation[r % n]`` (plain round-robin when omitted).
    """

    core_stakes: tuple[int, ...]
    aux_stakes: tuple[int, ...] = ()
    t_a: int = 0
    aux_inclusion_period: int = 5
    gc_depth: int = 30
    strict_aux_inclusion: bool = True
    leader_rotation: tuple[int, ...] | None = None
    _core_ids: tuple[ValidatorId, ...] = field(init=False, repr=False, compare=False)
    _aux_ids: tuple[ValidatorId, ...] = field(init=False, repr=False, compare=False)
    _stakes: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "core_stakes", tuple(int(s) for s in self.core_stakes))
        object.__setattr__(self, "aux_stakes", tuple(int(s) for s in self.aux_stakes))
        if self.leader_rotation is not None:
            object.__setattr__(self, "leader_rotation", tuple(self.leader_rotation))
        if any(s < 1 for s in self.core_stakes + self.aux_stakes):
            raise CommitteeError("all stakes must be >= 1")
        if self.n_c < 4:
            raise CommitteeError(f"core stake {self.n_c} < 4 cannot tolerate a fault")
        if self.aux_stakes:
            if not 0 < self.t_a <= self.n_a:
                raise CommitteeError(f"t_a={self.t_a} must satisfy 0 < t_a <= n_a={self.n_a}")
        elif self.t_a != 0:
            raise CommitteeError("t_a must be 0 without auxiliary validators")
        if self.aux_inclusion_period < 1:
            raise CommitteeError("aux_inclusion_period must be >= 1")
        if self.gc_depth < self.aux_inclusion_period + 2:
            raise CommitteeError("gc_depth must be >= aux_inclusion_period + 2")
        if self.leader_rotation is not None and sorted(self.leader_rotation) != list(
            range(len(self.core_stakes))
        ):
            raise CommitteeError("leader_rotation must be a permutation of core indices")
        object.__setattr__(
            self, "_core_ids", tuple(ValidatorId(Kind.CORE, i) for i in range(len(self.core_stakes)))
        )
        object.__setattr__(
            self, "_aux_ids", tuple(ValidatorId(Kind.AUX, i) for i in range(len(self.aux_stakes)))
        )
        stakes = dict(zip(self._core_ids, self.core_stakes))
        stakes.update(zip(self._aux_ids, self.aux_stakes))
        object.__setattr__(self, "_stakes", stakes)

    @classmethod
    def uniform(cls, n_core: int, n_aux: int = 0, **kwargs) -> "Committee":
        """Unit-stake committee; ``t_a`` defaults to 10% of aux stake (rounded up)."""
        if n_aux and "t_a" not in kwargs:
            kwargs["t_a"] = max(1, -(-n_aux // 10))
        return cls(core_stakes=(1,) * n_core, aux_stakes=(1,) * n_aux, **kwargs)

    @cached_property
    def n_c(self) -> int:
        return sum(self.core_stakes)

    @cached_property
    def n_a(self) -> int:
        return sum(self.aux_stakes)

    @cached_property
    def n(self) -> int:
        return self.n_c + self.n_a

    @property
    def core_ids(self) -> tuple[ValidatorId, ...]:
        return self._core_ids

    @property
    def aux_ids(self) -> tuple[ValidatorId, ...]:
        return self._aux_ids

    @cached_property
    def f(self) -> int:
        return max_faulty(self)

    @cached_property
    def quorum(self) -> int:
        return quorum_threshold(self)

    @cached_property
    def validity(self) -> int:
        return validity_threshold(self)

    def is_member(self, vid: ValidatorId) -> bool:
        return vid in self._stakes

    def stake(self, vid: ValidatorId) -> int:
        return self._stakes[vid]

    def stake_of(self, ids) -> int:
        """Joint stake of a collection of *distinct* validator ids."""
        return sum(self.stake(v) for v in set(ids))

    def leader_of(self, r: int) -> ValidatorId:
        return leader_of(self, r)

    def is_inclusion_round(self, r: int) -> bool:
        return bool(self.aux_stakes) and r > 0 and r % self.aux_inclusion_period == 0

    # -- config file -------------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "core_stakes": list(self.core_stakes),
            "aux_stakes": list(self.aux_stakes),
            "t_a": self.t_a,
            "aux_inclusion_period": self.aux_inclusion_period,
            "gc_depth": self.gc_depth,
            "strict_aux_inclusion": self.strict_aux_inclusion,
        }
        if self.leader_rotation is not None:
            d["leader_rotation"] = list(self.leader_rotation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Committee":
        known = {
            "core_stakes", "aux_stakes", "t_a", "aux_inclusion_period",
            "gc_depth", "strict_aux_inclusion", "leader_rotation",
        }
        unknown = set(d) - known
        if unknown:
            raise CommitteeError(f"unknown committee keys: {sorted(unknown)}")
        if "core_stakes" not in d:
            raise CommitteeError("committee config needs core_stakes")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "Committee":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def max_faulty(c: Committee) -> int:
    """Largest f with n_c >= 3f + 1."""
    return (c.n_c - 1) // 3


def quorum_threshold(c: Committee) -> int:
    """n_c - f: equals 2f + 1 when n_c = 3f + 1, and keeps any two quorums
    overlapping in more than f stake for every other n_c."""
    return c.n_c - max_faulty(c)


def validity_threshold(c: Committee) -> int:
    return max_faulty(c) + 1


def leader_of(c: Committee, r: int) -> ValidatorId:
    if r < 1:
        raise ValueError("leader slots start at round 1")
    n = len(c.core_stakes)
    idx = c.leader_rotation[r % n] if c.leader_rotation is not None else r % n
    return ValidatorId(Kind.CORE, idx)

