"""Network messages and handler effects shared by core and aux nodes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple

from .committee import ValidatorId
from .messages import AuxCertificate, AuxProposal, CoreVertex, Digest


class CounterSig(NamedTuple):
    proposal_digest: Digest
    signer: ValidatorId
    signature: bytes


class FetchRequest(NamedTuple):
    digests: tuple[Digest, ...]
    # responder may add ancestors at or above this round
    floor_round: int = 1 << 62


class FetchResponse(NamedTuple):
    values: tuple


class GossipBatch(NamedTuple):
    """Core-to-aux stream of newly accepted vertices and certificates."""

    values: tuple


class Send(NamedTuple):
    dst: ValidatorId
    msg: Any


class SetTimer(NamedTuple):
    at: int
    tag: tuple


class CommitBatch(NamedTuple):
    """Newly committed values in output order, with the committed leaders."""

    entries: tuple
    leaders: tuple[Digest, ...]
    values: tuple = ()
    # per leader: authors of the aux certificates it references
    leader_aux_authors: tuple = ()


MESSAGE_TYPES = (CoreVertex, AuxProposal, AuxCertificate, CounterSig, FetchRequest, FetchResponse, GossipBatch)


@dataclass
class NodeConfig:
    """Per-node tunables; times in microseconds."""

    timeout: int = 225_000
    max_timeout_doublings: int = 3
    fetch_delay: int = 100_000
    sync_interval: int = 300_000
    fetch_batch: int = 64
    fetch_fill_batches: int = 4
    fetch_aux_targets: int = 1
    pending_limit: int = 10_000
    stash_limit: int = 4_096
    max_payload: int = 512
    max_aux_parents: int = 128
    gossip_interval: int = 100_000
    aux_pacing: int = 2_000_000
