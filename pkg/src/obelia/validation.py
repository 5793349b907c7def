"""Validity predicates, counter-signing, certificate assembly and creation rules."""

from __future__ import annotations

from collections import deque
from enum import Enum
from typing import Callable, Iterable

from .committee import Committee, Kind, ValidatorId
from .crypto import SignatureScheme
from .dag import DagState
from .messages import AuxCertificate, AuxProposal, AuxRef, CoreVertex, Digest, counter_sig_message

Signer = Callable[[bytes], bytes]

DEFAULT_MAX_PAYLOAD = 512
DEFAULT_MAX_AUX_PARENTS = 128


class Reason(str, Enum):
    BAD_SIG = "BadSig"
    BAD_AUTHOR = "BadAuthor"
    BAD_PARENTS = "BadParents"
    STALE_ROUND = "StaleRound"
    INSUFFICIENT_AUX_STAKE = "InsufficientAuxStake"
    MISSING_ANCESTOR = "MissingAncestor"
    BAD_CERTIFICATE = "BadCertificate"


class InsufficientSignatures(Exception):
    def __init__(self, valid_stake: int):
        self.valid_stake = valid_stake
        super().__init__(f"valid counter-signature stake {valid_stake} below quorum")


def genesis_vertices(c: Committee) -> list[CoreVertex]:
    return [CoreVertex(vid, 0) for vid in c.core_ids]


class Mempool:
    """FIFO of transaction digests; each digest is handed out at most once."""

    def __init__(self) -> None:
        self._queue: deque[Digest] = deque()
        self._seen: set[Digest] = set()

    def __len__(self) -> int:
        return len(self._queue)

    def add(self, tx: Digest) -> bool:
        if tx in self._seen:
            return False
        self._seen.add(tx)
        self._queue.append(tx)
        return True

    def extend(self, txs: Iterable[Digest]) -> int:
        return sum(self.add(tx) for tx in txs)

    def drain(self, limit: int) -> tuple[Digest, ...]:
        q = self._queue
        n = min(limit, len(q))
        return tuple(q.popleft() for _ in range(n))

    def forget(self, txs: Iterable[Digest]) -> None:
        """Mark transactions as already sequenced elsewhere."""
        for tx in txs:
            self._seen.add(tx)


# -- predicates ----------------------------------------------------------------


def core_vertex_rejection(
    v: CoreVertex, d: DagState, c: Committee, scheme: SignatureScheme
) -> Reason | None:
    """Why ``v`` is invalid against ``d``, or None when it is valid."""
    a = v.author
    if a.kind != Kind.CORE or not c.is_member(a):
        return Reason.BAD_AUTHOR
    if v.round == 0:
        ok = not (v.core_parents or v.aux_parents or v.payload or v.signature)
        return None if ok else Reason.BAD_PARENTS
    if v.round <= d.gc_round:
        return Reason.STALE_ROUND
    if not scheme.verify(a, v.body, v.signature):
        return Reason.BAD_SIG
    authors = set()
    core = d.core
    for p in v.core_parents:
        pv = core.get(p)
        if pv is None:
            return Reason.MISSING_ANCESTOR
        if pv.round != v.round - 1 or pv.author in authors:
            return Reason.BAD_PARENTS
        authors.add(pv.author)
    if sum(c.stake(x) for x in authors) < c.quorum:
        return Reason.BAD_PARENTS
    if v.aux_parents:
        seen = set()
        aux_authors = set()
        oldest = v.round - c.gc_depth
        for ref in v.aux_parents:
            if ref.digest in seen:
                return Reason.BAD_PARENTS
            seen.add(ref.digest)
            if ref.ref_round < oldest or ref.ref_round >= v.round:
                return Reason.STALE_ROUND
            cert = d.aux.get(ref.digest)
            if cert is None:
                if ref.ref_round >= d.gc_round:
                    return Reason.MISSING_ANCESTOR
                continue
            if cert.ref_round != ref.ref_round:
                return Reason.BAD_PARENTS
            aux_authors.add(cert.author)
    else:
        aux_authors = ()
    if c.strict_aux_inclusion and c.is_inclusion_round(v.round) and a == c.leader_of(v.round):
        if sum(c.stake(x) for x in aux_authors) < c.t_a:
            return Reason.INSUFFICIENT_AUX_STAKE
    return None


def valid_core_vertex(v: CoreVertex, d: DagState, c: Committee, scheme: SignatureScheme) -> bool:
    return core_vertex_rejection(v, d, c, scheme) is None


def aux_proposal_rejection(
    p: AuxProposal, d: DagState, c: Committee, scheme: SignatureScheme
) -> Reason | None:
    if p.author.kind != Kind.AUX or not c.is_member(p.author):
        return Reason.BAD_AUTHOR
    if p.ref_round < d.gc_round:
        return Reason.STALE_ROUND
    if not scheme.verify(p.author, p.body, p.signature):
        return Reason.BAD_SIG
    authors = set()
    for ref in p.core_refs:
        v = d.core.get(ref)
        if v is None:
            return Reason.MISSING_ANCESTOR
        if v.round != p.ref_round or v.author in authors:
            return Reason.BAD_PARENTS
        authors.add(v.author)
    if sum(c.stake(x) for x in authors) < c.quorum:
        return Reason.BAD_PARENTS
    return None


def valid_aux_proposal(p: AuxProposal, d: DagState, c: Committee, scheme: SignatureScheme) -> bool:
    return aux_proposal_rejection(p, d, c, scheme) is None


def counter_sign(p: AuxProposal, signer: Signer) -> bytes:
    """Counter-signature over the proposal digest (domain separated)."""
    return signer(counter_sig_message(p.digest))


def _valid_signers(
    p: AuxProposal, sigs: Iterable[tuple[ValidatorId, bytes]], c: Committee, scheme: SignatureScheme
) -> dict[ValidatorId, bytes]:
    msg = counter_sig_message(p.digest)
    good: dict[ValidatorId, bytes] = {}
    for signer, sig in sigs:
        if signer in good or signer.kind != Kind.CORE or not c.is_member(signer):
            continue
        if scheme.verify(signer, msg, sig):
            good[signer] = sig
    return good


def assemble_certificate(
    p: AuxProposal,
    sigs: Iterable[tuple[ValidatorId, bytes]],
    c: Committee,
    scheme: SignatureScheme,
) -> AuxCertificate:
    """Certificate over the lowest-id valid signers that reach quorum."""
    good = _valid_signers(p, sigs, c, scheme)
    chosen = []
    stake = 0
    for signer in sorted(good):
        chosen.append((signer, good[signer]))
        stake += c.stake(signer)
        if stake >= c.quorum:
            return AuxCertificate(p, tuple(chosen))
    raise InsufficientSignatures(stake)


def aux_vertex_rejection(
    cert: AuxCertificate, d: DagState, c: Committee, scheme: SignatureScheme
) -> Reason | None:
    reason = aux_proposal_rejection(cert.proposal, d, c, scheme)
    if reason is not None:
        return reason
    # a repeated signer is counted once; any unverifiable entry voids the cert
    good = _valid_signers(cert.proposal, cert.counter_sigs, c, scheme)
    if len(good) != len({s for s, _ in cert.counter_sigs}):
        return Reason.BAD_CERTIFICATE
    if sum(c.stake(s) for s in good) < c.quorum:
        return Reason.BAD_CERTIFICATE
    return None


def valid_aux_vertex(cert: AuxCertificate, d: DagState, c: Committee, scheme: SignatureScheme) -> bool:
    return aux_vertex_rejection(cert, d, c, scheme) is None


# -- creation rules -----------------------------------------------------------


def _aux_order(cert: AuxCertificate):
    return (cert.round, cert.author, cert.digest)


def select_aux_parents(
    pending: Iterable[AuxCertificate], d: DagState, c: Committee, r: int, limit: int = DEFAULT_MAX_AUX_PARENTS
) -> tuple[list[AuxCertificate], int]:
    """Pending certificates a round-``r`` leader may reference, oldest first.

    Returns the chosen certificates and their joint (distinct-author) stake.
    """
    oldest = max(d.gc_round, r - c.gc_depth)
    usable = sorted(
        (x for x in pending if oldest <= x.ref_round < r and x.digest in d.aux), key=_aux_order
    )[:limit]
    stake = sum(c.stake(a) for a in {x.author for x in usable})
    return usable, stake


def try_new_core_vertex(
    T: Mempool,
    d: DagState,
    c: Committee,
    me: ValidatorId,
    r: int,
    aux_pending: Iterable[AuxCertificate],
    signer: Signer,
    *,
    timed_out: bool = False,
    max_payload: int = DEFAULT_MAX_PAYLOAD,
    max_aux_parents: int = DEFAULT_MAX_AUX_PARENTS,
) -> CoreVertex | None:
    """Build this node's round-``r`` vertex, or None when not ready.

    Not ready means: round ``r-1`` lacks quorum stake; the round-``r-1``
    leader is absent and ``timed_out`` is false; or (strict mode) ``me``
    leads an inclusion round and pending certificates carry < t_a stake.
    """
    prev = d.first_seen_vertices(r - 1)
    if sum(c.stake(v.author) for v in prev) < c.quorum:
        return None
    if r - 1 >= 1 and not timed_out and d.slot(c.leader_of(r - 1), r - 1) is None:
        return None
    aux_refs: tuple[AuxRef, ...] = ()
    if c.is_inclusion_round(r) and me == c.leader_of(r):
        chosen, stake = select_aux_parents(aux_pending, d, c, r, max_aux_parents)
        if c.strict_aux_inclusion and stake < c.t_a:
            return None
        aux_refs = tuple(x.ref for x in chosen)
    unsigned = CoreVertex(
        me, r, tuple(v.digest for v in prev), aux_refs, T.drain(max_payload)
    )
    return unsigned.with_signature(signer(unsigned.body))


def try_new_proposal(
    T: Mempool,
    d: DagState,
    c: Committee,
    me: ValidatorId,
    now: int,
    signer: Signer,
    *,
    last_proposal_time: int | None = None,
    pacing: int = 2_000_000,
    max_payload: int = DEFAULT_MAX_PAYLOAD,
) -> AuxProposal | None:
    """Proposal over the highest round with quorum stake of known vertices.

    ``now``, ``last_proposal_time`` and ``pacing`` are in the same time
    unit (microseconds in the simulator).
    """
    if last_proposal_time is not None and now - last_proposal_time < pacing:
        return None
    # genesis is common knowledge; proposing over it certifies nothing
    horizon = max(1, d.gc_round, d.max_round - c.gc_depth)
    for r in range(d.max_round, horizon - 1, -1):
        vs = d.first_seen_vertices(r)
        if sum(c.stake(v.author) for v in vs) >= c.quorum:
            unsigned = AuxProposal(me, r, tuple(v.digest for v in vs), T.drain(max_payload))
            return unsigned.with_signature(signer(unsigned.body))
    return None
