"""DAG value types and their canonical byte encoding.

Layout (all integers big-endian)::

    validator id   u8 kind | u32 index
    digest         32 raw bytes
    list           u32 count | items
    bytes          u32 length | raw

    core vertex    0x01 | author | u64 round | list<digest> core_parents
                   | list<u64 ref_round | digest> aux_parents | list<digest> payload
                   | bytes signature
    aux proposal   0x02 | author | u64 ref_round | list<digest> core_refs
                   | list<digest> payload | bytes signature
    aux cert       0x03 | bytes <aux proposal encoding>
                   | list<validator id | bytes signature> counter_sigs

A value's digest is SHA-256 of its full encoding (signature included). A
certificate is keyed by the digest of its proposal. Signatures cover the
encoding up to (not including) the signature field.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Union

from .committee import Kind, ValidatorId

Digest = bytes
DIGEST_SIZE = 32

TAG_CORE = 0x01
TAG_PROPOSAL = 0x02
TAG_CERT = 0x03
COUNTER_SIG_DOMAIN = b"\x04obelia/counter-sig"

_u32 = struct.Struct(">I")
_u64 = struct.Struct(">Q")
_vid = struct.Struct(">BI")


class DecodeError(ValueError):
    pass


class AuxRef(NamedTuple):
    """Weak link from a core vertex to an auxiliary certificate."""

    digest: Digest
    ref_round: int

    @property
    def round(self) -> int:
        return self.ref_round + 1


def _enc_vid(v: ValidatorId) -> bytes:
    return _vid.pack(int(v.kind), v.index)


def _enc_digests(ds) -> bytes:
    return _u32.pack(len(ds)) + b"".join(ds)


def _enc_bytes(b: bytes) -> bytes:
    return _u32.pack(len(b)) + b


def short(d: Digest) -> str:
    return d.hex()[:8]


@dataclass(frozen=True, slots=True, eq=False)
class CoreVertex:
    author: ValidatorId
    round: int
    core_parents: tuple[Digest, ...] = ()
    aux_parents: tuple[AuxRef, ...] = ()
    payload: tuple[Digest, ...] = ()
    signature: bytes = b""
    body: bytes = field(init=False, repr=False)
    digest: Digest = field(init=False, repr=False)
    parent_set: frozenset = field(init=False, repr=False)

    def __post_init__(self) -> None:
        body = b"".join(
            (
                bytes((TAG_CORE,)),
                _enc_vid(self.author),
                _u64.pack(self.round),
                _enc_digests(self.core_parents),
                _u32.pack(len(self.aux_parents)),
                b"".join(_u64.pack(a.ref_round) + a.digest for a in self.aux_parents),
                _enc_digests(self.payload),
            )
        )
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "digest", hashlib.sha256(body + _enc_bytes(self.signature)).digest())
        object.__setattr__(self, "parent_set", frozenset(self.core_parents))

    def __eq__(self, other) -> bool:
        return isinstance(other, CoreVertex) and other.digest == self.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def __repr__(self) -> str:
        return f"v({self.author},{self.round})#{short(self.digest)}"

    @property
    def is_genesis(self) -> bool:
        return self.round == 0

    def encode(self) -> bytes:
        return self.body + _enc_bytes(self.signature)

    def with_signature(self, signature: bytes) -> "CoreVertex":
        return CoreVertex(
            self.author, self.round, self.core_parents, self.aux_parents, self.payload, signature
        )


@dataclass(frozen=True, slots=True, eq=False)
class AuxProposal:
    author: ValidatorId
    ref_round: int
    core_refs: tuple[Digest, ...] = ()
    payload: tuple[Digest, ...] = ()
    signature: bytes = b""
    body: bytes = field(init=False, repr=False)
    digest: Digest = field(init=False, repr=False)

    def __post_init__(self) -> None:
        body = b"".join(
            (
                bytes((TAG_PROPOSAL,)),
                _enc_vid(self.author),
                _u64.pack(self.ref_round),
                _enc_digests(self.core_refs),
                _enc_digests(self.payload),
            )
        )
        object.__setattr__(self, "body", body)
        object.__setattr__(self, "digest", hashlib.sha256(body + _enc_bytes(self.signature)).digest())

    def __eq__(self, other) -> bool:
        return isinstance(other, AuxProposal) and other.digest == self.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    def __repr__(self) -> str:
        return f"p({self.author},{self.round})#{short(self.digest)}"

    @property
    def round(self) -> int:
        return self.ref_round + 1

    def encode(self) -> bytes:
        return self.body + _enc_bytes(self.signature)

    def with_signature(self, signature: bytes) -> "AuxProposal":
        return AuxProposal(self.author, self.ref_round, self.core_refs, self.payload, signature)


def counter_sig_message(proposal_digest: Digest) -> bytes:
    return COUNTER_SIG_DOMAIN + proposal_digest


@dataclass(frozen=True, slots=True, eq=False)
class AuxCertificate:
    """An auxiliary proposal plus its core counter-signatures (the auxiliary vertex)."""

    proposal: AuxProposal
    counter_sigs: tuple[tuple[ValidatorId, bytes], ...] = ()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AuxCertificate)
            and other.proposal.digest == self.proposal.digest
            and other.counter_sigs == self.counter_sigs
        )

    def __hash__(self) -> int:
        return hash(self.proposal.digest)

    def __repr__(self) -> str:
        return f"va({self.author},{self.round})#{short(self.digest)}"

    @property
    def digest(self) -> Digest:
        return self.proposal.digest

    @property
    def author(self) -> ValidatorId:
        return self.proposal.author

    @property
    def round(self) -> int:
        return self.proposal.round

    @property
    def ref_round(self) -> int:
        return self.proposal.ref_round

    @property
    def payload(self) -> tuple[Digest, ...]:
        return self.proposal.payload

    @property
    def ref(self) -> AuxRef:
        return AuxRef(self.proposal.digest, self.proposal.ref_round)

    def signers(self) -> list[ValidatorId]:
        return [s for s, _ in self.counter_sigs]

    def encode(self) -> bytes:
        sigs = b"".join(_enc_vid(s) + _enc_bytes(sig) for s, sig in self.counter_sigs)
        return (
            bytes((TAG_CERT,))
            + _enc_bytes(self.proposal.encode())
            + _u32.pack(len(self.counter_sigs))
            + sigs
        )


DagValue = Union[CoreVertex, AuxProposal, AuxCertificate]


# -- decoding ---------------------------------------------------------------


class _Reader:
    __slots__ = ("buf", "pos")

    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.buf):
            raise DecodeError("truncated input")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _u32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _u64.unpack(self.take(8))[0]

    def vid(self) -> ValidatorId:
        kind, index = _vid.unpack(self.take(5))
        if kind not in (0, 1):
            raise DecodeError(f"bad validator kind {kind}")
        return ValidatorId(Kind(kind), index)

    def count(self, item_size: int) -> int:
        n = self.u32()
        if n * item_size > len(self.buf) - self.pos:
            raise DecodeError("list longer than input")
        return n

    def digests(self) -> tuple[Digest, ...]:
        n = self.count(DIGEST_SIZE)
        return tuple(self.take(DIGEST_SIZE) for _ in range(n))

    def blob(self) -> bytes:
        return self.take(self.u32())

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise DecodeError("trailing bytes")


def _decode_proposal(r: _Reader) -> AuxProposal:
    author = r.vid()
    ref_round = r.u64()
    refs = r.digests()
    payload = r.digests()
    sig = r.blob()
    return AuxProposal(author, ref_round, refs, payload, sig)


def decode(buf: bytes) -> DagValue:
    """Decode a canonical encoding; raises DecodeError on malformed input."""
    r = _Reader(bytes(buf))
    tag = r.u8()
    if tag == TAG_CORE:
        author = r.vid()
        rnd = r.u64()
        parents = r.digests()
        n_aux = r.count(8 + DIGEST_SIZE)
        aux_parents = []
        for _ in range(n_aux):
            ref_round = r.u64()
            aux_parents.append(AuxRef(r.take(DIGEST_SIZE), ref_round))
        aux_parents = tuple(aux_parents)
        payload = r.digests()
        sig = r.blob()
        r.done()
        return CoreVertex(author, rnd, parents, aux_parents, payload, sig)
    if tag == TAG_PROPOSAL:
        p = _decode_proposal(r)
        r.done()
        return p
    if tag == TAG_CERT:
        inner = _Reader(r.blob())
        if inner.u8() != TAG_PROPOSAL:
            raise DecodeError("certificate must embed a proposal")
        p = _decode_proposal(inner)
        inner.done()
        n = r.count(9)
        sigs = tuple((r.vid(), r.blob()) for _ in range(n))
        r.done()
        return AuxCertificate(p, sigs)
    raise DecodeError(f"unknown tag {tag:#x}")
