"""Signature schemes: a deterministic mock for simulation and Ed25519."""

from __future__ import annotations

import functools
import hashlib
import hmac
from typing import Protocol

from .committee import ValidatorId


class SignatureScheme(Protocol):
    def sign(self, signer: ValidatorId, message: bytes) -> bytes: ...

    def verify(self, signer: ValidatorId, message: bytes, signature: bytes) -> bool: ...


def _key_material(seed: bytes, signer: ValidatorId) -> bytes:
    return hashlib.sha256(b"obelia/key" + seed + bytes((int(signer.kind),)) + signer.index.to_bytes(4, "big")).digest()


class MockScheme:
    """Signature = keyed BLAKE2b tag of the message, bound to the signer id.

    Deterministic: the same (signer, message) always yields the same bytes.
    Nodes only receive a signer bound to their own id (see ``signer_for``);
    ``forge`` exists for fault-injection hooks and nothing else.
    """

    name = "mock"

    def __init__(self, seed: bytes = b"", cache_size: int = 1 << 16):
        self._seed = seed
        self._keys: dict[ValidatorId, bytes] = {}
        # verification is a pure function; simulated nodes share the memo
        self._check = functools.lru_cache(maxsize=cache_size)(self._verify)

    def _key(self, signer: ValidatorId) -> bytes:
        k = self._keys.get(signer)
        if k is None:
            k = self._keys[signer] = _key_material(self._seed, signer)
        return k

    def sign(self, signer: ValidatorId, message: bytes) -> bytes:
        return hashlib.blake2b(message, key=self._key(signer), digest_size=32).digest()

    def _verify(self, signer: ValidatorId, message: bytes, signature: bytes) -> bool:
        return hmac.compare_digest(self.sign(signer, message), signature)

    def verify(self, signer: ValidatorId, message: bytes, signature: bytes) -> bool:
        return self._check(signer, message, signature)

    def forge(self, signer: ValidatorId, message: bytes) -> bytes:
        return self.sign(signer, message)


class Ed25519Scheme:
    """Ed25519 with keys derived deterministically from a seed (test setups)."""

    name = "ed25519"

    def __init__(self, seed: bytes = b""):
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

        self._seed = seed
        self._new = Ed25519PrivateKey.from_private_bytes
        self._private = {}
        self._public = {}

    def _priv(self, signer: ValidatorId):
        k = self._private.get(signer)
        if k is None:
            k = self._private[signer] = self._new(_key_material(self._seed, signer))
            self._public[signer] = k.public_key()
        return k

    def sign(self, signer: ValidatorId, message: bytes) -> bytes:
        return self._priv(signer).sign(message)

    def verify(self, signer: ValidatorId, message: bytes, signature: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature

        self._priv(signer)
        try:
            self._public[signer].verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


def signer_for(scheme: SignatureScheme, me: ValidatorId):
    """A signing callable restricted to one identity."""

    def sign(message: bytes) -> bytes:
        return scheme.sign(me, message)

    return sign


def make_scheme(name: str, seed: bytes = b"") -> SignatureScheme:
    if name == "mock":
        return MockScheme(seed)
    if name == "ed25519":
        return Ed25519Scheme(seed)
    raise ValueError(f"unknown signature scheme {name!r}")
