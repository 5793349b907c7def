"""Byzantine behaviours as node subclasses overriding local hooks."""

from __future__ import annotations

import hashlib

from ..aux_node import AuxNode
from ..core_node import CoreNode
from ..messages import CoreVertex
from ..protocol import Send


def _corrupt(sig: bytes) -> bytes:
    return bytes(b ^ 0xFF for b in sig[:1]) + sig[1:] if sig else b"\x00"


def _marker(me, peer, r: int) -> bytes:
    return hashlib.blake2b(f"equivocate/{me}/{peer}/{r}".encode(), digest_size=32).digest()


class EquivocatorCore(CoreNode):
    """Sends every peer its own version of each vertex.

    Each variant carries a peer-specific marker transaction, so no two peers
    see the same digest. The node itself builds on the unmarked original.
    """

    strategy = "equivocator"

    def _broadcast_vertex(self, v: CoreVertex) -> None:
        for peer in self.core_peers:
            u = CoreVertex(
                v.author,
                v.round,
                v.core_parents,
                v.aux_parents,
                v.payload + (_marker(self.me, peer, v.round),),
            )
            self._send(peer, u.with_signature(self.signer(u.body)))
        self.metrics["equivocations_sent"] += len(self.core_peers)


class WithholderCore(CoreNode):
    """Creates vertices but never pushes its own to anyone."""

    strategy = "withholder"

    def _broadcast_vertex(self, v: CoreVertex) -> None:
        self.metrics["withheld"] += 1

    def _flush_gossip(self) -> None:
        self.gossip_queue = [x for x in self.gossip_queue if x.author != self.me]
        super()._flush_gossip()


class _Mute:
    strategy = "mute"

    def _outgoing(self, fx: list) -> list:
        kept = [e for e in fx if not isinstance(e, Send)]
        self.metrics["muted"] += len(fx) - len(kept)
        return kept


class _BadSigner:
    strategy = "bad_signer"

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        honest = self.signer
        self.signer = lambda msg: _corrupt(honest(msg))


class MuteCore(_Mute, CoreNode):
    pass


class BadSignerCore(_BadSigner, CoreNode):
    pass


class MuteAux(_Mute, AuxNode):
    pass


class BadSignerAux(_BadSigner, AuxNode):
    pass


CORE_STRATEGIES = {
    "equivocator": EquivocatorCore,
    "withholder": WithholderCore,
    "mute": MuteCore,
    "bad_signer": BadSignerCore,
}
AUX_STRATEGIES = {
    "mute": MuteAux,
    "bad_signer": BadSignerAux,
}
