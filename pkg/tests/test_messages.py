import pytest
from hypothesis import given
from hypothesis import strategies as st

from obelia.committee import aux, core
from obelia.crypto import Ed25519Scheme, MockScheme, make_scheme, signer_for
from obelia.messages import (
    AuxCertificate,
    AuxProposal,
    AuxRef,
    CoreVertex,
    DecodeError,
    counter_sig_message,
    decode,
)

digests = st.binary(min_size=32, max_size=32)
small = st.integers(0, 2**40)


@given(
    st.integers(0, 50),
    small,
    st.lists(digests, max_size=6),
    st.lists(st.tuples(digests, small), max_size=4),
    st.lists(digests, max_size=5),
    st.binary(max_size=80),
)
def test_core_vertex_round_trip(i, r, parents, refs, payload, sig):
    v = CoreVertex(core(i), r, tuple(parents), tuple(AuxRef(d, rr) for d, rr in refs), tuple(payload), sig)
    back = decode(v.encode())
    assert back == v and back.digest == v.digest
    assert back.aux_parents == v.aux_parents and back.signature == sig


@given(st.integers(0, 500), small, st.lists(digests, max_size=6), st.lists(digests, max_size=5), st.binary(max_size=80))
def test_proposal_and_certificate_round_trip(a, rr, refs, payload, sig):
    p = AuxProposal(aux(a), rr, tuple(refs), tuple(payload), sig)
    assert decode(p.encode()) == p
    cert = AuxCertificate(p, ((core(0), b"\x01" * 32), (core(2), b"\x02" * 32)))
    back = decode(cert.encode())
    assert back == cert and back.digest == p.digest


def test_digest_covers_signature_and_body():
    v = CoreVertex(core(1), 3, (b"\x00" * 32,))
    assert v.with_signature(b"a").digest != v.with_signature(b"b").digest
    assert v.with_signature(b"a").body == v.body
    assert CoreVertex(core(1), 4, (b"\x00" * 32,)).digest != v.digest


@pytest.mark.parametrize(
    "raw",
    [
        b"",
        b"\x09",
        b"\x01\x00",
        CoreVertex(core(0), 1, (b"\x00" * 32,)).encode()[:-1],
        CoreVertex(core(0), 1).encode() + b"\x00",
        b"\x01\x07\x00\x00\x00\x00" + b"\x00" * 8,
        b"\x01\x00\x00\x00\x00\x00" + b"\x00" * 8 + b"\xff\xff\xff\xff",
        b"\x03\x00\x00\x00\x01\x01",
    ],
)
def test_malformed_input_raises_decode_error(raw):
    with pytest.raises(DecodeError):
        decode(raw)


def test_mock_scheme_is_deterministic_and_checks_signer():
    s = MockScheme(b"k")
    msg = counter_sig_message(b"\x11" * 32)
    assert s.sign(core(1), msg) == MockScheme(b"k").sign(core(1), msg)
    assert s.verify(core(1), msg, s.sign(core(1), msg))
    assert not s.verify(core(2), msg, s.sign(core(1), msg))
    assert not s.verify(core(1), msg + b"x", s.sign(core(1), msg))


def test_counter_signature_does_not_replay_across_proposals():
    s = MockScheme(b"k")
    sig = signer_for(s, core(1))(counter_sig_message(b"\x01" * 32))
    assert s.verify(core(1), counter_sig_message(b"\x01" * 32), sig)
    assert not s.verify(core(1), counter_sig_message(b"\x02" * 32), sig)


def test_ed25519_scheme():
    s = make_scheme("ed25519", b"seed")
    assert isinstance(s, Ed25519Scheme)
    sig = s.sign(aux(3), b"hello")
    assert len(sig) == 64 and s.verify(aux(3), b"hello", sig)
    assert not s.verify(aux(4), b"hello", sig)
    assert not s.verify(aux(3), b"hellO", sig)
    assert not s.verify(aux(3), b"hello", b"short")
