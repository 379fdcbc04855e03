import random

import pytest

from pmipflow.core import (
    AaaRequestBody,
    AaaResponseBody,
    BindingStatus,
    InterfaceId,
    LinkAddr,
    LinkCapability,
    MalformedMessage,
    MessageKind,
    MihCapabilityDiscoverReqBody,
    MihCapabilityDiscoverRespBody,
    MihEventSubscribeConfirmBody,
    MihEventSubscribeReqBody,
    MihLinkDownBody,
    MihLinkUpBody,
    MihRegisterAckBody,
    MihRegisterBody,
    NeighborAdvertisementBody,
    NeighborSolicitationBody,
    PbaBody,
    PbuBody,
    Prefix,
    ProtocolMessage,
    RouterAdvertisementBody,
    decode,
    encode,
)

IFACE = InterfaceId(bytes([0x02, 0x1B, 0x63, 0xFF, 0xFE, 0xAA, 0xBB, 0xCC]))
ADDR = LinkAddr.parse("00:1b:63:aa:bb:cc")
HNP = (Prefix.parse("2001:db8:0:1::/64"),)


def _rand_string(rng):
    alphabet = "abcdefghijklmnop-._@0123456789" + "é世"
    return "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 12)))


def _rand_prefix(rng):
    length = rng.choice([0, 48, 64, 64, 64, 96, 128])
    raw = rng.getrandbits(128)
    if length < 128:
        raw &= ~((1 << (128 - length)) - 1)
    return Prefix(raw.to_bytes(16, "big"), length)


def _rand_addr(rng):
    return LinkAddr(bytes(rng.randrange(256) for _ in range(6)))


def _rand_iface(rng):
    return InterfaceId(bytes(rng.randrange(256) for _ in range(8)))


def _rand_hnp(rng):
    return tuple(_rand_prefix(rng) for _ in range(rng.randrange(0, 4)))


def _rand_body(rng, kind):
    if kind is MessageKind.PBU:
        return PbuBody(_rand_string(rng), _rand_iface(rng), _rand_hnp(rng),
                       rng.randrange(1 << 32), rng.randrange(1 << 16))
    if kind is MessageKind.PBA:
        return PbaBody(_rand_string(rng), _rand_iface(rng), _rand_hnp(rng),
                       rng.randrange(1 << 32), rng.randrange(1 << 16),
                       rng.choice(list(BindingStatus)))
    if kind is MessageKind.ROUTER_ADVERTISEMENT:
        return RouterAdvertisementBody(_rand_addr(rng), _rand_hnp(rng))
    if kind is MessageKind.NEIGHBOR_SOLICITATION:
        return NeighborSolicitationBody(_rand_addr(rng))
    if kind is MessageKind.NEIGHBOR_ADVERTISEMENT:
        return NeighborAdvertisementBody(_rand_addr(rng))
    if kind is MessageKind.MIH_REGISTER:
        return MihRegisterBody(_rand_string(rng))
    if kind is MessageKind.MIH_REGISTER_ACK:
        return MihRegisterAckBody(_rand_string(rng), rng.randrange(2))
    if kind is MessageKind.MIH_CAPABILITY_DISCOVER_REQ:
        return MihCapabilityDiscoverReqBody()
    if kind is MessageKind.MIH_CAPABILITY_DISCOVER_RESP:
        caps = tuple(
            LinkCapability(_rand_string(rng), rng.choice(["wifi", "3g", "femto"]),
                           tuple(sorted({rng.randrange(1, 5) for _ in range(rng.randrange(3))})))
            for _ in range(rng.randrange(0, 3))
        )
        return MihCapabilityDiscoverRespBody(caps)
    if kind is MessageKind.MIH_EVENT_SUBSCRIBE_REQ:
        return MihEventSubscribeReqBody(
            _rand_string(rng),
            tuple(sorted({rng.randrange(1, 5) for _ in range(rng.randrange(1, 4))})),
        )
    if kind is MessageKind.MIH_EVENT_SUBSCRIBE_CONFIRM:
        return MihEventSubscribeConfirmBody(_rand_string(rng), rng.randrange(1, 5), rng.randrange(2))
    if kind is MessageKind.MIH_LINK_UP:
        return MihLinkUpBody(_rand_string(rng), _rand_addr(rng))
    if kind is MessageKind.MIH_LINK_DOWN:
        return MihLinkDownBody(_rand_string(rng), _rand_addr(rng))
    if kind is MessageKind.AAA_REQUEST:
        return AaaRequestBody(_rand_iface(rng))
    if kind is MessageKind.AAA_RESPONSE:
        return AaaResponseBody(_rand_iface(rng), rng.random() < 0.5,
                               _rand_string(rng), _rand_hnp(rng))
    raise AssertionError(kind)


def _rand_message(rng):
    kind = rng.choice(list(MessageKind))
    return ProtocolMessage(kind, _rand_body(rng, kind), _rand_string(rng),
                           _rand_string(rng), rng.randrange(1 << 40))


def test_roundtrip_randomized_all_kinds():
    rng = random.Random(90125)
    seen = set()
    for _ in range(1000):
        msg = _rand_message(rng)
        seen.add(msg.kind)
        data = encode(msg)
        assert decode(data) == msg
    assert seen == set(MessageKind)


def test_known_pbu_byte_layout():
    # assembled by hand from the layout rules: tag, 16-bit body length,
    # body fields in declaration order, then src/dst strings and a 64-bit
    # send timestamp, everything big-endian
    msg = ProtocolMessage(
        MessageKind.PBU,
        PbuBody("mn1", IFACE, HNP, lifetime=300, sequence=7),
        src="mag1",
        dst="lma",
        sent_at=1000,
    )
    want = (
        "010025"
        "00036d6e31"
        "021b63fffeaabbcc"
        "0120010db800000001000000000000000040"
        "0000012c"
        "0007"
        "00046d616731"
        "00036c6d61"
        "00000000000003e8"
    )
    data = encode(msg)
    assert data.hex() == want
    assert len(data) == 59
    assert decode(data) == msg


def test_every_truncation_is_malformed():
    rng = random.Random(11)
    for kind in MessageKind:
        msg = ProtocolMessage(kind, _rand_body(rng, kind), "src-node", "dst-node", 123456)
        data = encode(msg)
        for cut in range(len(data)):
            with pytest.raises(MalformedMessage):
                decode(data[:cut])


def test_trailing_garbage_rejected():
    msg = ProtocolMessage.make(NeighborSolicitationBody(ADDR), "mag1", "mn1", 5)
    data = encode(msg)
    with pytest.raises(MalformedMessage):
        decode(data + b"\x00")


def test_unknown_kind_and_status_rejected():
    msg = ProtocolMessage.make(MihRegisterBody("mag1"), "mag1", "mihf1", 5)
    data = bytearray(encode(msg))
    for bad in (0, 16, 255):
        data[0] = bad
        with pytest.raises(MalformedMessage):
            decode(bytes(data))

    pba = ProtocolMessage.make(
        PbaBody("mn1", IFACE, HNP, 300, 7, BindingStatus.SUCCESS), "lma", "mag1", 9
    )
    raw = bytearray(encode(pba))
    body_len = int.from_bytes(raw[1:3], "big")
    raw[3 + body_len - 1] = 99  # status byte is last in the body
    with pytest.raises(MalformedMessage):
        decode(bytes(raw))


def test_body_kind_mismatch_rejected():
    with pytest.raises(TypeError):
        ProtocolMessage(MessageKind.PBU, MihRegisterBody("x"), "a", "b", 0)


def test_nonzero_host_bits_rejected_on_decode():
    msg = ProtocolMessage.make(
        RouterAdvertisementBody(ADDR, HNP), "mag1", "mn1", 77
    )
    raw = bytearray(encode(msg))
    # corrupt the last byte of the prefix address (host part of a /64)
    # prefix field sits at: tag(1)+len(2)+dest(6)+count(1) then 16 addr bytes
    raw[3 + 6 + 1 + 15] = 0x01
    with pytest.raises(MalformedMessage):
        decode(bytes(raw))
