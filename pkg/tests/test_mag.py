"""Gateway behavior against a real anchor and broker on a synchronous bus."""
import random

from fakes import FakeBus, make_knobs
from pmipflow.core import (
    AaaRequestBody,
    AaaResponseBody,
    LinkAddr,
    LinkCapability,
    MessageKind,
    NeighborAdvertisementBody,
    Prefix,
    ProtocolMessage,
    eui64_from_link_addr,
)
from pmipflow.lma import LocalMobilityAnchor, PinnedPolicy
from pmipflow.mag import MobileAccessGateway
from pmipflow.mih import LinkSap, Mihf

ADDR1 = LinkAddr.parse("00:1b:63:aa:bb:01")
P1 = Prefix.parse("2001:db8:0:1::/64")


class ScriptedAaa:
    """Directory keyed by interface id; unknown interfaces are refused."""

    def __init__(self, env, directory):
        self.env = env
        self.directory = directory

    def handle_message(self, msg):
        assert msg.kind is MessageKind.AAA_REQUEST
        hit = self.directory.get(msg.body.interface_id)
        if hit is None:
            body = AaaResponseBody(msg.body.interface_id, False, "", ())
        else:
            mn_id, hnp = hit
            body = AaaResponseBody(msg.body.interface_id, True, mn_id, hnp)
        self.env.send_message(body, msg.src)


class RecordingMn:
    def __init__(self, env, mag_id, responsive=True):
        self.env = env
        self.mag_id = mag_id
        self.responsive = responsive
        self.inbox = []

    def handle_message(self, msg):
        self.inbox.append(msg)
        if msg.kind is MessageKind.NEIGHBOR_SOLICITATION and self.responsive:
            self.env.send_message(NeighborAdvertisementBody(msg.body.target),
                                  self.mag_id)


def build_cell(knobs=None, directory=None, with_lma=True):
    bus = FakeBus()
    knobs = knobs or make_knobs()
    caps = (LinkCapability("link1", "wifi", (1, 2)),)
    mihf = Mihf("mihf1", bus.env("mihf1"), managed=caps)
    sap = LinkSap("sap:link1", bus.env("sap:link1"), link_id="link1", mihf="mihf1")
    mag = MobileAccessGateway("mag1", bus.env("mag1"), access_link="link1",
                              tunnel="tun:mag1", mihf="mihf1", lma="lma",
                              aaa="aaa", knobs=knobs)
    directory = directory if directory is not None else {
        eui64_from_link_addr(ADDR1): ("mn1", (P1,))}
    aaa = ScriptedAaa(bus.env("aaa"), directory)
    bus.register("mihf1", mihf)
    bus.register("mag1", mag)
    bus.register("aaa", aaa)
    if with_lma:
        lma = LocalMobilityAnchor("lma", bus.env("lma"),
                                  tunnels={"mag1": ("tun:mag1", 1)},
                                  policy=PinnedPolicy(), knobs=knobs)
        bus.register("lma", lma)
    else:
        lma = None
    mn = RecordingMn(bus.env("mn1"), "mag1")
    bus.register("mn1", mn)
    return bus, mag, sap, mihf, lma, mn


# written down first, from the expected subscribe-then-attach exchange
GOLDEN_ATTACH_SEQUENCE = [
    ("mag1", "mihf1", "MIH_REGISTER"),
    ("mihf1", "mag1", "MIH_REGISTER_ACK"),
    ("mag1", "mihf1", "MIH_CAPABILITY_DISCOVER_REQ"),
    ("mihf1", "mag1", "MIH_CAPABILITY_DISCOVER_RESP"),
    ("mag1", "mihf1", "MIH_EVENT_SUBSCRIBE_REQ"),
    ("mihf1", "mag1", "MIH_EVENT_SUBSCRIBE_CONFIRM"),
    ("mihf1", "mag1", "MIH_EVENT_SUBSCRIBE_CONFIRM"),
    ("sap:link1", "mihf1", "MIH_LINK_UP"),
    ("mihf1", "mag1", "MIH_LINK_UP"),
    ("mag1", "aaa", "AAA_REQUEST"),
    ("aaa", "mag1", "AAA_RESPONSE"),
    ("mag1", "lma", "PBU"),
    ("lma", "mag1", "PBA"),
    ("mag1", "mn1", "ROUTER_ADVERTISEMENT"),
]


def test_handshake_and_attach_golden_sequence():
    bus, mag, sap, mihf, lma, mn = build_cell()
    mag.start()
    assert mag.mih_ready
    sap.attach(ADDR1)

    assert bus.kind_sequence() == GOLDEN_ATTACH_SEQUENCE
    assert mag.entries["mn1"].status == "permanent"
    assert ("mn1", "mag1") in lma.bindings
    # the advertisement is unicast to the attaching interface
    ra = mn.inbox[-1]
    assert ra.kind is MessageKind.ROUTER_ADVERTISEMENT
    assert ra.body.dest == ADDR1
    assert ra.body.hnp == (P1,)


def test_capability_mismatch_stops_handshake():
    bus, mag, sap, mihf, lma, mn = build_cell()
    mihf.managed = (LinkCapability("other-link", "wifi", (1, 2)),)
    mag.start()
    assert not mag.mih_ready
    assert mag.counters["config_error"] == 1
    kinds = [k for _, _, k in bus.kind_sequence()]
    assert "MIH_EVENT_SUBSCRIBE_REQ" not in kinds


def test_unauthorized_interface_gets_no_binding():
    bus, mag, sap, mihf, lma, mn = build_cell(directory={})
    mag.start()
    sap.attach(ADDR1)
    assert mag.counters["attach_rejected"] == 1
    assert mag.entries == {}
    kinds = [k for _, _, k in bus.kind_sequence()]
    assert "PBU" not in kinds
    assert lma.bindings == {}


def test_anchor_rejection_rolls_back_entry():
    knobs = make_knobs()
    bus, mag, sap, mihf, lma, mn = build_cell(knobs=knobs)
    lma.denied_mns = {"mn1"}
    mag.start()
    sap.attach(ADDR1)
    assert mag.counters["registration_failed"] == 1
    assert mag.entries == {}
    assert not any(m.kind is MessageKind.ROUTER_ADVERTISEMENT for m in mn.inbox)


def test_detach_deregisters_and_unknown_detach_is_silent():
    bus, mag, sap, mihf, lma, mn = build_cell()
    mag.start()
    sap.attach(ADDR1)
    assert ("mn1", "mag1") in lma.bindings

    n_before = len(bus.log)
    sap.detach(ADDR1)
    assert lma.bindings == {}
    assert mag.entries == {}
    sent = bus.kind_sequence()[n_before:]
    assert ("mag1", "lma", "PBU") in sent

    # a down report for an address we never served: no message, one counter
    n_before = len(bus.log)
    sap.attach(LinkAddr.parse("00:1b:63:aa:bb:99"))
    bus_events = bus.kind_sequence()[n_before:]
    # that unknown address fails AAA, so the gateway holds no entry for it
    sap.detach(LinkAddr.parse("00:1b:63:aa:bb:99"))
    assert mag.counters["detach_unknown"] == 1
    assert not any(k == "PBU" for _, _, k in bus.kind_sequence()[n_before + len(bus_events):])


def test_reattach_reruns_admission():
    bus, mag, sap, mihf, lma, mn = build_cell()
    mag.start()
    sap.attach(ADDR1)
    sap.detach(ADDR1)
    sap.attach(ADDR1)
    assert mag.entries["mn1"].status == "permanent"
    aaa_requests = [1 for _, src, dst, k in bus.log
                    if src == "mag1" and k is MessageKind.AAA_REQUEST]
    assert len(aaa_requests) == 2

    # up again without ever going down: flagged, admission re-runs
    sap.attached.pop(ADDR1)
    sap.attach(ADDR1)
    assert mag.counters["reattach"] == 1
    assert len(mag.entries) == 1


def test_lifetime_probe_renewal_and_expiry_counts():
    # 10 nodes registered at t=0, 3 of them silent.  near expiry one tick
    # probes all 10; responders renew, silent ones get one retry and are
    # then deregistered.  totals worked out by hand.
    knobs = make_knobs()  # lifetime 300s, margin 30s, probe timeout 1s, 1 retry
    directory = {}
    addrs = []
    for i in range(10):
        addr = LinkAddr.parse(f"00:1b:63:aa:bb:{i + 1:02x}")
        addrs.append(addr)
        directory[eui64_from_link_addr(addr)] = (
            f"mn{i}", (Prefix.parse(f"2001:db8:0:{i + 1:x}::/64"),))
    bus, mag, sap, mihf, lma, _ = build_cell(knobs=knobs, directory=directory)
    silent = {"mn7", "mn8", "mn9"}
    for i, addr in enumerate(addrs):
        mn = RecordingMn(bus.env(f"mn{i}"), "mag1", responsive=f"mn{i}" not in silent)
        bus.register(f"mn{i}", mn)
    mag.start()
    for addr in addrs:
        sap.attach(addr)
    assert len(mag.entries) == 10

    bus.run_until(271_000_000)  # 29s before expiry, inside the 30s margin
    mag.lifetime_tick()
    # responsive nodes answered synchronously and renewed already
    renew_pbus = [1 for t, src, dst, k in bus.log
                  if t == 271_000_000 and src == "mag1" and k is MessageKind.PBU]
    assert len(renew_pbus) == 7

    bus.run_until(275_000_000)  # both probe rounds for the silent ones time out
    ns_count = sum(1 for _, src, _, k in bus.log
                   if src == "mag1" and k is MessageKind.NEIGHBOR_SOLICITATION)
    assert ns_count == 10 + 3  # one probe each, one retry for the silent three
    assert mag.counters["probe_expired"] == 3
    assert set(mag.entries) == {f"mn{i}" for i in range(7)}
    assert set(lma.bindings) == {(f"mn{i}", "mag1") for i in range(7)}
    # the renewed entries carry a fresh expiry
    for i in range(7):
        assert mag.entries[f"mn{i}"].expires_at == 271_000_000 + 300_000_000


def test_forward_downlink_requires_permanent_entry():
    from pmipflow.core import Packet, TrafficSelector, parse_ip6

    bus, mag, sap, mihf, lma, mn = build_cell()
    mag.start()
    sap.attach(ADDR1)

    sel = TrafficSelector(parse_ip6("2001:db8:100::1"), P1.addr_in(0x10),
                          5000, 6000, 17, 0)
    pkt = Packet(sel, 250, 0, created_at=0, flow_id="f1")
    assert mag.forward_downlink(pkt)
    t, src, p, link, extra = bus.packets[-1]
    assert link == "link1" and extra == 12

    other = TrafficSelector(parse_ip6("2001:db8:100::1"),
                            parse_ip6("2001:db8:0:99::1"), 5000, 6000, 17, 0)
    assert not mag.forward_downlink(Packet(other, 250, 1, created_at=0))
    assert mag.counters["pkt_dropped"] == 1

    mag.forward_uplink(Packet(sel, 250, 2, created_at=0))
    assert bus.packets[-1][3] == "tun:mag1"
