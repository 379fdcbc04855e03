"""End-to-end simulator behavior: timing, routing, determinism, conservation.

Expected times are computed by hand from the scenario latencies before each
test was first run; they are sums of configured link latencies and processing
costs, never values copied from program output.
"""
import random

from pmipflow.core import decode
from pmipflow.harness.scenario import build_scenario, packaged_scenario
from pmipflow.netsim import Simulator, run
from pmipflow.netsim.runner import World


def test_engine_fires_in_time_then_insertion_order():
    sim = Simulator()
    seen = []
    sim.schedule(50, lambda: seen.append("late"))
    sim.schedule(10, lambda: seen.append("a"))
    sim.schedule(10, lambda: seen.append("b"))
    ev = sim.schedule(30, lambda: seen.append("cancelled"))
    ev.cancelled = True
    sim.schedule(0, lambda: seen.append("now"))
    sim.run(100)
    assert seen == ["now", "a", "b", "late"]
    assert sim.now == 100
    assert sim.processed == 4


def base_doc():
    """One femtocell, one gateway, one host, one correspondent."""
    return {
        "scenario": {"name": "unit", "horizon_ms": 1000},
        "scheduler": {"mode": "pinned", "preference": ["mag1"]},
        "femtocells": [{"id": "fc1", "mihf": "mihf1"}],
        "links": [{"id": "wlan0", "femtocell": "fc1", "technology": "wifi",
                   "latency_ms": 0.5}],
        "mags": [{"id": "mag1", "femtocell": "fc1", "access_link": "wlan0",
                  "tunnel_latency_ms": 1.0}],
        "mns": [{"id": "mn1", "host_model": "weak",
                 "interfaces": [{"link_addr": "02:00:00:00:00:01",
                                 "link": "wlan0",
                                 "prefix": "2001:db8:0:1::/64"}]}],
        "cns": [{"id": "cn1", "addr": "2001:db8:ff::1", "latency_ms": 1.0}],
        "flows": [],
        "timeline": [{"at_ms": 10.0, "action": "attach", "mn": "mn1",
                      "interface": 0}],
    }


def two_iface_doc():
    """One host with two radios behind two gateways, one downlink flow."""
    doc = base_doc()
    doc["femtocells"].append({"id": "fc2", "mihf": "mihf2"})
    doc["links"].append({"id": "cell0", "femtocell": "fc2",
                         "technology": "lte", "latency_ms": 0.5})
    doc["mags"].append({"id": "mag2", "femtocell": "fc2",
                        "access_link": "cell0", "tunnel_latency_ms": 1.0})
    doc["mns"][0]["interfaces"].append({"link_addr": "02:00:00:00:00:02",
                                        "link": "cell0",
                                        "prefix": "2001:db8:0:2::/64"})
    doc["timeline"].append({"at_ms": 20.0, "action": "attach", "mn": "mn1",
                            "interface": 1})
    return doc


def flow_entry(fid="f0", port=7000, dst="2001:db8:0:1::10", rate=100,
               start_ms=100.0, **extra):
    entry = {"id": fid, "cn": "cn1", "dst": dst, "src_port": port,
             "rate_kbps": rate, "start_ms": start_ms}
    entry.update(extra)
    return entry


def test_attach_chain_completes_at_hand_summed_time():
    # attach 10ms, aaa round trip 2 x 0.5ms, pbu/pba 2 x 1ms, ra 0.5ms
    scn = packaged_scenario("attach_sequence.scn")
    res = run(scn, seed=3)
    assigned = res.trace.filter(kind="mn_event")
    done = [r for r in assigned if r.get("what") == "prefix_assigned"]
    assert len(done) == 1
    assert done[0].t_us == 13_500
    pbu_recv = [r for r in res.trace.filter(kind="msg_recv")
                if r.get("msg") == "PBU"]
    assert [r.t_us for r in pbu_recv] == [12_000]
    # every sent message is wire-decodable and tagged with its own kind
    for rec in res.trace.filter(kind="msg_send"):
        msg = decode(bytes.fromhex(rec.get("data")))
        assert msg.kind.name == rec.get("msg")


def test_downlink_flow_first_packet_pays_install_wait():
    doc = base_doc()
    doc["flows"] = [flow_entry()]
    res = run(build_scenario(doc), seed=1)
    mset = res.metrics
    fm = mset.flows["f0"]
    # cn->lma 1000; divert waits for install (25 units); lma->mag 1000;
    # mag cost 12; access 500.  Steady state replaces the wait with the
    # kernel cost of 20.05 units, rounded to 20us.
    delays = fm.delays_us()
    assert delays[0] == 1000 + 25 + 1000 + 12 + 500
    assert delays[1:] == [2532] * (len(delays) - 1)
    assert fm.diverted == 1 and fm.released == 1
    assert fm.dropped == 0 and fm.in_flight in (0, 1, 2)
    mset.check_conservation()


def test_delivered_packet_walks_cn_lma_mag_mn():
    doc = base_doc()
    doc["flows"] = [flow_entry()]
    scn = build_scenario(doc)
    world_result = run(scn, seed=1)
    # rebuild the world directly so node-internal state is inspectable
    world = World(scn, seed=1)
    world.run()
    mn = world.mns["mn1"]
    assert len(mn.deliveries) >= 3
    t, iface, pkt = mn.deliveries[2]
    hops = [node for node, _ in pkt.path_trace]
    assert hops == ["cn1", "lma", "mag1", "mn1"]
    times = [at for _, at in pkt.path_trace]
    assert times == sorted(times)
    assert iface == 0
    assert world_result.trace.sha256() == world.trace.sha256()


def test_same_seed_same_bytes_different_seed_diverges():
    doc = two_iface_doc()
    doc["scenario"]["horizon_ms"] = 1500
    doc["scheduler"] = {"mode": "random"}
    doc["knobs"] = {"link_loss_probability": 0.2}
    doc["flows"] = [flow_entry(f"f{i}", 7000 + i) for i in range(20)]
    a = run(build_scenario(doc), seed=42)
    b = run(build_scenario(doc), seed=42)
    assert a.trace.text() == b.trace.text()
    assert a.trace.sha256() == b.trace.sha256()
    c = run(build_scenario(doc), seed=43)
    assert c.trace.text() != a.trace.text()


def test_loss_and_horizon_never_break_conservation():
    doc = two_iface_doc()
    doc["scheduler"] = {"mode": "random"}
    doc["knobs"] = {"link_loss_probability": 0.3}
    doc["flows"] = [flow_entry(f"f{i}", 7000 + i,
                               dst=f"2001:db8:0:{1 + i % 2}::10")
                    for i in range(10)]
    rng = random.Random(202)
    for _ in range(5):
        res = run(build_scenario(doc), seed=rng.randrange(10**6))
        res.metrics.check_conservation()
        for fm in res.metrics.flows.values():
            assert fm.emitted > 0
            assert fm.delivered + fm.dropped <= fm.emitted


def test_link_down_detection_reports_after_configured_delay():
    doc = two_iface_doc()
    doc["flows"] = [flow_entry()]
    doc["scenario"]["horizon_ms"] = 800
    doc["timeline"].append({"at_ms": 300.0, "action": "link_down",
                            "link": "wlan0"})
    res = run(build_scenario(doc), seed=9)
    down = [r for r in res.trace.filter(kind="link_state")
            if r.get("state") == "down"]
    assert [r.t_us for r in down] == [300_000]
    reports = [r for r in res.trace.filter(kind="sap_report")
               if r.get("state") == "down"]
    # default detection lag is 50 ms
    assert [r.t_us for r in reports] == [350_000]
    dereg = [r for r in res.trace.filter(kind="bce_update")
             if r.get("action") == "delete"]
    # one tunnel hop after the gateway reacts
    assert [r.t_us for r in dereg] == [351_000]
    # the flow lands on the surviving gateway and continues
    fm = res.metrics.flows["f0"]
    gap = fm.delivery_gap(period_us=20_000, after_us=300_000)
    assert gap is not None
    assert gap["old_link"] == "wlan0" and gap["new_link"] == "cell0"
    reroutes = res.trace.filter(kind="flow_reroute")
    assert len(reroutes) == 1


def test_packets_in_flight_when_link_drops_are_lost():
    doc = base_doc()
    doc["links"][0]["latency_ms"] = 5.0
    doc["flows"] = [flow_entry()]
    doc["scenario"]["horizon_ms"] = 400
    # seq 1 enters the access link at ~122ms and would arrive at 127ms
    doc["timeline"].append({"at_ms": 125.0, "action": "link_down",
                            "link": "wlan0"})
    doc["timeline"].append({"at_ms": 200.0, "action": "link_up",
                            "link": "wlan0"})
    res = run(build_scenario(doc), seed=5)
    fm = res.metrics.flows["f0"]
    delivered_seqs = [seq for _, seq, _ in fm.deliveries]
    assert 0 in delivered_seqs and 1 not in delivered_seqs
    drops = [r for r in res.trace.filter(kind="pkt_drop")
             if r.get("flow") == "f0" and r.get("seq") == 1]
    assert len(drops) == 1 and drops[0].get("reason") == "link_down"
    # emit 120 + core 1 + kernel 0.020 + tunnel 1 + bridge 0.012 + access 5
    assert drops[0].t_us == 127_032


def test_detach_mid_flight_drops_at_access_edge():
    doc = base_doc()
    doc["links"][0]["latency_ms"] = 5.0
    doc["flows"] = [flow_entry()]
    doc["scenario"]["horizon_ms"] = 300
    doc["timeline"].append({"at_ms": 125.0, "action": "detach", "mn": "mn1",
                            "interface": 0})
    res = run(build_scenario(doc), seed=5)
    reasons = set(res.metrics.drops_by_reason)
    assert "not_attached" in reasons
    res.metrics.check_conservation()


def test_merged_interface_hides_the_radio_from_deliveries():
    doc = two_iface_doc()
    doc["mns"][0]["host_model"] = "lif"
    doc["scheduler"] = {"mode": "external"}
    doc["flows"] = [
        flow_entry("fa", 7000, dst="2001:db8:0:1::10", pin="mag1"),
        flow_entry("fb", 7001, dst="2001:db8:0:2::10", pin="mag2"),
    ]
    res = run(build_scenario(doc), seed=2)
    delivers = [r for r in res.trace.filter(kind="pkt_deliver")
                if r.entity == "mn1"]
    assert delivers, "expected deliveries at the host"
    assert all(r.get("iface") == "lif" for r in delivers)
    links_used = {r.get("link") for r in delivers}
    assert links_used == {"wlan0", "cell0"}


def test_weak_host_accepts_either_prefix_on_either_radio():
    doc = two_iface_doc()
    doc["scheduler"] = {"mode": "external"}
    # both flows pinned to the first gateway: traffic for the second
    # interface prefix arrives over the first radio and is still accepted
    doc["flows"] = [
        flow_entry("fa", 7000, dst="2001:db8:0:1::10", pin="mag1"),
        flow_entry("fb", 7001, dst="2001:db8:0:2::10", pin="mag1"),
    ]
    res = run(build_scenario(doc), seed=2)
    fb = res.metrics.flows["fb"]
    assert fb.delivered > 0
    assert all(link == "wlan0" for _, _, link in fb.deliveries)
    assert res.metrics.drops_by_reason.get("host_model") is None


def test_empty_scenario_runs_to_nothing():
    res = run(build_scenario({"scenario": {"name": "void", "horizon_ms": 50}}),
              seed=1)
    assert res.events_processed == 0
    assert res.trace.records == []
    assert res.metrics.flows == {}


def test_unauthorized_interface_never_registers():
    doc = base_doc()
    doc["mns"][0]["interfaces"][0]["authorized"] = False
    doc["flows"] = [flow_entry()]
    res = run(build_scenario(doc), seed=4)
    kinds = res.metrics.msg_counts
    assert kinds.get("PBU") is None
    assert kinds["AAA_REQUEST"] == 1
    rejected = [r for r in res.trace.filter(kind="mag_event")
                if r.get("what") == "attach_rejected"]
    assert len(rejected) == 1
    # downlink traffic for it dies at the anchor: nothing is routable
    fm = res.metrics.flows["f0"]
    assert fm.delivered == 0
    assert res.metrics.drops_by_reason["unroutable"] == fm.dropped


def test_silent_host_is_probed_then_evicted():
    doc = base_doc()
    doc["mns"][0]["responds_to_probes"] = False
    doc["knobs"] = {"bce_lifetime_s": 3, "renewal_margin_s": 1,
                    "probe_timeout_ms": 200.0, "probe_retries": 1}
    doc["scenario"]["horizon_ms"] = 6000
    res = run(build_scenario(doc), seed=6)
    expired = [r for r in res.trace.filter(kind="mag_event")
               if r.get("what") == "probe_expired"]
    assert len(expired) == 1
    dereg = [r for r in res.trace.filter(kind="bce_update")
             if r.get("action") == "delete"]
    assert len(dereg) == 1
    ns = [r for r in res.trace.filter(kind="msg_send")
          if r.get("msg") == "NEIGHBOR_SOLICITATION"]
    # one probe plus one retry, both unanswered
    assert len(ns) == 2


def test_responsive_host_renews_and_stays_bound():
    doc = base_doc()
    doc["knobs"] = {"bce_lifetime_s": 3, "renewal_margin_s": 1,
                    "probe_timeout_ms": 200.0, "probe_retries": 1}
    doc["scenario"]["horizon_ms"] = 8000
    res = run(build_scenario(doc), seed=6)
    renewed = [r for r in res.trace.filter(kind="mag_event")
               if r.get("what") == "renewed"]
    # lifetime 3s, margin 1s: renewal about every 2s starting near t=2s
    assert len(renewed) >= 2
    dereg = [r for r in res.trace.filter(kind="bce_update")
             if r.get("action") == "delete"]
    assert dereg == []
    na = [r for r in res.trace.filter(kind="msg_send")
          if r.get("msg") == "NEIGHBOR_ADVERTISEMENT"]
    assert len(na) == len(renewed)
