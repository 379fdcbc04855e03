"""Builds a world from a scenario and runs it to the horizon.

All cross-node communication funnels through World.send_message /
World.send_packet: messages are encoded at the sender and decoded at the
receiver (so the codec is exercised on every exchange), links add latency,
and state flips drop whatever was in flight.  Entities never see each other
directly; they only get an env facade bound to their node id.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from ..core import (
    LinkCapability,
    Packet,
    ProtocolMessage,
    decode,
    encode,
    eui64_from_link_addr,
    ms_to_us,
)
from ..harness.scenario import Scenario
from ..harness.trace import TraceLog
from ..lma import CallbackPolicy, LocalMobilityAnchor, PinnedPolicy, RandomPolicy
from ..mag import MobileAccessGateway
from ..mih import LinkSap, Mihf
from .engine import Simulator
from .network import Link
from .nodes import AaaServer, CorrespondentNode, MnInterface, MobileNode


class _NodeEnv:
    """The only window an entity has onto the world."""

    __slots__ = ("world", "node_id")

    def __init__(self, world: "World", node_id: str) -> None:
        self.world = world
        self.node_id = node_id

    def now(self) -> int:
        return self.world.sim.now

    def schedule(self, delay_us: int, fn) -> None:
        self.world.sim.schedule(delay_us, fn)

    def send_message(self, body, dst: str) -> None:
        msg = ProtocolMessage.make(body, self.node_id, dst, self.world.sim.now)
        self.world.send_message(msg)

    def send_packet(self, pkt: Packet, link_id: str, extra_us: int) -> None:
        self.world.send_packet(self.node_id, pkt, link_id, extra_us)

    def trace(self, kind: str, **fields) -> None:
        self.world.trace.add(self.world.sim.now, self.node_id, kind, **fields)


class World:
    def __init__(self, scenario: Scenario, seed: int) -> None:
        self.scenario = scenario
        self.seed = seed
        self.sim = Simulator()
        self.trace = TraceLog()
        self.rng_loss = random.Random(f"{seed}:loss")
        knobs = scenario.knobs
        self.knobs = knobs

        self.links: dict[str, Link] = {}
        self.handlers: dict[str, object] = {}
        self.msg_routes: dict[tuple[str, str], str] = {}

        mag_by_link = {m.access_link: m for m in scenario.mags}
        fc_mihf = {fc.id: fc.mihf for fc in scenario.femtocells}

        for spec in scenario.links:
            serving = mag_by_link[spec.id].id if spec.id in mag_by_link else ""
            self.links[spec.id] = Link(
                spec.id, "access", serving, "mns", ms_to_us(spec.latency_ms),
                up=spec.initially_up, loss=knobs.link_loss_probability)

        tunnels: dict[str, tuple[str, int]] = {}
        for mark, mag in enumerate(scenario.mags, start=1):
            link_id = f"tun:{mag.id}"
            self.links[link_id] = Link(link_id, "tunnel", scenario.lma.id, mag.id,
                                       ms_to_us(mag.tunnel_latency_ms))
            tunnels[mag.id] = (link_id, mark)
            self._route_pair(mag.id, scenario.lma.id, link_id)

            aaa_link = f"aaa:{mag.id}"
            self.links[aaa_link] = Link(aaa_link, "control", mag.id, scenario.aaa.id,
                                        ms_to_us(scenario.aaa.latency_ms))
            self._route_pair(mag.id, scenario.aaa.id, aaa_link)

            mihf_id = fc_mihf[mag.femtocell]
            mih_link = f"mih:{mag.id}"
            self.links[mih_link] = Link(mih_link, "control", mag.id, mihf_id,
                                        ms_to_us(knobs.mih_local_latency_ms))
            self._route_pair(mag.id, mihf_id, mih_link)

        cn_links: dict[bytes, str] = {}
        self.cns: dict[str, CorrespondentNode] = {}
        for cn in scenario.cns:
            link_id = f"core:{cn.id}"
            self.links[link_id] = Link(link_id, "core", cn.id, scenario.lma.id,
                                       ms_to_us(cn.latency_ms))
            cn_links[cn.addr] = link_id
            self.cns[cn.id] = CorrespondentNode(cn.id, cn.addr, link_id)

        policy = self._build_policy(scenario, seed)
        self.lma = LocalMobilityAnchor(
            scenario.lma.id, _NodeEnv(self, scenario.lma.id), tunnels=tunnels,
            policy=policy, knobs=knobs, cn_links=cn_links,
            denied_mns=scenario.lma.denied_mns,
            max_bindings=scenario.lma.max_bindings)
        self.handlers[scenario.lma.id] = self.lma

        directory = {}
        for mn in scenario.mns:
            for iface in mn.interfaces:
                iid = eui64_from_link_addr(iface.link_addr)
                directory[iid] = (mn.id, (iface.prefix,)) if iface.authorized else None
        self.aaa = AaaServer(scenario.aaa.id, _NodeEnv(self, scenario.aaa.id), directory)
        self.handlers[scenario.aaa.id] = self.aaa

        self.mihfs: dict[str, Mihf] = {}
        for fc in scenario.femtocells:
            managed = tuple(LinkCapability(l.id, l.technology, (1, 2))
                            for l in scenario.links if l.femtocell == fc.id)
            mihf = Mihf(fc.mihf, _NodeEnv(self, fc.mihf), managed=managed)
            self.mihfs[fc.mihf] = mihf
            self.handlers[fc.mihf] = mihf

        self.saps: dict[str, LinkSap] = {}
        for spec in scenario.links:
            sap_id = f"sap:{spec.id}"
            sap = LinkSap(sap_id, _NodeEnv(self, sap_id), link_id=spec.id,
                          mihf=fc_mihf[spec.femtocell], link=self.links[spec.id])
            self.saps[spec.id] = sap
            mih_link = f"mih:sap:{spec.id}"
            self.links[mih_link] = Link(mih_link, "control", sap_id,
                                        fc_mihf[spec.femtocell],
                                        ms_to_us(knobs.mih_local_latency_ms))
            self._route_pair(sap_id, fc_mihf[spec.femtocell], mih_link)

        self.mags: dict[str, MobileAccessGateway] = {}
        for spec in scenario.mags:
            mag = MobileAccessGateway(
                spec.id, _NodeEnv(self, spec.id), access_link=spec.access_link,
                tunnel=tunnels[spec.id][0], mihf=fc_mihf[spec.femtocell],
                lma=scenario.lma.id, aaa=scenario.aaa.id, knobs=knobs)
            self.mags[spec.id] = mag
            self.handlers[spec.id] = mag

        self.mns: dict[str, MobileNode] = {}
        self.mn_ifaces_by_link: dict[str, list[tuple[MobileNode, MnInterface]]] = {}
        self.mn_claims: dict[str, list] = {}
        for spec in scenario.mns:
            ifaces = [MnInterface(i, s.link_addr, s.link)
                      for i, s in enumerate(spec.interfaces)]
            mn = MobileNode(spec.id, _NodeEnv(self, spec.id),
                            host_model=spec.host_model,
                            responds_to_probes=spec.responds_to_probes,
                            interfaces=ifaces)
            self.mns[spec.id] = mn
            self.handlers[spec.id] = mn
            self.mn_claims[spec.id] = [s.prefix for s in spec.interfaces]
            for iface, ispec in zip(ifaces, spec.interfaces):
                self.mn_ifaces_by_link.setdefault(ispec.link, []).append((mn, iface))
                serving = mag_by_link.get(ispec.link)
                if serving is not None:
                    self._route_pair(spec.id, serving.id, ispec.link)

    def _route_pair(self, a: str, b: str, link_id: str) -> None:
        self.msg_routes[(a, b)] = link_id
        self.msg_routes[(b, a)] = link_id

    def _build_policy(self, scenario: Scenario, seed: int):
        mode = scenario.scheduler.mode
        if mode == "pinned":
            return PinnedPolicy(scenario.scheduler.preference)
        if mode == "random":
            return RandomPolicy(random.Random(f"{seed}:sched"))
        pins = {flow.selector: flow.pin for flow in scenario.flows
                if flow.pin is not None}

        def choose(mn_id, sel, candidates):
            pin = pins.get(sel)
            if pin is not None:
                for key in candidates:
                    if key[1] == pin:
                        return key
            return candidates[0]

        return CallbackPolicy(choose)

    # -- transport ----------------------------------------------------------

    def send_message(self, msg: ProtocolMessage) -> None:
        link_id = self.msg_routes.get((msg.src, msg.dst))
        if link_id is None:
            self.trace.add(self.sim.now, msg.src, "msg_drop", msg=msg.kind.name,
                           dst=msg.dst, reason="no_route")
            return
        link = self.links[link_id]
        payload = encode(msg)
        self.trace.add(self.sim.now, msg.src, "msg_send", msg=msg.kind.name,
                       dst=msg.dst, size=len(payload), data=payload.hex())
        if not link.up:
            self.trace.add(self.sim.now, link.id, "msg_drop", msg=msg.kind.name,
                           reason="link_down")
            return
        if link.loss and self.rng_loss.random() < link.loss:
            self.trace.add(self.sim.now, link.id, "msg_drop", msg=msg.kind.name,
                           reason="loss")
            return
        epoch = link.epoch
        self.sim.schedule(link.latency_us,
                          lambda: self._deliver_message(payload, link, epoch))

    def _deliver_message(self, payload: bytes, link: Link, epoch: int) -> None:
        msg = decode(payload)
        if not link.up or link.epoch != epoch:
            self.trace.add(self.sim.now, link.id, "msg_drop", msg=msg.kind.name,
                           reason="link_down")
            return
        mn = self.mns.get(msg.dst)
        if mn is not None:
            iface = next((i for i in mn.interfaces if i.link_id == link.id), None)
            sap = self.saps.get(link.id)
            if iface is None or sap is None or iface.link_addr not in sap.attached:
                self.trace.add(self.sim.now, link.id, "msg_drop",
                               msg=msg.kind.name, reason="not_attached")
                return
        handler = self.handlers.get(msg.dst)
        if handler is None:
            self.trace.add(self.sim.now, link.id, "msg_drop", msg=msg.kind.name,
                           reason="no_handler")
            return
        self.trace.add(self.sim.now, msg.dst, "msg_recv", msg=msg.kind.name,
                       src=msg.src)
        handler.handle_message(msg)

    def send_packet(self, sender: str, pkt: Packet, link_id: str,
                    extra_us: int) -> None:
        link = self.links[link_id]
        label = pkt.flow_id or str(pkt.selector)
        if not link.up:
            self.trace.add(self.sim.now, sender, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="link_down")
            return
        if link.loss and self.rng_loss.random() < link.loss:
            self.trace.add(self.sim.now, link.id, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="loss")
            return
        if link.kind == "access":
            receiver = "mns" if sender == link.a else link.a
        else:
            receiver = link.other(sender)
        epoch = link.epoch
        self.sim.schedule(
            link.latency_us + extra_us,
            lambda: self._deliver_packet(pkt, link, receiver, epoch))

    def _deliver_packet(self, pkt: Packet, link: Link, receiver: str,
                        epoch: int) -> None:
        label = pkt.flow_id or str(pkt.selector)
        if not link.up or link.epoch != epoch:
            self.trace.add(self.sim.now, link.id, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="link_down")
            return
        if link.kind == "core":
            if receiver == self.lma.id:
                self.lma.on_downlink_packet(pkt)
            else:
                cn = self.cns[receiver]
                cn.received.append((self.sim.now, pkt))
                pkt.hop(cn.id, self.sim.now)
                self.trace.add(self.sim.now, cn.id, "pkt_deliver", flow=label,
                               seq=pkt.seq, iface="core", link=link.id)
        elif link.kind == "tunnel":
            if receiver == self.lma.id:
                self.lma.on_uplink_packet(pkt)
            else:
                self.mags[receiver].forward_downlink(pkt)
        elif link.kind == "access":
            if receiver == "mns":
                self._deliver_to_mn(pkt, link)
            else:
                self.mags[receiver].forward_uplink(pkt)
        else:
            raise AssertionError(f"packet on {link.kind} link {link.id}")

    def _deliver_to_mn(self, pkt: Packet, link: Link) -> None:
        label = pkt.flow_id or str(pkt.selector)
        dst = pkt.selector.dst_addr
        target: tuple[MobileNode, MnInterface] | None = None
        for mn, iface in self.mn_ifaces_by_link.get(link.id, []):
            if any(p.contains(dst) for p in self.mn_claims[mn.id]):
                target = (mn, iface)
                break
        if target is None:
            self.trace.add(self.sim.now, link.id, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="no_host")
            return
        mn, iface = target
        sap = self.saps[link.id]
        if iface.link_addr not in sap.attached:
            self.trace.add(self.sim.now, link.id, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="not_attached")
            return
        if not mn.deliver(pkt, iface.index):
            self.trace.add(self.sim.now, mn.id, "pkt_drop", flow=label,
                           seq=pkt.seq, reason="host_model")

    # -- control interventions ------------------------------------------------

    def attach(self, mn_id: str, iface_index: int) -> None:
        mn = self.mns[mn_id]
        iface = mn.interfaces[iface_index]
        iface.attached = True
        self.trace.add(self.sim.now, mn_id, "mn_event", what="attach",
                       iface=iface_index, link=iface.link_id)
        self.saps[iface.link_id].attach(iface.link_addr)

    def detach(self, mn_id: str, iface_index: int) -> None:
        mn = self.mns[mn_id]
        iface = mn.interfaces[iface_index]
        iface.attached = False
        self.trace.add(self.sim.now, mn_id, "mn_event", what="detach",
                       iface=iface_index, link=iface.link_id)
        self.saps[iface.link_id].detach(iface.link_addr)

    def inject_link_down(self, link_id: str) -> None:
        link = self.links[link_id]
        if not link.set_up(False):
            return
        self.trace.add(self.sim.now, link_id, "link_state", state="down")
        sap = self.saps.get(link_id)
        if sap is not None:
            delay = ms_to_us(self.knobs.d_detect_ms)
            self.sim.schedule(delay, lambda: self._detection_report(link, False))

    def inject_link_up(self, link_id: str) -> None:
        link = self.links[link_id]
        if not link.set_up(True):
            return
        self.trace.add(self.sim.now, link_id, "link_state", state="up")
        sap = self.saps.get(link_id)
        if sap is not None:
            delay = ms_to_us(self.knobs.d_detect_ms)
            self.sim.schedule(delay, lambda: self._detection_report(link, True))

    def _detection_report(self, link: Link, reported_up: bool) -> None:
        # a flip that reverted within the detection window goes unreported
        if link.up != reported_up:
            return
        self.saps[link.id].link_state_report(reported_up)

    # -- run ------------------------------------------------------------------

    def _start_flow(self, flow) -> None:
        state = {"seq": 0}

        def emit() -> None:
            now = self.sim.now
            if flow.stop_us is not None and now >= flow.stop_us:
                return
            pkt = Packet(flow.selector, flow.packet_size, state["seq"],
                         created_at=now, flow_id=flow.id)
            state["seq"] += 1
            pkt.hop(flow.cn, now)
            self.trace.add(now, flow.cn, "pkt_emit", flow=flow.id, seq=pkt.seq,
                           size=flow.packet_size)
            self.send_packet(flow.cn, pkt, self.cns[flow.cn].link_id, 0)
            self.sim.schedule(flow.period_us, emit)

        self.sim.schedule_at(flow.start_us, emit)

    def run(self) -> None:
        for mag_id in self.mags:
            mag = self.mags[mag_id]
            self.sim.schedule(0, mag.start)
        tick_us = ms_to_us(self.knobs.lifetime_tick_ms)
        if tick_us > 0 and self.mags:
            def tick() -> None:
                for mag_id in self.mags:
                    self.mags[mag_id].lifetime_tick()
                self.sim.schedule(tick_us, tick)
            self.sim.schedule(tick_us, tick)
        for ev in self.scenario.timeline:
            action = {
                "attach": lambda e=ev: self.attach(e.mn, e.interface),
                "detach": lambda e=ev: self.detach(e.mn, e.interface),
                "link_down": lambda e=ev: self.inject_link_down(e.link),
                "link_up": lambda e=ev: self.inject_link_up(e.link),
            }[ev.action]
            self.sim.schedule_at(ev.at_us, action)
        for flow in self.scenario.flows:
            self._start_flow(flow)
        self.sim.run(self.scenario.horizon_us)


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    trace: TraceLog
    metrics: object
    events_processed: int


def run(scenario: Scenario, seed: int) -> RunResult:
    """Execute one scenario deterministically; same inputs, same trace bytes."""
    from ..harness.metrics import MetricSet

    world = World(scenario, seed)
    world.run()
    metrics = MetricSet.from_trace(world.trace)
    return RunResult(scenario, seed, world.trace, metrics, world.sim.processed)
