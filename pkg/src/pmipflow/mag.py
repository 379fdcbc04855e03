"""Mobile access gateway.

Bridges one access link to the anchor: listens for attachment events from
its event broker, authorizes new nodes against AAA, registers bindings with
the anchor, advertises prefixes to nodes, keeps bindings alive by probing
silent nodes before their lifetime runs out, and forwards data packets both
ways at a flat per-packet cost.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import (
    AaaRequestBody,
    AaaResponseBody,
    BindingStatus,
    LinkAddr,
    LinkEvent,
    MessageKind,
    MihCapabilityDiscoverReqBody,
    MihEventSubscribeReqBody,
    MihRegisterBody,
    MnId,
    NeighborAdvertisementBody,
    NeighborSolicitationBody,
    NodeId,
    Packet,
    PbaBody,
    PbuBody,
    Prefix,
    ProtocolMessage,
    RouterAdvertisementBody,
    US_PER_S,
    eui64_from_link_addr,
    ms_to_us,
)


@dataclass
class MagBindingEntry:
    mn_id: MnId
    interface_id: object
    link_addr: LinkAddr
    hnp: tuple[Prefix, ...]  # this interface's own prefixes, advertised to it
    status: str  # temporary | permanent
    expires_at: int
    routes: tuple[Prefix, ...] = ()  # anchor-provided set this gateway bridges


@dataclass
class PendingProbe:
    mn_id: MnId
    sent_at: int
    timeout_at: int
    retries_left: int


class MobileAccessGateway:
    def __init__(self, node_id: NodeId, env, *, access_link: str, tunnel: str,
                 mihf: NodeId, lma: NodeId, aaa: NodeId, knobs) -> None:
        self.id = node_id
        self.env = env
        self.access_link = access_link
        self.tunnel = tunnel
        self.mihf = mihf
        self.lma = lma
        self.aaa = aaa
        self.knobs = knobs

        self.entries: dict[MnId, MagBindingEntry] = {}
        self.probes: dict[MnId, PendingProbe] = {}
        self.pending_aaa: dict[object, LinkAddr] = {}
        self.counters: dict[str, int] = {}
        self.mih_ready = False
        self._confirms_needed = 0
        self._seq = 0

    # -- helpers -----------------------------------------------------------

    def _count(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def _next_seq(self) -> int:
        seq = self._seq
        self._seq = (self._seq + 1) & 0xFFFF
        return seq

    def _entry_by_addr(self, addr: LinkAddr) -> MagBindingEntry | None:
        for entry in self.entries.values():
            if entry.link_addr == addr:
                return entry
        return None

    def _send_pbu(self, entry: MagBindingEntry, lifetime_s: int) -> None:
        body = PbuBody(entry.mn_id, entry.interface_id, entry.hnp,
                       lifetime_s, self._next_seq())
        self.env.send_message(body, self.lma)

    # -- broker handshake ---------------------------------------------------

    def start(self) -> None:
        """Kick off broker registration; events flow once subscribed."""
        self.env.send_message(MihRegisterBody(self.id), self.mihf)

    def handle_message(self, msg: ProtocolMessage) -> None:
        kind = msg.kind
        if kind is MessageKind.MIH_REGISTER_ACK:
            self.env.send_message(MihCapabilityDiscoverReqBody(), self.mihf)
        elif kind is MessageKind.MIH_CAPABILITY_DISCOVER_RESP:
            self._on_capabilities(msg.body)
        elif kind is MessageKind.MIH_EVENT_SUBSCRIBE_CONFIRM:
            self._on_subscribe_confirm(msg.body)
        elif kind is MessageKind.MIH_LINK_UP:
            self.on_attachment(msg.body.link_addr)
        elif kind is MessageKind.MIH_LINK_DOWN:
            self.on_detachment(msg.body.link_addr)
        elif kind is MessageKind.AAA_RESPONSE:
            self._on_aaa_response(msg.body)
        elif kind is MessageKind.PBA:
            self._on_pba(msg.body)
        elif kind is MessageKind.NEIGHBOR_ADVERTISEMENT:
            self._on_probe_reply(msg.body.target)
        else:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="unexpected_message", kind=kind.name)

    def _on_capabilities(self, body) -> None:
        managed = {cap.link_id for cap in body.links}
        if self.access_link not in managed:
            # the broker does not speak for our link; deployment bug
            self._count("config_error")
            self.env.trace("anomaly", what="link_not_managed", link=self.access_link)
            return
        events = (int(LinkEvent.LINK_UP), int(LinkEvent.LINK_DOWN))
        self._confirms_needed = len(events)
        self.env.send_message(MihEventSubscribeReqBody(self.access_link, events),
                              self.mihf)

    def _on_subscribe_confirm(self, body) -> None:
        if body.status != 0:
            self._count("config_error")
            self.env.trace("anomaly", what="subscribe_failed", link=body.link_id,
                           event=body.event)
            return
        self._confirms_needed -= 1
        if self._confirms_needed == 0:
            self.mih_ready = True
            self.env.trace("mag_event", what="subscribed", link=self.access_link)

    # -- attachment and lifecycle -------------------------------------------

    def on_attachment(self, addr: LinkAddr) -> None:
        iface = eui64_from_link_addr(addr)
        existing = self._entry_by_addr(addr)
        if existing is not None:
            # a node we already serve reported up again; re-run admission
            self._count("reattach")
            self.env.trace("anomaly", what="reattach", mn=existing.mn_id)
        self.env.trace("mag_event", what="attach", addr=str(addr))
        self.pending_aaa[iface] = addr
        self.env.send_message(AaaRequestBody(iface), self.aaa)

    def _on_aaa_response(self, body: AaaResponseBody) -> None:
        addr = self.pending_aaa.pop(body.interface_id, None)
        if addr is None:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="aaa_response_unmatched",
                           iface=str(body.interface_id))
            return
        if not body.authorized:
            self._count("attach_rejected")
            self.env.trace("mag_event", what="attach_rejected", addr=str(addr))
            return
        entry = MagBindingEntry(body.mn_id, body.interface_id, addr, body.hnp,
                                "temporary", 0, routes=body.hnp)
        self.entries[body.mn_id] = entry
        self._send_pbu(entry, self.knobs.bce_lifetime_s)

    def _on_pba(self, body: PbaBody) -> None:
        now = self.env.now()
        if body.lifetime == 0:
            self.env.trace("mag_event", what="dereg_acked", mn=body.mn_id)
            return
        entry = self.entries.get(body.mn_id)
        if entry is None:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="pba_unmatched", mn=body.mn_id)
            return
        if body.status is not BindingStatus.SUCCESS:
            self._count("registration_failed")
            self.env.trace("mag_event", what="registration_failed", mn=body.mn_id,
                           status=int(body.status))
            del self.entries[body.mn_id]
            return
        entry.expires_at = now + body.lifetime * US_PER_S
        entry.routes = body.hnp  # anchor may widen this to the MN's full set
        if entry.status == "temporary":
            entry.status = "permanent"
            self.env.trace("mag_event", what="registered", mn=body.mn_id)
            self.env.send_message(
                RouterAdvertisementBody(entry.link_addr, entry.hnp), entry.mn_id)
        else:
            self.env.trace("mag_event", what="renewed", mn=body.mn_id)

    def on_detachment(self, addr: LinkAddr) -> None:
        entry = self._entry_by_addr(addr)
        if entry is None:
            # event for a node we never registered; count it, send nothing
            self._count("detach_unknown")
            self.env.trace("anomaly", what="detach_unknown", addr=str(addr))
            return
        self.env.trace("mag_event", what="detach", mn=entry.mn_id)
        del self.entries[entry.mn_id]
        self.probes.pop(entry.mn_id, None)
        self._send_pbu(entry, 0)

    # -- lifetime maintenance -----------------------------------------------

    def lifetime_tick(self) -> None:
        """Probe bindings that are close to expiry and not already probed."""
        now = self.env.now()
        margin_us = self.knobs.renewal_margin_s * US_PER_S
        for mn_id, entry in self.entries.items():
            if entry.status != "permanent" or mn_id in self.probes:
                continue
            if entry.expires_at - now > margin_us:
                continue
            self._send_probe(entry, self.knobs.probe_retries)

    def _send_probe(self, entry: MagBindingEntry, retries_left: int) -> None:
        now = self.env.now()
        timeout_at = now + ms_to_us(self.knobs.probe_timeout_ms)
        self.probes[entry.mn_id] = PendingProbe(entry.mn_id, now, timeout_at,
                                                retries_left)
        self.env.trace("mag_event", what="probe", mn=entry.mn_id,
                       retries_left=retries_left)
        self.env.send_message(NeighborSolicitationBody(entry.link_addr), entry.mn_id)
        self.env.schedule(timeout_at - now, lambda: self._on_probe_timeout(entry.mn_id, timeout_at))

    def _on_probe_timeout(self, mn_id: MnId, timeout_at: int) -> None:
        probe = self.probes.get(mn_id)
        if probe is None or probe.timeout_at != timeout_at:
            return  # answered, or superseded by a newer probe
        del self.probes[mn_id]
        entry = self.entries.get(mn_id)
        if entry is None:
            return
        if probe.retries_left > 0:
            self._send_probe(entry, probe.retries_left - 1)
            return
        # silent node: treat it as gone
        self._count("probe_expired")
        self.env.trace("mag_event", what="probe_expired", mn=mn_id)
        del self.entries[mn_id]
        self._send_pbu(entry, 0)

    def _on_probe_reply(self, addr: LinkAddr) -> None:
        entry = self._entry_by_addr(addr)
        if entry is None or entry.mn_id not in self.probes:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="probe_reply_unmatched", addr=str(addr))
            return
        del self.probes[entry.mn_id]
        self.env.trace("mag_event", what="probe_answered", mn=entry.mn_id)
        self._send_pbu(entry, self.knobs.bce_lifetime_s)

    # -- data plane ----------------------------------------------------------

    def forward_downlink(self, pkt: Packet) -> bool:
        """Tunnel to access link at flat cost; False when no binding matches."""
        now = self.env.now()
        pkt.hop(self.id, now)
        for entry in self.entries.values():
            if entry.status != "permanent":
                continue
            if any(p.contains(pkt.selector.dst_addr) for p in entry.routes):
                units = self.knobs.mag_forward_cost
                self.env.trace("mag_fastpath", flow=pkt.flow_id or str(pkt.selector),
                               seq=pkt.seq, cost=units)
                self.env.send_packet(pkt, self.access_link,
                                     round(units * self.knobs.cost_unit_to_us))
                return True
        self._count("pkt_dropped")
        self.env.trace("pkt_drop", flow=pkt.flow_id or str(pkt.selector),
                       seq=pkt.seq, reason="no_binding")
        return False

    def forward_uplink(self, pkt: Packet) -> None:
        now = self.env.now()
        pkt.hop(self.id, now)
        units = self.knobs.mag_forward_cost
        self.env.trace("mag_fastpath", flow=pkt.flow_id or str(pkt.selector),
                       seq=pkt.seq, cost=units)
        self.env.send_packet(pkt, self.tunnel,
                             round(units * self.knobs.cost_unit_to_us))
