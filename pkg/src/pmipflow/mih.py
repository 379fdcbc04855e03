"""Media-independent event service: link agents and the per-femtocell broker.

A LinkSap watches one access link and turns physical attach/detach and link
state flips into link event messages.  The Mihf broker fans those events out
to whoever registered, discovered capabilities and subscribed.  Delivery is
sound (subscribers only), complete (every subscriber, every event) and
order-preserving per link.
"""
from __future__ import annotations

from .core import (
    LinkAddr,
    LinkCapability,
    LinkEvent,
    MessageKind,
    MihCapabilityDiscoverRespBody,
    MihEventSubscribeConfirmBody,
    MihLinkDownBody,
    MihLinkUpBody,
    MihRegisterAckBody,
    NodeId,
    ProtocolMessage,
)


class LinkSap:
    """Link-layer agent for one access link."""

    def __init__(self, sap_id: NodeId, env, *, link_id: str, mihf: NodeId,
                 link=None) -> None:
        self.id = sap_id
        self.env = env
        self.link_id = link_id
        self.mihf = mihf
        self.link = link  # object with an `up` attribute, or None
        self.attached: dict[LinkAddr, None] = {}

    def _link_up(self) -> bool:
        return self.link is None or self.link.up

    def attach(self, addr: LinkAddr) -> None:
        self.attached[addr] = None
        if self._link_up():
            self._report(True, addr)

    def detach(self, addr: LinkAddr) -> None:
        if addr in self.attached:
            del self.attached[addr]
            if self._link_up():
                self._report(False, addr)

    def link_state_report(self, up: bool) -> None:
        """Report a link flip for every attached address, attach order."""
        for addr in self.attached:
            self._report(up, addr)

    def _report(self, up: bool, addr: LinkAddr) -> None:
        body = MihLinkUpBody(self.link_id, addr) if up else MihLinkDownBody(self.link_id, addr)
        self.env.trace("sap_report", link=self.link_id, addr=str(addr),
                       state="up" if up else "down")
        self.env.send_message(body, self.mihf)


class Mihf:
    """Event broker: registration, capability discovery, subscription, fan-out."""

    def __init__(self, node_id: NodeId, env, *, managed: tuple[LinkCapability, ...]) -> None:
        self.id = node_id
        self.env = env
        self.managed = managed
        self.registered: dict[NodeId, None] = {}
        # link id -> ordered (client, event) pairs
        self.subscriptions: dict[str, dict[tuple[NodeId, int], None]] = {}
        self.counters: dict[str, int] = {}

    def _count(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def handle_message(self, msg: ProtocolMessage) -> None:
        kind = msg.kind
        if kind is MessageKind.MIH_REGISTER:
            self.registered[msg.body.client] = None
            self.env.send_message(MihRegisterAckBody(msg.body.client), msg.src)
        elif kind is MessageKind.MIH_CAPABILITY_DISCOVER_REQ:
            self.env.send_message(MihCapabilityDiscoverRespBody(self.managed), msg.src)
        elif kind is MessageKind.MIH_EVENT_SUBSCRIBE_REQ:
            self._subscribe(msg.src, msg.body)
        elif kind is MessageKind.MIH_LINK_UP:
            self._deliver(msg.body.link_id, int(LinkEvent.LINK_UP), msg.body)
        elif kind is MessageKind.MIH_LINK_DOWN:
            self._deliver(msg.body.link_id, int(LinkEvent.LINK_DOWN), msg.body)
        else:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="unexpected_message", kind=kind.name)

    def _subscribe(self, client: NodeId, body) -> None:
        known = {cap.link_id for cap in self.managed}
        ok = body.link_id in known and client in self.registered
        subs = self.subscriptions.setdefault(body.link_id, {})
        for event in body.events:
            if ok:
                subs[(client, event)] = None
            # one confirmation per event type, in request order
            self.env.send_message(
                MihEventSubscribeConfirmBody(body.link_id, event, 0 if ok else 1),
                client)
        if not ok:
            self._count("subscribe_rejected")

    def _deliver(self, link_id: str, event: int, body) -> None:
        for client, wanted in self.subscriptions.get(link_id, {}):
            if wanted != event:
                continue
            self.env.trace("mih_deliver", link=link_id, event=event, client=client)
            self.env.send_message(body, client)
