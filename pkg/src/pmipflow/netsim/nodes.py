"""End hosts of the simulated core: mobile nodes, correspondents, AAA."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..core import (
    AaaResponseBody,
    LinkAddr,
    MessageKind,
    NeighborAdvertisementBody,
    NodeId,
    Packet,
    Prefix,
    ProtocolMessage,
)


@dataclass
class MnInterface:
    index: int
    link_addr: LinkAddr
    link_id: str
    prefixes: tuple[Prefix, ...] = ()  # assigned by router advertisement
    attached: bool = False


class MobileNode:
    """Multihomed host; weak host model or a merged logical interface."""

    def __init__(self, node_id: NodeId, env, *, host_model: str,
                 responds_to_probes: bool, interfaces: list[MnInterface]) -> None:
        self.id = node_id
        self.env = env
        self.host_model = host_model
        self.responds_to_probes = responds_to_probes
        self.interfaces = interfaces
        self.deliveries: list[tuple[int, int, Packet]] = []  # (t, iface, pkt)
        self.counters: dict[str, int] = {}

    def _count(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def iface_by_addr(self, addr: LinkAddr) -> MnInterface | None:
        for iface in self.interfaces:
            if iface.link_addr == addr:
                return iface
        return None

    def owned_prefixes(self) -> list[Prefix]:
        out = []
        for iface in self.interfaces:
            out.extend(iface.prefixes)
        return out

    def handle_message(self, msg: ProtocolMessage) -> None:
        if msg.kind is MessageKind.ROUTER_ADVERTISEMENT:
            iface = self.iface_by_addr(msg.body.dest)
            if iface is None:
                self._count("ra_unmatched")
                return
            iface.prefixes = msg.body.hnp
            self.env.trace("mn_event", what="prefix_assigned", iface=iface.index,
                           hnp=",".join(str(p) for p in msg.body.hnp))
        elif msg.kind is MessageKind.NEIGHBOR_SOLICITATION:
            iface = self.iface_by_addr(msg.body.target)
            if iface is not None and self.responds_to_probes:
                self.env.send_message(NeighborAdvertisementBody(msg.body.target),
                                      msg.src)
        else:
            self._count("unexpected_message")

    def accepts(self, pkt: Packet) -> bool:
        """Weak host rule: destination within any prefix the node owns."""
        return any(p.contains(pkt.selector.dst_addr) for p in self.owned_prefixes())

    def deliver(self, pkt: Packet, iface_index: int) -> bool:
        now = self.env.now()
        if not self.accepts(pkt):
            self._count("rejected_foreign")
            return False
        pkt.hop(self.id, now)
        self.deliveries.append((now, iface_index, pkt))
        # the merged logical interface hides which radio the packet used
        iface_tag = "lif" if self.host_model == "lif" else iface_index
        self.env.trace("pkt_deliver", flow=pkt.flow_id or str(pkt.selector),
                       seq=pkt.seq, iface=iface_tag,
                       link=self.interfaces[iface_index].link_id)
        return True


@dataclass
class CorrespondentNode:
    id: NodeId
    addr: bytes
    link_id: str
    received: list[tuple[int, Packet]] = field(default_factory=list)


class AaaServer:
    """Interface directory: authorization flag, node id and home prefixes."""

    def __init__(self, node_id: NodeId, env, directory) -> None:
        self.id = node_id
        self.env = env
        self.directory = directory  # InterfaceId -> (mn_id, hnp tuple) | None

    def handle_message(self, msg: ProtocolMessage) -> None:
        if msg.kind is not MessageKind.AAA_REQUEST:
            return
        hit = self.directory.get(msg.body.interface_id)
        if hit is None:
            body = AaaResponseBody(msg.body.interface_id, False, "", ())
        else:
            mn_id, hnp = hit
            body = AaaResponseBody(msg.body.interface_id, True, mn_id, hnp)
        self.env.send_message(body, msg.src)
