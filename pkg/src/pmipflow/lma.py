"""Local mobility anchor.

Holds the binding cache, per-flow routing state, the ordered rule table and
the user-space divert queue.  The anchor never talks to a clock or a socket
directly; everything goes through the env object handed in by the driver
(now / schedule / send_message / send_packet / trace), so unit tests can run
it against a fake environment.

Cost model, in abstract cost units (converted to simulated microseconds by
cost_unit_to_us):

* kernel fast path: base_kernel_cost + position * scan_cost_per_rule, where
  position is the 1-based index of the matching rule.  base_kernel_cost is
  the flow-granularity path; with flow mobility disabled the per-packet
  selector work is saved, so the base drops by selector_match_cost.
* user-space divert: flat divert_cost per packet.
* rule install latency: install_cost_base + n * install_cost_per_rule with
  n the number of rules already requested (pending installs included);
  completions are therefore monotone in request order.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .core import (
    MnId,
    NodeId,
    Packet,
    PbaBody,
    PbuBody,
    Prefix,
    ProtocolMessage,
    TrafficSelector,
    US_PER_S,
    BindingStatus,
    MessageKind,
)

BceKey = tuple[MnId, NodeId]  # (mobile node, serving gateway)


class NoRouteForMn(Exception):
    """No binding cache entry exists for the mobile node."""


@dataclass
class BindingCacheEntry:
    mn_id: MnId
    interface_id: object
    serving_mag: NodeId
    hnp: tuple[Prefix, ...]  # this interface's own prefixes
    expires_at: int
    tunnel_id: str
    mark: int
    informed_hnp: tuple[Prefix, ...] = ()  # full MN set last told to the gateway

    @property
    def key(self) -> BceKey:
        return (self.mn_id, self.serving_mag)


@dataclass
class RuleEntry:
    """One policy-routing rule; exactly one of selector/prefix is set."""

    mn_id: MnId
    mark: int
    tunnel_id: str
    active_at: int
    selector: TrafficSelector | None = None
    prefix: Prefix | None = None
    revoked: bool = False

    def matches(self, sel: TrafficSelector) -> bool:
        if self.selector is not None:
            return self.selector == sel
        assert self.prefix is not None
        return self.prefix.contains(sel.dst_addr)

    def describe(self) -> str:
        return str(self.selector) if self.selector is not None else str(self.prefix)


@dataclass
class FlowBinding:
    selector: TrafficSelector
    mn_id: MnId
    bce_key: BceKey
    rule: RuleEntry | None = None
    state: str = "active"  # active | dropped


class RuleTable:
    """Ordered rule list with linear-scan matching and modeled install latency."""

    def __init__(self, scan_cost_per_rule: float, install_cost_base: float,
                 install_cost_per_rule: float) -> None:
        self.scan_cost_per_rule = scan_cost_per_rule
        self.install_cost_base = install_cost_base
        self.install_cost_per_rule = install_cost_per_rule
        self.entries: list[RuleEntry] = []

    def install_latency_units(self) -> float:
        # grows with the table size at request time, pending rules included
        return self.install_cost_base + len(self.entries) * self.install_cost_per_rule

    def append(self, entry: RuleEntry) -> int:
        """Add a rule at the tail; returns the rule count present before it."""
        n_before = len(self.entries)
        self.entries.append(entry)
        return n_before

    def remove(self, entry: RuleEntry) -> None:
        entry.revoked = True
        self.entries.remove(entry)

    def match(self, sel: TrafficSelector, now: int) -> tuple[RuleEntry, int] | None:
        """First active matching rule and its 1-based scan position."""
        for idx, entry in enumerate(self.entries):
            if entry.active_at <= now and entry.matches(sel):
                return entry, idx + 1
        return None

    def __len__(self) -> int:
        return len(self.entries)


class DivertQueue:
    """Packets parked in user space while their flow has no active rule."""

    def __init__(self) -> None:
        self.items: list[Packet] = []

    def push(self, pkt: Packet) -> None:
        self.items.append(pkt)

    def pull(self, sel: TrafficSelector) -> list[Packet]:
        taken = [p for p in self.items if p.selector == sel]
        if taken:
            self.items = [p for p in self.items if p.selector != sel]
        return taken

    def __len__(self) -> int:
        return len(self.items)


class SchedulerPolicy:
    """Chooses which binding carries a flow, given the live candidates."""

    def choose(self, mn_id: MnId, sel: TrafficSelector, candidates: list[BceKey]) -> BceKey:
        raise NotImplementedError


class PinnedPolicy(SchedulerPolicy):
    """Static preference list of gateway ids; falls back to candidate order."""

    def __init__(self, preferences: tuple[str, ...] = ()) -> None:
        self.preferences = tuple(preferences)

    def choose(self, mn_id, sel, candidates):
        for mag in self.preferences:
            for key in candidates:
                if key[1] == mag:
                    return key
        return candidates[0]


class RandomPolicy(SchedulerPolicy):
    def __init__(self, rng: random.Random) -> None:
        self.rng = rng

    def choose(self, mn_id, sel, candidates):
        return self.rng.choice(candidates)


class CallbackPolicy(SchedulerPolicy):
    """Defers to an external decision function."""

    def __init__(self, fn) -> None:
        self.fn = fn

    def choose(self, mn_id, sel, candidates):
        key = self.fn(mn_id, sel, list(candidates))
        if key not in candidates:
            raise ValueError(f"external policy chose {key}, not a live binding")
        return key


@dataclass
class ForwardOutcome:
    path: str  # fast | diverted | dropped
    cost_units: float = 0.0
    tunnel_id: str | None = None
    position: int = 0
    reason: str = ""


class LocalMobilityAnchor:
    def __init__(self, node_id: NodeId, env, *, tunnels: dict[NodeId, tuple[str, int]],
                 policy: SchedulerPolicy, knobs, cn_links: dict[bytes, str] | None = None,
                 denied_mns: tuple[str, ...] = (), max_bindings: int = 0) -> None:
        self.id = node_id
        self.env = env
        self.tunnels = tunnels
        self.policy = policy
        self.knobs = knobs
        self.cn_links = cn_links or {}
        self.denied_mns = set(denied_mns)
        self.max_bindings = max_bindings
        self.flow_mobility: bool = knobs.flow_mobility

        self.bindings: dict[BceKey, BindingCacheEntry] = {}
        # prefixes each MN brought along, across all its interfaces; gateways
        # get the union so flows can ride any of the MN's tunnels
        self.mn_prefixes: dict[MnId, dict[Prefix, None]] = {}
        self.flows: dict[TrafficSelector, FlowBinding] = {}
        self.rules = RuleTable(knobs.scan_cost_per_rule, knobs.install_cost_base,
                               knobs.install_cost_per_rule)
        self.queue = DivertQueue()
        self.counters: dict[str, int] = {}
        self._last_install_done = 0  # installs are serialized, fifo completion

    # -- helpers -----------------------------------------------------------

    def _count(self, name: str) -> None:
        self.counters[name] = self.counters.get(name, 0) + 1

    def _units_to_us(self, units: float) -> int:
        return round(units * self.knobs.cost_unit_to_us)

    def _find_by_iface(self, mn_id: MnId, iface) -> BindingCacheEntry | None:
        for bce in self.bindings.values():
            if bce.mn_id == mn_id and bce.interface_id == iface:
                return bce
        return None

    def _candidates(self, mn_id: MnId) -> list[BceKey]:
        return [key for key in self.bindings if key[0] == mn_id]

    def _remember_prefixes(self, mn_id: MnId, hnp: tuple[Prefix, ...]) -> None:
        bag = self.mn_prefixes.setdefault(mn_id, {})
        for p in hnp:
            bag[p] = None

    def _union_hnp(self, mn_id: MnId, first: tuple[Prefix, ...] = ()) -> tuple[Prefix, ...]:
        out = list(first)
        for p in self.mn_prefixes.get(mn_id, {}):
            if p not in out:
                out.append(p)
        return tuple(out)

    def _ensure_informed(self, key: BceKey) -> None:
        """Push the MN's full prefix set to a gateway that lacks part of it."""
        bce = self.bindings[key]
        union = self._union_hnp(bce.mn_id, bce.hnp)
        if bce.informed_hnp == union:
            return
        bce.informed_hnp = union
        remaining = max(1, round((bce.expires_at - self.env.now()) / US_PER_S))
        self.env.trace("prefix_refresh", mn=bce.mn_id, mag=key[1],
                       hnp=",".join(map(str, union)))
        self.env.send_message(
            PbaBody(bce.mn_id, bce.interface_id, union, remaining, 0,
                    BindingStatus.SUCCESS), key[1])

    @staticmethod
    def _flow_label(pkt: Packet) -> str:
        return pkt.flow_id or str(pkt.selector)

    # -- control plane -----------------------------------------------------

    def handle_message(self, msg: ProtocolMessage) -> None:
        if msg.kind is MessageKind.PBU:
            pba = self.handle_pbu(msg.body, msg.src)
            self.env.send_message(pba, msg.src)
        else:
            self._count("unexpected_message")
            self.env.trace("anomaly", what="unexpected_message", kind=msg.kind.name)

    def handle_pbu(self, pbu: PbuBody, from_mag: NodeId) -> PbaBody:
        """Apply one binding update and build the acknowledgement."""
        now = self.env.now()

        def pba(status: BindingStatus, lifetime: int = pbu.lifetime) -> PbaBody:
            return PbaBody(pbu.mn_id, pbu.interface_id, pbu.hnp, lifetime,
                           pbu.sequence, status)

        if pbu.lifetime == 0:
            return self._deregister(pbu, from_mag, pba)

        if pbu.mn_id in self.denied_mns:
            self._count("pbu_denied")
            self.env.trace("bce_update", action="reject", mn=pbu.mn_id, mag=from_mag,
                           status=int(BindingStatus.ERROR_ADMIN_PROHIBITED))
            return pba(BindingStatus.ERROR_ADMIN_PROHIBITED)

        existing = self._find_by_iface(pbu.mn_id, pbu.interface_id)
        if existing is None:
            return self._register(pbu, from_mag, now, pba)
        if existing.serving_mag == from_mag:
            return self._renew(existing, pbu, now, pba)
        return self._handover(existing, pbu, from_mag, now, pba)

    def _register(self, pbu, from_mag, now, pba) -> PbaBody:
        key = (pbu.mn_id, from_mag)
        if key in self.bindings:
            # this gateway already serves another interface of the MN; the
            # cache is keyed by (MN, gateway) so a second entry cannot exist
            self._count("pbu_conflict")
            self.env.trace("anomaly", what="bce_key_conflict", mn=pbu.mn_id, mag=from_mag)
            return pba(BindingStatus.ERROR_ADMIN_PROHIBITED)
        if self.max_bindings and len(self.bindings) >= self.max_bindings:
            self._count("pbu_no_resources")
            self.env.trace("bce_update", action="reject", mn=pbu.mn_id, mag=from_mag,
                           status=int(BindingStatus.ERROR_NO_RESOURCES))
            return pba(BindingStatus.ERROR_NO_RESOURCES)

        tunnel_id, mark = self.tunnels[from_mag]
        bce = BindingCacheEntry(pbu.mn_id, pbu.interface_id, from_mag, pbu.hnp,
                                now + pbu.lifetime * US_PER_S, tunnel_id, mark)
        self.bindings[key] = bce
        self._remember_prefixes(pbu.mn_id, pbu.hnp)
        bce.informed_hnp = self._union_hnp(pbu.mn_id, pbu.hnp)
        self.env.trace("bce_update", action="register", mn=pbu.mn_id, mag=from_mag,
                       iface=str(pbu.interface_id), status=0, size=len(self.bindings))
        if not self.flow_mobility:
            for prefix in bce.hnp:
                self._install_rule(RuleEntry(bce.mn_id, bce.mark, bce.tunnel_id, 0,
                                             prefix=prefix), now)
        return PbaBody(pbu.mn_id, pbu.interface_id, bce.informed_hnp, pbu.lifetime,
                       pbu.sequence, BindingStatus.SUCCESS)

    def _renew(self, bce, pbu, now, pba) -> PbaBody:
        bce.expires_at = now + pbu.lifetime * US_PER_S
        if pbu.hnp != bce.hnp:
            # prefix set changed under an existing binding: accept but flag it
            self._count("hnp_overwrite")
            self.env.trace("anomaly", what="hnp_overwrite", mn=pbu.mn_id,
                           old=",".join(map(str, bce.hnp)), new=",".join(map(str, pbu.hnp)))
            bce.hnp = pbu.hnp
        self._remember_prefixes(pbu.mn_id, pbu.hnp)
        bce.informed_hnp = self._union_hnp(pbu.mn_id, bce.hnp)
        self.env.trace("bce_update", action="renew", mn=pbu.mn_id, mag=bce.serving_mag,
                       status=0, size=len(self.bindings))
        return PbaBody(pbu.mn_id, pbu.interface_id, bce.informed_hnp, pbu.lifetime,
                       pbu.sequence, BindingStatus.SUCCESS)

    def _handover(self, bce, pbu, from_mag, now, pba) -> PbaBody:
        new_key = (pbu.mn_id, from_mag)
        if new_key in self.bindings:
            self._count("pbu_conflict")
            self.env.trace("anomaly", what="bce_key_conflict", mn=pbu.mn_id, mag=from_mag)
            return pba(BindingStatus.ERROR_ADMIN_PROHIBITED)

        old_key = bce.key
        del self.bindings[old_key]
        tunnel_id, mark = self.tunnels[from_mag]
        bce.serving_mag = from_mag
        bce.tunnel_id = tunnel_id
        bce.mark = mark
        bce.hnp = pbu.hnp
        bce.expires_at = now + pbu.lifetime * US_PER_S
        self.bindings[new_key] = bce
        self._remember_prefixes(pbu.mn_id, pbu.hnp)
        bce.informed_hnp = self._union_hnp(pbu.mn_id, bce.hnp)
        self.env.trace("bce_update", action="handover", mn=pbu.mn_id,
                       old_mag=old_key[1], mag=from_mag, status=0,
                       size=len(self.bindings))
        if self.flow_mobility:
            self._repoint_flows(old_key, new_key, now)
        else:
            self._drop_prefix_rules(old_key)
            for prefix in bce.hnp:
                self._install_rule(RuleEntry(bce.mn_id, mark, tunnel_id, 0,
                                             prefix=prefix), now)
        return PbaBody(pbu.mn_id, pbu.interface_id, bce.informed_hnp, pbu.lifetime,
                       pbu.sequence, BindingStatus.SUCCESS)

    def _deregister(self, pbu, from_mag, pba) -> PbaBody:
        bce = self._find_by_iface(pbu.mn_id, pbu.interface_id)
        if bce is None:
            # replayed or stale deregistration; acknowledge and move on
            self._count("dereg_noop")
            self.env.trace("bce_update", action="delete_noop", mn=pbu.mn_id,
                           mag=from_mag, status=0, size=len(self.bindings))
            return pba(BindingStatus.SUCCESS, lifetime=0)
        if bce.serving_mag != from_mag:
            self._count("dereg_stale")
            self.env.trace("anomaly", what="stale_dereg", mn=pbu.mn_id, mag=from_mag,
                           serving=bce.serving_mag)
            return pba(BindingStatus.SUCCESS, lifetime=0)

        key = bce.key
        del self.bindings[key]
        self.env.trace("bce_update", action="delete", mn=pbu.mn_id, mag=from_mag,
                       status=0, size=len(self.bindings))
        if self.flow_mobility:
            self.reroute_flows(pbu.mn_id, {key})
        else:
            self._drop_prefix_rules(key)
        if not self._candidates(pbu.mn_id):
            self.mn_prefixes.pop(pbu.mn_id, None)
        return pba(BindingStatus.SUCCESS, lifetime=0)

    # -- flow scheduling ----------------------------------------------------

    def classify(self, pkt: Packet) -> MnId | None:
        """Map a packet to its mobile node by longest matching home prefix."""
        self._count("classify_calls")
        self.env.trace("classify", flow=self._flow_label(pkt), sel=str(pkt.selector))
        best: tuple[int, MnId] | None = None
        for mn_id, bag in self.mn_prefixes.items():
            for prefix in bag:
                if prefix.contains(pkt.selector.dst_addr):
                    if best is None or prefix.length > best[0]:
                        best = (prefix.length, mn_id)
        return best[1] if best else None

    def schedule_flow(self, mn_id: MnId, sel: TrafficSelector) -> BceKey:
        """Bind a new flow to one of the MN's bindings and install its rule."""
        binding = FlowBinding(sel, mn_id, ("", ""))
        placed = self._place_flow(binding)
        if not placed:
            raise NoRouteForMn(mn_id)
        self.flows[sel] = binding
        return binding.bce_key

    def _place_flow(self, binding: FlowBinding) -> bool:
        candidates = self._candidates(binding.mn_id)
        if not candidates:
            binding.state = "dropped"
            return False
        key = self.policy.choose(binding.mn_id, binding.selector, candidates)
        bce = self.bindings[key]
        binding.bce_key = key
        binding.state = "active"
        now = self.env.now()
        self._ensure_informed(key)
        binding.rule = RuleEntry(binding.mn_id, bce.mark, bce.tunnel_id, 0,
                                 selector=binding.selector)
        self.env.trace("flow_bind", flow=str(binding.selector), mn=binding.mn_id,
                       mag=key[1])
        self._install_rule(binding.rule, now)
        return True

    def reroute_flows(self, mn_id: MnId, dead_keys: set[BceKey]) -> None:
        """Re-schedule flows stranded by removed bindings; drop if none remain."""
        now = self.env.now()
        for binding in list(self.flows.values()):
            if binding.mn_id != mn_id or binding.state != "active":
                continue
            if binding.bce_key not in dead_keys:
                continue
            old_mag = binding.bce_key[1]
            self._revoke_rule(binding)
            if self._place_flow(binding):
                self.env.trace("flow_reroute", flow=str(binding.selector),
                               old_mag=old_mag, mag=binding.bce_key[1])
            else:
                self.env.trace("flow_dropped", flow=str(binding.selector))
                self._drop_queued(binding.selector, "no_path")

    def _repoint_flows(self, old_key: BceKey, new_key: BceKey, now: int) -> None:
        """After a handover the binding survives; move its flows with it."""
        bce = self.bindings[new_key]
        self._ensure_informed(new_key)
        for binding in self.flows.values():
            if binding.state != "active" or binding.bce_key != old_key:
                continue
            self._revoke_rule(binding)
            binding.bce_key = new_key
            binding.rule = RuleEntry(binding.mn_id, bce.mark, bce.tunnel_id, 0,
                                     selector=binding.selector)
            self.env.trace("flow_reroute", flow=str(binding.selector),
                           old_mag=old_key[1], mag=new_key[1])
            self._install_rule(binding.rule, now)

    # -- rule table ---------------------------------------------------------

    def _install_rule(self, entry: RuleEntry, now: int) -> None:
        latency_units = self.rules.install_latency_units()
        n_before = self.rules.append(entry)
        entry.active_at = max(now + self._units_to_us(latency_units),
                              self._last_install_done)
        self._last_install_done = entry.active_at
        self.env.trace("rule_install", rule=entry.describe(), n_before=n_before,
                       latency_units=latency_units, active_at=entry.active_at,
                       size=len(self.rules))
        delay = entry.active_at - now
        self.env.schedule(delay, lambda: self._on_rule_active(entry))

    def _on_rule_active(self, entry: RuleEntry) -> None:
        if entry.revoked:
            return
        self.env.trace("rule_active", rule=entry.describe(), size=len(self.rules))
        if entry.selector is None:
            return
        for pkt in self.queue.pull(entry.selector):
            self.env.trace("pkt_release", flow=self._flow_label(pkt), seq=pkt.seq,
                           tunnel=entry.tunnel_id)
            self.env.send_packet(pkt, entry.tunnel_id, 0)

    def _revoke_rule(self, binding: FlowBinding) -> None:
        if binding.rule is not None and not binding.rule.revoked:
            self.rules.remove(binding.rule)
            self.env.trace("rule_remove", rule=binding.rule.describe(),
                           size=len(self.rules))
        binding.rule = None

    def _drop_prefix_rules(self, key: BceKey) -> None:
        dead = [e for e in self.rules.entries
                if e.prefix is not None and e.mn_id == key[0]]
        for entry in dead:
            self.rules.remove(entry)
            self.env.trace("rule_remove", rule=entry.describe(), size=len(self.rules))

    def _drop_queued(self, sel: TrafficSelector, reason: str) -> None:
        for pkt in self.queue.pull(sel):
            self._count("pkt_dropped")
            self.env.trace("pkt_drop", flow=self._flow_label(pkt), seq=pkt.seq,
                           reason=reason)

    # -- data plane ---------------------------------------------------------

    def on_downlink_packet(self, pkt: Packet) -> ForwardOutcome:
        now = self.env.now()
        pkt.hop(self.id, now)
        hit = self.rules.match(pkt.selector, now)
        if hit is not None:
            entry, pos = hit
            units = self.knobs.base_kernel_cost + pos * self.knobs.scan_cost_per_rule
            if not self.flow_mobility:
                units -= self.knobs.selector_match_cost
            self.env.trace("pkt_fastpath", flow=self._flow_label(pkt), seq=pkt.seq,
                           pos=pos, cost=units, tunnel=entry.tunnel_id)
            self.env.send_packet(pkt, entry.tunnel_id, self._units_to_us(units))
            return ForwardOutcome("fast", units, entry.tunnel_id, pos)

        if not self.flow_mobility:
            # bypass mode has no user-space recovery path
            self._count("pkt_dropped")
            self.env.trace("pkt_drop", flow=self._flow_label(pkt), seq=pkt.seq,
                           reason="no_rule")
            return ForwardOutcome("dropped", reason="no_rule")

        units = self.knobs.divert_cost
        self.env.trace("pkt_divert", flow=self._flow_label(pkt), seq=pkt.seq,
                       cost=units, qlen=len(self.queue) + 1)
        binding = self.flows.get(pkt.selector)
        if binding is None or binding.state == "dropped":
            mn_id = self.classify(pkt)
            if mn_id is None:
                self._count("pkt_unroutable")
                self.env.trace("pkt_drop", flow=self._flow_label(pkt), seq=pkt.seq,
                               reason="unroutable")
                return ForwardOutcome("dropped", units, reason="unroutable")
            if binding is None:
                try:
                    self.schedule_flow(mn_id, pkt.selector)
                except NoRouteForMn:
                    self._count("pkt_unroutable")
                    self.env.trace("pkt_drop", flow=self._flow_label(pkt),
                                   seq=pkt.seq, reason="unroutable")
                    return ForwardOutcome("dropped", units, reason="unroutable")
            else:
                if not self._place_flow(binding):
                    self._count("pkt_unroutable")
                    self.env.trace("pkt_drop", flow=self._flow_label(pkt),
                                   seq=pkt.seq, reason="unroutable")
                    return ForwardOutcome("dropped", units, reason="unroutable")
        self.queue.push(pkt)
        return ForwardOutcome("diverted", units)

    def on_uplink_packet(self, pkt: Packet) -> ForwardOutcome:
        now = self.env.now()
        pkt.hop(self.id, now)
        link = self.cn_links.get(pkt.selector.dst_addr)
        if link is None:
            self._count("pkt_dropped")
            self.env.trace("pkt_drop", flow=self._flow_label(pkt), seq=pkt.seq,
                           reason="no_uplink_route")
            return ForwardOutcome("dropped", reason="no_uplink_route")
        units = self.knobs.base_kernel_cost
        self.env.trace("pkt_uplink", flow=self._flow_label(pkt), seq=pkt.seq,
                       cost=units)
        self.env.send_packet(pkt, link, self._units_to_us(units))
        return ForwardOutcome("fast", units, link)
