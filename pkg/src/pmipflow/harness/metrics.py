"""Turns a run trace into numbers.

Everything here is derived from trace records only, never from live entity
state, so the same analysis can be replayed against a trace loaded from disk.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field

from .trace import TraceLog, TraceRecord, format_value


class NoHandoverObserved(Exception):
    """The flow never resumed on a different link."""


@dataclass
class FlowMetrics:
    """Per-flow packet accounting."""

    flow_id: str
    emitted: int = 0
    delivered: int = 0
    dropped: int = 0
    diverted: int = 0
    released: int = 0
    emit_at: dict[int, int] = field(default_factory=dict)
    deliveries: list[tuple[int, int, str]] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)

    @property
    def in_flight(self) -> int:
        return self.emitted - self.delivered - self.dropped

    def delays_us(self) -> list[int]:
        """One-way delay per delivered packet, in emission order."""
        out = []
        for t, seq, _link in self.deliveries:
            sent = self.emit_at.get(seq)
            if sent is not None:
                out.append(t - sent)
        return out

    def delivery_gap(self, period_us: int, after_us: int = 0):
        """Estimate at the first link change after after_us.

        The estimate is what an observer at the host can compute: the gap
        between the last delivery on the old link and the first on the new
        one, minus one inter-packet period.  Returns None when the flow never
        changed links.
        """
        prev = None
        for t, _seq, link in self.deliveries:
            if prev is not None and link != prev[1] and t >= after_us:
                gap = t - prev[0]
                return {
                    "last_old_us": prev[0],
                    "first_new_us": t,
                    "old_link": prev[1],
                    "new_link": link,
                    "gap_us": gap,
                    "estimate_us": gap - period_us,
                }
            prev = (t, link)
        return None


@dataclass
class MetricSet:
    flows: dict[str, FlowMetrics] = field(default_factory=dict)
    lma_fast_costs: list[float] = field(default_factory=list)
    lma_divert_costs: list[float] = field(default_factory=list)
    lma_uplink_costs: list[float] = field(default_factory=list)
    mag_costs: list[float] = field(default_factory=list)
    installs: list[tuple[int, float]] = field(default_factory=list)
    msg_counts: Counter = field(default_factory=Counter)
    drops_by_reason: Counter = field(default_factory=Counter)
    anomalies: list[TraceRecord] = field(default_factory=list)
    link_events: list[tuple[int, str, str]] = field(default_factory=list)
    table_sizes: list[tuple[int, int]] = field(default_factory=list)

    @classmethod
    def from_trace(cls, trace: TraceLog) -> "MetricSet":
        m = cls()
        for rec in trace.records:
            kind = rec.kind
            if kind == "pkt_emit":
                fm = m._flow(rec.get("flow"))
                fm.emitted += 1
                fm.emit_at[rec.get("seq")] = rec.t_us
            elif kind == "pkt_deliver":
                fm = m._flow(rec.get("flow"))
                fm.delivered += 1
                fm.deliveries.append((rec.t_us, rec.get("seq"), rec.get("link")))
            elif kind == "pkt_drop":
                fm = m._flow(rec.get("flow"))
                fm.dropped += 1
                m.drops_by_reason[rec.get("reason")] += 1
            elif kind == "pkt_divert":
                fm = m._flow(rec.get("flow"))
                fm.diverted += 1
                m.lma_divert_costs.append(rec.get("cost"))
            elif kind == "pkt_release":
                m._flow(rec.get("flow")).released += 1
            elif kind == "pkt_fastpath":
                cost = rec.get("cost")
                fm = m._flow(rec.get("flow"))
                fm.costs.append(cost)
                fm.positions.append(rec.get("pos"))
                m.lma_fast_costs.append(cost)
            elif kind == "pkt_uplink":
                m.lma_uplink_costs.append(rec.get("cost"))
            elif kind == "mag_fastpath":
                m.mag_costs.append(rec.get("cost"))
            elif kind == "rule_install":
                m.installs.append((rec.get("n_before"), rec.get("latency_units")))
                m.table_sizes.append((rec.t_us, rec.get("size")))
            elif kind == "rule_remove":
                m.table_sizes.append((rec.t_us, rec.get("size")))
            elif kind == "msg_send":
                m.msg_counts[rec.get("msg")] += 1
            elif kind == "anomaly":
                m.anomalies.append(rec)
            elif kind == "link_state":
                m.link_events.append((rec.t_us, rec.entity, rec.get("state")))
        return m

    def _flow(self, flow_id: str) -> FlowMetrics:
        fm = self.flows.get(flow_id)
        if fm is None:
            fm = FlowMetrics(flow_id)
            self.flows[flow_id] = fm
        return fm

    def conservation(self) -> dict[str, tuple[int, int, int, int]]:
        """flow id -> (emitted, delivered, dropped, in_flight)."""
        return {fid: (fm.emitted, fm.delivered, fm.dropped, fm.in_flight)
                for fid, fm in self.flows.items()}

    def check_conservation(self) -> None:
        """Every emitted packet must be delivered, dropped, or in flight."""
        for fid, (emitted, delivered, dropped, in_flight) in self.conservation().items():
            if in_flight < 0:
                raise AssertionError(
                    f"flow {fid}: {delivered} delivered + {dropped} dropped "
                    f"exceeds {emitted} emitted")

    def link_down_at(self, link_id: str) -> int | None:
        """Time of the first recorded down transition for a link."""
        for t, ent, state in self.link_events:
            if ent == link_id and state == "down":
                return t
        return None


def measure_handover(metrics: MetricSet, flow_id: str, period_us: int,
                     link_id: str | None = None) -> dict:
    """Handover estimate for a flow, plus ground truth when link_id is given.

    The estimate (estimate_us) is the host-observable one: inter-delivery gap
    across the link change minus one period.  With link_id, the search is
    anchored at that link's recorded down transition so an earlier, unrelated
    reroute cannot be mistaken for the failure under study, and the dict also
    carries truth_us: the span from the down transition to the first delivery
    on the new path, which only the simulator can see.

    Raises NoHandoverObserved when the flow never resumed on a new link (or,
    with link_id, when that link never went down).
    """
    fm = metrics.flows.get(flow_id)
    if fm is None:
        raise NoHandoverObserved(f"flow {flow_id} delivered nothing")
    after_us = 0
    t_down = None
    if link_id is not None:
        t_down = metrics.link_down_at(link_id)
        if t_down is None:
            raise NoHandoverObserved(f"link {link_id} never went down")
        after_us = t_down
    gap = fm.delivery_gap(period_us, after_us=after_us)
    if gap is None:
        raise NoHandoverObserved(f"flow {flow_id} never resumed elsewhere")
    if t_down is not None:
        gap["event_us"] = t_down
        gap["truth_us"] = gap["first_new_us"] - t_down
    return gap


def emit_csv(path, fieldnames: list[str], rows: list[dict]) -> None:
    """Write rows as CSV with stable float formatting (six significant digits)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_value(row.get(name, "")) for name in fieldnames])
