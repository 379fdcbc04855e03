"""Hand-driven environment stand-ins for unit testing protocol entities."""
import heapq

from pmipflow.core import ProtocolMessage
from pmipflow.harness.scenario import Knobs


class FakeEnv:
    """Implements the env protocol (now/schedule/send/trace) without a simulator."""

    def __init__(self):
        self.t = 0
        self.sent = []  # (t, body, dst)
        self.packets = []  # (t, pkt, link_id, extra_us)
        self.records = []  # (t, kind, fields)
        self._timers = []
        self._seq = 0

    def now(self):
        return self.t

    def schedule(self, delay_us, fn):
        heapq.heappush(self._timers, (self.t + delay_us, self._seq, fn))
        self._seq += 1

    def send_message(self, body, dst):
        self.sent.append((self.t, body, dst))

    def send_packet(self, pkt, link_id, extra_us):
        self.packets.append((self.t, pkt, link_id, extra_us))

    def trace(self, kind, **fields):
        self.records.append((self.t, kind, fields))

    def run_until(self, t):
        while self._timers and self._timers[0][0] <= t:
            fire, _, fn = heapq.heappop(self._timers)
            if fire > self.t:
                self.t = fire
            fn()
        self.t = max(self.t, t)

    def advance(self, dt):
        self.run_until(self.t + dt)

    def kinds(self, kind):
        return [r for r in self.records if r[1] == kind]


def make_knobs(**overrides) -> Knobs:
    return Knobs(**overrides)


class _BusEnv:
    """Env bound to one node on a FakeBus."""

    def __init__(self, bus, node_id):
        self.bus = bus
        self.node_id = node_id

    def now(self):
        return self.bus.t

    def schedule(self, delay_us, fn):
        self.bus.push_timer(delay_us, fn)

    def send_message(self, body, dst):
        self.bus.dispatch(ProtocolMessage.make(body, self.node_id, dst, self.bus.t))

    def send_packet(self, pkt, link_id, extra_us):
        self.bus.packets.append((self.bus.t, self.node_id, pkt, link_id, extra_us))

    def trace(self, kind, **fields):
        self.bus.records.append((self.bus.t, self.node_id, kind, fields))


class FakeBus:
    """Zero-latency synchronous message fabric for wiring entities in tests."""

    def __init__(self):
        self.t = 0
        self.nodes = {}
        self.log = []  # (t, src, dst, kind)
        self.records = []
        self.packets = []
        self._timers = []
        self._seq = 0

    def register(self, node_id, obj):
        self.nodes[node_id] = obj

    def env(self, node_id):
        return _BusEnv(self, node_id)

    def push_timer(self, delay_us, fn):
        heapq.heappush(self._timers, (self.t + delay_us, self._seq, fn))
        self._seq += 1

    def dispatch(self, msg):
        self.log.append((self.t, msg.src, msg.dst, msg.kind))
        target = self.nodes.get(msg.dst)
        if target is not None:
            target.handle_message(msg)

    def run_until(self, t):
        while self._timers and self._timers[0][0] <= t:
            fire, _, fn = heapq.heappop(self._timers)
            if fire > self.t:
                self.t = fire
            fn()
        self.t = max(self.t, t)

    def kind_sequence(self):
        return [(src, dst, kind.name) for _, src, dst, kind in self.log]

