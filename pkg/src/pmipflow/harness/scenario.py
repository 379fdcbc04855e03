"""Scenario files: TOML grammar, validation and the in-memory model.

A scenario fully describes one simulated deployment: cost knobs, the anchor,
the AAA directory, femtocells with their event brokers, access links,
gateways, mobile nodes, correspondent nodes, traffic flows and a timeline of
attachment/link events.  Loading is strict; anything unresolved, duplicated
or physically impossible raises ScenarioInvalid naming the offending element.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from importlib import resources

try:
    import tomllib
except ImportError:  # python 3.10
    import tomli as tomllib

from ..core import (
    LinkAddr,
    Prefix,
    TrafficSelector,
    ms_to_us,
    parse_ip6,
)


class ScenarioInvalid(Exception):
    pass


@dataclass(frozen=True)
class Knobs:
    """Model constants; costs are abstract units, cost_unit_to_us maps to time."""

    flow_mobility: bool = True
    d_detect_ms: float = 50.0
    cost_unit_to_us: float = 1.0
    base_kernel_cost: float = 20.0
    scan_cost_per_rule: float = 0.05
    selector_match_cost: float = 5.0
    divert_cost: float = 200.0
    mag_forward_cost: float = 12.0
    install_cost_base: float = 25.0
    install_cost_per_rule: float = 0.05
    bce_lifetime_s: int = 300
    renewal_margin_s: int = 30
    lifetime_tick_ms: float = 1000.0
    probe_timeout_ms: float = 1000.0
    probe_retries: int = 1
    mih_local_latency_ms: float = 0.0
    link_loss_probability: float = 0.0


@dataclass(frozen=True)
class SchedulerSpec:
    mode: str = "pinned"  # pinned | random | external
    preference: tuple[str, ...] = ()


@dataclass(frozen=True)
class LmaSpec:
    id: str = "lma"
    max_bindings: int = 0  # 0 means unbounded
    denied_mns: tuple[str, ...] = ()


@dataclass(frozen=True)
class AaaSpec:
    id: str = "aaa"
    latency_ms: float = 0.5


@dataclass(frozen=True)
class FemtocellSpec:
    id: str
    mihf: str


@dataclass(frozen=True)
class LinkSpec:
    id: str
    femtocell: str
    technology: str
    latency_ms: float
    initially_up: bool = True


@dataclass(frozen=True)
class MagSpec:
    id: str
    femtocell: str
    access_link: str
    tunnel_latency_ms: float


@dataclass(frozen=True)
class MnInterfaceSpec:
    link_addr: LinkAddr
    link: str
    prefix: Prefix
    authorized: bool = True


@dataclass(frozen=True)
class MnSpec:
    id: str
    host_model: str  # weak | lif
    responds_to_probes: bool
    interfaces: tuple[MnInterfaceSpec, ...]


@dataclass(frozen=True)
class CnSpec:
    id: str
    addr: bytes
    latency_ms: float


@dataclass(frozen=True)
class FlowSpec:
    id: str
    cn: str
    selector: TrafficSelector
    rate_kbps: int
    packet_size: int
    period_us: int
    start_us: int
    stop_us: int | None
    pin: str | None = None


@dataclass(frozen=True)
class TimelineEvent:
    at_us: int
    action: str  # attach | detach | link_down | link_up
    mn: str | None = None
    interface: int = 0
    link: str | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    horizon_us: int
    knobs: Knobs
    scheduler: SchedulerSpec
    lma: LmaSpec
    aaa: AaaSpec
    femtocells: tuple[FemtocellSpec, ...]
    links: tuple[LinkSpec, ...]
    mags: tuple[MagSpec, ...]
    mns: tuple[MnSpec, ...]
    cns: tuple[CnSpec, ...]
    flows: tuple[FlowSpec, ...]
    timeline: tuple[TimelineEvent, ...]

    def link_by_id(self, link_id: str) -> LinkSpec:
        for link in self.links:
            if link.id == link_id:
                return link
        raise KeyError(link_id)


_MISSING = object()


def _expect(table: dict, key: str, kinds, ctx: str, default=_MISSING):
    if key not in table:
        if default is not _MISSING:
            return default
        raise ScenarioInvalid(f"{ctx}: missing key '{key}'")
    value = table[key]
    kind_tuple = kinds if isinstance(kinds, tuple) else (kinds,)
    if not isinstance(value, kind_tuple) or (
        isinstance(value, bool) and bool not in kind_tuple
    ):
        raise ScenarioInvalid(f"{ctx}: key '{key}' has wrong type {type(value).__name__}")
    return value


def _number(table, key, ctx, default=None):
    kwargs = {} if default is None else {"default": default}
    value = _expect(table, key, (int, float), ctx, **kwargs)
    return value


def _check_unknown(table: dict, allowed: set[str], ctx: str) -> None:
    for key in table:
        if key not in allowed:
            raise ScenarioInvalid(f"{ctx}: unknown key '{key}'")


def _build_knobs(doc: dict) -> Knobs:
    raw = doc.get("knobs", {})
    known = {f.name: f.type for f in fields(Knobs)}
    _check_unknown(raw, set(known), "[knobs]")
    values = {}
    for name, value in raw.items():
        if name == "flow_mobility":
            if not isinstance(value, bool):
                raise ScenarioInvalid("[knobs]: flow_mobility must be a boolean")
            values[name] = value
        elif name in ("probe_retries", "bce_lifetime_s", "renewal_margin_s"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ScenarioInvalid(f"[knobs]: {name} must be an integer")
            values[name] = value
        else:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ScenarioInvalid(f"[knobs]: {name} must be a number")
            values[name] = float(value)
    knobs = Knobs(**values)
    for name in ("cost_unit_to_us", "base_kernel_cost", "scan_cost_per_rule",
                 "selector_match_cost", "divert_cost", "mag_forward_cost",
                 "install_cost_base", "install_cost_per_rule", "d_detect_ms",
                 "lifetime_tick_ms", "probe_timeout_ms"):
        if getattr(knobs, name) < 0:
            raise ScenarioInvalid(f"[knobs]: {name} must be >= 0")
    if not 0.0 <= knobs.link_loss_probability <= 1.0:
        raise ScenarioInvalid("[knobs]: link_loss_probability must be within [0, 1]")
    if knobs.probe_retries < 0:
        raise ScenarioInvalid("[knobs]: probe_retries must be >= 0")
    if knobs.renewal_margin_s < 0 or knobs.bce_lifetime_s <= knobs.renewal_margin_s:
        raise ScenarioInvalid("[knobs]: need bce_lifetime_s > renewal_margin_s >= 0")
    if knobs.base_kernel_cost < knobs.selector_match_cost:
        raise ScenarioInvalid("[knobs]: base_kernel_cost must cover selector_match_cost")
    return knobs


def _build_selector(cn: CnSpec, table: dict, ctx: str) -> TrafficSelector:
    dst = _expect(table, "dst", str, ctx)
    try:
        dst_addr = parse_ip6(dst)
    except ValueError as exc:
        raise ScenarioInvalid(f"{ctx}: bad dst address {dst!r}") from exc
    return TrafficSelector(
        src_addr=cn.addr,
        dst_addr=dst_addr,
        src_port=_expect(table, "src_port", int, ctx),
        dst_port=_expect(table, "dst_port", int, ctx, default=6000),
        protocol=_expect(table, "protocol", int, ctx, default=17),
        flow_label=_expect(table, "flow_label", int, ctx, default=0),
    )


def _flow_period_us(packet_size: int, rate_kbps: int, ctx: str) -> int:
    if packet_size <= 0 or rate_kbps <= 0:
        raise ScenarioInvalid(f"{ctx}: packet_size and rate_kbps must be positive")
    bits_us = packet_size * 8000  # bits * (us per ms scaling) for kbps rates
    if bits_us % rate_kbps:
        raise ScenarioInvalid(
            f"{ctx}: {packet_size}B at {rate_kbps}kbps gives a non-integer "
            "microsecond period; pick a divisible pair"
        )
    return bits_us // rate_kbps


def _build_flow(table: dict, cns: dict[str, CnSpec], ctx: str) -> FlowSpec:
    flow_id = _expect(table, "id", str, ctx)
    ctx = f"flow '{flow_id}'"
    cn_id = _expect(table, "cn", str, ctx)
    if cn_id not in cns:
        raise ScenarioInvalid(f"{ctx}: unknown cn '{cn_id}'")
    rate = _expect(table, "rate_kbps", int, ctx)
    size = _expect(table, "packet_size", int, ctx, default=250)
    period = _flow_period_us(size, rate, ctx)
    start_us = ms_to_us(_number(table, "start_ms", ctx))
    stop_ms = _number(table, "stop_ms", ctx, default=0)
    if start_us < 0:
        raise ScenarioInvalid(f"{ctx}: start_ms must be >= 0")
    stop_us = ms_to_us(stop_ms) if stop_ms else None
    if stop_us is not None and stop_us <= start_us:
        raise ScenarioInvalid(f"{ctx}: stop_ms must exceed start_ms")
    pin = _expect(table, "pin", str, ctx, default=None)
    return FlowSpec(flow_id, cn_id, _build_selector(cns[cn_id], table, ctx),
                    rate, size, period, start_us, stop_us, pin)


_FLOW_KEYS = {"id", "cn", "dst", "src_port", "dst_port", "protocol", "flow_label",
              "rate_kbps", "packet_size", "start_ms", "stop_ms", "pin"}
_GROUP_KEYS = (_FLOW_KEYS - {"id", "src_port", "start_ms"}) | {
    "id_prefix", "count", "src_port_base", "start_ms", "stagger_ms"}


def _expand_group(table: dict, cns: dict[str, CnSpec]) -> list[FlowSpec]:
    prefix = _expect(table, "id_prefix", str, "[[flow_groups]]")
    ctx = f"flow_group '{prefix}'"
    _check_unknown(table, _GROUP_KEYS, ctx)
    count = _expect(table, "count", int, ctx)
    if count <= 0:
        raise ScenarioInvalid(f"{ctx}: count must be positive")
    base_port = _expect(table, "src_port_base", int, ctx)
    start_ms = _number(table, "start_ms", ctx)
    stagger_ms = _number(table, "stagger_ms", ctx, default=0)
    flows = []
    for i in range(count):
        sub = {k: v for k, v in table.items()
               if k in _FLOW_KEYS and k not in ("id", "src_port", "start_ms")}
        sub["id"] = f"{prefix}{i:03d}"
        sub["src_port"] = base_port + i
        sub["start_ms"] = start_ms + i * stagger_ms
        flows.append(_build_flow(sub, cns, ctx))
    return flows


def _build_timeline(doc: dict, mns: dict[str, MnSpec], links: dict[str, LinkSpec],
                    horizon_us: int) -> tuple[TimelineEvent, ...]:
    events = []
    for idx, table in enumerate(doc.get("timeline", [])):
        ctx = f"timeline[{idx}]"
        action = _expect(table, "action", str, ctx)
        at_us = ms_to_us(_number(table, "at_ms", ctx))
        if at_us < 0:
            raise ScenarioInvalid(f"{ctx}: at_ms must be >= 0")
        if at_us > horizon_us:
            raise ScenarioInvalid(f"{ctx}: at_ms lies beyond the horizon")
        if action in ("attach", "detach"):
            _check_unknown(table, {"at_ms", "action", "mn", "interface"}, ctx)
            mn_id = _expect(table, "mn", str, ctx)
            if mn_id not in mns:
                raise ScenarioInvalid(f"{ctx}: unknown mn '{mn_id}'")
            iface = _expect(table, "interface", int, ctx, default=0)
            if not 0 <= iface < len(mns[mn_id].interfaces):
                raise ScenarioInvalid(f"{ctx}: mn '{mn_id}' has no interface {iface}")
            events.append(TimelineEvent(at_us, action, mn=mn_id, interface=iface))
        elif action in ("link_down", "link_up"):
            _check_unknown(table, {"at_ms", "action", "link"}, ctx)
            link_id = _expect(table, "link", str, ctx)
            if link_id not in links:
                raise ScenarioInvalid(f"{ctx}: unknown link '{link_id}'")
            events.append(TimelineEvent(at_us, action, link=link_id))
        else:
            raise ScenarioInvalid(f"{ctx}: unknown action '{action}'")
    return tuple(events)


def parse_doc(text: str, name: str = "<inline>") -> dict:
    """Parse scenario text to its raw dict, without validation."""
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # tomllib errors carry line/column positions already
        raise ScenarioInvalid(f"{name}: {exc}") from exc


def load_scenario_text(text: str, name: str = "<inline>") -> Scenario:
    return build_scenario(parse_doc(text, name), name)


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return load_scenario_text(text, name=str(path))


def packaged_scenario_text(name: str) -> str:
    """Raw text of a scenario shipped inside the package."""
    root = resources.files("pmipflow").joinpath("scenarios")
    entry = root.joinpath(name)
    try:
        return entry.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        available = sorted(p.name for p in root.iterdir() if p.name.endswith(".scn"))
        raise ScenarioInvalid(
            f"no packaged scenario '{name}'; available: {', '.join(available)}"
        ) from exc


def packaged_scenario(name: str) -> Scenario:
    return load_scenario_text(packaged_scenario_text(name), name=name)


def build_scenario(doc: dict, name: str = "<dict>") -> Scenario:
    meta = doc.get("scenario", {})
    _check_unknown(meta, {"name", "horizon_ms"}, "[scenario]")
    scen_name = _expect(meta, "name", str, "[scenario]", default=name)
    horizon_us = ms_to_us(_number(meta, "horizon_ms", "[scenario]", default=1000))
    if horizon_us <= 0:
        raise ScenarioInvalid("[scenario]: horizon_ms must be positive")

    knobs = _build_knobs(doc)

    sched_raw = doc.get("scheduler", {})
    _check_unknown(sched_raw, {"mode", "preference"}, "[scheduler]")
    mode = _expect(sched_raw, "mode", str, "[scheduler]", default="pinned")
    if mode not in ("pinned", "random", "external"):
        raise ScenarioInvalid(f"[scheduler]: unknown mode '{mode}'")
    pref_raw = _expect(sched_raw, "preference", list, "[scheduler]", default=[])
    scheduler = SchedulerSpec(mode, tuple(str(p) for p in pref_raw))

    lma_raw = doc.get("lma", {})
    _check_unknown(lma_raw, {"id", "max_bindings", "denied_mns"}, "[lma]")
    lma = LmaSpec(
        id=_expect(lma_raw, "id", str, "[lma]", default="lma"),
        max_bindings=_expect(lma_raw, "max_bindings", int, "[lma]", default=0),
        denied_mns=tuple(_expect(lma_raw, "denied_mns", list, "[lma]", default=[])),
    )
    if lma.max_bindings < 0:
        raise ScenarioInvalid("[lma]: max_bindings must be >= 0")

    aaa_raw = doc.get("aaa", {})
    _check_unknown(aaa_raw, {"id", "latency_ms"}, "[aaa]")
    aaa = AaaSpec(
        id=_expect(aaa_raw, "id", str, "[aaa]", default="aaa"),
        latency_ms=float(_number(aaa_raw, "latency_ms", "[aaa]", default=0.5)),
    )

    femtocells: dict[str, FemtocellSpec] = {}
    for table in doc.get("femtocells", []):
        fc_id = _expect(table, "id", str, "[[femtocells]]")
        ctx = f"femtocell '{fc_id}'"
        _check_unknown(table, {"id", "mihf"}, ctx)
        if fc_id in femtocells:
            raise ScenarioInvalid(f"{ctx}: duplicate id")
        femtocells[fc_id] = FemtocellSpec(
            fc_id, _expect(table, "mihf", str, ctx, default=f"mihf-{fc_id}"))

    links: dict[str, LinkSpec] = {}
    for table in doc.get("links", []):
        link_id = _expect(table, "id", str, "[[links]]")
        ctx = f"link '{link_id}'"
        _check_unknown(table, {"id", "femtocell", "technology", "latency_ms",
                               "initially_up"}, ctx)
        if link_id in links:
            raise ScenarioInvalid(f"{ctx}: duplicate id")
        fc = _expect(table, "femtocell", str, ctx)
        if fc not in femtocells:
            raise ScenarioInvalid(f"{ctx}: unknown femtocell '{fc}'")
        latency = float(_number(table, "latency_ms", ctx, default=0.5))
        if latency < 0:
            raise ScenarioInvalid(f"{ctx}: latency_ms must be >= 0")
        links[link_id] = LinkSpec(
            link_id, fc, _expect(table, "technology", str, ctx, default="wifi"),
            latency, _expect(table, "initially_up", bool, ctx, default=True))

    mags: dict[str, MagSpec] = {}
    claimed_links: dict[str, str] = {}
    for table in doc.get("mags", []):
        mag_id = _expect(table, "id", str, "[[mags]]")
        ctx = f"mag '{mag_id}'"
        _check_unknown(table, {"id", "femtocell", "access_link", "tunnel_latency_ms"}, ctx)
        if mag_id in mags:
            raise ScenarioInvalid(f"{ctx}: duplicate id")
        fc = _expect(table, "femtocell", str, ctx)
        if fc not in femtocells:
            raise ScenarioInvalid(f"{ctx}: unknown femtocell '{fc}'")
        access = _expect(table, "access_link", str, ctx)
        if access not in links:
            raise ScenarioInvalid(f"{ctx}: unknown access_link '{access}'")
        if access in claimed_links:
            raise ScenarioInvalid(
                f"{ctx}: access_link '{access}' already served by mag "
                f"'{claimed_links[access]}'")
        claimed_links[access] = mag_id
        latency = float(_number(table, "tunnel_latency_ms", ctx, default=1.0))
        if latency < 0:
            raise ScenarioInvalid(f"{ctx}: tunnel_latency_ms must be >= 0")
        mags[mag_id] = MagSpec(mag_id, fc, access, latency)

    mns: dict[str, MnSpec] = {}
    prefix_owner: dict[Prefix, str] = {}
    for table in doc.get("mns", []):
        mn_id = _expect(table, "id", str, "[[mns]]")
        ctx = f"mn '{mn_id}'"
        _check_unknown(table, {"id", "host_model", "responds_to_probes", "interfaces"}, ctx)
        if mn_id in mns:
            raise ScenarioInvalid(f"{ctx}: duplicate id")
        host_model = _expect(table, "host_model", str, ctx, default="weak")
        if host_model not in ("weak", "lif"):
            raise ScenarioInvalid(f"{ctx}: unknown host_model '{host_model}'")
        ifaces = []
        seen_links: set[str] = set()
        for i, itable in enumerate(table.get("interfaces", [])):
            ictx = f"{ctx} interface {i}"
            _check_unknown(itable, {"link_addr", "link", "prefix", "authorized"}, ictx)
            try:
                addr = LinkAddr.parse(_expect(itable, "link_addr", str, ictx))
            except ValueError as exc:
                raise ScenarioInvalid(f"{ictx}: {exc}") from exc
            link_id = _expect(itable, "link", str, ictx)
            if link_id not in links:
                raise ScenarioInvalid(f"{ictx}: unknown link '{link_id}'")
            if link_id in seen_links:
                raise ScenarioInvalid(f"{ictx}: interfaces must use distinct links")
            seen_links.add(link_id)
            try:
                prefix = Prefix.parse(_expect(itable, "prefix", str, ictx))
            except ValueError as exc:
                raise ScenarioInvalid(f"{ictx}: bad prefix: {exc}") from exc
            if prefix.length != 64:
                raise ScenarioInvalid(f"{ictx}: home prefixes must be /64")
            for other, owner in prefix_owner.items():
                if prefix.overlaps(other):
                    raise ScenarioInvalid(
                        f"{ictx}: prefix {prefix} overlaps {other} owned by {owner}")
            prefix_owner[prefix] = f"{mn_id}[{i}]"
            ifaces.append(MnInterfaceSpec(
                addr, link_id, prefix,
                _expect(itable, "authorized", bool, ictx, default=True)))
        if not ifaces:
            raise ScenarioInvalid(f"{ctx}: needs at least one interface")
        mns[mn_id] = MnSpec(
            mn_id, host_model,
            _expect(table, "responds_to_probes", bool, ctx, default=True),
            tuple(ifaces))

    used_addrs: dict[LinkAddr, str] = {}
    for mn in mns.values():
        for i, iface in enumerate(mn.interfaces):
            if iface.link_addr in used_addrs:
                raise ScenarioInvalid(
                    f"mn '{mn.id}' interface {i}: link_addr {iface.link_addr} "
                    f"already used by {used_addrs[iface.link_addr]}")
            used_addrs[iface.link_addr] = f"{mn.id}[{i}]"

    cns: dict[str, CnSpec] = {}
    for table in doc.get("cns", []):
        cn_id = _expect(table, "id", str, "[[cns]]")
        ctx = f"cn '{cn_id}'"
        _check_unknown(table, {"id", "addr", "latency_ms"}, ctx)
        if cn_id in cns:
            raise ScenarioInvalid(f"{ctx}: duplicate id")
        try:
            addr = parse_ip6(_expect(table, "addr", str, ctx))
        except ValueError as exc:
            raise ScenarioInvalid(f"{ctx}: bad addr") from exc
        latency = float(_number(table, "latency_ms", ctx, default=1.0))
        if latency < 0:
            raise ScenarioInvalid(f"{ctx}: latency_ms must be >= 0")
        cns[cn_id] = CnSpec(cn_id, addr, latency)

    flows: list[FlowSpec] = []
    for table in doc.get("flows", []):
        _check_unknown(table, _FLOW_KEYS, f"flow '{table.get('id', '?')}'")
        flows.append(_build_flow(table, cns, "[[flows]]"))
    for table in doc.get("flow_groups", []):
        flows.extend(_expand_group(table, cns))

    seen_flow_ids: set[str] = set()
    seen_selectors: dict[TrafficSelector, str] = {}
    for flow in flows:
        if flow.id in seen_flow_ids:
            raise ScenarioInvalid(f"flow '{flow.id}': duplicate id")
        seen_flow_ids.add(flow.id)
        if flow.selector in seen_selectors:
            raise ScenarioInvalid(
                f"flow '{flow.id}': selector duplicates flow "
                f"'{seen_selectors[flow.selector]}'")
        seen_selectors[flow.selector] = flow.id
        if flow.pin is not None and flow.pin not in mags:
            raise ScenarioInvalid(f"flow '{flow.id}': unknown pin '{flow.pin}'")

    for mag_pref in scheduler.preference:
        if mag_pref not in mags:
            raise ScenarioInvalid(f"[scheduler]: unknown preference '{mag_pref}'")
    for denied in lma.denied_mns:
        if denied not in mns:
            raise ScenarioInvalid(f"[lma]: denied_mns names unknown mn '{denied}'")

    timeline = _build_timeline(doc, mns, links, horizon_us)

    allowed_top = {"scenario", "knobs", "scheduler", "lma", "aaa", "femtocells",
                   "links", "mags", "mns", "cns", "flows", "flow_groups", "timeline"}
    _check_unknown(doc, allowed_top, "scenario document")

    return Scenario(scen_name, horizon_us, knobs, scheduler, lma, aaa,
                    tuple(femtocells.values()), tuple(links.values()),
                    tuple(mags.values()), tuple(mns.values()),
                    tuple(cns.values()), tuple(flows), timeline)


def _parse_override_value(raw: str):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    if "," in raw:
        return [_parse_override_value(part) for part in raw.split(",")]
    return raw


def apply_overrides(doc: dict, assignments: list[str]) -> dict:
    """Apply key=value assignments onto a raw scenario dict.

    Paths are dotted; integer segments index into arrays, e.g.
    knobs.d_detect_ms=25  links.0.latency_ms=2.5  scheduler.mode=random
    """
    for assignment in assignments:
        if "=" not in assignment:
            raise ScenarioInvalid(f"override '{assignment}' is not key=value")
        path, raw_value = assignment.split("=", 1)
        parts = path.split(".")
        target = doc
        for i, part in enumerate(parts[:-1]):
            key = int(part) if part.isdigit() else part
            if isinstance(key, int):
                if not isinstance(target, list) or key >= len(target):
                    raise ScenarioInvalid(f"override '{assignment}': no element {key}")
                target = target[key]
            else:
                if not isinstance(target, dict):
                    raise ScenarioInvalid(f"override '{assignment}': bad path at '{part}'")
                target = target.setdefault(key, {})
        last = parts[-1]
        value = _parse_override_value(raw_value)
        if last.isdigit() and isinstance(target, list):
            idx = int(last)
            if idx >= len(target):
                raise ScenarioInvalid(f"override '{assignment}': no element {idx}")
            target[idx] = value
        elif isinstance(target, dict):
            target[last] = value
        else:
            raise ScenarioInvalid(f"override '{assignment}': bad path")
    return doc
