"""Domain types shared by every protocol entity.

All simulated time is integer microseconds.  Nothing in this package reads
the wall clock; times only ever come from the event loop.
"""
from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field

US_PER_MS = 1_000
US_PER_S = 1_000_000


def ms_to_us(ms: float) -> int:
    """Convert a millisecond-denominated knob to integer microseconds."""
    return round(ms * US_PER_MS)


def format_us(t_us: int) -> str:
    """Render a microsecond timestamp as exact milliseconds, e.g. 1250 -> '1.250'."""
    ms, rem = divmod(t_us, US_PER_MS)
    return f"{ms}.{rem:03d}"


# Mobile node identifiers are plain strings (NAI-style); gateways and anchors
# use their node ids.  A distinct alias keeps signatures readable.
MnId = str
NodeId = str


@dataclass(frozen=True)
class LinkAddr:
    """48-bit link-layer address of one radio interface."""

    octets: bytes

    def __post_init__(self) -> None:
        if len(self.octets) != 6:
            raise ValueError(f"link address needs 6 octets, got {len(self.octets)}")

    @classmethod
    def parse(cls, text: str) -> "LinkAddr":
        parts = text.split(":")
        if len(parts) != 6:
            raise ValueError(f"bad link address {text!r}")
        try:
            return cls(bytes(int(p, 16) for p in parts))
        except ValueError as exc:
            raise ValueError(f"bad link address {text!r}") from exc

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


@dataclass(frozen=True)
class InterfaceId:
    """64-bit interface identifier in modified EUI-64 form."""

    octets: bytes

    def __post_init__(self) -> None:
        if len(self.octets) != 8:
            raise ValueError(f"interface id needs 8 octets, got {len(self.octets)}")

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)


def eui64_from_link_addr(addr: LinkAddr) -> InterfaceId:
    """Derive the modified EUI-64 interface identifier from a 48-bit address.

    0xFFFE is inserted between the third and fourth octets and the
    universal/local bit (0x02 of the first octet) is flipped.
    """
    o = addr.octets
    first = o[0] ^ 0x02
    return InterfaceId(bytes([first]) + o[1:3] + b"\xff\xfe" + o[3:6])


@dataclass(frozen=True)
class Prefix:
    """An IPv6 prefix; home network prefixes are always /64."""

    address: bytes
    length: int

    def __post_init__(self) -> None:
        if len(self.address) != 16:
            raise ValueError("prefix address needs 16 octets")
        if not 0 <= self.length <= 128:
            raise ValueError(f"prefix length {self.length} out of range")
        # host bits must be zero so equality works as prefix identity
        net = int.from_bytes(self.address, "big")
        if self.length < 128 and net & ((1 << (128 - self.length)) - 1):
            raise ValueError(f"prefix {self} has nonzero host bits")

    @classmethod
    def parse(cls, text: str) -> "Prefix":
        net = ipaddress.IPv6Network(text, strict=True)
        return cls(net.network_address.packed, net.prefixlen)

    def contains(self, addr: bytes) -> bool:
        if len(addr) != 16:
            raise ValueError("address needs 16 octets")
        if self.length == 0:
            return True
        shift = 128 - self.length
        return int.from_bytes(addr, "big") >> shift == int.from_bytes(self.address, "big") >> shift

    def overlaps(self, other: "Prefix") -> bool:
        shorter = self if self.length <= other.length else other
        longer = other if shorter is self else self
        return shorter.contains(longer.address)

    def addr_in(self, host: int) -> bytes:
        """An address inside the prefix with the given host part."""
        return (int.from_bytes(self.address, "big") | host).to_bytes(16, "big")

    def __str__(self) -> str:
        return f"{ipaddress.IPv6Address(self.address)}/{self.length}"


def parse_ip6(text: str) -> bytes:
    return ipaddress.IPv6Address(text).packed


def format_ip6(addr: bytes) -> str:
    return str(ipaddress.IPv6Address(addr))


@dataclass(frozen=True)
class TrafficSelector:
    """Six-tuple identifying one transport flow."""

    src_addr: bytes
    dst_addr: bytes
    src_port: int
    dst_port: int
    protocol: int
    flow_label: int

    def __post_init__(self) -> None:
        if len(self.src_addr) != 16 or len(self.dst_addr) != 16:
            raise ValueError("selector addresses need 16 octets")
        for name, value, top in (
            ("src_port", self.src_port, 0xFFFF),
            ("dst_port", self.dst_port, 0xFFFF),
            ("protocol", self.protocol, 0xFF),
            ("flow_label", self.flow_label, 0xFFFFF),
        ):
            if not 0 <= value <= top:
                raise ValueError(f"selector {name}={value} out of range")

    def __str__(self) -> str:
        return (
            f"{format_ip6(self.src_addr)}:{self.src_port}>"
            f"{format_ip6(self.dst_addr)}:{self.dst_port}"
            f"/p{self.protocol}/l{self.flow_label}"
        )


@dataclass
class Packet:
    """One simulated data packet travelling downlink or uplink."""

    selector: TrafficSelector
    size: int
    seq: int
    created_at: int
    flow_id: str = ""
    path_trace: list[tuple[str, int]] = field(default_factory=list)

    def hop(self, node: str, t_us: int) -> None:
        self.path_trace.append((node, t_us))
