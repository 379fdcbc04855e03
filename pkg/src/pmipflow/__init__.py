"""PMIPv6 flow mobility engine with 802.21 signaling and a deterministic simulator."""

__version__ = "0.1.0"
