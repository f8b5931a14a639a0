"""IoT-edge contact tracing: protocol entities, adversaries and a deterministic simulator."""

from .core import ProtocolMode, derive_beacon, derive_beacon_window, slot_of

__all__ = ["ProtocolMode", "derive_beacon", "derive_beacon_window", "slot_of"]
__version__ = "0.1.0"
