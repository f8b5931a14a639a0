"""Time-slot arithmetic and beacon derivation shared by every entity.

A beacon is the AES-128 encryption of the slot index under the device key, so
a device can regenerate any past beacon from its key alone.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

BEACON_SIZE = 16
KEY_SIZE = 16
DEFAULT_SLOT_LEN = 600
MAX_SLOT = 2**64 - 1


class ProtocolMode(str, enum.Enum):
    CENTRALIZED = "centralized"
    DECENTRALIZED = "decentralized"
    PRIVACY_ENHANCED = "privacy_enhanced"

    @property
    def stores_at_totem(self) -> bool:
        return self is not ProtocolMode.CENTRALIZED

    @property
    def encrypted(self) -> bool:
        return self is ProtocolMode.PRIVACY_ENHANCED


@dataclass(frozen=True)
class DeviceKey:
    key: bytes
    owner: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.key) != KEY_SIZE:
            raise ValueError(f"device key must be {KEY_SIZE} bytes, got {len(self.key)}")

    def __repr__(self) -> str:
        # keep key material out of logs and reprs
        return f"DeviceKey(owner={self.owner!r})"

    @classmethod
    def generate(cls, rng, owner: str = "") -> "DeviceKey":
        """Sample a fresh key from a seeded ``random.Random``."""
        return cls(rng.randbytes(KEY_SIZE), owner)


def slot_of(timestamp: float, slot_len: float = DEFAULT_SLOT_LEN) -> int:
    if slot_len <= 0:
        raise ValueError(f"slot_len must be positive, got {slot_len}")
    if timestamp < 0:
        raise ValueError(f"timestamp must be non-negative, got {timestamp}")
    return math.floor(timestamp / slot_len)


def encode_slot(slot: int) -> bytes:
    """Canonical cipher input: 8 zero bytes then the big-endian slot index."""
    if not 0 <= slot <= MAX_SLOT:
        raise ValueError(f"slot index out of range: {slot}")
    return bytes(8) + slot.to_bytes(8, "big")


@lru_cache(maxsize=4096)
def _cipher(key: bytes) -> Cipher:
    return Cipher(algorithms.AES(key), modes.ECB())


def aes128_encrypt_block(key: bytes, block: bytes) -> bytes:
    """Raw single-block AES-128 encryption."""
    if len(key) != KEY_SIZE or len(block) != BEACON_SIZE:
        raise ValueError("AES-128 needs a 16-byte key and a 16-byte block")
    enc = _cipher(key).encryptor()
    return enc.update(block) + enc.finalize()


def derive_beacon(key: DeviceKey, slot: int) -> bytes:
    return aes128_encrypt_block(key.key, encode_slot(slot))


def derive_beacon_window(key: DeviceKey, start: int, stop: int) -> list[tuple[int, bytes]]:
    """Beacons for every slot in the inclusive range ``[start, stop]``."""
    if start > stop:
        raise ValueError(f"empty slot window: from={start} > to={stop}")
    encode_slot(start)
    encode_slot(stop)
    plain = b"".join(encode_slot(s) for s in range(start, stop + 1))
    enc = _cipher(key.key).encryptor()
    blob = enc.update(plain) + enc.finalize()
    return [
        (start + i, blob[i * BEACON_SIZE:(i + 1) * BEACON_SIZE])
        for i in range(stop - start + 1)
    ]


def beacon_hex(beacon: bytes) -> str:
    if len(beacon) != BEACON_SIZE:
        raise ValueError(f"beacon must be {BEACON_SIZE} bytes, got {len(beacon)}")
    return beacon.hex()


def beacon_from_hex(text: str) -> bytes:
    if len(text) != 2 * BEACON_SIZE or text != text.lower():
        raise ValueError(f"beacon must be 32 lowercase hex chars, got {text!r}")
    return bytes.fromhex(text)
