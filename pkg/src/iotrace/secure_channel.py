"""Device-to-totem encrypted beaconing.

Key encapsulation is ephemeral X25519 against the totem's static key followed
by HKDF-SHA256 down to a 128-bit session key; beacons travel under AES-128-GCM.
The same construction seals records at rest to the authority's public key.

Over-the-air payload layout (all lengths big-endian)::

    u8 len(enc) | enc | u8 len(nonce) | nonce | u16 len(ct) | ct || tag
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .core import BEACON_SIZE

SESSION_KEY_SIZE = 16
NONCE_SIZE = 12
ENC_SIZE = 32
MAX_NONCE = 2**64 - 1
_SESSION_INFO = b"iotrace/session/v1|"
_SEAL_INFO = b"iotrace/seal/v1|"


class UnknownTotemError(KeyError):
    pass


class DecryptionError(ValueError):
    """Payload is malformed, addressed to another key, or was tampered with."""


class NonceExhaustedError(RuntimeError):
    pass


@dataclass
class TotemKeys:
    totem_id: str
    private_key: X25519PrivateKey
    _decap_cache: dict = field(default_factory=dict, repr=False, compare=False)
    _public: bytes | None = field(default=None, repr=False, compare=False)

    @classmethod
    def generate(cls, totem_id: str, rng) -> "TotemKeys":
        return cls(totem_id, X25519PrivateKey.from_private_bytes(rng.randbytes(32)))

    @property
    def public_bytes(self) -> bytes:
        if self._public is None:
            self._public = self.private_key.public_key().public_bytes_raw()
        return self._public


@dataclass(frozen=True)
class TotemDirectory:
    entries: dict[str, bytes]

    @classmethod
    def from_keys(cls, keys) -> "TotemDirectory":
        entries = {}
        for k in keys:
            if k.totem_id in entries:
                raise ValueError(f"duplicate totem id in directory: {k.totem_id}")
            entries[k.totem_id] = k.public_bytes
        return cls(entries)

    def __contains__(self, totem_id) -> bool:
        return totem_id in self.entries


@dataclass
class Session:
    totem_id: str
    key: bytes
    encapsulation: bytes
    established_slot: int = 0
    nonce_counter: int = 0
    nonce_limit: int = MAX_NONCE
    _aead: AESGCM | None = field(default=None, repr=False, compare=False)

    def __repr__(self) -> str:
        return (f"Session(totem_id={self.totem_id!r}, established_slot={self.established_slot}, "
                f"nonce_counter={self.nonce_counter})")


def _kdf(shared: bytes, info: bytes) -> bytes:
    return HKDF(hashes.SHA256(), SESSION_KEY_SIZE, salt=None, info=info).derive(shared)


def _encapsulate(public: bytes, info: bytes, rng) -> tuple[bytes, bytes]:
    eph = X25519PrivateKey.from_private_bytes(rng.randbytes(32))
    shared = eph.exchange(X25519PublicKey.from_public_bytes(public))
    enc = eph.public_key().public_bytes_raw()
    return _kdf(shared + enc + public, info), enc


def _decapsulate(private: X25519PrivateKey, enc: bytes, info: bytes, public: bytes | None = None) -> bytes:
    try:
        peer = X25519PublicKey.from_public_bytes(enc)
        shared = private.exchange(peer)
    except ValueError as exc:
        raise DecryptionError(f"bad encapsulation: {exc}") from exc
    if public is None:
        public = private.public_key().public_bytes_raw()
    return _kdf(shared + enc + public, info)


def establish_session(directory: TotemDirectory, totem_id: str, rng, slot: int = 0) -> Session:
    if totem_id not in directory:
        raise UnknownTotemError(totem_id)
    info = _SESSION_INFO + totem_id.encode()
    key, enc = _encapsulate(directory.entries[totem_id], info, rng)
    return Session(totem_id, key, enc, established_slot=slot)


def decapsulate(keys: TotemKeys, enc: bytes) -> bytes:
    return _totem_aead(keys, enc)[0]


def _totem_aead(keys: TotemKeys, enc: bytes) -> tuple[bytes, AESGCM]:
    cached = keys._decap_cache.get(enc)
    if cached is None:
        key = _decapsulate(keys.private_key, enc, _SESSION_INFO + keys.totem_id.encode(), keys.public_bytes)
        cached = keys._decap_cache[enc] = (key, AESGCM(key))
    return cached


def pack_wire(enc: bytes, nonce: bytes, ct: bytes) -> bytes:
    return (struct.pack(">B", len(enc)) + enc + struct.pack(">B", len(nonce)) + nonce
            + struct.pack(">H", len(ct)) + ct)


def unpack_wire(payload: bytes) -> tuple[bytes, bytes, bytes]:
    try:
        pos = 0
        (n,) = struct.unpack_from(">B", payload, pos)
        enc = payload[pos + 1:pos + 1 + n]
        pos += 1 + n
        (n,) = struct.unpack_from(">B", payload, pos)
        nonce = payload[pos + 1:pos + 1 + n]
        pos += 1 + n
        (n,) = struct.unpack_from(">H", payload, pos)
        ct = payload[pos + 2:pos + 2 + n]
        pos += 2 + n
    except struct.error as exc:
        raise DecryptionError("truncated payload") from exc
    if pos != len(payload) or len(enc) != ENC_SIZE or len(nonce) != NONCE_SIZE or len(ct) != BEACON_SIZE + 16:
        raise DecryptionError("malformed payload framing")
    return enc, nonce, ct


def encrypt_beacon(session: Session, beacon: bytes) -> bytes:
    if len(beacon) != BEACON_SIZE:
        raise ValueError("beacon must be 16 bytes")
    if session.nonce_counter >= session.nonce_limit:
        raise NonceExhaustedError(f"session with {session.totem_id} exhausted; re-establish")
    session.nonce_counter += 1
    nonce = bytes(4) + session.nonce_counter.to_bytes(8, "big")
    if session._aead is None:
        session._aead = AESGCM(session.key)
    ct = session._aead.encrypt(nonce, beacon, session.totem_id.encode())
    return pack_wire(session.encapsulation, nonce, ct)


def decrypt_beacon(keys: TotemKeys, payload: bytes) -> bytes:
    enc, nonce, ct = unpack_wire(payload)
    _, aead = _totem_aead(keys, enc)
    try:
        return aead.decrypt(nonce, ct, keys.totem_id.encode())
    except InvalidTag as exc:
        raise DecryptionError(f"authentication failed at {keys.totem_id}") from exc


def seal(public: bytes, plaintext: bytes, rng, label: bytes = b"") -> bytes:
    """One-shot public-key encryption; a fresh ephemeral key makes the zero nonce safe."""
    key, enc = _encapsulate(public, _SEAL_INFO + label, rng)
    return enc + AESGCM(key).encrypt(bytes(NONCE_SIZE), plaintext, label)


def open_sealed(private: X25519PrivateKey, blob: bytes, label: bytes = b"") -> bytes:
    enc, body = blob[:ENC_SIZE], blob[ENC_SIZE:]
    key = _decapsulate(private, enc, _SEAL_INFO + label)
    try:
        return AESGCM(key).decrypt(bytes(NONCE_SIZE), body, label)
    except InvalidTag as exc:
        raise DecryptionError("sealed blob failed authentication") from exc
