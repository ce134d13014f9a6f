"""Fernet tokens: AES-128-CBC + HMAC-SHA256 in the published byte layout.

    token = 0x80 || timestamp(8, big endian) || iv(16) || ciphertext || hmac(32)

Clock and IV are explicit arguments so tokens are reproducible.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import hmac
import secrets
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import Expired, InvalidPadding, InvalidSignature, InvalidToken
from .rng import derive_stream

VERSION = 0x80
MAX_CLOCK_SKEW = 60
_HEADER = 1 + 8 + 16
_MAC = 32
MIN_TOKEN_LEN = _HEADER + 16 + _MAC


@dataclass(frozen=True)
class SecretKey:
    signing_key: bytes
    encryption_key: bytes

    def __post_init__(self):
        if len(self.signing_key) != 16 or len(self.encryption_key) != 16:
            raise ValueError("signing and encryption keys must be 16 bytes each")

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SecretKey":
        if len(raw) != 32:
            raise ValueError(f"key must decode to 32 bytes, got {len(raw)}")
        return cls(raw[:16], raw[16:])

    @classmethod
    def decode(cls, external) -> "SecretKey":
        if isinstance(external, str):
            external = external.encode("ascii")
        try:
            raw = base64.urlsafe_b64decode(external.strip())
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"key is not valid base64url: {exc}") from None
        return cls.from_bytes(raw)

    def to_bytes(self) -> bytes:
        return self.signing_key + self.encryption_key

    def encode(self) -> str:
        return base64.urlsafe_b64encode(self.to_bytes()).decode("ascii")


def generate_key(rng: np.random.Generator | None = None) -> SecretKey:
    """32 random bytes; from ``rng`` when given, else the OS CSPRNG."""
    raw = secrets.token_bytes(32) if rng is None else rng.bytes(32)
    return SecretKey.from_bytes(raw)


def session_keys(k_clients: int, master_seed: int) -> list[SecretKey]:
    if k_clients < 1:
        raise ValueError("k_clients must be >= 1")
    return [generate_key(derive_stream(master_seed, "session_key", cid)) for cid in range(k_clients)]


def _pkcs7_pad(data: bytes) -> bytes:
    n = 16 - len(data) % 16
    return data + bytes([n]) * n


def _pkcs7_unpad(data: bytes) -> bytes:
    if not data or len(data) % 16:
        raise InvalidPadding("padded plaintext is not a whole number of blocks")
    n = data[-1]
    if not 1 <= n <= 16 or data[-n:] != bytes([n]) * n:
        raise InvalidPadding("bad PKCS#7 padding")
    return data[:-n]


def encrypt(key: SecretKey, plaintext: bytes, timestamp: int, iv: bytes) -> str:
    if len(iv) != 16:
        raise ValueError("iv must be 16 bytes")
    enc = Cipher(algorithms.AES(key.encryption_key), modes.CBC(iv)).encryptor()
    ciphertext = enc.update(_pkcs7_pad(bytes(plaintext))) + enc.finalize()
    body = bytes([VERSION]) + int(timestamp).to_bytes(8, "big") + iv + ciphertext
    mac = hmac.new(key.signing_key, body, hashlib.sha256).digest()
    return base64.urlsafe_b64encode(body + mac).decode("ascii")


@dataclass(frozen=True)
class TokenFields:
    version: int
    timestamp: int
    iv: bytes
    ciphertext: bytes
    hmac: bytes


def parse_token(token) -> TokenFields:
    """Decode and split a token without verifying it."""
    if isinstance(token, str):
        try:
            token = token.encode("ascii")
        except UnicodeEncodeError:
            raise InvalidToken("token is not ASCII") from None
    try:
        raw = base64.urlsafe_b64decode(token)
    except (binascii.Error, ValueError):
        raise InvalidToken("token is not valid base64url") from None
    # urlsafe_b64decode silently drops characters outside the alphabet
    if base64.urlsafe_b64encode(raw) != bytes(token).strip():
        raise InvalidToken("token is not canonical base64url")
    if len(raw) < MIN_TOKEN_LEN or (len(raw) - _HEADER - _MAC) % 16:
        raise InvalidToken(f"bad token length {len(raw)}")
    if raw[0] != VERSION:
        raise InvalidToken(f"unknown version byte {raw[0]:#x}")
    return TokenFields(
        version=raw[0],
        timestamp=int.from_bytes(raw[1:9], "big"),
        iv=raw[9:25],
        ciphertext=raw[25:-_MAC],
        hmac=raw[-_MAC:],
    )


def decrypt(key: SecretKey, token, ttl: int | None, now: int) -> bytes:
    """Verify and decrypt. The MAC is checked before any decryption."""
    f = parse_token(token)
    body = bytes([f.version]) + f.timestamp.to_bytes(8, "big") + f.iv + f.ciphertext
    expected = hmac.new(key.signing_key, body, hashlib.sha256).digest()
    if not hmac.compare_digest(expected, f.hmac):
        raise InvalidSignature("HMAC verification failed")
    if ttl is not None:
        if now - f.timestamp > ttl:
            raise Expired(f"token is {now - f.timestamp}s old, ttl {ttl}s")
        if f.timestamp > now + MAX_CLOCK_SKEW:
            raise Expired("token timestamp is too far in the future")
    dec = Cipher(algorithms.AES(key.encryption_key), modes.CBC(f.iv)).decryptor()
    return _pkcs7_unpad(dec.update(f.ciphertext) + dec.finalize())
