"""Deterministic, independent random streams keyed by (seed, domain, index)."""

import hashlib

import numpy as np


def derive_stream(master_seed: int, domain: str, index: int) -> np.random.Generator:
    """Return a Philox generator keyed by SHA-256(seed || domain || index).

    Fields are length-prefixed so no two distinct triples share a preimage.
    """
    seed_b = int(master_seed).to_bytes(16, "big", signed=True)
    dom_b = domain.encode("utf-8")
    idx_b = int(index).to_bytes(16, "big", signed=True)
    msg = b"".join(len(p).to_bytes(4, "big") + p for p in (seed_b, dom_b, idx_b))
    digest = hashlib.sha256(msg).digest()
    key = np.frombuffer(digest[:16], dtype=">u8").astype(np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
