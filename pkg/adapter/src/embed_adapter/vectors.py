from __future__ import annotations

import hashlib

import numpy as np


def deterministic_vector(content: str, dim: int, namespace: str = "det-hash-v1") -> np.ndarray:
    """Unit-norm vector seeded from a content hash.

    Identical input always yields an identical vector, across processes
    and restarts; distinct inputs collide only if sha256 does.
    """
    digest = hashlib.sha256(f"{namespace}|{content}".encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    vec = np.random.default_rng(seed).standard_normal(dim)
    return vec / np.linalg.norm(vec)
