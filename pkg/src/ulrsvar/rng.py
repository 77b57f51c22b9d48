"""Labelled, counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *labels)`` through
``numpy.random.SeedSequence``.  Two streams with different labels are
independent, and a stream never depends on how many other streams were
created before it, so replications can be generated in any order (or in
parallel) and still reproduce bit for bit.

Gaussian variates are produced by inverse transform of the uniforms.
"""
from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri

_TINY = np.finfo(float).tiny


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be non-negative")
        return int(label)
    return zlib.crc32(str(label).encode("utf8"))


def stream(seed: int, *labels) -> np.random.Generator:
    """Return the generator for ``(seed, *labels)``."""
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_key(l) for l in labels))
    return np.random.Generator(np.random.Philox(ss))


def normals(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normal draws by inverse transform of ``gen.random``."""
    u = gen.random(size)
    # random() lives on [0, 1); ndtri(0) = -inf
    u[u == 0.0] = _TINY
    return ndtri(u)
