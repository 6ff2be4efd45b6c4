"""Dense vector arithmetic and deterministic pseudo-randomness.

Vectors are plain 1-D float64 numpy arrays. The ``vector`` constructor
validates entries (finite, nonempty) and returns a read-only array so that
values can be shared freely across workers. All arithmetic helpers check
dimensions explicitly instead of relying on broadcasting.
"""

from __future__ import annotations

import math
from typing import Sequence, TypeAlias

import numpy as np
from numpy.typing import NDArray

Vector: TypeAlias = NDArray[np.float64]


def vector(entries: Sequence[float] | NDArray) -> Vector:
    """Build a validated, read-only float64 vector.

    Raises ValueError on empty input, non-1D shapes, or non-finite entries.
    """
    arr = np.array(entries, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"vector must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("vector must have at least one entry")
    if not np.isfinite(arr).all():
        raise ValueError("vector entries must be finite")
    arr.setflags(write=False)
    return arr


def check_same_dim(a: Vector, b: Vector) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dot(a: Vector, b: Vector) -> float:
    """Euclidean inner product."""
    check_same_dim(a, b)
    return float(np.dot(a, b))


def norm(a: Vector) -> float:
    """Euclidean norm, computed as sqrt(dot(a, a))."""
    return math.sqrt(float(np.dot(a, a)))


def axpy(alpha: float, x: Vector, y: Vector) -> Vector:
    """Return y + alpha * x."""
    check_same_dim(x, y)
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    return y + alpha * x


class Rng:
    """Deterministic random stream (PCG64) pinned to a 64-bit seed.

    One instance per experiment sample; never share an instance across
    concurrent workers. Equal seeds produce equal streams.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._gen = np.random.default_rng(seed)

    def uniform(self, lo: float, hi: float, size: int) -> NDArray[np.float64]:
        return self._gen.uniform(lo, hi, size)


def derived_seed(seed: int, *tags: int) -> int:
    """Stable 64-bit sub-seed, namespacing one master seed by integer tags.

    Used to give independent streams to e.g. instance generation and
    initial-point sampling that share a user-facing seed.
    """
    ss = np.random.SeedSequence(entropy=[int(seed), *[int(t) for t in tags]])
    return int(ss.generate_state(1, np.uint64)[0])


def sample_uniform_box(rng: Rng, dim: int, lo: float, hi: float) -> Vector:
    """Sample a vector with i.i.d. coordinates uniform on the open box (lo, hi)^dim."""
    if lo >= hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    out = rng.uniform(lo, hi, dim)
    # numpy's uniform is half-open [lo, hi); resample the measure-zero lower edge
    # so every coordinate lies strictly inside the box.
    while True:
        on_edge = out == lo
        if not on_edge.any():
            break
        out[on_edge] = rng.uniform(lo, hi, int(on_edge.sum()))
    return vector(out)
