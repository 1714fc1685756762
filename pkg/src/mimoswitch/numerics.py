"""Dense complex linear algebra and reproducible random streams.

Everything else in the package builds on the two primitives here:
small dense complex matrices (plain ``numpy.ndarray`` of ``complex128``,
validated at construction boundaries) and counter-keyed random substreams
that make every experiment bit-reproducible regardless of execution order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg import lapack as _lapack

__all__ = [
    "CONDITION_LIMIT",
    "SingularMatrix",
    "RngStream",
    "as_complex_matrix",
    "sample_complex_gaussian",
    "invert",
]

# Inverses with a 1-norm condition estimate above this are treated as
# numerically singular (~1/eps with a 1e4 safety margin).
CONDITION_LIMIT = 1e12

_U64 = (1 << 64) - 1


class SingularMatrix(ArithmeticError):
    """Matrix is numerically singular (condition estimate > CONDITION_LIMIT)."""


def as_complex_matrix(values, *, square: bool = False) -> np.ndarray:
    """Validate and return a C-contiguous complex128 matrix.

    Rejects non-2-D input and non-finite entries. Channel matrices,
    beamforming matrices and permutation matrices all pass through here.
    """
    arr = np.ascontiguousarray(values, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise ValueError("matrix entries must all be finite")
    return arr


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random substream.

    The same ``(master_seed, stream_index)`` always yields the same sample
    sequence, and distinct indices yield statistically independent streams.
    ``stream_index`` may be a single counter or a tuple of counters (used by
    the experiment harness to key per-realization / per-derangement work).
    Streams are cheap value objects; call :meth:`generator` for a fresh
    generator positioned at the start of the stream.
    """

    master_seed: int
    stream_index: int | tuple[int, ...] = 0

    def _key(self) -> tuple[int, ...]:
        idx = self.stream_index
        if isinstance(idx, int):
            idx = (idx,)
        return (self.master_seed & _U64,) + tuple(i & _U64 for i in idx)

    def generator(self) -> np.random.Generator:
        """Fresh generator at the start of this stream."""
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self._key())))

    def derived(self, *extra: int) -> "RngStream":
        """Substream keyed by this stream's index extended with ``extra``."""
        idx = self.stream_index
        base = (idx,) if isinstance(idx, int) else tuple(idx)
        return RngStream(self.master_seed, base + tuple(extra))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def sample_complex_gaussian(n: int, rng) -> np.ndarray:
    """n-by-n matrix of i.i.d. circularly-symmetric complex Gaussians.

    Zero mean, unit variance: real and imaginary parts each have variance
    one half. ``rng`` may be an :class:`RngStream` (fresh stream each call,
    so the same stream always gives the same matrix) or a live generator
    (draws continue the sequence).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _as_generator(rng)
    re = gen.standard_normal((n, n))
    im = gen.standard_normal((n, n))
    return (re + 1j * im) * np.sqrt(0.5)


def invert(m) -> tuple[np.ndarray, float]:
    """Invert a square complex matrix via LU with partial pivoting.

    Returns ``(inverse, condition_estimate)`` where the condition estimate
    is the LAPACK 1-norm estimate from the factorization. Raises
    :class:`SingularMatrix` when the estimate exceeds ``CONDITION_LIMIT``
    or the residual check fails. The returned inverse satisfies
    ``||m @ inv - I||_F <= 1e-9 * ||m||_F * ||inv||_F``.
    """
    a = as_complex_matrix(m, square=True)
    n = a.shape[0]
    anorm = np.linalg.norm(a, 1)
    with warnings.catch_warnings():
        # exactly-singular factorizations warn; the rcond check below handles them
        warnings.simplefilter("ignore")
        lu, piv = lu_factor(a)
    rcond, info = _lapack.zgecon(lu, anorm)
    if info != 0:
        raise SingularMatrix(f"condition estimation failed (info={info})")
    if not rcond > 1.0 / CONDITION_LIMIT:
        cond = np.inf if rcond == 0.0 else 1.0 / rcond
        raise SingularMatrix(f"condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}")
    inv = lu_solve((lu, piv), np.eye(n, dtype=np.complex128))
    residual = np.linalg.norm(a @ inv - np.eye(n), "fro")
    bound = 1e-9 * np.linalg.norm(a, "fro") * np.linalg.norm(inv, "fro")
    if residual > bound:
        raise SingularMatrix(
            f"inverse residual {residual:.3e} exceeds bound {bound:.3e}"
        )
    return inv, 1.0 / rcond
