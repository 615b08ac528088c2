"""Empirical Wasserstein distances and the coupling bound ``W_p^p <= E|f - g|^p``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedSpecError


@dataclass(frozen=True)
class EmpiricalSample:
    """Uniformly weighted point cloud, stored as an ``(N, d)`` array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] == 0:
            raise DomainError("sample must be a nonempty array of d-vectors")
        if not np.all(np.isfinite(v)):
            raise DomainError("sample has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def moment(self, z, p: float) -> float:
        diff = self.values - np.asarray(z, dtype=float)
        return float(np.mean(np.linalg.norm(diff, axis=1) ** p))


def _sample(x) -> EmpiricalSample:
    return x if isinstance(x, EmpiricalSample) else EmpiricalSample(x)


def _check_p(p: float):
    if not p >= 1:
        raise DomainError("p must be at least 1")


def wasserstein_1d(a, b, p: float = 2.0) -> float:
    """Exact ``W_p`` between two equal-size empirical laws on the line (sorted coupling)."""
    _check_p(p)
    a, b = _sample(a), _sample(b)
    if a.d != 1 or b.d != 1:
        raise UnsupportedSpecError("W_p between general samples is only supported in one dimension")
    if a.N != b.N:
        raise DomainError(f"samples must have equal size ({a.N} != {b.N})")
    xa, xb = np.sort(a.values[:, 0]), np.sort(b.values[:, 0])
    return float(np.mean(np.abs(xa - xb) ** p) ** (1.0 / p))


def wasserstein_to_dirac(sample, z, p: float = 2.0) -> float:
    """``W_p(law, delta_z) = (E|X - z|^p)^(1/p)`` in any dimension."""
    _check_p(p)
    s = _sample(sample)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (s.d,):
        raise DomainError(f"z has dimension {z.size}, sample has {s.d}")
    return s.moment(z, p) ** (1.0 / p)


def coupling_inequality_check(f, g, p: float = 2.0, tol: float = 1e-12) -> tuple[bool, float]:
    """Compare ``W_p(law f, law g)^p`` with ``mean |f_j - g_j|^p`` for paired samples.

    Returns ``(holds, slack)`` where ``slack = rhs - lhs``.
    """
    _check_p(p)
    f, g = _sample(f), _sample(g)
    if f.N != g.N:
        raise DomainError("coupled samples must be paired")
    lhs = wasserstein_1d(f, g, p) ** p
    rhs = float(np.mean(np.abs(f.values[:, 0] - g.values[:, 0]) ** p))
    slack = rhs - lhs
    return slack >= -tol * max(1.0, rhs), slack
