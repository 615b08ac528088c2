"""Domain vocabulary: threshold partitions, regime coefficients, initial laws.

A switched mean-field equation is described by an :class:`EquationSpec`.
Its diffusion coefficient is selected by the cell of a
:class:`ThresholdPartition` that contains the current moment
``g(t) = E|X_t - z|^p``; the drift is shared by every regime.

All types here are immutable after construction.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np
from scipy import special

from .errors import DomainError, UnsupportedSpecError


class Side(str, Enum):
    """Which cell a threshold value ``y_k`` belongs to."""

    UPPER = "upper"  # y_k starts the cell above: [y_k, y_{k+1})
    LOWER = "lower"  # y_k closes the cell below: (y_{k-1}, y_k]
    POINT = "point"  # {y_k} is a cell of its own


class Family(str, Enum):
    CONSTANT = "constant"
    TIME_ONLY = "time_only"
    LINEAR_STATE = "linear_state"
    GENERAL = "general"


def combine_families(families: Sequence[Family]) -> Family:
    """Smallest family tag that covers every member."""
    fams = set(families)
    if fams <= {Family.CONSTANT}:
        return Family.CONSTANT
    if fams <= {Family.CONSTANT, Family.TIME_ONLY}:
        return Family.TIME_ONLY
    if fams <= {Family.CONSTANT, Family.LINEAR_STATE}:
        return Family.LINEAR_STATE
    return Family.GENERAL


# ---------------------------------------------------------------------------
# quadrature fallback for coefficients without a closed-form antiderivative

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _integrate(f: Callable[[float], Any], a: float, b: float, panel: float = 1e-3):
    if b <= a:
        return 0.0 * np.asarray(f(a), dtype=float)
    n = max(1, math.ceil((b - a) / panel))
    edges = np.linspace(a, b, n + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        for node, w in zip(_GL_NODES, _GL_WEIGHTS):
            total = total + w * half * np.asarray(f(mid + half * node), dtype=float)
    return total


# ---------------------------------------------------------------------------
# threshold sequences


@dataclass(frozen=True)
class LevelRule:
    """Countably infinite threshold sequence ``y_k`` (k >= 1), diverging to infinity.

    ``power``: ``y_k = scale * k**exponent``.
    ``factorial_power``: ``y_k = scale * (k!)**k``.
    """

    kind: str = "power"
    scale: float = 1.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "factorial_power"):
            raise DomainError(f"unknown level rule {self.kind!r}")

    def log_level(self, k: int) -> float:
        if k < 1:
            raise DomainError("threshold index starts at 1")
        if self.kind == "power":
            return math.log(self.scale) + self.exponent * math.log(k)
        return math.log(self.scale) + k * math.lgamma(k + 1)

    def log_ratio(self, k: int) -> float:
        """``log(y_k / y_{k-1})`` for k >= 2, computed without cancellation."""
        if k < 2:
            raise DomainError("log ratio needs k >= 2")
        if self.kind == "power":
            return self.exponent * math.log1p(1.0 / (k - 1))
        return math.lgamma(k + 1) + (k - 1) * math.log(k)

    def level(self, k: int) -> float:
        if self.kind == "power":
            return self.scale * float(k) ** self.exponent
        lg = self.log_level(k)
        return math.exp(lg) if lg < 709.0 else math.inf

    def label(self) -> str:
        if self.kind == "factorial_power":
            core = "(k!)^k"
        elif self.exponent == 1.0:
            core = "k"
        else:
            core = f"k^{self.exponent:g}"
        return core if self.scale == 1.0 else f"{self.scale:g}*{core}"


@dataclass(frozen=True)
class ThresholdPartition:
    """Partition of ``[0, inf)`` into regime cells cut at increasing thresholds.

    ``levels`` is either a finite tuple ``(y_1, ..., y_n)`` or a
    :class:`LevelRule` for the infinite case. ``boundary`` assigns each
    threshold to a cell (default :attr:`Side.UPPER`); for a rule it is a
    sparse override map. ``labels`` maps the cells, in increasing order, to
    regime indices and is only available for finite partitions; by default
    cell ``j`` is regime ``j``.
    """

    levels: tuple[float, ...] | LevelRule
    boundary: tuple[Side, ...] | tuple[tuple[int, Side], ...] = ()
    labels: tuple[int, ...] | None = None
    _cells: tuple = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.levels, LevelRule):
            overrides = tuple((int(k), Side(s)) for k, s in self.boundary)
            if any(s is Side.POINT for _, s in overrides):
                raise DomainError("point cells are only supported for finite partitions")
            if self.labels is not None:
                raise DomainError("relabelling is only supported for finite partitions")
            object.__setattr__(self, "boundary", overrides)
            return
        levels = tuple(float(y) for y in self.levels)
        object.__setattr__(self, "levels", levels)
        sides = tuple(Side(s) for s in self.boundary) or (Side.UPPER,) * len(levels)
        if len(sides) != len(levels):
            raise DomainError("boundary needs one side per threshold")
        object.__setattr__(self, "boundary", sides)
        # cell bookkeeping: interval cell after j thresholds, point cell of threshold j
        interval, point, count = [1], [], 2
        for s in sides:
            if s is Side.POINT:
                point.append(count)
                count += 1
            else:
                point.append(None)
            interval.append(count)
            count += 1
        count -= 1
        labels = tuple(int(v) for v in self.labels) if self.labels is not None else tuple(range(1, count + 1))
        if len(labels) != count:
            raise DomainError(f"labels must have one entry per cell ({count})")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_cells", (tuple(interval), tuple(point)))

    # -- structure ---------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return not isinstance(self.levels, LevelRule)

    @property
    def n_regimes(self) -> int | None:
        """Number of regime labels; ``None`` for an infinite partition."""
        return max(self.labels) if self.is_finite else None

    def side(self, k: int) -> Side:
        if self.is_finite:
            return self.boundary[k - 1]
        return dict(self.boundary).get(k, Side.UPPER)

    def level(self, k: int) -> float:
        if k == 0:
            return 0.0
        if self.is_finite:
            return self.levels[k - 1]
        return self.levels.level(k)

    def threshold_count(self) -> int | None:
        return len(self.levels) if self.is_finite else None

    def lower_regime(self, k: int) -> int:
        """Regime of the open interval just below threshold k."""
        if self.is_finite:
            return self.labels[self._cells[0][k - 1] - 1]
        return k

    def upper_regime(self, k: int) -> int:
        if self.is_finite:
            return self.labels[self._cells[0][k] - 1]
        return k + 1

    def owner_regime(self, k: int) -> int:
        """Regime that contains the threshold value itself."""
        side = self.side(k)
        if side is Side.UPPER:
            return self.upper_regime(k)
        if side is Side.LOWER:
            return self.lower_regime(k)
        return self.labels[self._cells[1][k - 1] - 1]

    # -- lookup ------------------------------------------------------------

    def _first_at_or_above(self, alpha: float) -> int:
        """Smallest k >= 1 with y_k >= alpha (infinite rule only)."""
        hi = 1
        while self.levels.level(hi) < alpha:
            hi *= 2
        lo = hi // 2 + 1 if hi > 1 else 1
        while lo < hi:
            mid = (lo + hi) // 2
            if self.levels.level(mid) < alpha:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def regime_of(self, alpha: float) -> int:
        """Regime index of the cell containing the moment value ``alpha``."""
        alpha = float(alpha)
        if not math.isfinite(alpha):
            raise DomainError(f"moment value must be finite, got {alpha}")
        if alpha < 0:
            raise DomainError(f"moment value must be nonnegative, got {alpha}")
        if self.is_finite:
            j = bisect.bisect_left(self.levels, alpha)
            if j < len(self.levels) and self.levels[j] == alpha:
                return self.owner_regime(j + 1)
            return self.labels[self._cells[0][j] - 1]
        k = self._first_at_or_above(alpha)
        if self.levels.level(k) == alpha:
            return self.owner_regime(k)
        return k

    def thresholds_between(self, lo: float, hi: float) -> list[tuple[int, float]]:
        """Thresholds ``(k, y_k)`` with ``lo < y_k <= hi``, in increasing order."""
        if hi <= lo:
            return []
        out = []
        if self.is_finite:
            j = bisect.bisect_right(self.levels, lo)
            while j < len(self.levels) and self.levels[j] <= hi:
                out.append((j + 1, self.levels[j]))
                j += 1
            return out
        k = self._first_at_or_above(lo) if lo > 0 else 1
        while True:
            y = self.levels.level(k)
            if y <= lo:
                k += 1
                continue
            if y > hi:
                return out
            out.append((k, y))
            k += 1

    def with_point(self, y: float, label: int) -> ThresholdPartition:
        """Copy with an extra single-point cell ``{y}`` assigned to regime ``label``."""
        if not self.is_finite:
            raise DomainError("point cells are only supported for finite partitions")
        if y in self.levels:
            raise DomainError("threshold already present")
        j = bisect.bisect_left(self.levels, y)
        interval_cell = self._cells[0][j] - 1
        around = self.labels[interval_cell]
        labels = self.labels[: interval_cell + 1] + (label, around) + self.labels[interval_cell + 1 :]
        return ThresholdPartition(
            levels=self.levels[:j] + (y,) + self.levels[j:],
            boundary=self.boundary[:j] + (Side.POINT,) + self.boundary[j:],
            labels=labels,
        )

    def violations(self) -> list[str]:
        out = []
        if self.is_finite:
            ys = self.levels
            if any(not math.isfinite(y) for y in ys):
                out.append("thresholds must be finite")
            if ys and ys[0] <= 0:
                out.append("thresholds must be positive (y_0 = 0 is implicit)")
            if any(b <= a for a, b in zip(ys, ys[1:])):
                out.append("thresholds not increasing")
            if any(v < 1 for v in self.labels):
                out.append("regime labels start at 1")
            elif set(self.labels) != set(range(1, max(self.labels) + 1)):
                out.append("regime labels must cover 1..n without gaps")
        else:
            rule = self.levels
            if rule.scale <= 0 or (rule.kind == "power" and rule.exponent <= 0):
                out.append("level rule must be strictly increasing and divergent")
        return out

    def to_dict(self) -> dict:
        if self.is_finite:
            out = {"levels": list(self.levels), "boundary": [s.value for s in self.boundary]}
            if self.labels != tuple(range(1, len(self.labels) + 1)):
                out["labels"] = list(self.labels)
            return out
        rule = self.levels
        out = {"levels": {"rule": rule.kind, "scale": rule.scale, "exponent": rule.exponent}}
        if self.boundary:
            out["boundary"] = {int(k): s.value for k, s in self.boundary}
        return out


# ---------------------------------------------------------------------------
# diffusion coefficients


class Diffusion:
    """One regime's diffusion coefficient ``sigma(t, x, g)``."""

    family: Family = Family.GENERAL
    exact_integral = False

    def apply(self, t: float, x: np.ndarray, g: float, dB: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def is_zero_at(self, t: float) -> bool:
        return False

    # time-only interface used by the moment analyzer
    def norm2(self, t: float, d: int) -> float:
        raise UnsupportedSpecError(f"{type(self).__name__} is not a time-only coefficient")

    def norm2_right(self, t: float, d: int) -> float:
        return self.norm2(t, d)

    def norm2_integral(self, t0: float, t1: float, d: int) -> float:
        return float(_integrate(lambda s: self.norm2(s, d), t0, t1))

    def growth_constant(self, d: int) -> float | None:
        return None

    def to_dict(self) -> dict:
        raise UnsupportedSpecError(f"{type(self).__name__} cannot be serialized")


@dataclass(frozen=True)
class ConstantDiffusion(Diffusion):
    """``sigma = scale * I`` or a fixed matrix."""

    scale: float = 0.0
    matrix: tuple[tuple[float, ...], ...] | None = None

    family = Family.CONSTANT
    exact_integral = True

    def _m(self):
        return np.asarray(self.matrix, dtype=float)

    def apply(self, t, x, g, dB):
        if self.matrix is None:
            return self.scale * dB
        return dB @ self._m().T

    def is_zero_at(self, t):
        return self.matrix is None and self.scale == 0.0

    def norm2(self, t, d):
        if self.matrix is None:
            return self.scale * self.scale * d
        return float(np.sum(self._m() ** 2))

    def norm2_integral(self, t0, t1, d):
        return self.norm2(t0, d) * max(t1 - t0, 0.0)

    def growth_constant(self, d):
        return math.sqrt(self.norm2(0.0, d))

    def to_dict(self):
        if self.matrix is None:
            return {"kind": "constant", "scale": self.scale}
        return {"kind": "constant", "matrix": [list(r) for r in self.matrix]}


def dyadic_a(n: int) -> float:
    return math.ldexp(1.0, -n)


def dyadic_delta(n: int) -> float:
    return math.ldexp(1.0, -(n + 2))


def dyadic_band(t: float) -> int:
    """Smallest k >= 0 with ``t >= 2**-k`` (exact for binary floats)."""
    if t <= 0:
        raise DomainError("band index needs t > 0")
    if t >= 1.0:
        return 0
    return 1 - math.frexp(t)[1]


@dataclass(frozen=True)
class DyadicSwitchDiffusion(Diffusion):
    """``amplitude`` on the intervals ``(a_n + D_n, a_n + 3 D_n]`` and zero elsewhere.

    ``a_n = 2**-n`` and ``D_n = 2**-(n+2)`` for n >= 1. All endpoints are exact
    binary fractions, so membership tests need no tolerance.
    """

    amplitude: float = math.sqrt(2.0)
    depth: int = 60

    family = Family.TIME_ONLY
    exact_integral = True

    def on(self, t: float) -> bool:
        if t <= 0.0 or t > 1.0:
            return False
        n = dyadic_band(t)
        if n < 1 or n > self.depth:
            return False
        a, dl = dyadic_a(n), dyadic_delta(n)
        return a + dl < t <= a + 3 * dl

    def on_right(self, t: float) -> bool:
        """Whether the coefficient is on throughout ``(t, t + eps)`` for small eps."""
        if t < 0.0 or t >= 1.0:
            return False
        if t == 0.0:
            return False
        n = dyadic_band(t)
        if n < 1 or n > self.depth:
            return False
        a, dl = dyadic_a(n), dyadic_delta(n)
        return a + dl <= t < a + 3 * dl

    def apply(self, t, x, g, dB):
        return (self.amplitude if self.on(t) else 0.0) * dB

    def is_zero_at(self, t):
        return not self.on(t)

    def norm2(self, t, d):
        return self.amplitude**2 * d if self.on(t) else 0.0

    def norm2_right(self, t, d):
        return self.amplitude**2 * d if self.on_right(t) else 0.0

    def on_measure(self, t0: float, t1: float) -> float:
        """Lebesgue measure of the on-set inside ``[t0, t1]``."""
        if t1 <= t0:
            return 0.0
        lo, hi = max(t0, 0.0), min(t1, 1.0)
        if hi <= lo:
            return 0.0
        total = 0.0
        n_min = dyadic_band(hi) if hi < 1.0 else 1
        for n in range(max(n_min, 1), self.depth + 1):
            a, dl = dyadic_a(n), dyadic_delta(n)
            if a + 3 * dl <= lo:
                break
            total += max(0.0, min(hi, a + 3 * dl) - max(lo, a + dl))
        return total

    def norm2_integral(self, t0, t1, d):
        return self.amplitude**2 * d * self.on_measure(t0, t1)

    def growth_constant(self, d):
        return abs(self.amplitude) * math.sqrt(d)

    def to_dict(self):
        return {"kind": "dyadic_switch", "amplitude": self.amplitude, "depth": self.depth}


@dataclass(frozen=True)
class CallableDiffusion(Diffusion):
    """Arbitrary coefficient given as a Python callable (not serializable).

    For ``TIME_ONLY`` the callable takes ``t``; otherwise ``(t, x, g)`` with
    ``x`` of shape ``(n, d)``. It may return a scalar (times identity), a
    ``(d, d)`` matrix, per-particle scalars ``(n,)`` or matrices ``(n, d, d)``.
    """

    fn: Callable = None
    family: Family = Family.GENERAL
    growth: float | None = None

    def _eval(self, t, x, g):
        return self.fn(t) if self.family in (Family.TIME_ONLY, Family.CONSTANT) else self.fn(t, x, g)

    def apply(self, t, x, g, dB):
        s = np.asarray(self._eval(t, x, g), dtype=float)
        if s.ndim == 0:
            return s * dB
        if s.ndim == 1:
            return s[:, None] * dB
        if s.ndim == 2:
            return dB @ s.T
        return np.einsum("nij,nj->ni", s, dB)

    def norm2(self, t, d):
        if self.family not in (Family.TIME_ONLY, Family.CONSTANT):
            return super().norm2(t, d)
        s = np.asarray(self.fn(t), dtype=float)
        return float(s * s * d) if s.ndim == 0 else float(np.sum(s * s))

    def growth_constant(self, d):
        return self.growth


@dataclass(frozen=True)
class PowerLawDiffusions:
    """Regime-indexed family ``sigma_n = scale * n**exponent * I`` for n >= 1."""

    scale: float = 1.0
    exponent: float = 1.0

    def __call__(self, n: int) -> ConstantDiffusion:
        return ConstantDiffusion(scale=self.scale * float(n) ** self.exponent)

    def growth(self, n: int, d: int) -> float:
        return abs(self.scale) * float(n) ** self.exponent * math.sqrt(d)

    def to_dict(self):
        return {"kind": "power_law", "scale": self.scale, "exponent": self.exponent}


# ---------------------------------------------------------------------------
# drift


class Drift:
    family: Family = Family.GENERAL
    exact_integral = False

    def evaluate(self, t: float, x: np.ndarray, g: float) -> np.ndarray:
        raise NotImplementedError

    def value(self, t: float) -> np.ndarray:
        raise UnsupportedSpecError(f"{type(self).__name__} is not a time-only drift")

    def value_right(self, t: float) -> np.ndarray:
        return self.value(t)

    def integral(self, t0: float, t1: float) -> np.ndarray:
        return np.asarray(_integrate(self.value, t0, t1), dtype=float)

    def growth_constant(self) -> float | None:
        return None

    def to_dict(self) -> dict:
        raise UnsupportedSpecError(f"{type(self).__name__} cannot be serialized")


@dataclass(frozen=True)
class ConstantDrift(Drift):
    value_vector: tuple[float, ...] = (0.0,)

    family = Family.CONSTANT
    exact_integral = True

    def evaluate(self, t, x, g):
        return np.asarray(self.value_vector, dtype=float)

    def value(self, t):
        return np.asarray(self.value_vector, dtype=float)

    def integral(self, t0, t1):
        return np.asarray(self.value_vector, dtype=float) * max(t1 - t0, 0.0)

    def growth_constant(self):
        return float(np.linalg.norm(self.value_vector))

    def to_dict(self):
        return {"kind": "constant", "value": list(self.value_vector)}


@dataclass(frozen=True)
class LinearDrift(Drift):
    """``b(x) = rate * (x - center)``; pushes away from ``center`` when rate > 0."""

    rate: float = 1.0
    center: tuple[float, ...] = (0.0,)

    family = Family.LINEAR_STATE

    def evaluate(self, t, x, g):
        return self.rate * (x - np.asarray(self.center, dtype=float))

    def growth_constant(self):
        return abs(self.rate)

    def to_dict(self):
        return {"kind": "linear", "rate": self.rate, "center": list(self.center)}


@dataclass(frozen=True)
class CutoffSqrtDrift(Drift):
    """``b(t) = -1{t < 1 - alpha} / (2 sqrt(1 - t))`` in one dimension.

    Its integral from 0 to t is ``sqrt(1 - t) - 1`` on the support, so for a
    start at 1 the squared mean decreases linearly: ``(1 + int b)^2 = 1 - t``.
    """

    alpha: float = 0.25

    family = Family.TIME_ONLY
    exact_integral = True

    def value(self, t):
        if t < 1.0 - self.alpha:
            return np.array([-0.5 / math.sqrt(1.0 - t)])
        return np.array([0.0])

    def evaluate(self, t, x, g):
        return self.value(t)

    def integral(self, t0, t1):
        cut = 1.0 - self.alpha
        lo, hi = min(t0, cut), min(t1, cut)
        if hi <= lo:
            return np.array([0.0])
        return np.array([math.sqrt(1.0 - hi) - math.sqrt(1.0 - lo)])

    def growth_constant(self):
        return 0.5 / math.sqrt(self.alpha)

    def to_dict(self):
        return {"kind": "cutoff_sqrt", "alpha": self.alpha}


@dataclass(frozen=True)
class CallableDrift(Drift):
    """Drift from a Python callable; ``fn(t)`` for time-only, else ``fn(t, x, g)``."""

    fn: Callable = None
    family: Family = Family.GENERAL
    growth: float | None = None

    def evaluate(self, t, x, g):
        if self.family in (Family.TIME_ONLY, Family.CONSTANT):
            return np.asarray(self.fn(t), dtype=float)
        return np.asarray(self.fn(t, x, g), dtype=float)

    def value(self, t):
        if self.family not in (Family.TIME_ONLY, Family.CONSTANT):
            return super().value(t)
        return np.atleast_1d(np.asarray(self.fn(t), dtype=float))

    def growth_constant(self):
        return self.growth


@dataclass(frozen=True)
class RegimeCoefficients:
    """Per-regime diffusions plus the shared drift.

    ``diffusions`` is a tuple indexed by regime (regime 1 first) or a
    :class:`PowerLawDiffusions` rule for infinitely many regimes. Declared
    growth and Lipschitz constants are metadata; when growth constants are not
    declared they are derived from the coefficient objects where possible.
    """

    diffusions: tuple[Diffusion, ...] | PowerLawDiffusions
    drift: Drift
    drift_growth: float | None = None
    diffusion_growth: tuple[float, ...] | None = None
    drift_lipschitz: float | None = None
    diffusion_lipschitz: tuple[float, ...] | None = None

    def diffusion(self, i: int) -> Diffusion:
        if isinstance(self.diffusions, PowerLawDiffusions):
            return self.diffusions(i)
        if not 1 <= i <= len(self.diffusions):
            raise DomainError(f"no diffusion for regime {i}")
        return self.diffusions[i - 1]

    @property
    def n_regimes(self) -> int | None:
        if isinstance(self.diffusions, PowerLawDiffusions):
            return None
        return len(self.diffusions)

    @property
    def family(self) -> Family:
        fams = [self.drift.family]
        if isinstance(self.diffusions, PowerLawDiffusions):
            fams.append(Family.CONSTANT)
        else:
            fams.extend(s.family for s in self.diffusions)
        return combine_families(fams)

    def growth_b(self) -> float | None:
        return self.drift_growth if self.drift_growth is not None else self.drift.growth_constant()

    def growth_sigma(self, i: int, d: int) -> float | None:
        if self.diffusion_growth is not None:
            return self.diffusion_growth[i - 1]
        if isinstance(self.diffusions, PowerLawDiffusions):
            return self.diffusions.growth(i, d)
        return self.diffusion(i).growth_constant(d)

    def to_dict(self) -> dict:
        if isinstance(self.diffusions, PowerLawDiffusions):
            diffs: Any = self.diffusions.to_dict()
        else:
            diffs = [s.to_dict() for s in self.diffusions]
        out = {"diffusions": diffs, "drift": self.drift.to_dict()}
        growth = {}
        if self.drift_growth is not None:
            growth["drift"] = self.drift_growth
        if self.diffusion_growth is not None:
            growth["diffusions"] = list(self.diffusion_growth)
        if growth:
            out["growth"] = growth
        lips = {}
        if self.drift_lipschitz is not None:
            lips["drift"] = self.drift_lipschitz
        if self.diffusion_lipschitz is not None:
            lips["diffusions"] = list(self.diffusion_lipschitz)
        if lips:
            out["lipschitz"] = lips
        return out


# ---------------------------------------------------------------------------
# initial law


def _gaussian_abs_moment_1d(mu: float, s: float, p: float) -> float:
    if s == 0.0:
        return abs(mu) ** p
    return (
        s**p
        * 2 ** (p / 2)
        * math.gamma((p + 1) / 2)
        / math.sqrt(math.pi)
        * special.hyp1f1(-p / 2, 0.5, -(mu * mu) / (2 * s * s))
    )


@dataclass(frozen=True)
class InitialLaw:
    """Law of ``x_0`` with its centred mean and p-th moment relative to ``z``.

    Build with :meth:`dirac`, :meth:`gaussian` or :meth:`from_moments`.
    ``m0 = E(x_0 - z)``, ``M0 = E|x_0 - z|^p``; ``exact`` tells whether they
    are analytic or Monte Carlo estimates.
    """

    kind: str
    z: tuple[float, ...]
    p: float
    m0: tuple[float, ...]
    M0: float
    exact: bool
    params: tuple = ()

    @property
    def d(self) -> int:
        return len(self.z)

    @classmethod
    def dirac(cls, point: Sequence[float], z: Sequence[float], p: float = 2.0) -> InitialLaw:
        c, zz = np.asarray(point, dtype=float), np.asarray(z, dtype=float)
        diff = c - zz
        r = float(np.sqrt(np.sum(diff * diff)))
        M0 = float(np.sum(diff * diff)) if p == 2 else r**p
        return cls("dirac", tuple(zz), float(p), tuple(diff), M0, True, (tuple(c),))

    @classmethod
    def gaussian(cls, mean: Sequence[float], std: float, z: Sequence[float], p: float = 2.0) -> InitialLaw:
        mu, zz = np.asarray(mean, dtype=float), np.asarray(z, dtype=float)
        diff = mu - zz
        d = len(zz)
        if p == 2:
            M0, exact = float(np.sum(diff * diff)) + d * std * std, True
        elif d == 1:
            M0, exact = float(_gaussian_abs_moment_1d(float(diff[0]), std, p)), True
        else:
            rng = np.random.Generator(np.random.Philox(key=0))
            draws = diff + std * rng.standard_normal((10**6, d))
            M0, exact = float(np.mean(np.sum(draws**2, axis=1) ** (p / 2))), False
        return cls("gaussian", tuple(zz), float(p), tuple(diff), M0, exact, (tuple(mu), float(std)))

    @classmethod
    def from_moments(cls, m0: Sequence[float], M0: float, z: Sequence[float], p: float = 2.0) -> InitialLaw:
        """Law declared by its centred mean and second moment (p = 2 only).

        Samples come from the isotropic Gaussian with matching first two moments.
        """
        if p != 2:
            raise UnsupportedSpecError("moment-declared initial laws need p = 2")
        m = tuple(float(v) for v in m0)
        return cls("moments", tuple(float(v) for v in z), 2.0, m, float(M0), True, ())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.d
        if self.kind == "dirac":
            return np.broadcast_to(np.asarray(self.params[0], dtype=float), (n, d)).copy()
        if self.kind == "gaussian":
            mu, s = self.params
            return np.asarray(mu) + s * rng.standard_normal((n, d))
        var = (self.M0 - float(np.dot(self.m0, self.m0))) / d
        if var < 0:
            raise DomainError("second moment below squared mean; no law matches")
        return np.asarray(self.z) + np.asarray(self.m0) + math.sqrt(var) * rng.standard_normal((n, d))

    def violations(self) -> list[str]:
        out = []
        if not math.isfinite(self.M0) or self.M0 < 0:
            out.append("initial p-th moment must be finite and nonnegative")
        if self.p == 2 and self.M0 < float(np.dot(self.m0, self.m0)) * (1 - 1e-12) - 1e-15:
            out.append("initial law violates Jensen: M0 < |m0|^2")
        return out

    def to_dict(self) -> dict:
        if self.kind == "dirac":
            return {"kind": "dirac", "point": list(self.params[0])}
        if self.kind == "gaussian":
            return {"kind": "gaussian", "mean": list(self.params[0]), "std": self.params[1]}
        return {"kind": "moments", "m0": list(self.m0), "M0": self.M0}


@dataclass(frozen=True)
class EquationSpec:
    """One switched mean-field SDE: ``dX = sigma_i dB + b dt``, i = regime of g(t)."""

    p: float
    z: tuple[float, ...]
    partition: ThresholdPartition
    coefficients: RegimeCoefficients
    initial: InitialLaw
    name: str = ""

    @property
    def d(self) -> int:
        return len(self.z)

    @property
    def family(self) -> Family:
        return self.coefficients.family

    def replace(self, **changes) -> EquationSpec:
        from dataclasses import replace

        return replace(self, **changes)


def validate(spec: EquationSpec) -> list[str]:
    """Return the list of violated invariants; empty means valid."""
    out = []
    if not spec.p >= 2:
        out.append("p < 2")
    if spec.d < 1:
        out.append("dimension must be at least 1")
    out.extend(spec.partition.violations())
    nr_part, nr_coef = spec.partition.n_regimes, spec.coefficients.n_regimes
    if (nr_part is None) != (nr_coef is None):
        out.append("finite/infinite mismatch between partition and diffusions")
    elif nr_part is not None and nr_part != nr_coef:
        out.append(f"partition has {nr_part} regimes but {nr_coef} diffusions are given")
    if tuple(spec.initial.z) != tuple(spec.z):
        out.append("initial law was built for a different reference point z")
    if spec.initial.p != spec.p:
        out.append("initial law was built for a different p")
    if spec.initial.d != spec.d:
        out.append("initial law dimension differs from z")
    out.extend(spec.initial.violations())
    c = spec.coefficients
    declared = [c.drift_growth] + list(c.diffusion_growth or ())
    if any(v is not None and not (0 < v < math.inf) for v in declared):
        out.append("declared growth constants must be positive and finite")
    return out
