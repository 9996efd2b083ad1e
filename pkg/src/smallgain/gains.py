"""Scalar gain algebra, MAX-preserving maps and the cyclic small-gain test.

A *gain* here is a nondecreasing function on the nonnegative reals that
vanishes at zero.  Gains are closed under composition and pointwise max,
which is exactly what the vector small-gain machinery needs: an n-by-n
grid of scalar gains induces a MAX-preserving map on the nonnegative
orthant, and global attractivity of the induced discrete iteration is
equivalent to every cycle of gains composing to strictly below the
identity.

The module also provides the Q operator (the max of the first n-1
iterates of a map), the facts about Q used by the trajectory estimates,
and the composite closed-loop gain formula built from a hypothesis
bundle of comparison functions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "GainFunction",
    "ZeroGain",
    "LinearGain",
    "PowerGain",
    "SaturatingRationalGain",
    "PowerLogGain",
    "PiecewiseLinearGain",
    "CompositionGain",
    "PointwiseMaxGain",
    "KLFunction",
    "MaxPreservingMap",
    "GainHypothesisSpec",
    "SmallGainReport",
    "FactsReport",
    "CyclicConditionError",
    "eval_gain",
    "compose",
    "vec_max",
    "apply_map",
    "check_cyclic_small_gain",
    "q_operator",
    "iterate_gamma",
    "check_facts",
    "compute_G",
    "closed_loop_gain",
    "gain_from_spec",
    "gain_to_spec",
    "default_grid",
    "simple_cycles",
]

# Tolerances for equality assertions on short chains of elementary
# arithmetic (relative / absolute).
REL_TOL = 1e-12
ABS_TOL = 1e-14


class CyclicConditionError(ValueError):
    """Raised when an operation requires a map that passes the cyclic
    small-gain conditions but the supplied map does not."""


def _check_domain(s: float) -> float:
    s = float(s)
    if s < 0.0:
        raise ValueError(f"gain argument must be nonnegative, got {s}")
    return s


class GainFunction:
    """Base class for nondecreasing functions with value 0 at 0."""

    kind = "abstract"

    def __call__(self, s: float) -> float:
        raise NotImplementedError

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"{type(self).__name__}{self._params()!r}"

    def _params(self) -> tuple:
        return ()


@dataclass(frozen=True, repr=False)
class ZeroGain(GainFunction):
    kind = "zero"

    def __call__(self, s: float) -> float:
        _check_domain(s)
        return 0.0


@dataclass(frozen=True, repr=False)
class LinearGain(GainFunction):
    """s -> slope * s with slope >= 0."""

    slope: float

    kind = "linear"

    def __post_init__(self):
        if not (self.slope >= 0.0):
            raise ValueError(f"linear gain needs slope >= 0, got {self.slope}")

    def __call__(self, s: float) -> float:
        return self.slope * _check_domain(s)

    def _params(self) -> tuple:
        return (self.slope,)


@dataclass(frozen=True, repr=False)
class PowerGain(GainFunction):
    """s -> coef * s**exponent, a class-Kinf shape for coef, exponent > 0."""

    coef: float
    exponent: float

    kind = "power"

    def __post_init__(self):
        if not (self.coef >= 0.0 and self.exponent > 0.0):
            raise ValueError("power gain needs coef >= 0 and exponent > 0")

    def __call__(self, s: float) -> float:
        return self.coef * _check_domain(s) ** self.exponent

    def _params(self) -> tuple:
        return (self.coef, self.exponent)


@dataclass(frozen=True, repr=False)
class SaturatingRationalGain(GainFunction):
    """s -> alpha*s / (beta + delta*s); saturates at alpha/delta for delta > 0."""

    alpha: float
    beta: float
    delta: float = 0.0

    kind = "saturating_rational"

    def __post_init__(self):
        if not (self.alpha >= 0.0 and self.beta > 0.0 and self.delta >= 0.0):
            raise ValueError(
                "saturating rational gain needs alpha >= 0, beta > 0, delta >= 0"
            )

    def __call__(self, s: float) -> float:
        s = _check_domain(s)
        return self.alpha * s / (self.beta + self.delta * s)

    def _params(self) -> tuple:
        return (self.alpha, self.beta, self.delta)


@dataclass(frozen=True, repr=False)
class PowerLogGain(GainFunction):
    """s -> coef * (ln(1 + scale * s**inner_pow)) ** outer_pow.

    Covers the squared-logarithm gain shapes that show up when descent
    regions are delimited by ratios of transformed model quantities.
    """

    coef: float
    scale: float
    inner_pow: float = 1.0
    outer_pow: float = 2.0

    kind = "power_log"

    def __post_init__(self):
        if not (
            self.coef >= 0.0
            and self.scale >= 0.0
            and self.inner_pow > 0.0
            and self.outer_pow > 0.0
        ):
            raise ValueError("power_log gain parameters out of range")

    def __call__(self, s: float) -> float:
        s = _check_domain(s)
        return self.coef * math.log1p(self.scale * s**self.inner_pow) ** self.outer_pow

    def _params(self) -> tuple:
        return (self.coef, self.scale, self.inner_pow, self.outer_pow)


@dataclass(frozen=True, repr=False)
class PiecewiseLinearGain(GainFunction):
    """Linear interpolation through knots, clamped to the last value.

    The knot table must start at (0, 0), have strictly increasing
    abscissae and nondecreasing values, so the interpolant is a genuine
    gain by construction.
    """

    knots: Tuple[Tuple[float, float], ...]

    kind = "piecewise_linear"

    def __post_init__(self):
        if len(self.knots) < 1:
            raise ValueError("piecewise linear gain needs at least one knot")
        ss = [k[0] for k in self.knots]
        vs = [k[1] for k in self.knots]
        if ss[0] != 0.0 or vs[0] != 0.0:
            raise ValueError("piecewise linear gain must start at the knot (0, 0)")
        if any(b <= a for a, b in zip(ss, ss[1:])):
            raise ValueError("piecewise linear knots must be strictly increasing in s")
        if any(b < a for a, b in zip(vs, vs[1:])):
            raise ValueError("piecewise linear knot values must be nondecreasing")

    def __call__(self, s: float) -> float:
        s = _check_domain(s)
        ss = [k[0] for k in self.knots]
        vs = [k[1] for k in self.knots]
        if s >= ss[-1]:
            return vs[-1]
        # binary search for the bracketing interval
        lo, hi = 0, len(ss) - 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ss[mid] <= s:
                lo = mid
            else:
                hi = mid
        w = (s - ss[lo]) / (ss[hi] - ss[lo])
        return vs[lo] + w * (vs[hi] - vs[lo])

    def _params(self) -> tuple:
        return (self.knots,)


@dataclass(frozen=True, repr=False)
class CompositionGain(GainFunction):
    """Lazy composition; funcs are applied right to left."""

    funcs: Tuple[GainFunction, ...]

    kind = "composition"

    def __post_init__(self):
        if len(self.funcs) < 1:
            raise ValueError("composition needs at least one function")

    def __call__(self, s: float) -> float:
        v = _check_domain(s)
        for f in reversed(self.funcs):
            v = f(v)
        return v

    def _params(self) -> tuple:
        return (self.funcs,)


@dataclass(frozen=True, repr=False)
class PointwiseMaxGain(GainFunction):
    """Pointwise maximum of a family of gains."""

    funcs: Tuple[GainFunction, ...]

    kind = "pointwise_max"

    def __post_init__(self):
        if len(self.funcs) < 1:
            raise ValueError("pointwise max needs at least one function")

    def __call__(self, s: float) -> float:
        s = _check_domain(s)
        return max(f(s) for f in self.funcs)

    def _params(self) -> tuple:
        return (self.funcs,)


def eval_gain(gamma: GainFunction, s: float) -> float:
    """Evaluate a gain at a nonnegative argument."""
    return gamma(s)


def _linear_slope(g: GainFunction) -> Optional[float]:
    """Slope if g is exactly linear (zero counts as slope 0), else None."""
    if isinstance(g, ZeroGain):
        return 0.0
    if isinstance(g, LinearGain):
        return g.slope
    return None


def compose(outer: GainFunction, inner: GainFunction) -> GainFunction:
    """Composition outer(inner(s)).

    The result is kept lazy except for the one exact simplification,
    linear-after-linear, which collapses to a linear gain with the
    product slope.
    """
    so, si = _linear_slope(outer), _linear_slope(inner)
    if so is not None and si is not None:
        p = so * si
        return ZeroGain() if p == 0.0 else LinearGain(p)
    return CompositionGain((outer, inner))


def vec_max(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise maximum of same-length nonnegative vectors."""
    if len(vectors) == 0:
        raise ValueError("vec_max needs at least one vector")
    arrs = [np.asarray(v, dtype=float) for v in vectors]
    n = arrs[0].shape
    for a in arrs[1:]:
        if a.shape != n:
            raise ValueError(f"dimension mismatch in vec_max: {a.shape} vs {n}")
    out = arrs[0].copy()
    for a in arrs[1:]:
        np.maximum(out, a, out=out)
    return out


@dataclass(frozen=True)
class MaxPreservingMap:
    """Map on the nonnegative orthant with component i equal to
    max over j of entries[i][j](x_j)."""

    entries: Tuple[Tuple[GainFunction, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        if n == 0:
            raise ValueError("map needs dimension n >= 1")
        for row in self.entries:
            if len(row) != n:
                raise ValueError("entries must form a square grid")

    @property
    def n(self) -> int:
        return len(self.entries)

    def __call__(self, x) -> np.ndarray:
        return apply_map(self, x)

    def entry(self, i: int, j: int) -> GainFunction:
        return self.entries[i][j]

    @staticmethod
    def from_rows(rows: Sequence[Sequence[Optional[GainFunction]]]) -> "MaxPreservingMap":
        zero = ZeroGain()
        return MaxPreservingMap(
            tuple(tuple(g if g is not None else zero for g in row) for row in rows)
        )

    @staticmethod
    def zero(n: int) -> "MaxPreservingMap":
        z = ZeroGain()
        return MaxPreservingMap(tuple(tuple(z for _ in range(n)) for _ in range(n)))


def apply_map(gamma_map: MaxPreservingMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (gamma_map.n,):
        raise ValueError(f"dimension mismatch: map is {gamma_map.n}, vector is {x.shape}")
    out = np.empty(gamma_map.n)
    for i, row in enumerate(gamma_map.entries):
        out[i] = max(g(x[j]) for j, g in enumerate(row))
    return out


def q_operator(gamma_map: MaxPreservingMap, x) -> np.ndarray:
    """MAX of x and the first n-1 iterates of the map on x."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    v = x
    for _ in range(gamma_map.n - 1):
        v = apply_map(gamma_map, v)
        np.maximum(out, v, out=out)
    return out


def simple_cycles(n: int):
    """All index tuples (i1, ..., ir), r = 1..n, with distinct entries."""
    for r in range(1, n + 1):
        yield from itertools.permutations(range(n), r)


def default_grid() -> np.ndarray:
    """Log-spaced test grid for the cyclic condition, 1e-6 to 1e6."""
    return np.logspace(-6.0, 6.0, 60)


@dataclass(frozen=True)
class SmallGainReport:
    satisfied: bool
    violated_cycle: Optional[Tuple[int, ...]]
    witness_s: Optional[float]
    margin: float
    method: str = "grid"


def _cycle_value(gamma_map: MaxPreservingMap, cycle: Tuple[int, ...], s: float) -> float:
    # cycle (i1, ..., ir) composes entry (i1,i2) o (i2,i3) o ... o (ir,i1)
    v = s
    r = len(cycle)
    for k in range(r - 1, -1, -1):
        i, j = cycle[k], cycle[(k + 1) % r]
        v = gamma_map.entry(i, j)(v)
    return v


def check_cyclic_small_gain(
    gamma_map: MaxPreservingMap, grid: Optional[np.ndarray] = None
) -> SmallGainReport:
    """Test every simple cycle for strict contraction below the identity.

    For an all-linear map the test is exact: each cycle contracts iff
    the product of its slopes is below one, and the grid is bypassed.
    Otherwise each composed cycle is required to stay strictly below s
    at every grid point; the reported margin is the minimum over cycles
    and grid points of (s - composed(s)) / s, so a positive margin
    quantifies how far the map is from violating the condition on the
    grid that was actually tested.
    """
    n = gamma_map.n
    slopes = [[_linear_slope(g) for g in row] for row in gamma_map.entries]
    if all(sl is not None for row in slopes for sl in row):
        margin = math.inf
        for cyc in simple_cycles(n):
            prod = 1.0
            r = len(cyc)
            for k in range(r):
                prod *= slopes[cyc[k]][cyc[(k + 1) % r]]
            if prod >= 1.0:
                return SmallGainReport(False, cyc, 1.0, 1.0 - prod, "exact-linear")
            margin = min(margin, 1.0 - prod)
        return SmallGainReport(True, None, None, margin, "exact-linear")

    if grid is None:
        grid = default_grid()
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise ValueError("grid must be nonempty and strictly positive")
    if np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be sorted strictly increasing")

    margin = math.inf
    for cyc in simple_cycles(n):
        for s in grid:
            c = _cycle_value(gamma_map, cyc, float(s))
            m = (s - c) / s
            if not c < s:
                return SmallGainReport(False, cyc, float(s), m, "grid")
            margin = min(margin, m)
    return SmallGainReport(True, None, None, margin, "grid")


@lru_cache(maxsize=256)
def _passes_cyclic(gamma_map: MaxPreservingMap) -> bool:
    return check_cyclic_small_gain(gamma_map).satisfied


def iterate_gamma(
    gamma_map: MaxPreservingMap, x0, k_max: int, tol: float
) -> Tuple[np.ndarray, bool]:
    """Iterates x, Gamma(x), ... up to k_max, stopping early once the
    max norm drops below tol.  Returns (iterates, converged)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    x = np.asarray(x0, dtype=float)
    iterates = [x.copy()]
    converged = bool(np.max(np.abs(x)) < tol)
    for _ in range(k_max):
        if converged:
            break
        x = apply_map(gamma_map, x)
        iterates.append(x.copy())
        converged = bool(np.max(np.abs(x)) < tol)
    return np.array(iterates), converged


@dataclass(frozen=True)
class FactsReport:
    passed: bool
    failures: Tuple[Tuple[str, int], ...]  # (fact id, sample index)


def _leq(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a <= b + REL_TOL * np.abs(b) + ABS_TOL))


def _close(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.allclose(a, b, rtol=REL_TOL, atol=ABS_TOL))


def check_facts(
    gamma_map: MaxPreservingMap, samples: Sequence[Tuple[np.ndarray, np.ndarray]]
) -> FactsReport:
    """Check the Q-operator facts on sample pairs (x, y):

    - Q is MAX-preserving: Q(MAX{x, y}) = MAX{Q(x), Q(y)}.
    - Gamma(Q(x)) <= Q(x) and Q(x) >= x.
    - If x <= MAX{y, Gamma(x)} then x <= Q(y).

    The map must pass the cyclic small-gain conditions first; that
    precondition failure raises, it is never conflated with a fact
    failure.
    """
    if not _passes_cyclic(gamma_map):
        raise CyclicConditionError(
            "check_facts requires a map satisfying the cyclic small-gain conditions"
        )
    failures = []
    for idx, (x, y) in enumerate(samples):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        qx, qy = q_operator(gamma_map, x), q_operator(gamma_map, y)
        if not _close(q_operator(gamma_map, vec_max([x, y])), vec_max([qx, qy])):
            failures.append(("Q-max-preserving", idx))
        if not (_leq(apply_map(gamma_map, qx), qx) and _leq(x, qx)):
            failures.append(("Q-fixed-bound", idx))
        if _leq(x, vec_max([y, apply_map(gamma_map, x)])) and not _leq(x, qy):
            failures.append(("Q-implicit-bound", idx))
    return FactsReport(len(failures) == 0, tuple(failures))


@dataclass(frozen=True)
class KLFunction:
    """Transient envelope sigma(s, t) = a1(exp(-t) * a2(s)).

    a1 and a2 are gains (class Kinf shapes in practice), so sigma is
    nondecreasing in s, nonincreasing in t and vanishes at s = 0.
    """

    a1: GainFunction
    a2: GainFunction

    def __call__(self, s: float, t: float) -> float:
        if t < 0.0:
            raise ValueError("time argument must be nonnegative")
        return self.a1(math.exp(-t) * self.a2(s))

    @staticmethod
    def exponential(scale: float = 1.0, rate: float = 1.0) -> "KLFunction":
        """sigma(s, t) = scale * s * exp(-rate * t), realized inside the
        a1/a2 family as a1(u) = scale * u**rate, a2(s) = s**(1/rate)."""
        if not rate > 0.0:
            raise ValueError("rate must be positive")
        return KLFunction(PowerGain(scale, rate), PowerGain(1.0, 1.0 / rate))

    def scaled(self, factor: float) -> "KLFunction":
        """Scale the output by a nonnegative constant (still of class KL)."""
        if factor < 0.0:
            raise ValueError("scale factor must be nonnegative")
        return KLFunction(CompositionGain((LinearGain(factor), self.a1)), self.a2)


@dataclass(frozen=True)
class GainHypothesisSpec:
    """The comparison-function bundle entering the composite gain formula.

    The vector-argument gains p and q act through the max component of
    their vector argument; every use composes them with all-ones
    vectors, where that reduction is exact.
    """

    sigma: KLFunction
    zeta: GainFunction
    p: GainFunction
    p_u: GainFunction
    g_u: GainFunction
    eta: GainFunction
    q: GainFunction

    def p_vec(self, x: np.ndarray) -> float:
        return self.p(float(np.max(x)))

    def q_vec(self, x: np.ndarray) -> float:
        return self.q(float(np.max(x)))


def compute_G(spec: GainHypothesisSpec, gamma_map: MaxPreservingMap, s: float) -> np.ndarray:
    """Composite gain vector G(s) of the closed loop.

    G(s) = Q(1 * max{ sigma(p_u(s), 0), sigma(g_u(s), 0),
                      sigma(p(Q(1 sigma(g_u(s), 0))), 0),
                      sigma(p(Q(1 zeta(s))), 0), zeta(s) })
    """
    s = _check_domain(s)
    if not _passes_cyclic(gamma_map):
        raise CyclicConditionError(
            "compute_G requires a map satisfying the cyclic small-gain conditions"
        )
    n = gamma_map.n
    ones = np.ones(n)
    sig = spec.sigma
    a = sig(spec.p_u(s), 0.0)
    b = sig(spec.g_u(s), 0.0)
    c = sig(spec.p_vec(q_operator(gamma_map, ones * b)), 0.0)
    d = sig(spec.p_vec(q_operator(gamma_map, ones * spec.zeta(s))), 0.0)
    e = spec.zeta(s)
    core = max(a, b, c, d, e)
    return q_operator(gamma_map, ones * core)


def closed_loop_gain(spec: GainHypothesisSpec, gamma_map: MaxPreservingMap, s: float) -> float:
    """Scalar closed-loop gain max{eta(s), q(G(s))}."""
    g = compute_G(spec, gamma_map, s)
    return max(spec.eta(s), spec.q_vec(g))


# -- construction from config documents --------------------------------------

_GAIN_BUILDERS: dict[str, Callable[..., GainFunction]] = {}


def _register(kind):
    def deco(fn):
        _GAIN_BUILDERS[kind] = fn
        return fn

    return deco


@_register("zero")
def _build_zero(spec):
    return ZeroGain()


@_register("linear")
def _build_linear(spec):
    return LinearGain(float(spec["slope"]))


@_register("power")
def _build_power(spec):
    return PowerGain(float(spec["coef"]), float(spec["exponent"]))


@_register("saturating_rational")
def _build_sat(spec):
    return SaturatingRationalGain(
        float(spec["alpha"]), float(spec["beta"]), float(spec.get("delta", 0.0))
    )


@_register("power_log")
def _build_power_log(spec):
    return PowerLogGain(
        float(spec["coef"]),
        float(spec["scale"]),
        float(spec.get("inner_pow", 1.0)),
        float(spec.get("outer_pow", 2.0)),
    )


@_register("piecewise_linear")
def _build_pw(spec):
    return PiecewiseLinearGain(tuple((float(s), float(v)) for s, v in spec["knots"]))


@_register("composition")
def _build_comp(spec):
    return CompositionGain(tuple(gain_from_spec(f) for f in spec["funcs"]))


@_register("pointwise_max")
def _build_max(spec):
    return PointwiseMaxGain(tuple(gain_from_spec(f) for f in spec["funcs"]))


def gain_from_spec(spec) -> GainFunction:
    """Build a gain from a config mapping {"kind": ..., <params>}."""
    if spec is None:
        return ZeroGain()
    kind = spec.get("kind")
    if kind not in _GAIN_BUILDERS:
        raise ValueError(f"unknown gain kind {kind!r}; known: {sorted(_GAIN_BUILDERS)}")
    return _GAIN_BUILDERS[kind](spec)


def gain_to_spec(g: GainFunction) -> dict:
    """Inverse of gain_from_spec for every built-in kind."""
    if isinstance(g, ZeroGain):
        return {"kind": "zero"}
    if isinstance(g, LinearGain):
        return {"kind": "linear", "slope": g.slope}
    if isinstance(g, PowerGain):
        return {"kind": "power", "coef": g.coef, "exponent": g.exponent}
    if isinstance(g, SaturatingRationalGain):
        return {
            "kind": "saturating_rational",
            "alpha": g.alpha,
            "beta": g.beta,
            "delta": g.delta,
        }
    if isinstance(g, PowerLogGain):
        return {
            "kind": "power_log",
            "coef": g.coef,
            "scale": g.scale,
            "inner_pow": g.inner_pow,
            "outer_pow": g.outer_pow,
        }
    if isinstance(g, PiecewiseLinearGain):
        return {"kind": "piecewise_linear", "knots": [list(k) for k in g.knots]}
    if isinstance(g, CompositionGain):
        return {"kind": "composition", "funcs": [gain_to_spec(f) for f in g.funcs]}
    if isinstance(g, PointwiseMaxGain):
        return {"kind": "pointwise_max", "funcs": [gain_to_spec(f) for f in g.funcs]}
    raise ValueError(f"cannot serialize gain of type {type(g).__name__}")
