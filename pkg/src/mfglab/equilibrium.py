"""Mean-field equilibria and N-player Nash systems.

The equilibrium condition is the scalar fixed point
``sigma = sigma0(x(0, t, sigma, .)#m)``; here ``F(sigma)`` is the defect
``sigma - sigma0(...)``. The N-player system asks the same of every player
against the empirical measure of the *other* players' time-0 positions.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize, special

from .dynamics import (ConstantInX, DriftModel, FlowConfig, drift_from_dict,
                       dsigma_x0, flow_backward, flow_forward)
from .errors import ConfigError, NumericalError, PreconditionError
from .measures import EmpiricalMeasure, Measure1D, quantize


# ---------------------------------------------------------------------------
# second-moment cutoff


def _bump(s, R):
    """Smooth cutoff in the second moment ``s``: 1 at 0, 0 for ``s >= R**2``."""
    r = np.asarray(s, dtype=float) / (R * R)
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1 - 1 / (1 - r[inside] ** 2))
    return out if out.shape else float(out)


def _bump_prime(s, R):
    r = np.asarray(s, dtype=float) / (R * R)
    out = np.zeros_like(r)
    inside = r < 1
    ri = r[inside]
    out[inside] = -np.exp(1 - 1 / (1 - ri**2)) * 2 * ri / (1 - ri**2) ** 2 / (R * R)
    return out if out.shape else float(out)


def _bump_prime_sup():
    # sup over r in [0,1) of |d/dr exp(1 - 1/(1-r^2))|; the s-derivative is this / R^2
    g = lambda r: -np.exp(1 - 1 / (1 - r * r)) * 2 * r / (1 - r * r) ** 2
    res = optimize.minimize_scalar(g, bounds=(0.0, 0.999), method="bounded",
                                   options={"xatol": 1e-12})
    return float(-res.fun)


BUMP_PRIME_SUP = _bump_prime_sup()


def _as_points(points):
    a = np.asarray(points)
    if a.dtype != object:
        a = a.astype(float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def scalar_mean(points):
    """Average of all coordinates: the mean of a 1-D measure, and for ``d > 1``
    the average of the mean vector's components."""
    a = _as_points(points)
    if a.dtype == object:
        return sum(a.ravel()) / a.size
    return math.fsum(a.ravel()) / a.size


def second_moment(points):
    a = _as_points(points)
    if a.dtype == object:
        return sum(v * v for v in a.ravel()) / a.shape[0]
    return math.fsum((a * a).ravel()) / a.shape[0]


# ---------------------------------------------------------------------------
# coupling functionals


class Sigma0Model:
    """Base class. ``value`` and ``dm`` act on uniform-weight point clouds
    of shape ``(n, d)``; ``dm`` returns ``D_m sigma0(m, x_k)`` per point."""

    kind = "abstract"
    cutoff_radius: Optional[float] = None
    differentiable = True

    # subclasses implement the uncut functional
    def _raw(self, pts):
        raise NotImplementedError

    def _raw_dm(self, pts):
        raise NotImplementedError

    def _raw_range(self):
        raise NotImplementedError

    def _raw_bounds(self):
        """(sup |raw|, sup |D_m raw|) over measures in the cutoff ball."""
        raise NotImplementedError

    def value(self, points):
        pts = _as_points(points)
        v = self._raw(pts)
        if self.cutoff_radius is None:
            return v
        return float(v) * _bump(second_moment(pts), self.cutoff_radius)

    def dm(self, points):
        if not self.differentiable:
            raise PreconditionError(f"{self.kind} coupling is not differentiable")
        pts = _as_points(points).astype(float)
        g = self._raw_dm(pts)
        if self.cutoff_radius is None:
            return g
        s = second_moment(pts)
        R = self.cutoff_radius
        return g * _bump(s, R) + float(self._raw(pts)) * _bump_prime(s, R) * 2 * pts

    def value_range(self):
        lo, hi = self._raw_range()
        if self.cutoff_radius is not None:
            lo, hi = min(lo, 0.0), max(hi, 0.0)
        return lo, hi

    @property
    def uniform_bound(self):
        return self._raw_bounds()[0]

    @property
    def dm_bound(self):
        u, g = self._raw_bounds()
        if self.cutoff_radius is None:
            return g
        R = self.cutoff_radius
        # |x| <= R on measures whose cutoff is active at a point of their support
        return g + u * BUMP_PRIME_SUP / (R * R) * 2 * R

    def _check_cutoff(self):
        if self.cutoff_radius is not None and not self.cutoff_radius > 0:
            raise ValueError("cutoff_radius must be positive")

    def _base_dict(self):
        d = {"kind": self.kind}
        if self.cutoff_radius is not None:
            d["cutoff_radius"] = float(self.cutoff_radius)
        return d


@dataclass(frozen=True)
class StepOfMean(Sigma0Model):
    """``alpha`` if mean < ``threshold`` else ``beta`` (equality goes right)."""

    threshold: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0
    cutoff_radius: Optional[float] = None
    kind = "step_of_mean"
    differentiable = False

    def __post_init__(self):
        self._check_cutoff()

    def _raw(self, pts):
        return self.alpha if scalar_mean(pts) < self.threshold else self.beta

    def _raw_range(self):
        return float(min(self.alpha, self.beta)), float(max(self.alpha, self.beta))

    def _raw_bounds(self):
        return float(max(abs(self.alpha), abs(self.beta))), math.inf

    def of_mean(self, xi):
        return np.where(np.asarray(xi) < self.threshold, self.alpha, self.beta)

    def to_dict(self):
        d = self._base_dict()
        d.update(threshold=float(self.threshold), alpha=float(self.alpha), beta=float(self.beta))
        return d


@dataclass(frozen=True)
class Profile:
    """A bounded monotone scalar profile with its derivative and bounds."""

    name: str
    f: Callable
    df: Callable
    lo: float
    hi: float
    lipschitz: float


PROFILES = {
    "tanh": Profile("tanh", np.tanh, lambda x: 1 / np.cosh(x) ** 2, -1.0, 1.0, 1.0),
    "arctan": Profile("arctan", lambda x: 2 / np.pi * np.arctan(x),
                      lambda x: 2 / np.pi / (1 + x * x), -1.0, 1.0, 2 / np.pi),
    "logistic": Profile("logistic", special.expit,
                        lambda x: special.expit(x) * (1 - special.expit(x)), 0.0, 1.0, 0.25),
    "erf": Profile("erf", special.erf, lambda x: 2 / np.sqrt(np.pi) * np.exp(-x * x),
                   -1.0, 1.0, 2 / np.sqrt(np.pi)),
}


@dataclass(frozen=True)
class SmoothOfMean(Sigma0Model):
    """``offset + amplitude * p(slope * (mean - shift))`` for a named profile ``p``.

    A negative amplitude gives a decreasing coupling (crossing characteristics).
    """

    profile: str = "tanh"
    amplitude: float = 1.0
    slope: float = 1.0
    shift: float = 0.0
    offset: float = 0.0
    cutoff_radius: Optional[float] = None
    kind = "smooth_of_mean"

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if not self.slope > 0:
            raise ValueError("slope must be positive")
        self._check_cutoff()

    @property
    def _p(self):
        return PROFILES[self.profile]

    def of_mean(self, xi):
        return self.offset + self.amplitude * self._p.f(self.slope * (np.asarray(xi, float) - self.shift))

    def d_of_mean(self, xi):
        return self.amplitude * self.slope * self._p.df(self.slope * (np.asarray(xi, float) - self.shift))

    def _raw(self, pts):
        return float(self.of_mean(scalar_mean(pts)))

    def _raw_dm(self, pts):
        d = pts.shape[1]
        return np.full(pts.shape, float(self.d_of_mean(scalar_mean(pts))) / d)

    def _raw_range(self):
        a, b = self.offset + self.amplitude * self._p.lo, self.offset + self.amplitude * self._p.hi
        return float(min(a, b)), float(max(a, b))

    def _raw_bounds(self):
        lo, hi = self._raw_range()
        return max(abs(lo), abs(hi)), abs(self.amplitude) * self.slope * self._p.lipschitz

    def to_dict(self):
        d = self._base_dict()
        d.update(profile=self.profile, amplitude=float(self.amplitude), slope=float(self.slope),
                 shift=float(self.shift), offset=float(self.offset))
        return d


@dataclass(frozen=True)
class MomentFunctional(Sigma0Model):
    """Polynomial ``sum c_ij * mean**i * M2**j`` in the scalar mean and the
    second moment ``M2 = int |x|^2``. ``terms`` holds ``(i, j, c_ij)``."""

    terms: tuple = ((1, 0, 1.0),)
    cutoff_radius: Optional[float] = None
    kind = "moment_functional"

    def __post_init__(self):
        terms = tuple((int(i), int(j), float(c)) for i, j, c in self.terms)
        if any(i < 0 or j < 0 for i, j, _ in terms):
            raise ValueError("moment exponents must be >= 0")
        object.__setattr__(self, "terms", terms)
        self._check_cutoff()

    def _raw(self, pts):
        m1, m2 = scalar_mean(pts), second_moment(pts)
        return float(sum(c * m1**i * m2**j for i, j, c in self.terms))

    def _raw_dm(self, pts):
        m1, m2 = scalar_mean(pts), second_moment(pts)
        d = pts.shape[1]
        g = np.zeros(pts.shape)
        for i, j, c in self.terms:
            if i:
                g += c * i * m1 ** (i - 1) * m2**j / d
            if j:
                g += c * j * m1**i * m2 ** (j - 1) * 2 * pts
        return g

    def _raw_bounds(self):
        if self.cutoff_radius is None:
            return math.inf, math.inf
        R = self.cutoff_radius
        u = sum(abs(c) * R**i * R ** (2 * j) for i, j, c in self.terms)
        g = sum(abs(c) * (i * R ** (i - 1) * R ** (2 * j) if i else 0)
                + abs(c) * (j * R**i * R ** (2 * j - 2) * 2 * R if j else 0)
                for i, j, c in self.terms)
        return float(u), float(g)

    def _raw_range(self):
        u = self._raw_bounds()[0]
        return -u, u

    def to_dict(self):
        d = self._base_dict()
        d["terms"] = [[i, j, c] for i, j, c in self.terms]
        return d


@dataclass(frozen=True)
class IntegralOfProfile(Sigma0Model):
    """``int phi dm`` with the odd power profile ``phi(x) = amplitude * sign(x) |x|**power``.

    Unbounded for every power, so it never satisfies the boundedness
    assumption on the coupling; it exists for the alternating-sign
    N-player construction.
    """

    power: float = 0.5
    amplitude: float = 1.0
    cutoff_radius: Optional[float] = None
    kind = "integral_of_profile"

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError("power must be positive")
        self._check_cutoff()

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.sign(x) * np.abs(x) ** self.power

    def _raw(self, pts):
        if pts.shape[1] != 1:
            raise PreconditionError("integral_of_profile is defined for d = 1 only")
        return math.fsum(self.phi(pts.astype(float).ravel())) / pts.shape[0]

    def _raw_dm(self, pts):
        with np.errstate(divide="ignore"):
            return self.amplitude * self.power * np.abs(pts) ** (self.power - 1)

    def _raw_range(self):
        return -math.inf, math.inf

    def _raw_bounds(self):
        return math.inf, math.inf

    def to_dict(self):
        d = self._base_dict()
        d.update(power=float(self.power), amplitude=float(self.amplitude))
        return d


_SIGMA0_KINDS = {
    "step_of_mean": (StepOfMean, {"threshold", "alpha", "beta", "cutoff_radius"}),
    "smooth_of_mean": (SmoothOfMean, {"profile", "amplitude", "slope", "shift", "offset",
                                      "cutoff_radius"}),
    "moment_functional": (MomentFunctional, {"terms", "cutoff_radius"}),
    "integral_of_profile": (IntegralOfProfile, {"power", "amplitude", "cutoff_radius"}),
}


def sigma0_from_dict(data: dict) -> Sigma0Model:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind not in _SIGMA0_KINDS:
        raise ConfigError(f"unknown sigma0 kind {kind!r}")
    cls, allowed = _SIGMA0_KINDS[kind]
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown sigma0 keys: {sorted(unknown)}")
    if "terms" in data:
        data["terms"] = tuple(tuple(t) for t in data["terms"])
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# game specification and the equilibrium map


@dataclass(frozen=True)
class GameSpec:
    drift: DriftModel
    sigma0: Sigma0Model
    t: float
    dimension: int = 1
    quantization_points: int = 64
    flow: FlowConfig = field(default_factory=FlowConfig)

    def __post_init__(self):
        if not self.t >= 0:
            raise ValueError("horizon t must be >= 0")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.quantization_points < 1:
            raise ValueError("quantization_points must be >= 1")

    def check_ranges(self):
        """Refuse when the coupling can leave the drift's sigma interval."""
        lo, hi = self.sigma0.value_range()
        s_lo, s_hi = self.drift.sigma_range
        if lo < s_lo or hi > s_hi:
            raise PreconditionError(
                f"sigma0 range [{lo}, {hi}] exceeds the drift's sigma_range [{s_lo}, {s_hi}]")

    def to_dict(self):
        return {"drift": self.drift.to_dict(), "sigma0": self.sigma0.to_dict(),
                "t": float(self.t), "dimension": self.dimension,
                "quantization_points": self.quantization_points,
                "steps_per_unit_time": self.flow.steps_per_unit_time}

    @classmethod
    def from_dict(cls, data: dict) -> "GameSpec":
        allowed = {"drift", "sigma0", "t", "dimension", "quantization_points",
                   "steps_per_unit_time"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown game keys: {sorted(unknown)}")
        try:
            return cls(drift=drift_from_dict(data.get("drift", {"kind": "constant_in_x"})),
                       sigma0=sigma0_from_dict(data.get("sigma0", {"kind": "step_of_mean"})),
                       t=float(data.get("t", 1.0)),
                       dimension=int(data.get("dimension", 1)),
                       quantization_points=int(data.get("quantization_points", 64)),
                       flow=FlowConfig(int(data.get("steps_per_unit_time", 200))))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def support_points(spec: GameSpec, m) -> np.ndarray:
    """Uniform-weight points representing ``m``: the points of an empirical
    measure, or the optimal quantization of a :class:`Measure1D`."""
    if isinstance(m, EmpiricalMeasure):
        pts = m.points
    elif isinstance(m, Measure1D):
        pts = np.asarray(quantize(m, spec.quantization_points).points, dtype=float)[:, None]
    else:
        pts = _as_points(m)
    if pts.shape[1] != spec.dimension:
        raise PreconditionError(f"measure has dimension {pts.shape[1]}, game expects {spec.dimension}")
    return pts


def F_value(spec: GameSpec, m, sigma) -> float:
    """``sigma - sigma0(x(0, t, sigma, .)#m)``."""
    pts = support_points(spec, m)
    y = flow_backward(spec.drift, sigma, spec.t, pts, spec.flow)
    return float(sigma - spec.sigma0.value(y))


def F_prime(spec: GameSpec, m, sigma) -> float:
    """``1 - int D_m sigma0(m0, x(0,t,sigma,x)) . d_sigma x(0,t,sigma,x) dm(x)``."""
    if not spec.sigma0.differentiable:
        raise PreconditionError(f"{spec.sigma0.kind} coupling is not differentiable")
    pts = support_points(spec, m)
    y = flow_backward(spec.drift, sigma, spec.t, pts, spec.flow)
    g = spec.sigma0.dm(y)
    ds = dsigma_x0(spec.drift, sigma, spec.t, pts, spec.flow)
    return float(1 - np.sum(g * ds) / pts.shape[0])


@dataclass(frozen=True)
class EquilibriumReport:
    roots: tuple                # ((sigma, F' estimate), ...)
    jump_crossings: tuple       # sigmas where F changes sign by a jump
    samples: tuple              # ((sigma, F(sigma)), ...)

    @property
    def root_values(self):
        return tuple(r for r, _ in self.roots)

    def to_dict(self):
        return {"roots": [list(r) for r in self.roots],
                "jump_crossings": list(self.jump_crossings)}

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sigma", "F"])
        for s, f in self.samples:
            w.writerow([f"{s:.12e}", f"{f:.12e}"])
        return buf.getvalue()


def find_equilibria(spec: GameSpec, m, grid_points: int = 2048,
                    root_tolerance: float = 1e-10) -> EquilibriumReport:
    """Scan ``F`` over the drift's sigma interval and classify sign changes.

    Continuous crossings are refined by bisection. A bracket whose refined
    endpoints still differ by more than ``root_tolerance`` in ``F`` is a jump
    crossing. For a step coupling the only possible roots are its two values,
    which are checked directly.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    spec.check_ranges()
    pts = support_points(spec, m)
    lo, hi = map(float, spec.drift.sigma_range)
    grid = np.linspace(lo, hi, grid_points)
    F = lambda s: F_value(spec, pts, s)
    vals = np.array([F(s) for s in grid])
    cell = (hi - lo) / (grid_points - 1)

    roots, jumps = [], []
    step = isinstance(spec.sigma0, StepOfMean)
    if step:
        for c in sorted({float(spec.sigma0.alpha), float(spec.sigma0.beta)}):
            if lo <= c <= hi and abs(F(c)) <= root_tolerance:
                roots.append(c)
    else:
        roots.extend(float(s) for s, v in zip(grid, vals) if v == 0)

    for k in range(grid_points - 1):
        fa, fb = vals[k], vals[k + 1]
        if fa == 0 or fb == 0 or (fa > 0) == (fb > 0):
            continue
        a, b = grid[k], grid[k + 1]
        while b - a > root_tolerance:
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            fm = F(mid)
            if fm == 0:
                a = b = mid
                break
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b, fb = mid, fm
        # secant point of the final bracket: a root for continuous F, a
        # point with |F| of the jump size otherwise
        if a == b or fb == fa:
            cand = a
        else:
            cand = min(max(a - fa * (b - a) / (fb - fa), a), b)
        if abs(F(cand)) <= root_tolerance:
            if not step:
                roots.append(float(cand))
        else:
            jumps.append(float(0.5 * (a + b)))

    roots = sorted(set(roots))
    merged = []
    for r in roots:
        if not merged or r - merged[-1] > root_tolerance:
            merged.append(r)
    # a root and a jump closer than one grid cell merge into the root
    jumps = [j for j in jumps if all(abs(j - r) > cell for r in merged)]

    out = []
    for r in merged:
        if spec.sigma0.differentiable:
            out.append((r, F_prime(spec, pts, r)))
        else:
            out.append((r, _fd_slope(F, r, cell)))
    return EquilibriumReport(tuple(out), tuple(jumps), tuple(zip(grid.tolist(), vals.tolist())))


def _fd_slope(F, s, cell):
    h = min(1e-6, cell / 4)
    return (F(s + h) - F(s - h)) / (2 * h)


# ---------------------------------------------------------------------------
# N-player systems


@dataclass(frozen=True)
class NPlayerSolution:
    sigmas: tuple
    residuals: tuple
    exact: bool
    mode: str = "float"          # "fraction" when verified in exact arithmetic

    @property
    def max_residual(self):
        return max(abs(float(r)) for r in self.residuals)


def _exact_capable(spec):
    return (isinstance(spec.drift, ConstantInX) and isinstance(spec.sigma0, StepOfMean)
            and spec.sigma0.cutoff_radius is None)


def _to_fraction_array(a):
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        v = arr[idx]
        out[idx] = v if isinstance(v, Fraction) else Fraction(v)
    return out


def verify_nplayer(spec: GameSpec, points, sigmas) -> NPlayerSolution:
    """Residuals ``sigma_i - sigma0(others' time-0 empirical measure)``.

    With straight characteristics and a step coupling every quantity is
    rational, so the check runs in exact Fraction arithmetic (float inputs
    are converted exactly) and the threshold comparisons are exact.
    """
    pts = _as_points(points)
    N = pts.shape[0]
    if N < 2:
        raise PreconditionError("the N-player system needs N >= 2")
    if len(sigmas) != N:
        raise ValueError("need one sigma per player")
    if pts.shape[1] != spec.dimension:
        raise PreconditionError("points do not match the game dimension")
    if _exact_capable(spec):
        x = _to_fraction_array(pts)
        s = _to_fraction_array(np.asarray(sigmas, dtype=object))
        t = Fraction(spec.t)
        y = x - s[:, None] * t
        total = sum(y.ravel())
        d = spec.dimension
        s0 = spec.sigma0
        thr = Fraction(s0.threshold)
        res = []
        for i in range(N):
            mean = (total - sum(y[i])) / ((N - 1) * d)
            val = Fraction(s0.alpha) if mean < thr else Fraction(s0.beta)
            res.append(s[i] - val)
        return NPlayerSolution(tuple(float(v) for v in s), tuple(float(r) for r in res),
                               all(r == 0 for r in res), "fraction")
    pts = pts.astype(float)
    s = np.asarray(sigmas, dtype=float)
    y = flow_backward(spec.drift, s[:, None], spec.t, pts, spec.flow)
    res = [float(s[i] - spec.sigma0.value(np.delete(y, i, axis=0))) for i in range(N)]
    return NPlayerSolution(tuple(s.tolist()), tuple(res), all(r == 0 for r in res))


def solve_nplayer(spec: GameSpec, points, tol: float = 1e-12, max_iter: int = 2000,
                  damping: float = 0.5):
    """All N-player equilibria found by the applicable strategy.

    Step couplings: exhaustive search over the 2**N two-value patterns
    (N <= 16). Other couplings: damped fixed-point iteration from 8
    deterministic starts; distinct converged solutions are returned.
    """
    pts = _as_points(points)
    N = pts.shape[0]
    if isinstance(spec.sigma0, StepOfMean):
        if N > 16:
            raise PreconditionError("exhaustive pattern search is limited to N <= 16")
        vals = (spec.sigma0.alpha, spec.sigma0.beta)
        found = []
        for code in range(2**N):
            sig = [vals[(code >> (N - 1 - i)) & 1] for i in range(N)]
            sol = verify_nplayer(spec, pts, sig)
            if sol.exact:
                found.append(sol)
        return found
    lo, hi = map(float, spec.drift.sigma_range)
    starts = np.linspace(lo, hi, 10)[1:-1]
    found = []
    for s0 in starts:
        s = np.full(N, s0)
        for _ in range(max_iter):
            g = s - np.asarray(verify_nplayer(spec, pts, s).residuals)
            new = (1 - damping) * s + damping * g
            if np.max(np.abs(new - s)) <= tol:
                s = new
                break
            s = new
        sol = verify_nplayer(spec, pts, s)
        if sol.max_residual <= max(tol, 1e-10) and not any(
                np.max(np.abs(np.subtract(f.sigmas, sol.sigmas))) <= 1e-8 for f in found):
            found.append(sol)
    return found


# ---------------------------------------------------------------------------
# explicit constructions


@dataclass(frozen=True)
class ThreeEquilibria:
    spec: GameSpec
    points: tuple               # exact values (Fractions) when available
    patterns: dict              # name -> tuple of sigmas
    J: int
    details: dict = field(default_factory=dict)

    @property
    def points_float(self):
        return np.array([float(p) for p in self.points])


def _step_game(t, sigma_range=(-1.5, 1.5)):
    return GameSpec(ConstantInX(sigma_range), StepOfMean(0.0, 1.0, 0.0), float(t))


def construct_prop33(a, b, t, N: int) -> ThreeEquilibria:
    """Two-point population ``a + t`` (first ``J_N`` players) and ``-b``.

    ``J_N = ceil((N-1) b / (a+b))``; the patterns are all-zero, all-one and
    ``1`` for the first ``J_N`` players. The mixed pattern's leave-one-out
    sums ``(a+b)(J_N-1) - (N-1)b < 0 <= (a+b)J_N - (N-1)b`` are asserted in
    exact arithmetic.
    """
    if not (a > 0 and b > 0 and t > 0):
        raise PreconditionError("a, b and t must be positive")
    if N < 2:
        raise PreconditionError("N must be >= 2")
    A, Bv, T = Fraction(a), Fraction(b), Fraction(t)
    J = math.ceil(Fraction(N - 1) * Bv / (A + Bv))
    below = (A + Bv) * (J - 1) - (N - 1) * Bv
    above = (A + Bv) * J - (N - 1) * Bv
    if not (below < 0 <= above):
        raise PreconditionError("leave-one-out sign conditions fail")
    points = tuple([A + T] * J + [-Bv] * (N - J))
    patterns = {"all_zero": (0,) * N, "all_one": (1,) * N,
                "mixed": (1,) * J + (0,) * (N - J)}
    return ThreeEquilibria(_step_game(t), points, patterns, J,
                           {"sum_if_switching": below, "sum_if_staying": above})


@dataclass(frozen=True)
class Alternating:
    spec: GameSpec
    points: tuple
    sigmas: tuple
    b_N: float
    notes: tuple


def construct_alternating(t, N: int, alpha) -> Alternating:
    """Alternating ``+-b_N`` equilibrium with every player at the origin.

    The coupling is ``int phi dm`` with ``phi(x) = sign(x)|x|**alpha``; the
    magnitude solves ``phi(t b) = (N-1) b`` in closed form.
    """
    if alpha == 1:
        raise PreconditionError("alpha = 1 admits no solution of phi(t b) = (N-1) b")
    if not alpha > 0:
        raise PreconditionError("alpha must be positive")
    if N < 2 or N % 2:
        raise PreconditionError("N must be even and >= 2")
    if not t > 0:
        raise PreconditionError("t must be positive")
    bN = (t**alpha / (N - 1)) ** (1 / (1 - alpha))
    width = 2 * bN + 1
    spec = GameSpec(ConstantInX((-width, width)), IntegralOfProfile(alpha), float(t))
    sigmas = tuple(bN if k % 2 == 0 else -bN for k in range(N))
    notes = ("coupling is unbounded: the boundedness assumption on sigma0 is violated",)
    return Alternating(spec, (0.0,) * N, sigmas, float(bN), notes)


def construct_two_population(spec: GameSpec, mu_tilde: Measure1D, nu_tilde: Measure1D,
                             N: int) -> Optional[ThreeEquilibria]:
    """Three equilibria for a population split across the threshold.

    Returns ``None`` when ``J = ceil(lambda N)`` misses ``0 <= J - lambda N < c/delta``.
    """
    s0 = spec.sigma0
    if not (isinstance(s0, StepOfMean) and s0.threshold == 0 and s0.alpha == 1
            and s0.beta == 0 and s0.cutoff_radius is None):
        raise PreconditionError("coupling must be the unit step of the mean (threshold 0, 1 then 0)")
    if spec.dimension != 1:
        raise PreconditionError("two-population construction is one-dimensional")
    if not spec.drift.increasing_in_sigma:
        raise PreconditionError("drift must be strictly increasing in sigma")
    s_lo, s_hi = spec.drift.sigma_range
    if not (s_lo <= 0 and s_hi >= 1):
        raise PreconditionError("drift sigma_range must contain [0, 1]")
    if not spec.t > 0:
        raise PreconditionError("t must be positive")
    exact = isinstance(spec.drift, ConstantInX)
    mu, nu = (mu_tilde.exact(), nu_tilde.exact()) if exact else (mu_tilde, nu_tilde)
    if mu.support()[1] > 0:
        raise PreconditionError("support of mu_tilde must lie in (-inf, 0]")
    c = nu.support()[0]
    if not c > 0:
        raise PreconditionError("support of nu_tilde must lie in [c, inf) with c > 0")
    m_mu, m_nu = mu.mean, nu.mean
    if not m_mu < 0:
        raise PreconditionError("mu_tilde must have negative mean")
    delta = m_nu - m_mu
    lam = -m_mu / delta
    J = math.ceil(lam * N)
    gap = J - lam * N
    if not (0 <= gap < c / delta) or J < 1 or N - J < 1:
        return None
    y_nu = list(quantize(nu, J).points)
    y_mu = list(quantize(mu, N - J).points)
    sum_y = sum(y_nu) + sum(y_mu)
    if not (0 <= sum_y < c):
        raise NumericalError(f"critical inequality fails: sum y = {float(sum_y)}")
    t = Fraction(spec.t) if exact else spec.t
    x_nu = flow_forward(spec.drift, 1, t, np.array(y_nu, dtype=object if exact else float), spec.flow)
    x_mu = flow_forward(spec.drift, 0, t, np.array(y_mu, dtype=object if exact else float), spec.flow)
    points = tuple(list(x_nu) + list(x_mu))
    patterns = {"all_zero": (0,) * N, "all_one": (1,) * N,
                "mixed": (1,) * J + (0,) * (N - J)}
    details = {"lambda": lam, "delta": delta, "c": c, "J_minus_lambda_N": gap,
               "sum_y": sum_y, "time0_mean_mixed": sum_y / N}
    return ThreeEquilibria(spec, points, patterns, J, details)
