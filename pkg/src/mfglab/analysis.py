"""Selection, explicit error bounds, ball-volume asymptotics and rate fits."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .dynamics import ConstantInX, DriftModel
from .equilibrium import SmoothOfMean, StepOfMean
from .errors import PreconditionError
from .pde import (Grid, GridState, SchemeConfig, initial_from_sigma0, l1_distance, run,
                  total_variation)

# Bernoulli numbers B_2, B_4, ..., B_16 for the Stirling series
_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730, 7 / 6, -3617 / 510)


def lgamma(z: float) -> float:
    """``log Gamma(z)`` for ``z > 0``: Stirling series with eight correction
    terms after shifting the argument to at least 10."""
    if not z > 0:
        raise ValueError("lgamma is implemented for z > 0")
    shift = 0.0
    while z < 10:
        shift += math.log(z)
        z += 1
    series = sum(b / (2 * k * (2 * k - 1) * z ** (2 * k - 1))
                 for k, b in enumerate(_BERNOULLI, start=1))
    return (z - 0.5) * math.log(z) - z + 0.5 * math.log(2 * math.pi) + series - shift


def log_unit_ball_volume(n: int) -> float:
    """``log vol(B_1)`` in ``R^n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 0.5 * n * math.log(math.pi) - lgamma(0.5 * n + 1)


def unit_ball_volume(n: int) -> float:
    return math.exp(log_unit_ball_volume(n))


def ball_asymptotic(n: int) -> float:
    """``A_n = sqrt(n) vol(B_1^n)^(1/n)``; tends to ``sqrt(2 pi e)`` from below."""
    return math.sqrt(n) * math.exp(log_unit_ball_volume(n) / n)


def seminorm_indicator(R: float, d: int) -> float:
    """Seminorm of the indicator of the second-moment ball of radius ``R``:
    ``R^d (2 pi e / d)^(d/2)``."""
    if not R > 0:
        raise ValueError("R must be positive")
    return R**d * (2 * math.pi * math.e / d) ** (d / 2)


def seminorm_sequence(R: float, d: int, Ns: Sequence[int]) -> list:
    """Finite-N values ``vol(B_{sqrt(N) R} in R^{Nd})^(1/N)`` converging to
    :func:`seminorm_indicator`."""
    return [math.exp((N * d * math.log(math.sqrt(N) * R) + log_unit_ball_volume(N * d)) / N)
            for N in Ns]


def grad_integral_bound(dm_bound: float, N: int, d: int, R: float) -> float:
    """``N^((Nd-1)/2) R^(Nd) vol(B_1^(Nd)) ||D_m sigma0||``."""
    n = N * d
    return math.exp(0.5 * (n - 1) * math.log(N) + n * math.log(R)
                    + log_unit_ball_volume(n)) * dm_bound


@dataclass(frozen=True)
class BoundInputs:
    N: int = 1
    d: int = 1
    t: float = 1.0
    eps: float = 0.1
    M_b: float = 0.0
    L_b: float = 0.0
    H_B: float = 0.0
    grad_integral: float = 0.0
    uniform_bound: float = 1.0
    dm_bound: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError("N and d must be positive")
        for name in ("t", "eps", "M_b", "L_b", "H_B", "grad_integral", "uniform_bound",
                     "dm_bound", "R"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        # eps = 0 is allowed: the bounds then vanish
        if self.eps > 1:
            raise ValueError("eps must lie in [0, 1]")


def theorem_bound(b: BoundInputs) -> float:
    """``eps^N (Nd)^(7/2) e^(L_b d (2N+1) t) (2 H_B + (L_b + M_b + 2) grad_integral)``."""
    n = b.N * b.d
    return (b.eps**b.N * n**3.5 * math.exp(b.L_b * b.d * (2 * b.N + 1) * b.t)
            * (2 * b.H_B + (b.L_b + b.M_b + 2) * b.grad_integral))


def corollary_bound(b: BoundInputs) -> float:
    """``eps ||sigma0||_u e^(2 L_b d t) (1 + R^d (2 pi e / d)^(d/2))``."""
    return (b.eps * b.uniform_bound * math.exp(2 * b.L_b * b.d * b.t)
            * (1 + b.R**b.d * (2 * math.pi * math.e / b.d) ** (b.d / 2)))


BOUND_FIELDS = ("N", "d", "t", "eps", "M_b", "L_b", "H_B", "grad_integral",
                "uniform_bound", "dm_bound", "R")


def bound_row(b: BoundInputs):
    return [getattr(b, f) for f in BOUND_FIELDS] + [theorem_bound(b), corollary_bound(b)]


BOUND_HEADER = list(BOUND_FIELDS) + ["theorem_bound", "corollary_bound"]


@dataclass(frozen=True)
class RateFit:
    pairs: tuple
    slope: float
    intercept: float
    r_squared: float

    def row(self):
        return [len(self.pairs), self.slope, self.intercept, self.r_squared]

    HEADER = ("points", "slope", "intercept", "r_squared")


def fit_rate(pairs) -> RateFit:
    """Least-squares slope of ``log(error)`` against ``log(eps)``."""
    pairs = tuple((float(e), float(v)) for e, v in pairs)
    if len(pairs) < 3:
        raise PreconditionError("need at least three (eps, error) pairs")
    if any(not (e > 0 and v > 0) for e, v in pairs):
        raise PreconditionError("rate fits need strictly positive eps and error")
    x = np.log([e for e, _ in pairs])
    y = np.log([v for _, v in pairs])
    res = stats.linregress(x, y)
    return RateFit(pairs, float(res.slope), float(res.intercept), float(res.rvalue**2))


# ---------------------------------------------------------------------------
# selection principle


@dataclass(frozen=True)
class Selection:
    value: Optional[float]
    unresolved: bool
    shocks: tuple
    grid: Grid
    state: GridState = field(repr=False, default=None)


def _detect_shocks(state: GridState, threshold=0.05):
    u = state.u
    span = float(u.max() - u.min())
    if span == 0:
        return ()
    drops = u[:-1] - u[1:]
    faces = state.grid.faces()[1:-1]
    big = drops > threshold * span
    shocks, k = [], 0
    while k < len(big):
        if big[k]:
            j = k
            while j + 1 < len(big) and big[j + 1]:
                j += 1
            i = k + int(np.argmax(drops[k:j + 1]))
            shocks.append(float(faces[i]))
            k = j + 1
        else:
            k += 1
    return tuple(shocks)


def selection_grid(f, mean: float, t: float, cells: int = 1600) -> Grid:
    centre = f.threshold if isinstance(f, StepOfMean) else f.shift
    speed = max(abs(v) for v in f.value_range())
    pad = 3.0 + 2 * speed * t
    return Grid.line(min(mean, centre) - pad, max(mean, centre) + pad, cells)


def select_equilibrium(f, mean: float, t: float, cfg: SchemeConfig = SchemeConfig(),
                       grid: Optional[Grid] = None) -> Selection:
    """Entropy-selected equilibrium for a coupling that depends on the mean.

    With straight characteristics the equilibrium condition reads
    ``sigma = f(mean - sigma t)``; its entropy-admissible solution is the
    Burgers solution with data ``f`` evaluated at ``(t, mean)``. Points
    within two cells of a detected shock are reported as unresolved.
    """
    if not isinstance(f, (StepOfMean, SmoothOfMean)):
        raise PreconditionError("selection needs a coupling that depends on the mean only")
    if grid is None:
        grid = selection_grid(f, mean, t)
    a, b, _ = grid.axes[0]
    if not a <= mean < b:
        raise PreconditionError(f"mean {mean} lies outside the grid [{a}, {b})")
    lo, hi = f.value_range()
    model = ConstantInX((min(lo, -1e-9), max(hi, 1e-9)))
    state = run(initial_from_sigma0(f, grid, 1, 1), model, cfg, t)
    dx = grid.dx()
    cell = min(int((mean - a) // dx), grid.shape[0] - 1)
    shocks = _detect_shocks(state)
    unresolved = any(abs(mean - s) <= 2 * dx for s in shocks)
    value = None if unresolved else float(state.u[cell])
    return Selection(value, unresolved, shocks, grid, state)


# ---------------------------------------------------------------------------
# vanishing-viscosity sweep


@dataclass(frozen=True)
class SweepRow:
    eps: float
    viscosity: float
    l1: float
    bounds: BoundInputs

    HEADER = ("eps", "viscosity", "l1_distance", "theorem_bound", "corollary_bound")

    def row(self):
        return [self.eps, self.viscosity, self.l1, theorem_bound(self.bounds),
                corollary_bound(self.bounds)]


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    fit: Optional[RateFit]
    entropy_state: GridState = field(repr=False, default=None)


def viscosity_sweep(initial: GridState, model: DriftModel, t_end: float, eps_values,
                    N: int = 1, d: int = 1, cfg: SchemeConfig = SchemeConfig(),
                    uniform_bound: Optional[float] = None, dm_bound: float = 0.0,
                    R: Optional[float] = None, threads: int = 1) -> SweepResult:
    """Entropy run versus viscous runs with ``nu = eps^(2N)/2``.

    The theorem bound uses the measured total variation of the discrete
    initial data. Without a cutoff radius the corollary bound uses the
    largest coordinate of the grid as ``R`` (the computational support).
    Rows come back ordered by ``eps`` whatever the completion order.
    """
    eps_values = sorted(float(e) for e in eps_values)
    base = SchemeConfig(cfg.cfl, 0.0, cfg.boundary, cfg.source)
    entropy = run(initial, model, base, t_end)
    tv0 = total_variation(initial)
    if uniform_bound is None:
        uniform_bound = float(np.max(np.abs(initial.u)))
    if R is None:
        R = max(max(abs(a), abs(b)) for a, b, _ in initial.grid.axes)

    def one(eps):
        nu = SchemeConfig.trembling_hand_viscosity(eps, N)
        visc = run(initial, model, SchemeConfig(cfg.cfl, nu, cfg.boundary, cfg.source), t_end)
        bi = BoundInputs(N=N, d=d, t=t_end, eps=eps, M_b=model.M_b, L_b=model.L_b,
                         H_B=model.H_B, grad_integral=tv0, uniform_bound=uniform_bound,
                         dm_bound=dm_bound, R=R)
        return SweepRow(eps, nu, l1_distance(entropy, visc), bi)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, eps_values))
    else:
        rows = [one(e) for e in eps_values]
    fit = None
    if len(rows) >= 3 and all(r.l1 > 0 for r in rows):
        fit = fit_rate([(r.eps, r.l1) for r in rows])
    return SweepResult(tuple(rows), fit, entropy)
