"""Finite-volume solver for the discretized transport equation.

In coordinates ``x = (x_1, ..., x_n)`` (``n = N d <= 2``) the equation is

    u_t + sum_j b(t, u, x_j) d_j u = nu * Laplacian(u)

written as a balance law with flux ``B(t, u, x_j)`` on axis ``j`` and source
``(d_j B)(t, u, x_j)``. The scheme is an Engquist-Osher upwind splitting in
nonconservative form:

    u_i <- u_i - lam [Bm_{i+1/2}(u_{i+1}) - Bm_{i+1/2}(u_i)]
               + lam [Bp_{i-1/2}(u_{i-1}) - Bp_{i-1/2}(u_i)]

with ``Bp(u) = B(max(u, r))``, ``Bm(u) = B(min(u, r))`` at the interface and
``r`` the sign change of ``b`` in ``u``. Flux and source share the interface
locations, so constants are exact steady states. The update is monotone for
``cfl <= 1/2`` (two interfaces may push one cell in opposite directions).
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .dynamics import DriftModel
from .errors import NumericalError, PreconditionError

MAGIC = b"MFGPDE1"


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid; ``axes`` holds ``(x_min, x_max, cells)`` per axis."""

    axes: tuple

    def __post_init__(self):
        axes = tuple((float(a), float(b), int(m)) for a, b, m in self.axes)
        if not 1 <= len(axes) <= 2:
            raise PreconditionError("grids have one or two axes")
        for a, b, m in axes:
            if not a < b:
                raise ValueError("x_min must be < x_max")
            if m < 4:
                raise ValueError("need at least 4 cells per axis")
        object.__setattr__(self, "axes", axes)

    @classmethod
    def line(cls, x_min, x_max, cells):
        return cls(((x_min, x_max, cells),))

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(m for _, _, m in self.axes)

    def dx(self, axis=0):
        a, b, m = self.axes[axis]
        return (b - a) / m

    @property
    def cell_volume(self):
        return math.prod(self.dx(k) for k in range(self.ndim))

    def centers(self, axis=0):
        a, b, m = self.axes[axis]
        return a + (np.arange(m) + 0.5) * self.dx(axis)

    def faces(self, axis=0):
        a, b, m = self.axes[axis]
        return a + np.arange(m + 1) * self.dx(axis)

    def mesh(self):
        return np.meshgrid(*[self.centers(k) for k in range(self.ndim)], indexing="ij")

    def to_dict(self):
        return {"axes": [list(a) for a in self.axes]}


@dataclass(frozen=True)
class GridState:
    grid: Grid
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != self.grid.shape:
            raise ValueError(f"values have shape {u.shape}, grid is {self.grid.shape}")
        if not np.all(np.isfinite(u)):
            raise NumericalError(f"non-finite values in state at t = {self.t}")
        u = u.copy()
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class SchemeConfig:
    cfl: float = 0.45
    viscosity: float = 0.0
    boundary: str = "outflow"
    source: str = "well_balanced"      # or "pointwise" (cell-centre source, for comparison)

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.viscosity < 0:
            raise ValueError("viscosity must be >= 0")
        if self.boundary != "outflow":
            raise ValueError("only outflow boundaries are supported")
        if self.source not in ("well_balanced", "pointwise"):
            raise ValueError("source must be 'well_balanced' or 'pointwise'")

    @staticmethod
    def trembling_hand_viscosity(eps, N):
        """``eps**(2N) / 2``: the noise strength of the perturbed game."""
        return eps ** (2 * N) / 2

    def to_dict(self):
        return {"cfl": self.cfl, "viscosity": self.viscosity,
                "boundary": self.boundary, "source": self.source}


# ---------------------------------------------------------------------------
# transport


def _sweep_1d(u, model: DriftModel, t, x_faces, lam, lo, hi, source):
    """One explicit transport update along the last axis of ``u``."""
    ext = np.concatenate([u[..., :1], u, u[..., -1:]], axis=-1)   # outflow ghosts
    left, right = ext[..., :-1], ext[..., 1:]                      # states at each face
    if source == "pointwise":
        return _sweep_pointwise(u, model, t, x_faces, lam, lo, hi, left, right)
    r = np.clip(model.sign_root(t, x_faces), lo, hi)
    Bp = lambda v: model.B(t, np.maximum(v, r), x_faces)
    Bm = lambda v: model.B(t, np.minimum(v, r), x_faces)
    # at face k: left state ext[k], right state ext[k+1]; cell i sits between faces i and i+1
    down = Bm(right) - Bm(left)      # contribution of the right face to its left cell
    up = Bp(left) - Bp(right)        # contribution of the left face to its right cell
    return u - lam * down[..., 1:] + lam * up[..., :-1]


def _sweep_pointwise(u, model, t, x_faces, lam, lo, hi, left, right):
    r = np.clip(model.sign_root(t, x_faces), lo, hi)
    flux = (model.B(t, np.maximum(left, r), x_faces) + model.B(t, np.minimum(right, r), x_faces)
            - model.B(t, r, x_faces))
    xc = 0.5 * (x_faces[:-1] + x_faces[1:])
    dx = x_faces[1] - x_faces[0]
    return u - lam * (flux[..., 1:] - flux[..., :-1]) + lam * dx * model.dx_B(t, u, xc)


def _transport_axis(u, model, t, grid, axis, dt, lo, hi, source):
    lam = dt / grid.dx(axis)
    moved = np.moveaxis(u, axis, -1)
    out = _sweep_1d(moved, model, t, grid.faces(axis), lam, lo, hi, source)
    return np.moveaxis(out, -1, axis)


def _diffuse_axis(u, r, axis):
    """Backward-Euler step of ``u_t = nu u_xx`` along ``axis`` with reflecting ends."""
    moved = np.moveaxis(u, axis, 0)
    m = moved.shape[0]
    ab = np.zeros((3, m))
    ab[0, 1:] = -r
    ab[1, :] = 1 + 2 * r
    ab[1, 0] = ab[1, -1] = 1 + r
    ab[2, :-1] = -r
    flat = moved.reshape(m, -1)
    out = solve_banded((1, 1), ab, flat)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def stable_dt(state: GridState, model: DriftModel, cfg: SchemeConfig, lo=None, hi=None):
    lo = float(state.u.min()) if lo is None else lo
    hi = float(state.u.max()) if hi is None else hi
    g = state.grid
    coords = np.concatenate([g.faces(k) for k in range(g.ndim)])
    speed = model.max_speed(state.t, coords, lo, hi)
    if not speed > 0:
        return math.inf
    return cfg.cfl * min(g.dx(k) for k in range(g.ndim)) / speed


def step(state: GridState, model: DriftModel, cfg: SchemeConfig = SchemeConfig(),
         dt: Optional[float] = None, bounds=None) -> GridState:
    """One time step (CFL-limited unless ``dt`` is given).

    ``bounds`` fixes the state interval used to clip interface roots and the
    wave speed; by default it is the current min/max.
    """
    lo, hi = bounds if bounds is not None else (float(state.u.min()), float(state.u.max()))
    if dt is None:
        dt = stable_dt(state, model, cfg, lo, hi)
        if not math.isfinite(dt):
            dt = 1.0
    g = state.grid
    u = np.array(state.u)
    tm = state.t + dt / 2
    if g.ndim == 1:
        u = _transport_axis(u, model, tm, g, 0, dt, lo, hi, cfg.source)
    else:
        # Strang splitting: half step on axis 0, full on axis 1, half on axis 0
        u = _transport_axis(u, model, state.t + dt / 4, g, 0, dt / 2, lo, hi, cfg.source)
        u = _transport_axis(u, model, tm, g, 1, dt, lo, hi, cfg.source)
        u = _transport_axis(u, model, state.t + 3 * dt / 4, g, 0, dt / 2, lo, hi, cfg.source)
    if cfg.viscosity > 0:
        for k in range(g.ndim):
            u = _diffuse_axis(u, cfg.viscosity * dt / g.dx(k) ** 2, k)
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"non-finite state after step at t = {state.t + dt}")
    return GridState(g, u, state.t + dt)


def _advance(initial, model, cfg, t_end, keep):
    if t_end < initial.t:
        raise ValueError("t_end is before the initial time")
    state = initial
    history = [state] if keep else None
    bounds = (float(initial.u.min()), float(initial.u.max()))
    while state.t < t_end:
        dt = stable_dt(state, model, cfg, *bounds)
        remaining = t_end - state.t
        if dt >= remaining or remaining - dt <= 1e-12 * max(1.0, t_end):
            dt = remaining
        state = step(state, model, cfg, dt=dt, bounds=bounds)
        if dt == remaining:
            state = replace(state, t=t_end)
        if keep:
            history.append(state)
    return history if keep else state


def run(initial: GridState, model: DriftModel, cfg: SchemeConfig = SchemeConfig(),
        t_end: float = 1.0) -> GridState:
    """Advance to exactly ``t_end``."""
    return _advance(initial, model, cfg, t_end, keep=False)


def run_history(initial: GridState, model: DriftModel, cfg: SchemeConfig = SchemeConfig(),
                t_end: float = 1.0) -> list:
    """Every intermediate state, starting with ``initial``."""
    return _advance(initial, model, cfg, t_end, keep=True)


# ---------------------------------------------------------------------------
# initial data and diagnostics


def initial_from_sigma0(s0, grid: Grid, N: int, d: int = 1) -> GridState:
    """Cell value ``sigma0`` of the empirical measure of the cell centre,
    read as ``N`` points of ``R^d``."""
    if N * d != grid.ndim:
        raise PreconditionError(f"N*d = {N * d} does not match the grid dimension {grid.ndim}")
    coords = np.stack([c.ravel() for c in grid.mesh()], axis=1)      # (cells, N*d)
    pts = coords.reshape(-1, N, d)
    vals = batch_value(s0, pts)
    return GridState(grid, vals.reshape(grid.shape), 0.0)


def batch_value(s0, pts):
    """``sigma0`` on a stack of point clouds ``(K, n, d)``."""
    if hasattr(s0, "of_mean"):
        mean = pts.mean(axis=(1, 2))
        vals = np.asarray(s0.of_mean(mean), dtype=float)
        if s0.cutoff_radius is not None:
            from .equilibrium import _bump
            vals = vals * _bump((pts * pts).sum(axis=(1, 2)) / pts.shape[1], s0.cutoff_radius)
        return vals
    return np.array([s0.value(p) for p in pts], dtype=float)


def _same_grid(a: GridState, b: GridState):
    if a.grid != b.grid:
        raise PreconditionError("states live on different grids")


def l1_distance(a: GridState, b: GridState) -> float:
    _same_grid(a, b)
    return float(np.sum(np.abs(a.u - b.u)) * a.grid.cell_volume)


def total_variation(state: GridState) -> float:
    g = state.grid
    tv = 0.0
    for k in range(g.ndim):
        transverse = g.cell_volume / g.dx(k)
        tv += float(np.sum(np.abs(np.diff(state.u, axis=k)))) * transverse
    return tv


def mass(state: GridState) -> float:
    return float(np.sum(state.u) * state.grid.cell_volume)


def boundary_clearance(state: GridState, cells: int = 5, tol: float = 1e-12) -> bool:
    """True when the outermost ``cells`` layers on each side are flat."""
    u = state.u
    for k in range(u.ndim):
        m = np.moveaxis(u, k, 0)
        for block in (m[:cells + 1], m[-cells - 1:]):
            if np.max(np.abs(np.diff(block, axis=0)), initial=0.0) > tol:
                return False
    return True


# ---------------------------------------------------------------------------
# entropy residual


_CHI = np.polynomial.Polynomial([1, 0, -1]) ** 4          # (1 - s^2)^4
_CHI_INT = _CHI.integ()


def _chi(grid, axis, x):
    """Bump supported on the central 80% of the axis."""
    a, b, _ = grid.axes[axis]
    c, h = 0.5 * (a + b), 0.4 * (b - a)
    s = (np.asarray(x) - c) / h
    return np.where(np.abs(s) < 1, _CHI(np.clip(s, -1, 1)), 0.0)


def _chi_cells(grid, axis):
    a, b, _ = grid.axes[axis]
    c, h = 0.5 * (a + b), 0.4 * (b - a)
    s = np.clip((grid.faces(axis) - c) / h, -1, 1)
    return h * np.diff(_CHI_INT(s))


def entropy_residual(history, model: DriftModel, k: float) -> float:
    """Kruzkov residual of a stored run for the entropy ``|u - k|``.

    Test function ``psi(t) chi(x)`` with ``psi = (1 - t/T)^3`` and ``chi`` a
    polynomial bump on the central 80% of each axis. The solution is read as
    piecewise constant in space and between snapshots, which makes every
    integral exact: within a cell the flux term and the source
    ``sgn(u-k) (d_x B(x,u) - d_x B(x,k))`` combine into the difference of
    ``Q chi`` across the cell faces. Entropy solutions give values ``>= 0``
    up to discretization error.
    """
    if len(history) < 2:
        raise PreconditionError("need at least two snapshots")
    g = history[0].grid
    T = history[-1].t
    if not T > 0:
        raise PreconditionError("run has zero duration")
    psi = lambda t: (1 - t / T) ** 3
    Psi = lambda t: -T / 4 * (1 - t / T) ** 4
    cells = [_chi_cells(g, j) for j in range(g.ndim)]
    vol_chi = cells[0] if g.ndim == 1 else np.outer(cells[0], cells[1])

    S0 = np.abs(history[0].u - k)
    total = float(np.sum(S0 * vol_chi)) * psi(0.0)
    for cur, nxt in zip(history[:-1], history[1:]):
        u = cur.u
        S = np.abs(u - k)
        total += float(np.sum(S * vol_chi)) * (psi(nxt.t) - psi(cur.t))
        tm = 0.5 * (cur.t + nxt.t)
        w = Psi(nxt.t) - Psi(cur.t)
        sg = np.sign(u - k)
        for j in range(g.ndim):
            f = g.faces(j)
            chi_f = _chi(g, j, f)
            um = np.moveaxis(u, j, -1)
            sm = np.moveaxis(sg, j, -1)
            Q_hi = sm * (model.B(tm, um, f[1:]) - model.B(tm, k, f[1:]))
            Q_lo = sm * (model.B(tm, um, f[:-1]) - model.B(tm, k, f[:-1]))
            term = Q_hi * chi_f[1:] - Q_lo * chi_f[:-1]
            if g.ndim == 2:
                other = cells[1 - j]
                term = term * other[:, None]
            total += float(np.sum(term)) * w
    return total


# ---------------------------------------------------------------------------
# export


def state_csv(state: GridState) -> str:
    g = state.grid
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = ["x", "y"][: g.ndim]
    w.writerow(names + ["u"])
    mesh = [m.ravel() for m in g.mesh()]
    for idx, val in enumerate(state.u.ravel()):
        w.writerow([f"{m[idx]:.12e}" for m in mesh] + [f"{val:.12e}"])
    return buf.getvalue()


def dump_binary(state: GridState) -> bytes:
    """``MFGPDE1`` | dims (u32) | cells per axis (u32 each) | t (f64) | values (f64, row-major)."""
    g = state.grid
    head = MAGIC + struct.pack("<I", g.ndim) + struct.pack(f"<{g.ndim}I", *g.shape)
    head += struct.pack("<d", state.t)
    return head + np.ascontiguousarray(state.u, dtype="<f8").tobytes()


def load_binary(data: bytes, grid: Optional[Grid] = None) -> GridState:
    if not data.startswith(MAGIC):
        raise ValueError("not an MFGPDE1 dump")
    off = len(MAGIC)
    (ndim,) = struct.unpack_from("<I", data, off)
    off += 4
    shape = struct.unpack_from(f"<{ndim}I", data, off)
    off += 4 * ndim
    (t,) = struct.unpack_from("<d", data, off)
    off += 8
    u = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape)
    if grid is None:
        grid = Grid(tuple((0.0, float(m), m) for m in shape))
    return GridState(grid, u, t)
