"""Drift models and their characteristic flows.

Every drift is evaluated as ``b(t, sigma, x)``: time, coupling parameter,
state, in that order everywhere in the package. ``B(t, sigma, x)`` is the
antiderivative of ``b`` in ``sigma`` from 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .errors import PreconditionError

MAX_STEPS = 10**7


class FlowError(PreconditionError):
    """Raised when an integration would exceed the step budget."""


@dataclass(frozen=True)
class FlowConfig:
    steps_per_unit_time: int = 200

    def __post_init__(self):
        if self.steps_per_unit_time < 1:
            raise ValueError("steps_per_unit_time must be >= 1")


class DriftModel:
    """Base class: ``b``, its partial derivatives, and the bound constants."""

    kind = "abstract"
    sigma_range: tuple
    increasing_in_sigma = True

    def b(self, t, sigma, x):
        raise NotImplementedError

    def dx_b(self, t, sigma, x):
        raise NotImplementedError

    def dsigma_b(self, t, sigma, x):
        raise NotImplementedError

    def B(self, t, sigma, x):
        raise NotImplementedError

    def dx_B(self, t, sigma, x):
        raise NotImplementedError

    def sign_root(self, t, x):
        """``sigma`` at which ``b(t, ., x)`` changes sign (b increasing in sigma)."""
        raise NotImplementedError

    def max_speed(self, t, x, lo, hi):
        """Bound on ``|b(t, s, x)|`` for ``s`` in ``[lo, hi]`` over the given states."""
        return self.M_b

    def closed_form_flow(self, sigma, t_from, t_to, x):
        return None

    def to_dict(self) -> dict:
        raise TypeError(f"{self.kind} drift models are not serializable")

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class ConstantInX(DriftModel):
    """``b = sigma``: straight characteristics, Burgers flux ``sigma**2 / 2``."""

    sigma_range: tuple = (-1.5, 1.5)
    kind = "constant_in_x"

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not lo < hi:
            raise ValueError("sigma_range must be increasing")

    @property
    def M_b(self):
        return float(max(abs(self.sigma_range[0]), abs(self.sigma_range[1])))

    L_b = 0.0
    H_B = 0.0

    def b(self, t, sigma, x):
        return sigma + 0 * x

    def dx_b(self, t, sigma, x):
        return 0 * (sigma + x)

    def dsigma_b(self, t, sigma, x):
        return 1 + 0 * (sigma + x)

    def B(self, t, sigma, x):
        return sigma * sigma / 2 + 0 * x

    def dx_B(self, t, sigma, x):
        return 0 * (sigma + x)

    def sign_root(self, t, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def max_speed(self, t, x, lo, hi):
        return float(max(abs(lo), abs(hi)))

    def closed_form_flow(self, sigma, t_from, t_to, x):
        # constant velocity integrates exactly; keeps Fraction inputs exact
        return x + sigma * (t_to - t_from)

    def to_dict(self):
        return {"kind": self.kind, "sigma_range": list(map(float, self.sigma_range))}


@dataclass(frozen=True)
class LinearQuadratic(DriftModel):
    """``b = (sigma + kappa x) / (1 + t kappa)``.

    Optimal velocity for the quadratic Hamiltonian with terminal cost
    ``sigma x + kappa x**2 / 2``. Not globally bounded in ``x``: ``M_b`` is
    the honest bound over ``box`` and ``sigma_range``.
    """

    kappa: float = 0.5
    sigma_range: tuple = (-1.5, 1.5)
    box: tuple = (-5.0, 5.0)
    kind = "linear_quadratic"

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not self.sigma_range[0] < self.sigma_range[1]:
            raise ValueError("sigma_range must be increasing")

    @property
    def M_b(self):
        xm = max(abs(self.box[0]), abs(self.box[1]))
        sm = max(abs(self.sigma_range[0]), abs(self.sigma_range[1]))
        return float(sm + self.kappa * xm)

    @property
    def L_b(self):
        return float(self.kappa)

    H_B = 0.0

    def b(self, t, sigma, x):
        return (sigma + self.kappa * x) / (1 + t * self.kappa)

    def dx_b(self, t, sigma, x):
        return self.kappa / (1 + t * self.kappa) + 0 * (sigma + x)

    def dsigma_b(self, t, sigma, x):
        return 1 / (1 + t * self.kappa) + 0 * (sigma + x)

    def B(self, t, sigma, x):
        return (sigma * sigma / 2 + self.kappa * x * sigma) / (1 + t * self.kappa)

    def dx_B(self, t, sigma, x):
        return self.kappa * sigma / (1 + t * self.kappa) + 0 * x

    def sign_root(self, t, x):
        return -self.kappa * np.asarray(x, dtype=float)

    def max_speed(self, t, x, lo, hi):
        x = np.asarray(x, dtype=float)
        corners = [np.max(np.abs(self.b(t, s, x))) for s in (lo, hi)]
        return float(max(corners))

    def to_dict(self):
        return {"kind": self.kind, "kappa": float(self.kappa),
                "sigma_range": list(map(float, self.sigma_range)),
                "box": list(map(float, self.box))}


@dataclass(frozen=True)
class Tabulated(DriftModel):
    """User-supplied evaluators with declared bound constants.

    ``B_fn`` / ``dx_B_fn`` are optional closed forms; without them the
    antiderivative is computed by adaptive quadrature.
    """

    b_fn: Callable
    dx_b_fn: Callable
    dsigma_b_fn: Callable
    M_b: float
    L_b: float
    H_B: float
    sigma_range: tuple = (-1.5, 1.5)
    B_fn: Optional[Callable] = None
    dx_B_fn: Optional[Callable] = None
    increasing_in_sigma: bool = True
    kind = "tabulated"

    def __post_init__(self):
        for name in ("M_b", "L_b", "H_B"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0")

    def b(self, t, sigma, x):
        return self.b_fn(t, sigma, x)

    def dx_b(self, t, sigma, x):
        return self.dx_b_fn(t, sigma, x)

    def dsigma_b(self, t, sigma, x):
        return self.dsigma_b_fn(t, sigma, x)

    def B(self, t, sigma, x):
        if self.B_fn is not None:
            return self.B_fn(t, sigma, x)
        return _quad_in_sigma(self.b_fn, t, sigma, x)

    def dx_B(self, t, sigma, x):
        if self.dx_B_fn is not None:
            return self.dx_B_fn(t, sigma, x)
        return _quad_in_sigma(self.dx_b_fn, t, sigma, x)

    def sign_root(self, t, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.sigma_range
        width = hi - lo
        a = np.full_like(x, lo - width)
        c = np.full_like(x, hi + width)
        fa = self.b_fn(t, a, x)
        fc = self.b_fn(t, c, x)
        root = np.where(fa >= 0, -np.inf, np.where(fc <= 0, np.inf, np.nan))
        todo = np.isnan(root)
        for _ in range(80):
            mid = (a + c) / 2
            fm = self.b_fn(t, mid, x)
            left = fm >= 0
            c = np.where(left, mid, c)
            a = np.where(left, a, mid)
        return np.where(todo, (a + c) / 2, root)


def _quad_in_sigma(fn, t, sigma, x):
    sigma_b, x_b = np.broadcast_arrays(np.asarray(sigma, float), np.asarray(x, float))
    out = np.empty(sigma_b.shape)
    for idx in np.ndindex(sigma_b.shape):
        s, xx = sigma_b[idx], x_b[idx]
        out[idx] = integrate.quad(lambda u: float(fn(t, u, xx)), 0.0, s,
                                  epsabs=1e-10, epsrel=1e-10)[0]
    return out if out.shape else float(out)


def drift_from_dict(data: dict) -> DriftModel:
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "constant_in_x":
        allowed = {"sigma_range"}
        cls = ConstantInX
    elif kind == "linear_quadratic":
        allowed = {"kappa", "sigma_range", "box"}
        cls = LinearQuadratic
    else:
        raise ValueError(f"unknown or non-serializable drift kind: {kind!r}")
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"unknown drift keys: {sorted(unknown)}")
    for key in ("sigma_range", "box"):
        if key in data:
            data[key] = tuple(float(v) for v in data[key])
    return cls(**data)


def antiderivative_B(model: DriftModel, t, x, u):
    """``integral_0^u b(t, s, x) ds``."""
    return model.B(t, u, x)


def _n_steps(t, cfg: FlowConfig) -> int:
    n = int(math.ceil(abs(t) * cfg.steps_per_unit_time - 1e-9))
    if n > MAX_STEPS:
        raise FlowError(f"{n} integration steps exceeds the limit of {MAX_STEPS}")
    return max(n, 0)


def _rk4(model, sigma, t_from, t_to, x, n):
    h = (t_to - t_from) / n
    s = t_from
    for _ in range(n):
        k1 = model.b(s, sigma, x)
        k2 = model.b(s + h / 2, sigma, x + h / 2 * k1)
        k3 = model.b(s + h / 2, sigma, x + h / 2 * k2)
        k4 = model.b(s + h, sigma, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        s = s + h
    return x


def _flow(model, sigma, t_from, t_to, x, cfg):
    if t_from == t_to:
        return x
    closed = model.closed_form_flow(sigma, t_from, t_to, x)
    if closed is not None:
        return closed
    n = _n_steps(t_to - t_from, cfg)
    return _rk4(model, sigma, float(t_from), float(t_to), np.asarray(x, dtype=float), n)


def flow_backward(model: DriftModel, sigma, t, x, cfg: FlowConfig = FlowConfig()):
    """Position at time 0 of the characteristic ending at ``x`` at time ``t``.

    ``sigma`` may be an array broadcasting against ``x`` (one parameter per
    point). Components are integrated independently (diagonal drift).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return _flow(model, _arr(sigma), t, 0 * t, _arr(x), cfg)


def flow_forward(model: DriftModel, sigma, t, y, cfg: FlowConfig = FlowConfig()):
    """Position at time ``t`` of the characteristic starting at ``y``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return _flow(model, _arr(sigma), 0 * t, t, _arr(y), cfg)


def _arr(v):
    a = np.asarray(v)
    return a if a.dtype == object else np.asarray(v, dtype=float)


def trajectory(model: DriftModel, sigma, t, x, cfg: FlowConfig = FlowConfig()):
    """Nodes ``0 = s_0 < ... < s_n = t`` and states ``x(s_k, t, sigma, x)``."""
    x = np.asarray(x, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n = max(_n_steps(t, cfg), 2)
    n += n % 2  # Simpson needs an even number of panels
    times = np.linspace(0.0, float(t), n + 1)
    states = np.empty((n + 1,) + np.broadcast(x, sigma).shape)
    states[n] = x
    cur = np.broadcast_to(x, states.shape[1:]).astype(float)
    for k in range(n, 0, -1):
        cur = _step_between(model, sigma, times[k], times[k - 1], cur)
        states[k - 1] = cur
    return times, states


def _step_between(model, sigma, t_from, t_to, x):
    closed = model.closed_form_flow(sigma, t_from, t_to, x)
    if closed is not None:
        return closed
    return _rk4(model, sigma, t_from, t_to, x, 1)


def dsigma_x0(model: DriftModel, sigma, t, x, cfg: FlowConfig = FlowConfig()):
    """Sensitivity of the time-0 position to ``sigma``.

    Quadrature along the computed trajectory of
    ``-int_0^t exp(-int_0^tau dx_b) dsigma_b dtau``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.zeros(np.broadcast(x, np.asarray(sigma)).shape)
    times, states = trajectory(model, sigma, t, x, cfg)
    shape = (-1,) + (1,) * (states.ndim - 1)
    tt = times.reshape(shape)
    a = model.dx_b(tt, sigma, states) + np.zeros_like(states)
    g = model.dsigma_b(tt, sigma, states) + np.zeros_like(states)
    A = integrate.cumulative_simpson(a, x=times, axis=0, initial=0.0)
    return -integrate.simpson(np.exp(-A) * g, x=times, axis=0)
