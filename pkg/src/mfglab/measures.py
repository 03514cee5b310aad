"""Probability measures on the real line and their optimal quantization.

A :class:`Measure1D` is a finite sum of Dirac atoms and uniform-density pieces.
This family is closed under the equal-mass partition used for optimal N-point
quantization, and every quantity below (CDF, quantile cuts, barycenters,
Wasserstein-2 distances) has a closed form on it.

Arithmetic is written against plain Python numbers, so a measure built from
:class:`fractions.Fraction` values is partitioned and quantized exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

MASS_TOL = 1e-12


def _num(v):
    return v if isinstance(v, Fraction) else float(v)


@dataclass(frozen=True)
class Components:
    """Atoms ``(loc, mass)`` plus uniform pieces ``(left, right, mass)``.

    No normalisation is imposed; sub-measures of a partition are Components
    of total mass 1/N.
    """

    atoms: tuple = ()
    pieces: tuple = ()

    @property
    def mass(self):
        return sum(m for _, m in self.atoms) + sum(m for _, _, m in self.pieces)

    def first_moment(self):
        return (sum(x * m for x, m in self.atoms)
                + sum(m * (l + r) / 2 for l, r, m in self.pieces))

    def second_moment_about(self, c):
        """Integral of ``(y - c)**2`` against the measure, in closed form."""
        total = sum(m * (x - c) ** 2 for x, m in self.atoms)
        for l, r, m in self.pieces:
            a, b = l - c, r - c
            total += m * (a * a + a * b + b * b) / 3
        return total

    def cdf(self, x):
        total = 0
        for loc, m in self.atoms:
            if loc <= x:
                total += m
        for l, r, m in self.pieces:
            if x >= r:
                total += m
            elif x > l:
                total += m * (x - l) / (r - l)
        return total

    def support(self):
        lows = [x for x, _ in self.atoms] + [l for l, _, _ in self.pieces]
        highs = [x for x, _ in self.atoms] + [r for _, r, _ in self.pieces]
        return min(lows), max(highs)

    def restrict_open(self, lo=None, hi=None):
        """Restriction to the open interval ``(lo, hi)``; ``None`` is unbounded."""
        atoms = tuple((x, m) for x, m in self.atoms
                      if (lo is None or x > lo) and (hi is None or x < hi))
        pieces = []
        for l, r, m in self.pieces:
            a = l if lo is None else max(l, lo)
            b = r if hi is None else min(r, hi)
            if b > a:
                pieces.append((a, b, m * (b - a) / (r - l)))
        return Components(atoms, tuple(pieces))

    def atom_mass_at(self, x):
        return sum(m for loc, m in self.atoms if loc == x)

    def plus_atoms(self, extra):
        atoms = list(self.atoms)
        for x, m in extra:
            if m > 0:
                atoms.append((x, m))
        return Components(tuple(sorted(atoms, key=lambda a: a[0])), self.pieces)


@dataclass(frozen=True)
class Measure1D(Components):
    """A probability measure: Components whose masses sum to one."""

    def __post_init__(self):
        atoms = {}
        for loc, m in self.atoms:
            loc, m = _num(loc), _num(m)
            if not m > 0:
                raise ValueError(f"atom mass must be positive, got {m}")
            atoms[loc] = atoms.get(loc, 0) + m
        pieces = []
        for l, r, m in self.pieces:
            l, r, m = _num(l), _num(r), _num(m)
            if not m > 0:
                raise ValueError(f"piece mass must be positive, got {m}")
            if not l < r:
                raise ValueError(f"piece needs left < right, got [{l}, {r}]")
            pieces.append((l, r, m))
        object.__setattr__(self, "atoms", tuple(sorted(atoms.items())))
        object.__setattr__(self, "pieces", tuple(sorted(pieces)))
        total = self.mass
        if abs(total - 1) > MASS_TOL:
            raise ValueError(f"total mass must be 1, got {total!r}")
        vals = [v for a in self.atoms for v in a] + [v for p in self.pieces for v in p]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("measure data must be finite")

    @classmethod
    def dirac(cls, x) -> "Measure1D":
        return cls(atoms=((x, 1),))

    @classmethod
    def uniform(cls, a, b) -> "Measure1D":
        return cls(pieces=((a, b, 1),))

    def exact(self) -> "Measure1D":
        """Copy with every number converted exactly to a Fraction."""
        return Measure1D(
            atoms=tuple((Fraction(x), Fraction(m)) for x, m in self.atoms),
            pieces=tuple((Fraction(l), Fraction(r), Fraction(m)) for l, r, m in self.pieces),
        )

    @property
    def mean(self):
        return self.first_moment()

    def to_dict(self) -> dict:
        return {"atoms": [[float(x), float(m)] for x, m in self.atoms],
                "pieces": [[float(l), float(r), float(m)] for l, r, m in self.pieces]}

    @classmethod
    def from_dict(cls, data: dict) -> "Measure1D":
        unknown = set(data) - {"atoms", "pieces"}
        if unknown:
            raise ValueError(f"unknown measure keys: {sorted(unknown)}")
        return cls(atoms=tuple(tuple(a) for a in data.get("atoms", [])),
                   pieces=tuple(tuple(p) for p in data.get("pieces", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Measure1D":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class Partition1D:
    sub_measures: tuple
    cut_points: tuple
    # (cut point, mass of its atom sent left, mass sent right) per distinct cut
    atom_splits: tuple = field(default=())


@dataclass(frozen=True)
class EmpiricalMeasure:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a non-empty (N, d) array")
        if pts.dtype != object and not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", pts)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]


def cdf(m: Components, x):
    """``m((-inf, x])``."""
    return m.cdf(x)


def _breakpoints(m: Components):
    pts = {x for x, _ in m.atoms}
    for l, r, _ in m.pieces:
        pts.add(l)
        pts.add(r)
    return sorted(pts)


def quantile_cut(m: Components, j: int, N: int):
    """Smallest ``x`` with ``m((-inf, x]) >= j/N``."""
    if not 1 <= j <= N - 1:
        raise ValueError(f"need 1 <= j <= N-1, got j={j}, N={N}")
    exact = isinstance(m.mass, Fraction)
    target = Fraction(j, N) if exact else j / N
    pts = _breakpoints(m)
    prev_x, prev_F = None, None
    for x in pts:
        F_right = m.cdf(x)
        F_left = F_right - m.atom_mass_at(x)
        if prev_x is not None and F_left >= target - MASS_TOL and F_left > prev_F:
            if F_left <= target + MASS_TOL:
                return x
            # crossing strictly inside the linear stretch (prev_x, x)
            frac = (target - prev_F) / (F_left - prev_F)
            frac = min(max(frac, 0), 1)
            return prev_x + frac * (x - prev_x)
        if F_right >= target - MASS_TOL:
            return x
        prev_x, prev_F = x, F_right
    return pts[-1]


def partition(m: Components, N: int) -> Partition1D:
    """Split ``m`` left to right into ``N`` pieces of mass ``1/N`` each.

    Cut points are the quantile cuts; mass of an atom sitting on a cut point
    is handed to the neighbouring sub-measures by the inductive left/right
    residual recursion, so the result is the unique such partition.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    exact = isinstance(m.mass, Fraction)
    inv = Fraction(1, N) if exact else 1 / N
    if N == 1:
        return Partition1D((Components(m.atoms, m.pieces),), ())
    cuts = [quantile_cut(m, j, N) for j in range(1, N)]

    # distinct cut points p_i and the first index j_i (1-based) where each starts
    starts, points = [], []
    for j, a in enumerate(cuts, start=1):
        if not points or a != points[-1]:
            points.append(a)
            starts.append(j)
    starts.append(N)  # sentinel j_{k+1} := N
    k = len(points)

    subs = [None] * (N + 1)  # 1-based
    lefts = [None] * (k + 1)
    rights = [None] * (k + 1)

    below = m.restrict_open(None, points[0])
    rights[0] = _clean(inv - below.mass, "r_1")
    subs[1] = below.plus_atoms([(points[0], rights[0])])

    for i in range(1, k):
        p_prev, p = points[i - 1], points[i]
        between = m.restrict_open(p_prev, p)
        ell = m.atom_mass_at(p_prev) - rights[i - 1] - (starts[i] - starts[i - 1] - 1) * inv
        lefts[i] = _clean(ell, f"l_{i + 1}")
        rights[i] = _clean(inv - between.mass - lefts[i], f"r_{i + 1}")
        subs[starts[i]] = between.plus_atoms([(p_prev, lefts[i]), (p, rights[i])])

    for i in range(k):
        for j in range(starts[i] + 1, starts[i + 1]):
            subs[j] = Components(((points[i], inv),), ())

    above = m.restrict_open(points[-1], None)
    lefts[k] = _clean(inv - above.mass, "l_N")
    subs[N] = above.plus_atoms([(points[-1], lefts[k])])

    splits = tuple((points[i], rights[i], lefts[i + 1]) for i in range(k))
    return Partition1D(tuple(subs[1:]), tuple(cuts), splits)


def _clean(v, name):
    if v < -MASS_TOL:
        raise ArithmeticError(f"negative residual mass {name} = {v}")
    return v if v > MASS_TOL else 0 * v


@dataclass(frozen=True)
class Quantization:
    points: tuple
    w2: float
    w2_squared: object
    partition: Partition1D


def quantize(m: Components, N: int) -> Quantization:
    """Optimal N-point uniform-weight approximation of ``m`` in W2."""
    part = partition(m, N)
    xs, cost = [], 0
    for sub in part.sub_measures:
        x = N * sub.first_moment()
        xs.append(x)
        cost += sub.second_moment_about(x)
    # rounding can leave the sequence a few ulps out of order
    for j in range(1, N):
        if xs[j] < xs[j - 1]:
            xs[j] = xs[j - 1]
    cost = max(cost, 0 * cost)
    return Quantization(tuple(xs), math.sqrt(cost), cost, part)


def quantile_segments(m: Components):
    """Quantile function as a list of ``(u0, u1, y0, y1)`` linear pieces.

    On the level band ``[u0, u1]`` the quantile function runs linearly from
    ``y0`` to ``y1`` (``y0 == y1`` for an atom).
    """
    # split overlapping pieces into disjoint runs, also breaking at atoms
    edges = {v for l, r, _ in m.pieces for v in (l, r)}
    lo = min(edges, default=None)
    hi = max(edges, default=None)
    edges |= {x for x, _ in m.atoms if lo is not None and lo < x < hi}
    edges = sorted(edges)
    runs = []
    for a, b in zip(edges[:-1], edges[1:]):
        mass = sum(mm * (min(r, b) - max(l, a)) / (r - l)
                   for l, r, mm in m.pieces if l < b and r > a)
        if mass > 0:
            runs.append((a, b, mass))
    items = [((x, 0), (x, x, mm)) for x, mm in m.atoms]
    items += [((l, 1), (l, r, mm)) for l, r, mm in runs]
    items.sort(key=lambda it: it[0])
    segs, level = [], 0 * m.mass
    for _, (y0, y1, mass) in items:
        segs.append((level, level + mass, y0, y1))
        level += mass
    return segs


def w2_1d(m: Components, n: Components) -> float:
    """Exact Wasserstein-2 distance via the quantile functions."""
    sm, sn = quantile_segments(m), quantile_segments(n)
    levels = sorted({u for s in sm for u in s[:2]} | {u for s in sn for u in s[:2]})
    total = 0.0
    for u0, u1 in zip(levels[:-1], levels[1:]):
        if u1 <= u0:
            continue
        # evaluate each linear branch strictly inside the band
        d0 = _branch(sm, u0, u1, 0) - _branch(sn, u0, u1, 0)
        d1 = _branch(sm, u0, u1, 1) - _branch(sn, u0, u1, 1)
        total += float((u1 - u0) * (d0 * d0 + d0 * d1 + d1 * d1) / 3)
    return math.sqrt(max(total, 0.0))


def _branch(segs, u0, u1, end):
    mid = (u0 + u1) / 2
    for s0, s1, y0, y1 in segs:
        if s0 <= mid <= s1:
            u = u0 if end == 0 else u1
            if s1 == s0:
                return y0
            return y0 + (y1 - y0) * (u - s0) / (s1 - s0)
    # total mass can fall a few ulps short of 1 in floating point
    s0, s1, y0, y1 = segs[0] if mid < segs[0][0] else segs[-1]
    if mid < s0 - 1e-9 or mid > s1 + 1e-9:
        raise AssertionError("level outside [0, 1]")
    return y0 if end == 0 else y1


def empirical_stats(e: EmpiricalMeasure | Sequence):
    """Mean vector and mean squared norm of an empirical measure."""
    if not isinstance(e, EmpiricalMeasure):
        e = EmpiricalMeasure(np.asarray(e))
    pts = e.points
    mean = pts.sum(axis=0) / pts.shape[0]
    second = (pts * pts).sum() / pts.shape[0]
    return mean, second


def empirical_as_measure(points) -> Measure1D:
    """Uniform-weight atoms on 1-D ``points`` (duplicates merge)."""
    pts = list(np.asarray(points).ravel())
    exact = any(isinstance(p, Fraction) for p in pts)
    w = Fraction(1, len(pts)) if exact else 1 / len(pts)
    return Measure1D(atoms=tuple((p, w) for p in pts))
