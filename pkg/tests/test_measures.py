import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from mfglab.measures import (EmpiricalMeasure, Measure1D, cdf, empirical_as_measure,
                             empirical_stats, partition, quantile_cut, quantize, w2_1d)


def figure_measure():
    # density 1 on [0, 1/3], an atom 1/3 at 1/3, density 1 on [1/3, 2/3]
    third = Fraction(1, 3)
    return Measure1D(atoms=((third, third),), pieces=((0, third, third), (third, 2 * third, third))).exact()


@st.composite
def piecewise_measures(draw, max_atoms=3, max_pieces=3):
    n_atoms = draw(st.integers(0, max_atoms))
    n_pieces = draw(st.integers(0 if n_atoms else 1, max_pieces))
    locs = draw(st.lists(st.integers(-40, 40), min_size=n_atoms, max_size=n_atoms))
    lefts = draw(st.lists(st.integers(-40, 39), min_size=n_pieces, max_size=n_pieces))
    widths = draw(st.lists(st.integers(1, 20), min_size=n_pieces, max_size=n_pieces))
    weights = draw(st.lists(st.integers(1, 10), min_size=n_atoms + n_pieces,
                            max_size=n_atoms + n_pieces))
    total = sum(weights)
    masses = [w / total for w in weights]
    masses[-1] = 1 - math.fsum(masses[:-1])
    atoms = tuple((l / 8, m) for l, m in zip(locs, masses[:n_atoms]))
    pieces = tuple((l / 8, (l + w) / 8, m) for l, w, m in zip(lefts, widths, masses[n_atoms:]))
    return Measure1D(atoms=atoms, pieces=pieces)


class TestMeasure1D:
    def test_rejects_bad_masses(self):
        with pytest.raises(ValueError):
            Measure1D(atoms=((0.0, 0.5),))
        with pytest.raises(ValueError):
            Measure1D(atoms=((0.0, 1.5), (1.0, -0.5)))
        with pytest.raises(ValueError):
            Measure1D(pieces=((1.0, 1.0, 1.0),))
        with pytest.raises(ValueError):
            Measure1D(atoms=((math.inf, 1.0),))

    def test_duplicate_atoms_merge(self):
        m = Measure1D(atoms=((0.0, 0.25), (0.0, 0.25), (1.0, 0.5)))
        assert m.atoms == ((0.0, 0.5), (1.0, 0.5))

    def test_json_round_trip_and_field_order(self):
        m = Measure1D(atoms=((0.5, 0.25),), pieces=((0.0, 1.0, 0.75),))
        text = m.to_json()
        assert list(json.loads(text)) == ["atoms", "pieces"]
        assert Measure1D.from_json(text) == m

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            Measure1D.from_dict({"atoms": [[0, 1]], "density": []})


class TestCdf:
    def test_uniform(self):
        assert cdf(Measure1D.uniform(0, 1), 0.25) == 0.25

    def test_figure_jump(self):
        assert figure_measure().cdf(Fraction(1, 3)) == Fraction(2, 3)

    def test_far_left(self):
        assert cdf(figure_measure(), -1e9) == 0

    @given(piecewise_measures(), st.lists(st.floats(-6, 6), min_size=2, max_size=20))
    def test_monotone_and_bounded(self, m, xs):
        vals = [cdf(m, x) for x in sorted(xs)]
        assert all(0 <= v <= 1 + 1e-12 for v in vals)
        assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))


class TestQuantileCut:
    def test_uniform_median(self):
        assert quantile_cut(Measure1D.uniform(0, 1), 1, 2) == 0.5

    def test_figure_cuts_at_atom(self):
        m = figure_measure()
        assert [quantile_cut(m, j, 9) for j in (3, 4, 5, 6)] == [Fraction(1, 3)] * 4

    def test_single_atom(self):
        assert quantile_cut(Measure1D.dirac(0.0), 1, 3) == 0.0

    def test_plateau_takes_left_endpoint(self):
        m = Measure1D(pieces=((0.0, 1.0, 0.5), (2.0, 3.0, 0.5)))
        assert quantile_cut(m, 1, 2) == 1.0

    @given(piecewise_measures(), st.integers(2, 12), st.data())
    def test_is_minimal_point_reaching_level(self, m, N, data):
        j = data.draw(st.integers(1, N - 1))
        a = quantile_cut(m, j, N)
        assert cdf(m, a) >= j / N - 1e-12
        assert cdf(m, a - 1e-7) < j / N + 1e-12


class TestPartition:
    def test_figure_itemization(self):
        part = partition(figure_measure(), 9)
        ninth, third = Fraction(1, 9), Fraction(1, 3)
        subs = part.sub_measures
        for j in range(3):
            assert subs[j].atoms == ()
            assert subs[j].pieces == ((j * ninth, (j + 1) * ninth, ninth),)
        for j in range(3, 6):
            assert subs[j].pieces == ()
            assert subs[j].atoms == ((third, ninth),)
        for j in range(6, 9):
            k = j - 6
            assert subs[j].atoms == ()
            assert subs[j].pieces == ((third + k * ninth, third + (k + 1) * ninth, ninth),)

    def test_uniform_halves(self):
        subs = partition(Measure1D.uniform(0, 1), 2).sub_measures
        assert subs[0].pieces == ((0.0, 0.5, 0.5),)
        assert subs[1].pieces == ((0.5, 1.0, 0.5),)

    def test_two_atoms_split(self):
        m = Measure1D(atoms=((0.0, 0.5), (1.0, 0.5)))
        subs = partition(m, 4).sub_measures
        assert [s.atoms for s in subs] == [((0.0, 0.25),)] * 2 + [((1.0, 0.25),)] * 2

    @settings(max_examples=60, deadline=None)
    @given(piecewise_measures(), st.integers(1, 12))
    def test_recomposition_mass_and_order(self, m, N):
        part = partition(m, N)
        for s in part.sub_measures:
            assert abs(s.mass - 1 / N) <= 1e-12
        lo, hi = m.support()
        xs = np.linspace(lo - 1, hi + 1, 1000)
        for x in xs:
            assert abs(sum(s.cdf(x) for s in part.sub_measures) - m.cdf(x)) <= 1e-10
        for a, b in zip(part.sub_measures, part.sub_measures[1:]):
            assert a.support()[1] <= b.support()[0] + 1e-12

    @given(piecewise_measures(), st.integers(1, 9))
    def test_deterministic(self, m, N):
        assert partition(m, N) == partition(m, N)


class TestQuantize:
    def test_uniform_thirds(self):
        q = quantize(Measure1D.uniform(0, 1), 3)
        assert np.allclose(q.points, (1 / 6, 1 / 2, 5 / 6), atol=1e-12, rtol=0)
        assert abs(q.w2_squared - 1 / 108) <= 1e-12

    def test_exact_arithmetic(self):
        q = quantize(Measure1D.uniform(0, 1).exact(), 3)
        assert q.points == (Fraction(1, 6), Fraction(1, 2), Fraction(5, 6))
        assert q.w2_squared == Fraction(1, 108)

    def test_dirac(self):
        q = quantize(Measure1D.dirac(2.5), 5)
        assert q.points == (2.5,) * 5 and q.w2 == 0

    def test_two_atoms(self):
        q = quantize(Measure1D(atoms=((0.0, 0.5), (1.0, 0.5))), 2)
        assert q.points == (0.0, 1.0) and q.w2 == 0

    def test_single_point_is_barycenter(self):
        m = figure_measure()
        assert quantize(m, 1).points == (m.mean,)

    @settings(max_examples=80, deadline=None)
    @given(piecewise_measures(), st.integers(1, 16))
    def test_barycenter_and_monotone(self, m, N):
        q = quantize(m, N)
        assert abs(math.fsum(q.points) / N - m.mean) <= 1e-12
        assert all(b >= a for a, b in zip(q.points, q.points[1:]))

    def test_convergence_rate_uniform(self):
        m = Measure1D.uniform(0, 1)
        for N in (4, 8, 16, 32):
            assert quantize(m, N).w2 <= quantize(m, N // 2).w2 / 1.9


def _transport_cost(locs, masses, points):
    """Optimal transport cost from atoms to equal-mass points (linear program)."""
    n, k = len(locs), len(points)
    cost = np.array([[(a - x) ** 2 for x in points] for a in locs]).ravel()
    A_eq, b_eq = [], []
    for i in range(n):
        row = np.zeros(n * k)
        row[i * k:(i + 1) * k] = 1
        A_eq.append(row)
        b_eq.append(masses[i])
    for j in range(k):
        row = np.zeros(n * k)
        row[j::k] = 1
        A_eq.append(row)
        b_eq.append(1 / k)
    res = optimize.linprog(cost, A_eq=np.array(A_eq), b_eq=b_eq, bounds=(0, None), method="highs")
    return res.fun


@pytest.mark.parametrize("seed", range(3))
def test_quantization_is_optimal_against_brute_force(seed):
    rng = np.random.default_rng(seed)
    n_atoms = int(rng.integers(1, 6))
    locs = np.sort(rng.choice(np.arange(-10, 11), n_atoms, replace=False) / 4.0)
    w = rng.integers(1, 6, n_atoms).astype(float)
    masses = w / w.sum()
    m = Measure1D(atoms=tuple(zip(locs, masses)))
    for N in range(1, 5):
        q = quantize(m, N)
        best = math.inf
        # minimize the transport cost over point locations from many starts
        starts = [np.sort(rng.uniform(locs.min(), locs.max(), N)) for _ in range(3)]
        starts += [np.array(c, dtype=float) for c in itertools.combinations_with_replacement(locs, N)][:3]
        for s in starts:
            r = optimize.minimize(lambda x: _transport_cost(locs, masses, x), s,
                                  method="Nelder-Mead", options={"xatol": 1e-11, "fatol": 1e-15,
                                                                 "maxiter": 1200})
            best = min(best, r.fun)
        # nothing beats the construction, and the search finds its value
        assert q.w2_squared <= best + 1e-12
        assert abs(math.sqrt(max(best, 0)) - q.w2) <= 1e-6


class TestW2:
    def test_diracs(self):
        assert w2_1d(Measure1D.dirac(0), Measure1D.dirac(3)) == 3

    def test_against_quantization(self):
        m = Measure1D.uniform(0, 1)
        q = quantize(m, 3)
        assert abs(w2_1d(m, empirical_as_measure(q.points)) - math.sqrt(1 / 108)) <= 1e-12

    def test_self_distance(self):
        assert w2_1d(figure_measure(), figure_measure()) == 0

    def test_uniform_shift(self):
        assert abs(w2_1d(Measure1D.uniform(0, 1), Measure1D.uniform(2, 3)) - 2) <= 1e-14

    def test_uniform_vs_dirac_closed_form(self):
        # variance of uniform[0,1] is 1/12
        assert abs(w2_1d(Measure1D.uniform(0, 1), Measure1D.dirac(0.5)) ** 2 - 1 / 12) <= 1e-14

    @settings(max_examples=40, deadline=None)
    @given(piecewise_measures(), piecewise_measures())
    def test_symmetric(self, m, n):
        assert abs(w2_1d(m, n) - w2_1d(n, m)) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(piecewise_measures(), st.integers(1, 10))
    def test_quantization_w2_matches_distance(self, m, N):
        q = quantize(m, N)
        # compare squares: sqrt amplifies ulp-level mass differences
        assert abs(w2_1d(m, empirical_as_measure(q.points)) ** 2 - q.w2_squared) <= 1e-12


class TestEmpirical:
    def test_stats_1d(self):
        mean, second = empirical_stats([0.0, 2.0])
        assert mean.tolist() == [1.0] and second == 2.0

    def test_stats_2d(self):
        mean, second = empirical_stats(EmpiricalMeasure(np.array([[1.0, 0.0], [0.0, 1.0]])))
        assert mean.tolist() == [0.5, 0.5] and second == 1.0

    def test_single_point(self):
        mean, second = empirical_stats(np.array([[3.0, 4.0]]))
        assert mean.tolist() == [3.0, 4.0] and second == 25.0

    def test_rejects_bad_points(self):
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.array([np.nan]))
        with pytest.raises(ValueError):
            EmpiricalMeasure(np.zeros((0, 1)))
