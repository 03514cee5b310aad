import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfglab.dynamics import ConstantInX, LinearQuadratic, flow_backward
from mfglab.equilibrium import (GameSpec, IntegralOfProfile, MomentFunctional, SmoothOfMean,
                                StepOfMean, F_prime, F_value, construct_alternating,
                                construct_prop33, construct_two_population, find_equilibria,
                                scalar_mean, second_moment, sigma0_from_dict, solve_nplayer,
                                verify_nplayer)
from mfglab.errors import ConfigError, PreconditionError
from mfglab.measures import EmpiricalMeasure, Measure1D, quantize, w2_1d, empirical_as_measure


def step_game(t=1.0, drift=None):
    return GameSpec(drift or ConstantInX(), StepOfMean(0.0, 1.0, 0.0), t)


def smooth_game(t=1.0, drift=None, **kw):
    return GameSpec(drift or ConstantInX(), SmoothOfMean(**kw), t)


def dirac(x):
    return EmpiricalMeasure(np.array([[x]]))


class TestCouplings:
    def test_step_half_open(self):
        s = StepOfMean(0.0, 1.0, 0.0)
        assert s.value([[-1e-300]]) == 1.0
        assert s.value([[0.0]]) == 0.0

    def test_smooth_value_and_derivative(self):
        s = SmoothOfMean("tanh")
        pts = np.array([[0.2], [0.6]])
        assert s.value(pts) == pytest.approx(math.tanh(0.4), abs=1e-15)
        assert np.allclose(s.dm(pts), 1 / math.cosh(0.4) ** 2)

    def test_cutoff_vanishes_outside_radius(self):
        s = SmoothOfMean("tanh", shift=-1.0, cutoff_radius=1.0)
        assert s.value([[2.0]]) == 0
        assert s.value([[0.0]]) == pytest.approx(math.tanh(1.0))

    def test_cutoff_derivative_matches_finite_difference(self):
        s = SmoothOfMean("arctan", shift=-0.3, cutoff_radius=1.5)
        pts = np.array([[0.4], [-0.2], [0.9]])
        g = s.dm(pts)
        h = 1e-6
        for k in range(3):
            # D_m sigma0(m, x_k) = n * d/dx_k sigma0(empirical measure)
            up, dn = pts.copy(), pts.copy()
            up[k, 0] += h
            dn[k, 0] -= h
            fd = (s.value(up) - s.value(dn)) / (2 * h) * len(pts)
            assert g[k, 0] == pytest.approx(fd, abs=1e-7)

    def test_moment_functional_derivative(self):
        s = MomentFunctional(((1, 0, 0.5), (0, 1, -0.25), (1, 1, 0.1)))
        pts = np.array([[0.4], [-0.2], [0.9]])
        g = s.dm(pts)
        h = 1e-6
        for k in range(3):
            up, dn = pts.copy(), pts.copy()
            up[k, 0] += h
            dn[k, 0] -= h
            fd = (s.value(up) - s.value(dn)) / (2 * h) * 3
            assert g[k, 0] == pytest.approx(fd, abs=1e-7)

    def test_bounds(self):
        assert StepOfMean(0, 2, -1).uniform_bound == 2
        assert SmoothOfMean("tanh", amplitude=0.5, slope=2).dm_bound == 1.0
        assert IntegralOfProfile().uniform_bound == math.inf

    def test_exact_moments(self):
        pts = np.array([[Fraction(1, 3)], [Fraction(2, 3)]], dtype=object)
        assert scalar_mean(pts) == Fraction(1, 2)
        assert second_moment(pts) == Fraction(5, 18)

    @pytest.mark.parametrize("s0", [StepOfMean(0.5, 1.0, -1.0, cutoff_radius=2.0),
                                    SmoothOfMean("erf", 0.5, 2.0, 0.1, 0.2),
                                    MomentFunctional(((1, 0, 1.0), (0, 2, 0.5)), 3.0),
                                    IntegralOfProfile(2.0)])
    def test_round_trip(self, s0):
        assert sigma0_from_dict(json.loads(json.dumps(s0.to_dict()))) == s0

    def test_unknown_keys(self):
        with pytest.raises(ConfigError):
            sigma0_from_dict({"kind": "step_of_mean", "level": 3})
        with pytest.raises(ConfigError):
            sigma0_from_dict({"kind": "quartic"})


class TestF:
    def test_step_examples(self):
        spec = step_game()
        assert F_value(spec, dirac(0.5), 0.0) == 0
        assert F_value(spec, dirac(0.5), 1.0) == 0

    @pytest.mark.parametrize("sigma", [-1.0, 0.2, 1.3])
    def test_constant_coupling(self, sigma):
        spec = GameSpec(LinearQuadratic(0.5), MomentFunctional(((0, 0, 0.3),)), 1.0)
        assert F_value(spec, Measure1D.uniform(0, 1), sigma) == pytest.approx(sigma - 0.3, abs=1e-15)
        assert F_prime(spec, Measure1D.uniform(0, 1), sigma) == 1.0

    def test_tanh_prime(self):
        assert F_prime(smooth_game(), dirac(0.0), 0.0) == pytest.approx(2.0, abs=1e-12)

    def test_prime_refused_for_step(self):
        with pytest.raises(PreconditionError):
            F_prime(step_game(), dirac(0.0), 0.0)

    def test_measure_uses_quantization(self):
        spec = smooth_game(t=0.5)
        m = Measure1D.uniform(-1, 2)
        pts = np.asarray(quantize(m, 64).points)[:, None]
        assert F_value(spec, m, 0.3) == F_value(spec, EmpiricalMeasure(pts), 0.3)

    def test_prime_matches_finite_difference(self):
        cases = []
        drifts = [ConstantInX(), LinearQuadratic(0.5)]
        couplings = [SmoothOfMean("tanh", 1.0, 1.0), SmoothOfMean("logistic", 1.2, 2.0, 0.3),
                     SmoothOfMean("arctan", 0.8, 1.5, -0.2, cutoff_radius=3.0),
                     MomentFunctional(((1, 0, 0.4), (0, 1, -0.1)), 4.0),
                     SmoothOfMean("erf", -0.6, 1.0, 0.5)]
        for drift in drifts:
            for s0 in couplings:
                for sigma in (-0.4, 0.5):
                    cases.append((GameSpec(drift, s0, 0.8), sigma))
        assert len(cases) == 20
        m = Measure1D(atoms=((0.2, 0.5),), pieces=((-0.5, 0.5, 0.5),))
        h = 1e-5
        for spec, sigma in cases:
            fd = (F_value(spec, m, sigma + h) - F_value(spec, m, sigma - h)) / (2 * h)
            assert F_prime(spec, m, sigma) == pytest.approx(fd, abs=1e-5)


class TestFindEquilibria:
    def test_two_roots_at_half(self):
        rep = find_equilibria(step_game(), dirac(0.5))
        assert rep.root_values == (0.0, 1.0)

    def test_single_root(self):
        rep = find_equilibria(step_game(), dirac(-1.0))
        assert rep.root_values == (1.0,)

    def test_tanh_unique(self):
        rep = find_equilibria(smooth_game(), Measure1D.uniform(0, 1))
        assert len(rep.roots) == 1
        r, slope = rep.roots[0]
        assert abs(F_value(smooth_game(), Measure1D.uniform(0, 1), r)) <= 1e-10
        assert slope >= 1

    def test_jump_recorded(self):
        # F jumps across zero at sigma = 0.5 where the pushed-forward mean crosses 0
        rep = find_equilibria(step_game(), dirac(0.5))
        assert len(rep.jump_crossings) == 1
        assert rep.jump_crossings[0] == pytest.approx(0.5, abs=1e-9)

    def test_range_refused(self):
        spec = GameSpec(ConstantInX((-0.5, 0.5)), SmoothOfMean("tanh"), 1.0)
        with pytest.raises(PreconditionError):
            find_equilibria(spec, dirac(0.0))

    def test_samples_csv(self):
        rep = find_equilibria(step_game(), dirac(0.5), grid_points=5)
        lines = rep.samples_csv().splitlines()
        assert lines[0] == "sigma,F" and len(lines) == 6
        assert lines[1] == "-1.500000000000e+00,-1.500000000000e+00"

    @settings(max_examples=15, deadline=None)
    @given(st.sampled_from(["tanh", "arctan", "logistic", "erf"]),
           st.floats(0.2, 1.0), st.floats(0.3, 2.0), st.floats(-1, 1),
           st.floats(0.1, 2.0), st.sampled_from([0, 1]))
    def test_monotone_uniqueness(self, profile, amp, slope, shift, t, drift_kind):
        drift = ConstantInX() if drift_kind == 0 else LinearQuadratic(0.4)
        spec = GameSpec(drift, SmoothOfMean(profile, amp, slope, shift), t)
        m = Measure1D(pieces=((-1.0, 0.5, 0.6),), atoms=((0.8, 0.4),))
        rep = find_equilibria(spec, m, grid_points=256)
        assert len(rep.roots) == 1
        for s in np.linspace(-1.4, 1.4, 9):
            assert F_prime(spec, m, s) >= 1 - 1e-6


class TestNPlayer:
    def test_prop33_patterns(self):
        c = construct_prop33(1, 1, 1, 10)
        assert c.J == 5
        assert c.details["sum_if_switching"] == -1 and c.details["sum_if_staying"] == 1
        for sig in c.patterns.values():
            sol = verify_nplayer(c.spec, c.points, sig)
            assert sol.exact and sol.mode == "fraction"
            assert all(r == 0 for r in sol.residuals)

    def test_prop33_second_example(self):
        c = construct_prop33(1, 2, 0.5, 12)
        assert c.J == 8
        assert verify_nplayer(c.spec, c.points, c.patterns["mixed"]).exact
        assert verify_nplayer(c.spec, c.points, c.patterns["all_zero"]).exact
        # N = 12 is still too small for the all-one pattern: a player at -b
        # sees a leave-one-out mean of 1/22 > 0 after moving left
        assert not verify_nplayer(c.spec, c.points, c.patterns["all_one"]).exact

    def test_prop33_large_N(self):
        for N in range(16, 80):
            c = construct_prop33(1, 2, 0.5, N)
            assert all(verify_nplayer(c.spec, c.points, s).exact for s in c.patterns.values())

    def test_prop33_degenerate(self):
        assert construct_prop33(1, 1, 1, 2).J == 1

    def test_prop33_refuses(self):
        with pytest.raises(PreconditionError):
            construct_prop33(1, -1, 1, 10)

    def test_constant_coupling(self):
        spec = GameSpec(ConstantInX(), MomentFunctional(((0, 0, 0.25),)), 1.0)
        sol = verify_nplayer(spec, [0.0, 1.0, 2.0], [0.25] * 3)
        assert sol.residuals == (0.0, 0.0, 0.0) and sol.exact

    def test_float_path_matches_exact_path(self):
        spec = GameSpec(LinearQuadratic(0.0), StepOfMean(0.0, 1.0, 0.0), 1.0)
        c = construct_prop33(1, 1, 1, 10)
        for sig in c.patterns.values():
            sol = verify_nplayer(spec, c.points_float, sig)
            assert sol.exact and sol.mode == "float"

    def test_needs_two_players(self):
        with pytest.raises(PreconditionError):
            verify_nplayer(step_game(), [0.0], [0.0])

    def test_alternating(self):
        alt = construct_alternating(1.0, 4, 0.5)
        assert alt.b_N == pytest.approx(1 / 9, abs=1e-15)
        assert alt.sigmas == pytest.approx((1 / 9, -1 / 9, 1 / 9, -1 / 9))
        sol = verify_nplayer(alt.spec, alt.points, alt.sigmas)
        assert sol.max_residual <= 1e-12
        assert alt.notes

    def test_alternating_closed_forms(self):
        assert construct_alternating(1.0, 4, 2.0).b_N == pytest.approx(3.0)
        # b_N (N-1)^2 is constant for alpha = 1/2, t = 1
        for N in (10, 100, 1000):
            assert construct_alternating(1.0, N, 0.5).b_N * (N - 1) ** 2 == pytest.approx(1.0)

    @pytest.mark.parametrize("args", [(1.0, 4, 1.0), (1.0, 5, 0.5), (1.0, 4, -1.0), (0.0, 4, 0.5)])
    def test_alternating_refuses(self, args):
        with pytest.raises(PreconditionError):
            construct_alternating(*args)

    def test_exhaustive_search(self):
        c = construct_prop33(1, 1, 1, 10)
        found = {sol.sigmas for sol in solve_nplayer(c.spec, c.points)}
        for sig in c.patterns.values():
            assert tuple(map(float, sig)) in found

    def test_fixed_point_search(self):
        spec = smooth_game(t=1.0, amplitude=0.5)
        pts = np.linspace(-1, 1, 6)
        sols = solve_nplayer(spec, pts)
        assert len(sols) == 1
        assert sols[0].max_residual <= 1e-10


class TestTwoPopulation:
    def test_dirac_example(self):
        spec = step_game()
        c = construct_two_population(spec, Measure1D.dirac(-1.0), Measure1D.dirac(1.0), 10)
        assert c.J == 5
        assert c.details["lambda"] == Fraction(1, 2)
        assert c.details["delta"] == 2 and c.details["c"] == 1
        for sig in c.patterns.values():
            assert verify_nplayer(spec, c.points, sig).exact

    def test_dirac_boundary_rejected(self):
        assert construct_two_population(step_game(), Measure1D.dirac(-1.0),
                                        Measure1D.dirac(1.0), 11) is None

    def test_uniform_small_N(self):
        spec = step_game(0.25)
        c = construct_two_population(spec, Measure1D.uniform(-2, -1), Measure1D.uniform(1, 2), 8)
        assert c is not None and c.details["lambda"] == Fraction(1, 2)
        assert verify_nplayer(spec, c.points, c.patterns["mixed"]).exact

    def test_uniform_constant_patterns_from_18(self):
        spec = step_game(0.25)
        for N in range(18, 60, 2):
            c = construct_two_population(spec, Measure1D.uniform(-2, -1), Measure1D.uniform(1, 2), N)
            assert all(verify_nplayer(spec, c.points, s).exact for s in c.patterns.values())

    def test_precondition_messages(self):
        spec = step_game()
        with pytest.raises(PreconditionError, match="mu_tilde"):
            construct_two_population(spec, Measure1D.uniform(-1, 1), Measure1D.dirac(1.0), 10)
        with pytest.raises(PreconditionError, match="nu_tilde"):
            construct_two_population(spec, Measure1D.dirac(-1.0), Measure1D.uniform(0, 1), 10)
        other = GameSpec(ConstantInX(), StepOfMean(0.5, 1.0, 0.0), 1.0)
        with pytest.raises(PreconditionError):
            construct_two_population(other, Measure1D.dirac(-1.0), Measure1D.dirac(1.0), 10)


def test_lifting_constant_patterns():
    # both mean-field roots push the mean at least 0.2 away from the threshold
    spec = step_game()
    m = Measure1D.uniform(0.2, 0.4)
    roots = find_equilibria(spec, m).root_values
    assert roots == (0.0, 1.0)
    for sigma in roots:
        shifted = float(np.mean(flow_backward(spec.drift, sigma, spec.t, np.array([0.2, 0.4]))))
        assert abs(shifted) >= 0.1
        for N in range(4, 65):
            pts = quantize(m, N).points
            assert verify_nplayer(spec, pts, [sigma] * N).exact


@pytest.mark.parametrize("N", [10, 40, 160])
def test_anomalous_limit(N):
    a, b, t = 1, 1, 1
    c = construct_prop33(a, b, t, N)
    sig = c.patterns["mixed"]
    final = np.array(c.points_float)
    start = final - np.array(sig, dtype=float) * t
    lam = b / (a + b)
    limit = Measure1D(atoms=((-b, 1 - lam), (a, lam)))
    empirical = empirical_as_measure(start)
    assert w2_1d(empirical, limit) <= 2 * math.sqrt(1 / N)
    assert abs(start.mean()) <= 2 / N
    gap = t * math.sqrt(min(c.J / N, 1 - c.J / N)) / 2
    for sigma in (0, 1):
        pushed = empirical_as_measure(final - sigma * t)
        assert w2_1d(empirical, pushed) >= gap
