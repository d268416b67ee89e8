"""Analytic reliability: truncation, conditional survival, topologies."""
import math
from dataclasses import replace

import numpy as np
import pytest

from gammashock.core import SystemModel, Topology, gamma_cdf
from gammashock.reliability import (
    DEFAULT_QUADRATURE,
    QuadratureSpec,
    component_reliability,
    parallel_reliability,
    series_reliability,
    soft_survival_given_m,
    system_reliability,
    truncation_level,
)
from .test_core import make_component


def brute_truncation(mu: float, eps: float) -> int:
    """Smallest M with P(N > M) < eps, by direct pmf accumulation."""
    cum = 0.0
    m = 0
    while True:
        cum += math.exp(-mu) * mu**m / math.factorial(m)
        if 1.0 - cum < eps:
            return m
        m += 1


T_GRID = np.linspace(0.0, 16.0, 9)


class TestTruncationLevel:
    def test_no_shocks_or_no_time(self):
        assert truncation_level(0.0, 100.0, 1e-10) == 0
        assert truncation_level(2.5e-3, 0.0, 1e-10) == 0

    def test_frozen_values(self):
        assert truncation_level(2.5e-3, 400.0, 1e-10) == 12
        assert truncation_level(2.5e-3, 5.0, 1e-10) == 4
        # a tolerance of 0.99 is satisfied already by the m = 0 mass
        assert truncation_level(2.5e-3, 400.0, 0.99) == 0

    def test_matches_brute_force(self):
        for mu in (0.0125, 0.3, 1.0, 5.0):
            for eps in (1e-10, 1e-6, 0.99):
                assert truncation_level(1.0, mu, eps) == brute_truncation(mu, eps)

    def test_minimality(self):
        mu, eps = 2.0, 1e-8
        m = truncation_level(1.0, mu, eps)
        tail = lambda k: 1.0 - sum(
            math.exp(-mu) * mu**j / math.factorial(j) for j in range(k + 1)
        )
        assert tail(m) < eps
        assert tail(m - 1) >= eps

    def test_rejects_bad_epsilon(self):
        for eps in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                truncation_level(1.0, 1.0, eps)
        with pytest.raises(ValueError):
            truncation_level(-1.0, 1.0, 0.5)


class TestSoftSurvival:
    def test_no_shocks_reduces_to_pure_wear(self):
        c = make_component()
        for t, u in ((5.0, 0.0), (2.0, 7.5), (12.0, 3.0)):
            got = soft_survival_given_m(c, t, u, 0)
            expect = gamma_cdf(c.soft_threshold - u, c.gamma_shape_rate * t, c.gamma_rate)
            assert abs(got - expect) <= 1e-12

    def test_fresh_at_time_zero(self):
        c = make_component()
        assert soft_survival_given_m(c, 0.0, 0.0, 0) == 1.0
        assert soft_survival_given_m(c, 0.0, 10.0, 0) == 1.0

    def test_dead_on_arrival(self):
        c = make_component()
        for m in (0, 2):
            assert soft_survival_given_m(c, 3.0, c.soft_threshold, m) == 0.0
            assert soft_survival_given_m(c, 3.0, c.soft_threshold + 5.0, m) == 0.0

    def test_monte_carlo_anchor_single_shock(self):
        # frozen 1e6-sample estimate: component 1, t=5, one shock hits
        got = soft_survival_given_m(make_component(), 5.0, 0.0, 1)
        assert abs(got - 0.790832) <= 3.0 * 0.00040671457777660246

    def test_degenerate_damage_shifts_the_gamma(self):
        c = make_component(shock_damage_mean=3.0, shock_damage_sd=0.0)
        for t, u, m in ((4.0, 2.0, 2), (7.0, 0.0, 3), (1.0, 5.0, 1)):
            head = c.soft_threshold - u - m * c.shock_damage_mean
            expect = gamma_cdf(head, c.gamma_shape_rate * t, c.gamma_rate) if head > 0 else 0.0
            assert abs(soft_survival_given_m(c, t, u, m) - expect) <= 1e-10

    def test_degenerate_damage_past_threshold(self):
        c = make_component(shock_damage_mean=11.0, shock_damage_sd=0.0)
        assert soft_survival_given_m(c, 2.0, 0.0, 2) == 0.0  # 22 >= H

    def test_more_shocks_never_help(self):
        c = make_component()
        vals = [soft_survival_given_m(c, 5.0, 2.0, m) for m in range(5)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))

    def test_bounded(self):
        c = make_component()
        for t in (0.5, 3.0, 9.0):
            for m in (0, 1, 4):
                v = soft_survival_given_m(c, t, 1.0, m)
                assert 0.0 <= v <= 1.0

    def test_rejects_bad_arguments(self):
        c = make_component()
        with pytest.raises(ValueError):
            soft_survival_given_m(c, -1.0, 0.0, 0)
        with pytest.raises(ValueError):
            soft_survival_given_m(c, 1.0, -0.5, 0)
        with pytest.raises(ValueError):
            soft_survival_given_m(c, 1.0, 0.0, -1)


class TestComponentReliability:
    def test_certain_at_time_zero(self):
        assert component_reliability(make_component(), 2.5e-3, 0.0, 0.0) == 1.0

    def test_dead_on_arrival(self):
        c = make_component()
        for t in (0.0, 1.0, 10.0):
            assert component_reliability(c, 2.5e-3, t, c.soft_threshold) == 0.0

    def test_monte_carlo_anchor(self, system):
        # frozen 1e6-sample estimate: component 2 at t=10 from u=5
        got = component_reliability(system.components[1], system.shock_rate, 10.0, 5.0)
        assert abs(got - 0.123401) <= 3.0 * 0.00032889693400668847

    def test_no_shocks_is_pure_gamma_wear(self):
        c = make_component()
        for t, u in ((3.0, 0.0), (8.0, 4.0)):
            expect = gamma_cdf(c.soft_threshold - u, c.gamma_shape_rate * t, c.gamma_rate)
            assert abs(component_reliability(c, 0.0, t, u) - expect) <= 1e-12

    def test_nonincreasing_in_time(self):
        c = make_component()
        vals = component_reliability(c, 2.5e-3, T_GRID, 2.0)
        assert np.all(np.diff(vals) <= 1e-9)

    def test_nonincreasing_in_level(self):
        c = make_component()
        vals = [component_reliability(c, 2.5e-3, 5.0, u) for u in np.linspace(0, 20, 11)]
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    def test_vector_time_matches_scalar(self):
        # a vector call truncates the shock count at the largest t, so
        # early entries pick up extra tail terms bounded by tail_epsilon
        c = make_component()
        vec = component_reliability(c, 2.5e-3, T_GRID, 1.0)
        for t, v in zip(T_GRID, vec):
            assert abs(v - component_reliability(c, 2.5e-3, float(t), 1.0)) <= 1e-10

    def test_rejects_bad_arguments(self):
        c = make_component()
        with pytest.raises(ValueError):
            component_reliability(c, 2.5e-3, -1.0, 0.0)
        with pytest.raises(ValueError):
            component_reliability(c, 2.5e-3, 1.0, -1.0)


class TestSystemReliability:
    def test_single_component_system(self):
        # the parallel form books the truncated shock-count tail on the
        # other side of the complement, so the two topologies agree on
        # one component only to tail_epsilon
        c = make_component()
        s1 = SystemModel(components=(c,), topology=Topology.SERIES, shock_rate=2.5e-3)
        for t in (0.0, 2.0, 6.0):
            r = component_reliability(c, 2.5e-3, t, 1.0)
            assert abs(series_reliability(s1, t, [1.0]) - r) <= 1e-10
            assert abs(parallel_reliability(s1, t, [1.0]) - r) <= 1e-10

    def test_no_shock_reduction(self, system):
        s0 = replace(system, shock_rate=0.0)
        u = [2.0, 5.0, 1.0]
        for t in (1.0, 5.0, 12.0):
            g = [
                gamma_cdf(c.soft_threshold - ui, c.gamma_shape_rate * t, c.gamma_rate)
                for c, ui in zip(s0.components, u)
            ]
            assert abs(series_reliability(s0, t, u) - g[0] * g[1] * g[2]) <= 1e-12
            expect_par = 1.0 - (1.0 - g[0]) * (1.0 - g[1]) * (1.0 - g[2])
            assert abs(parallel_reliability(s0, t, u) - expect_par) <= 1e-12

    def test_monte_carlo_anchors(self, system):
        # frozen 1e6-sample estimates at t=5 from fresh state
        got_series = series_reliability(system, 5.0)
        assert abs(got_series - 0.861434) <= 3.0 * 0.00034549307322144675
        par = replace(system, topology=Topology.PARALLEL)
        got_par = parallel_reliability(par, 5.0)
        assert abs(got_par - 0.999962) <= 3.0 * 6.1642968779888025e-06

    def test_certain_at_time_zero(self, system):
        assert series_reliability(system, 0.0) == 1.0
        assert parallel_reliability(system, 0.0) == 1.0

    def test_ordering(self, system, half_levels):
        for u in (None, half_levels):
            levels = np.zeros(system.n) if u is None else u
            comps = np.vstack(
                [
                    component_reliability(c, system.shock_rate, T_GRID, ui)
                    for c, ui in zip(system.components, levels)
                ]
            )
            ser = series_reliability(system, T_GRID, u)
            par = parallel_reliability(system, T_GRID, u)
            assert np.all(ser <= comps.min(axis=0) + 1e-12)
            assert np.all(comps.max(axis=0) <= par + 1e-12)

    def test_component_permutation_invariance(self, system):
        u = [2.0, 5.0, 1.0]
        perm = replace(system, components=(system.components[1], system.components[0], system.components[2]))
        u_perm = [5.0, 2.0, 1.0]
        for t in (2.0, 7.0):
            assert abs(series_reliability(system, t, u) - series_reliability(perm, t, u_perm)) <= 1e-12
            par, par_perm = (replace(x, topology=Topology.PARALLEL) for x in (system, perm))
            assert abs(parallel_reliability(par, t, u) - parallel_reliability(par_perm, t, u_perm)) <= 1e-12

    def test_dead_component_drops_out_of_parallel(self, system):
        # a failed unit contributes nothing; the rest carry the system
        par = replace(system, topology=Topology.PARALLEL)
        rest = replace(par, components=system.components[1:])
        dead = system.components[0].soft_threshold
        for t in (3.0, 9.0):
            full = parallel_reliability(par, t, [dead, 4.0, 4.0])
            sub = parallel_reliability(rest, t, [4.0, 4.0])
            assert abs(full - sub) <= 1e-12

    def test_dead_component_kills_series(self, system):
        dead = system.components[0].soft_threshold
        vals = series_reliability(system, T_GRID, [dead, 0.0, 0.0])
        assert np.all(vals == 0.0)

    def test_nonincreasing_in_time(self, system):
        vals = series_reliability(system, T_GRID)
        assert np.all(np.diff(vals) <= 1e-9)

    def test_quadrature_convergence(self, system, half_levels):
        fine = QuadratureSpec(node_count=128)
        for u in (None, half_levels):
            base = series_reliability(system, T_GRID, u, DEFAULT_QUADRATURE)
            ref = series_reliability(system, T_GRID, u, fine)
            assert np.max(np.abs(base - ref)) < 1e-8

    def test_topology_dispatch(self, system):
        assert system_reliability(system, 5.0) == series_reliability(system, 5.0)
        par = replace(system, topology=Topology.PARALLEL)
        assert system_reliability(par, 5.0) == parallel_reliability(par, 5.0)


class TestQuadratureSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            QuadratureSpec(node_count=1)
        with pytest.raises(ValueError):
            QuadratureSpec(tail_epsilon=0.0)
        with pytest.raises(ValueError):
            QuadratureSpec(tail_epsilon=1.0)
        with pytest.raises(ValueError):
            QuadratureSpec(domain_sigmas=0.0)
