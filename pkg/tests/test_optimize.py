"""Utility surface, grid search and the latency constraint."""

import math

import numpy as np
import pytest

from linecox.core import EmptyFeasibleSet, NetworkParams
from linecox.optimize import (
    GridSpec,
    OptimizeResult,
    UtilityWeights,
    feasible_domain,
    optimize_grid,
    utility,
)

V = 30.0 / 3600.0
# deployment knobs nu and mu are swept; the rest stays fixed
BASE = NetworkParams(lambda_l=3.0, mu=0.5, nu=0.5, speed=V)
FIG10_GRID = GridSpec()
FIG10_WEIGHTS = UtilityWeights(w1=0.7, w2=0.3, tau=1.0)


class TestWeights:
    def test_validation(self):
        with pytest.raises(ValueError):
            UtilityWeights(w1=-0.1, w2=0.5)
        with pytest.raises(ValueError):
            UtilityWeights(w1=0.0, w2=0.0)
        with pytest.raises(ValueError):
            UtilityWeights(w1=0.5, w2=0.5, tau=-1.0)

    def test_grid_spec_validation(self):
        with pytest.raises(ValueError):
            GridSpec(nu_range=(1.0, 0.5))
        with pytest.raises(ValueError):
            GridSpec(n_nu=1)

    def test_grid_values(self):
        g = GridSpec(nu_range=(0.1, 0.5), mu_range=(1.0, 2.0), n_nu=5, n_mu=3)
        assert np.allclose(g.nu_values(), np.linspace(0.1, 0.5, 5))
        assert np.allclose(g.mu_values(), np.linspace(1.0, 2.0, 3))


class TestUtility:
    def test_pure_coverage(self):
        from linecox.analytic import coverage_probability
        from dataclasses import replace
        w = UtilityWeights(w1=1.0, w2=0.0, tau=1.0)
        val = utility(0.3, 0.6, BASE, w)
        cell = replace(BASE, nu=0.3, mu=0.6)
        assert val == pytest.approx(coverage_probability(cell, 1.0), rel=1e-10)

    def test_pure_area_fraction_closed_form(self):
        w = UtilityWeights(w1=0.0, w2=1.0)
        val = utility(0.3, 0.6, BASE, w)
        assert val == pytest.approx(1.0 - math.exp(-2.0 * BASE.lambda_l * 0.3),
                                    rel=1e-12)

    def test_linearity_through_cache(self):
        pc = utility(0.4, 0.5, BASE, UtilityWeights(w1=1.0, w2=0.0, tau=1.0))
        af = utility(0.4, 0.5, BASE, UtilityWeights(w1=0.0, w2=1.0, tau=1.0))
        combo = utility(0.4, 0.5, BASE, UtilityWeights(w1=0.7, w2=0.3, tau=1.0))
        assert combo == pytest.approx(0.7 * pc + 0.3 * af, abs=1e-12)

    def test_latency_term_subtracts(self):
        with_pen = utility(0.4, 0.5, BASE,
                           UtilityWeights(w1=0.7, w2=0.3, w3=0.001, tau=1.0))
        without = utility(0.4, 0.5, BASE, UtilityWeights(w1=0.7, w2=0.3, tau=1.0))
        assert with_pen < without


class TestGridSearch:
    def test_pure_af_maxes_nu_and_breaks_ties_down(self):
        res = optimize_grid(BASE, UtilityWeights(w1=0.0, w2=1.0), FIG10_GRID)
        assert res.nu_opt == FIG10_GRID.nu_values()[-1]
        # every mu ties; the tie breaks toward the smallest
        assert res.mu_opt == FIG10_GRID.mu_values()[0]

    def test_surface_shape_and_fields(self):
        res = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False)
        assert isinstance(res, OptimizeResult)
        assert len(res.surface) == FIG10_GRID.n_nu * FIG10_GRID.n_mu
        for cell in res.surface:
            assert cell.feasible
            assert math.isfinite(cell.utility)
            # no constraint and w3 = 0: latency never evaluated
            assert math.isnan(cell.latency)
        assert res.nu_opt == res.coarse_nu_opt
        assert res.mu_opt == res.coarse_mu_opt

    def test_refinement_stays_within_one_cell(self):
        res = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=True)
        nu_step = FIG10_GRID.nu_values()[1] - FIG10_GRID.nu_values()[0]
        mu_step = FIG10_GRID.mu_values()[1] - FIG10_GRID.mu_values()[0]
        assert abs(res.nu_opt - res.coarse_nu_opt) < nu_step
        assert abs(res.mu_opt - res.coarse_mu_opt) < mu_step
        # refinement can only improve on the coarse incumbent
        coarse = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False)
        assert res.value >= coarse.value

    def test_threads_do_not_change_result(self):
        a = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False, threads=1)
        b = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False, threads=3)
        assert a.nu_opt == b.nu_opt and a.mu_opt == b.mu_opt
        assert a.value == b.value
        assert [c.utility for c in a.surface] == [c.utility for c in b.surface]


class TestConstraint:
    def test_constrained_never_beats_unconstrained(self):
        free = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False)
        tight = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, constraint=30.0,
                              refine=False)
        assert tight.value <= free.value
        for cell in tight.surface:
            if cell.feasible:
                assert cell.latency < 30.0

    def test_loose_constraint_matches_unconstrained(self):
        free = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, refine=False)
        loose = optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, constraint=1e9,
                              refine=False)
        assert (loose.nu_opt, loose.mu_opt) == (free.nu_opt, free.mu_opt)

    def test_zero_constraint_empty(self):
        with pytest.raises(EmptyFeasibleSet):
            optimize_grid(BASE, FIG10_WEIGHTS, FIG10_GRID, constraint=0.0,
                          refine=False)

    def test_feasible_domain_monotone(self):
        mask = feasible_domain(BASE, FIG10_GRID, 30.0)
        assert mask.shape == (FIG10_GRID.n_nu, FIG10_GRID.n_mu)
        assert mask.any()
        # latency falls as either knob grows, so feasibility is upward-closed
        for i in range(mask.shape[0]):
            for j in range(mask.shape[1]):
                if mask[i, j]:
                    assert mask[i:, j:].all()

    def test_feasible_domain_extremes(self):
        assert feasible_domain(BASE, FIG10_GRID, 1e9).all()
        small = GridSpec(nu_range=(0.1, 0.2), mu_range=(0.25, 0.5), n_nu=2, n_mu=2)
        assert not feasible_domain(BASE, small, 1e-6).any()
