"""Estimate checks: arithmetic oracles, verdict semantics, trajectory reports."""

import math

import mpmath
import numpy as np
import pytest

from burgers3d import analysis
from burgers3d import dynamics as dyn
from burgers3d import spectral as sp

from oracles import trapezoid_cumulative


def band_config(**kw):
    defaults = dict(
        nu=1.0,
        n=8,
        dt=1e-3,
        t_end=0.08,
        seed=3,
        diag_every=2,
        snapshot_every=20,
        initial_data=dyn.InitialDataSpec(kind="random_band", band=(1, 3), target_h05=1.0),
    )
    defaults.update(kw)
    return dyn.RunConfig(**defaults)


def mp_existence(l1, h1_sq):
    """Arbitrary-precision evaluation of the horizon arithmetic."""
    with mpmath.workdps(60):
        l1 = mpmath.mpf(l1)
        h1_sq = mpmath.mpf(h1_sq)
        alpha = (4 + l1**4) ** mpmath.mpf("0.2")
        beta = (2 + 4 * l1**4) ** mpmath.mpf("0.2")
        t_star = 1 / (4 * alpha * (alpha * h1_sq + beta) ** 4)
        return float(alpha), float(beta), float(t_star)


class TestExistenceTime:
    def test_frozen_example(self):
        # ||u0||_1^2 = 1 and ||u0||_L1 = 0
        est = analysis.existence_from_norms(0.0, 1.0)
        assert est.alpha == pytest.approx(4.0**0.2, rel=1e-15)
        assert est.beta == pytest.approx(2.0**0.2, rel=1e-15)
        expected = 1.0 / (4.0 * 4.0**0.2 * (4.0**0.2 + 2.0**0.2) ** 4)
        assert est.t_star == pytest.approx(expected, rel=1e-15)

    def test_against_arbitrary_precision(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            l1 = float(rng.uniform(0, 50))
            h1_sq = float(rng.uniform(0, 25))
            est = analysis.existence_from_norms(l1, h1_sq)
            alpha, beta, t_star = mp_existence(l1, h1_sq)
            assert est.alpha == pytest.approx(alpha, rel=1e-14)
            assert est.beta == pytest.approx(beta, rel=1e-14)
            assert est.t_star == pytest.approx(t_star, rel=1e-14)

    def test_monotone_in_data(self):
        a = analysis.existence_from_norms(1.0, 1.0)
        b = analysis.existence_from_norms(1.0, 2.0)
        c = analysis.existence_from_norms(2.0, 1.0)
        assert b.t_star < a.t_star
        assert c.t_star < a.t_star

    def test_zero_field_degenerate(self):
        est = analysis.existence_time(sp.zero_field(sp.get_grid(4)))
        assert est.t_star == math.inf
        assert np.all(est.bound_curve_sq([0.0, 1.0, 100.0]) == 0.0)

    def test_bound_curve_starts_at_data(self):
        est = analysis.existence_from_norms(3.0, 1.7)
        assert est.bound_curve_sq(0.0) == pytest.approx(1.7, rel=1e-13)

    def test_bound_curve_asymptote_guarded(self):
        est = analysis.existence_from_norms(1.0, 1.0)
        with pytest.raises(ValueError):
            est.bound_curve_sq(est.t_star * 1.01)

    def test_representation_independent(self):
        # the estimate depends only on norms, not on how the field is laid out
        grid = sp.get_grid(6)
        f = sp.random_band_field(grid, np.random.default_rng(5), band=(1, 4), target_h05=1.0)
        a = analysis.existence_time(f)
        b = analysis.existence_time(sp.SpectralVectorField(grid, sp.hermitianize(f.coeffs)))
        assert a.t_star == pytest.approx(b.t_star, rel=1e-13)


class TestHeatIdentity:
    def test_random_data_identity(self):
        grid = sp.get_grid(8)
        u0 = sp.random_band_field(grid, np.random.default_rng(1), band=(1, 7), target_h05=1.0)
        rep = analysis.heat_seminorm_identity(u0, 0.7, np.linspace(0, 0.6, 9))
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.max_ratio <= 1 + 1e-10

    def test_identity_vs_quadrature_oracle(self):
        # closed-form integral against a dense trapezoid on the exact flow
        grid = sp.get_grid(5)
        u0 = sp.random_band_field(grid, np.random.default_rng(2), band=(1, 4), target_h05=1.0)
        nu, t_end = 1.0, 0.2
        times = np.linspace(0, t_end, 2001)
        semi15_sq = np.array(
            [sp.seminorm(dyn.heat_propagate(u0, nu, t), 1.5) ** 2 for t in times]
        )
        quad = trapezoid_cumulative(times, semi15_sq)[-1]
        semi05_end = sp.seminorm(dyn.heat_propagate(u0, nu, t_end), 0.5) ** 2
        lhs = semi05_end + 2 * nu * quad
        rhs = sp.seminorm(u0, 0.5) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-6)


class TestVerdictSemantics:
    def test_holds_iff_within_tolerance(self):
        t = np.array([0.0, 1.0])
        rep = analysis.make_report("x", t, [1.0, 1.0], [1.0, 1.0], 1e-9, ratio_mode=False)
        assert rep.verdict == analysis.VERDICT_HOLDS
        rep = analysis.make_report("x", t, [1.0, 1.1], [1.0, 1.0], 1e-9, ratio_mode=False)
        assert rep.verdict == analysis.VERDICT_VIOLATED
        rep = analysis.make_report("x", t, [1.0, 1.1], [1.0, 1.0], 1e-9, ratio_mode=True)
        assert rep.verdict == analysis.VERDICT_CONSTANT
        assert rep.max_ratio == pytest.approx(1.1)

    def test_zero_over_zero_ignored(self):
        rep = analysis.make_report("x", [0.0], [0.0], [0.0], 0.0, ratio_mode=False)
        assert rep.verdict == analysis.VERDICT_HOLDS
        rep = analysis.make_report("x", [0.0], [1.0], [0.0], 0.0, ratio_mode=False)
        assert rep.verdict == analysis.VERDICT_VIOLATED


class TestMaxPrinciple:
    def test_pure_heat_contracts(self):
        traj = dyn.integrate(band_config(nonlinear=False, diag_every=4))
        rep = analysis.max_principle_check(traj, tolerance=1e-9)
        assert rep.verdict == analysis.VERDICT_HOLDS

    def test_constant_field_ratio_one(self):
        cfg = band_config(
            initial_data=dyn.InitialDataSpec(kind="single_mode", mode=(0, 0, 0), amplitude=(1.0, 0, 0))
        )
        rep = analysis.max_principle_check(dyn.integrate(cfg))
        assert rep.max_ratio == pytest.approx(1.0, abs=1e-15)

    def test_resolved_run_holds(self):
        cfg = band_config(n=12, t_end=0.05, linf_points=72,
                          initial_data=dyn.InitialDataSpec(kind="random_band", band=(1, 2), target_h05=0.5))
        rep = analysis.max_principle_check(dyn.integrate(cfg))
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.constants["tail_max"] < 1e-10

    def test_underresolved_violation_flagged_admissible(self):
        cfg = dyn.RunConfig(
            nu=0.05, n=4, dt=2e-3, t_end=2.0, seed=0, diag_every=10,
            initial_data=dyn.InitialDataSpec(kind="single_mode", mode=(1, 0, 0), amplitude=(1.0, 0, 0)),
        )
        rep = analysis.max_principle_check(dyn.integrate(cfg))
        assert rep.verdict == analysis.VERDICT_VIOLATED
        assert rep.constants["tail_max"] > rep.constants["tail_threshold"]
        assert "admissible" in rep.notes


class TestMomentum:
    def test_pure_heat_drift_exactly_zero(self):
        traj = dyn.integrate(band_config(nonlinear=False, diag_every=4))
        rep = analysis.momentum_bound_check(traj)
        assert np.all(rep.lhs_trace == 0.0)
        assert rep.verdict == analysis.VERDICT_HOLDS

    def test_zero_mean_runs_hold_and_drift(self):
        traj = dyn.integrate(band_config(diag_every=1, t_end=0.1))
        rep = analysis.momentum_bound_check(traj)
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.lhs_trace.max() > 1e-6  # momentum really is created

    def test_identical_pair_trivial(self):
        cfg = band_config(diag_every=4)
        u0 = dyn.build_initial_data(cfg)
        ta, tb, diffs = dyn.paired_integrate(cfg, u0, u0)
        rep = analysis.momentum_bound_check(ta, tb, diffs)
        assert np.all(rep.lhs_trace == 0.0)
        assert rep.verdict == analysis.VERDICT_HOLDS

    def test_pair_bound_holds(self):
        cfg = band_config(diag_every=2)
        u0 = dyn.build_initial_data(cfg)
        pert = u0 + 0.05 * sp.cosine_field(u0.grid, (1, 1, 0), (1.0, 0.5, 0.0))
        ta, tb, diffs = dyn.paired_integrate(cfg, u0, pert)
        rep = analysis.momentum_bound_check(ta, tb, diffs)
        assert rep.verdict == analysis.VERDICT_HOLDS


class TestEnergyInequality:
    def test_heat_run_holds(self):
        rep = analysis.energy_inequality_check(dyn.integrate(band_config(nonlinear=False)))
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert np.all(rep.lhs_trace <= 0.0)  # pure decay

    def test_constant_field(self):
        cfg = band_config(
            initial_data=dyn.InitialDataSpec(kind="single_mode", mode=(0, 0, 0), amplitude=(0.5, 0, 0))
        )
        rep = analysis.energy_inequality_check(dyn.integrate(cfg))
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert np.allclose(rep.lhs_trace, 0.0, atol=1e-12)

    def test_generic_run_holds(self):
        rep = analysis.energy_inequality_check(dyn.integrate(band_config(t_end=0.1)))
        assert rep.verdict == analysis.VERDICT_HOLDS


class TestH1Bound:
    def test_ratio_one_at_time_zero(self):
        traj = dyn.integrate(band_config())
        est = analysis.existence_time(traj.snapshots[0])
        rep = analysis.h1_bound_check(traj, est)
        assert rep.lhs_trace[0] == pytest.approx(rep.rhs_trace[0], rel=1e-10)

    def test_heat_run_holds_strict(self):
        traj = dyn.integrate(band_config(nonlinear=False))
        rep = analysis.h1_bound_check(traj, constant=1.0)
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert not rep.ratio_mode


class TestSplitting:
    def test_zero_data_trivial(self):
        cfg = band_config(
            initial_data=dyn.InitialDataSpec(kind="single_mode", mode=(1, 0, 0), amplitude=(0, 0, 0))
        )
        v, w = dyn.split_evolve(cfg)
        reports = analysis.splitting_bound_report(v, w)
        assert all(r.verdict != analysis.VERDICT_VIOLATED for r in reports)

    def test_heat_only_identity(self):
        cfg = band_config(nonlinear=False, diag_every=1)
        v, w = dyn.split_evolve(cfg)
        assert sp.l2_norm(w.snapshots[-1]) == 0.0
        reports = analysis.splitting_bound_report(v, w)
        heat = reports[0]
        assert heat.verdict == analysis.VERDICT_HOLDS
        # sharp balance: identity up to quadrature
        assert heat.max_ratio <= 1 + heat.tolerance

    def test_generic_reports(self):
        v, w = dyn.split_evolve(band_config(diag_every=1))
        heat, remainder, ceiling = analysis.splitting_bound_report(v, w, constants={"a1": 1.0})
        assert heat.verdict == analysis.VERDICT_HOLDS
        assert remainder.ratio_mode
        assert "warning" in remainder.notes  # defaults were filled in
        assert "tau" in remainder.constants and "T" in remainder.constants


class TestInterpolation:
    def test_over_trajectory(self):
        traj = dyn.integrate(band_config(snapshot_every=10))
        rep = analysis.interpolation_check(traj.snapshots)
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.max_ratio <= 1 + 1e-12


class TestStability:
    def test_order_and_gronwall(self):
        cfg = band_config(n=6, t_end=0.06, diag_every=3)
        result = analysis.stability_experiment(cfg, [1e-2, 1e-3])
        assert 0.9 <= result.order <= 1.1
        assert all(r.verdict != analysis.VERDICT_VIOLATED for r in result.gronwall_reports)
        assert all(r.verdict == analysis.VERDICT_HOLDS for r in result.momentum_reports)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            analysis.stability_experiment(band_config(), [0.0, 1e-3])


class TestSmoothing:
    def _rough_traj(self):
        cfg = band_config(
            n=12,
            dt=1e-3,
            t_end=0.12,
            diag_every=5,
            snapshot_every=10,
            initial_data=dyn.InitialDataSpec(kind="random_band", band=(1, 9), decay=2.1, target_h05=1.0),
        )
        return dyn.integrate(cfg)

    def test_slopes_steepen(self):
        rep = analysis.smoothing_check(self._rough_traj(), eps=0.01)
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.constants["slope_late"] < rep.constants["slope_eps"] < 0

    def test_smooth_data_slope_negative_at_start(self):
        grid = sp.get_grid(12)
        f = sp.random_band_field(grid, np.random.default_rng(3), band=(1, 9), decay=4.0, target_h05=1.0)
        assert analysis.tail_slope(f) < 0

    def test_heat_flow_slope_matches_multiplier(self):
        # exact heat evolution of white band data: slope(t) - slope(0) tracks
        # the log of the per-shell damping factor
        grid = sp.get_grid(10)
        f = sp.random_band_field(grid, np.random.default_rng(7), band=(1, 8), decay=0.0, target_h05=1.0)
        nu, t = 1.0, 0.02
        s0 = analysis.tail_slope(f, r_min=2)
        s1 = analysis.tail_slope(dyn.heat_propagate(f, nu, t), r_min=2)
        radii = np.arange(2, 9, dtype=float)
        expected_drop = float(np.polyfit(radii, -nu * t * radii**2, 1)[0])
        assert s1 - s0 == pytest.approx(expected_drop, rel=0.15)


class TestQuadrature:
    def test_cumulative_matches_oracle(self):
        times = np.linspace(0, 2, 301)
        values = np.sin(times) ** 2 + 0.5
        ours = analysis.cumulative_trapezoid(times, values)
        ref = trapezoid_cumulative(times, values)
        assert np.allclose(ours, ref, rtol=1e-14, atol=1e-14)

    def test_refinement_order(self):
        # halving the cadence changes the integral at second order
        def integral(npts):
            t = np.linspace(0, 1, npts)
            return analysis.cumulative_trapezoid(t, np.exp(-3 * t) * (1 + np.cos(5 * t)))[-1]

        coarse, mid, fine = integral(51), integral(101), integral(201)
        order = np.log2(abs(coarse - fine) / abs(mid - fine))
        assert order >= 1.9

    def test_diagnostics_cadence_refinement(self):
        vals = {}
        for every in (4, 2, 1):
            traj = dyn.integrate(band_config(diag_every=every))
            vals[every] = traj.diagnostics[-1].cum_semi_0_5_sq
        order = np.log2(abs(vals[4] - vals[1]) / abs(vals[2] - vals[1]))
        assert order >= 1.9


class TestScalingCheck:
    def test_report(self):
        cfg = band_config(n=8, dt=1e-3, t_end=0.05, diag_every=5, snapshot_every=5)
        rep = analysis.scaling_check(dyn.integrate(cfg), lam=2)
        assert rep.verdict == analysis.VERDICT_HOLDS
        assert rep.constants["rescaled"] / rep.constants["baseline"] == pytest.approx(8.0, rel=0.1)
