"""The exact gradient-data solution and its self-checks."""

import numpy as np
import pytest

from burgers3d import colehopf as ch
from burgers3d import dynamics as dyn
from burgers3d import spectral as sp
from burgers3d.errors import OracleError

PHI_TERMS = (((1, 1, 0), 0.25), ((1, -1, 0), 0.25))  # 0.5 cos(x1) cos(x2)


@pytest.fixture(scope="module")
def phi():
    return ch.potential_from_cosines(PHI_TERMS)


class TestPotential:
    def test_band_and_sup(self, phi):
        assert phi.band == 2
        assert ch.potential_sup_norm(phi) == pytest.approx(0.5, rel=1e-12)

    def test_mean_forced_to_zero(self):
        p = ch.potential_from_cosines([((0, 0, 0), 3.0), ((1, 0, 0), 1.0)])
        assert p.coeffs[0, 0, 0] == 0.0

    def test_gradient_data(self):
        p = ch.potential_from_cosines([((1, 0, 0), 1.0)])
        u = ch.make_gradient_data(p)
        # grad cos(x1) = -sin(x1) e1
        sample = sp.to_physical(u, 16)
        x = np.arange(16) * 2 * np.pi / 16
        assert np.allclose(sample.values[0], -np.sin(x)[:, None, None], atol=1e-14)
        assert np.max(np.abs(sample.values[1:])) < 1e-14

    def test_gradient_constant_potential(self):
        p = ch.potential_from_cosines([((0, 0, 0), 2.0)], n=2)
        assert np.max(np.abs(ch.make_gradient_data(p).coeffs)) == 0.0

    def test_gradient_is_curl_free(self, phi):
        u = ch.make_gradient_data(phi)
        assert np.max(np.abs(sp.curl(u).coeffs)) < 1e-13


class TestSolve:
    def test_initial_time_identity(self, phi):
        s = ch.solve(phi, 1.0, 0.0)
        expected = sp.to_physical(ch.make_gradient_data(phi), s.points)
        assert np.max(np.abs(s.values - expected.values)) < 1e-12

    def test_long_time_decay(self, phi):
        s = ch.solve(phi, 1.0, 12.0)
        assert np.max(np.abs(s.values)) < 1e-9

    def test_refinement_self_consistency(self, phi):
        a = ch.solve(phi, 1.0, 0.3, eval_points=48)
        b = ch.solve(phi, 1.0, 0.3, eval_points=96)
        assert np.max(np.abs(b.values[:, ::2, ::2, ::2] - a.values)) < 1e-10

    def test_semigroup(self, phi):
        direct = ch.solve(phi, 1.0, 0.4, eval_points=96)
        psi = ch.effective_potential(phi, 1.0, 0.15, band=12)
        restart = ch.solve(psi, 1.0, 0.25, eval_points=96)
        assert np.max(np.abs(direct.values - restart.values)) < 1e-10

    def test_viscosity_floor(self, phi):
        with pytest.raises(OracleError):
            ch.solve(phi, 0.01, 0.1)
        with pytest.raises(OracleError):
            ch.solve(phi, -1.0, 0.1)

    def test_eval_points_floor(self, phi):
        with pytest.raises(OracleError):
            ch.solve(phi, 1.0, 0.1, eval_points=6)

    def test_negative_time(self, phi):
        with pytest.raises(ValueError):
            ch.solve(phi, 1.0, -0.5)


class TestResidual:
    def test_residual_small_five_point(self, phi):
        r = ch.burgers_residual(phi, 1.0, 0.25, cadence=1e-3, stencil=5)
        assert r < 1e-8

    def test_residual_three_point_second_order(self, phi):
        r1 = ch.burgers_residual(phi, 1.0, 0.25, cadence=2e-3, stencil=3)
        r2 = ch.burgers_residual(phi, 1.0, 0.25, cadence=1e-3, stencil=3)
        assert r1 / r2 == pytest.approx(4.0, rel=0.1)

    def test_bad_stencil(self, phi):
        with pytest.raises(ValueError):
            ch.burgers_residual(phi, 1.0, 0.25, stencil=4)


class TestCompare:
    def _gradient_config(self, n, **kw):
        defaults = dict(
            nu=1.0,
            n=n,
            dt=2e-3,
            t_end=0.1,
            seed=0,
            diag_every=25,
            snapshot_every=25,
            initial_data=dyn.InitialDataSpec(kind="gradient_potential", potential=PHI_TERMS),
        )
        defaults.update(kw)
        return dyn.RunConfig(**defaults)

    def test_error_rows(self, phi):
        traj = dyn.integrate(self._gradient_config(8))
        rows = ch.compare(traj, phi)
        assert len(rows) == len(traj.times)
        assert rows[0].t == 0.0
        # t = 0 row only measures the truncation of grad(phi): tiny at n=8
        assert rows[0].err_linf < 1e-12
        assert all(r.n == 8 and r.dt == 2e-3 for r in rows)

    def test_mismatched_data_rejected(self, phi):
        from dataclasses import replace

        cfg = replace(
            self._gradient_config(8),
            initial_data=dyn.InitialDataSpec(kind="random_band", band=(1, 2), target_h05=0.5),
        )
        traj = dyn.integrate(cfg)
        with pytest.raises(ValueError):
            ch.compare(traj, phi)

    def test_heat_only_trajectory_rejected(self, phi):
        traj = dyn.integrate(self._gradient_config(8, nonlinear=False))
        with pytest.raises(ValueError):
            ch.compare(traj, phi)

    def test_n_sweep_error_decay(self, phi):
        errs = {}
        for n in (4, 8):
            traj = dyn.integrate(self._gradient_config(n))
            rows = ch.compare(traj, phi)
            errs[n] = max(r.err_linf for r in rows)
        assert errs[8] < errs[4] / 10

    def test_numerical_solution_stays_gradient(self, phi):
        traj = dyn.integrate(self._gradient_config(8))
        final = traj.snapshots[-1]
        curl_size = sp.l2_norm(sp.curl(final))
        assert curl_size < 1e-7 * max(sp.l2_norm(final), 1e-30)
