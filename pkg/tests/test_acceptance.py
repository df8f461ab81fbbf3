"""Acceptance criteria for the solver and verification harness.

Each test prints one PASS/FAIL line (run with -s to see them) and asserts the
criterion at its stated tolerance.  Everything is desk scale: truncation
orders up to 32, minutes of wall time in total.
"""

import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from burgers3d import analysis, colehopf, experiments, trajio
from burgers3d import dynamics as dyn
from burgers3d import spectral as sp
from burgers3d.config import validate_config

PHI_TERMS = (((1, 1, 0), 0.25), ((1, -1, 0), 0.25))  # 0.5 cos(x1) cos(x2)


def criterion(num, name, passed, detail):
    tag = "PASS" if passed else "FAIL"
    print(f"criterion {num:02d} [{tag}] {name}: {detail}")
    assert passed, f"criterion {num}: {name}: {detail}"


def seeded_band_config(seed, **kw):
    defaults = dict(
        nu=1.0,
        n=8,
        dt=1e-3,
        t_end=0.1,
        seed=seed,
        diag_every=1,
        snapshot_every=0,
        initial_data=dyn.InitialDataSpec(kind="random_band", band=(1.0, 3.0), target_h05=1.0),
    )
    defaults.update(kw)
    return dyn.RunConfig(**defaults)


def test_01_heat_seminorm_identity():
    t0 = time.perf_counter()
    grid = sp.get_grid(16)
    u0 = sp.random_band_field(grid, np.random.default_rng(0), band=(1, 12), target_h05=1.0)
    nu = 0.7
    times = np.linspace(0.0, 1.0, 21)
    rep = analysis.heat_seminorm_identity(u0, nu, times, tolerance=1e-10)
    residual = float(np.max(np.abs(rep.lhs_trace - rep.rhs_trace)) / rep.rhs_trace[0])
    elapsed = time.perf_counter() - t0
    criterion(
        1,
        "heat seminorm identity",
        residual <= 1e-10 and elapsed < 1.0,
        f"relative residual {residual:.3e} (tol 1e-10), runtime {elapsed:.2f}s (< 1s)",
    )


def test_02_colehopf_oracle_agreement():
    t0 = time.perf_counter()
    phi = colehopf.potential_from_cosines(PHI_TERMS)
    data = dyn.InitialDataSpec(kind="gradient_potential", potential=PHI_TERMS)
    sweep = ((8, 18, 2e-3), (16, 36, 2e-3), (32, 66, 1e-3))
    errs = {}
    for n, dealias, dt in sweep:
        cfg = dyn.RunConfig(
            nu=1.0, n=n, dt=dt, t_end=0.5, seed=0, integrator="etdrk4",
            dealias_points=dealias, initial_data=data,
            diag_every=10**6, snapshot_every=250,
        )
        traj = dyn.integrate(cfg)
        rows = colehopf.compare(traj, phi, eval_points=96)
        errs[n] = max(r.err_linf for r in rows)
    elapsed = time.perf_counter() - t0

    floor = 1e-10
    headline_ok = errs[32] <= 1e-8
    sweep_ok = all(
        errs[b] <= floor or errs[a] / errs[b] >= 10.0 for a, b in ((8, 16), (16, 32))
    )
    criterion(
        2,
        "oracle agreement and n-sweep",
        headline_ok and sweep_ok and elapsed < 120.0,
        f"sup errors n8={errs[8]:.2e} n16={errs[16]:.2e} n32={errs[32]:.2e} "
        f"(budget 1e-8), runtime {elapsed:.0f}s (< 120s)",
    )


def test_03_oracle_residual():
    phi = colehopf.potential_from_cosines(PHI_TERMS)
    residual = colehopf.burgers_residual(phi, 1.0, 0.25, cadence=1e-3, stencil=5)
    criterion(
        3,
        "exact-solution residual",
        residual <= 1e-6,
        f"L2 residual {residual:.3e} (tol 1e-6), 5-point centered stencil at cadence 1e-3",
    )


def test_04_maximum_principle():
    worst_ratio, worst_tail = 0.0, 0.0
    for j in range(10):
        cfg = seeded_band_config(
            1000 + j, n=16, dealias_points=36, dt=1e-3, t_end=0.1, diag_every=5,
            linf_points=96,
            initial_data=dyn.InitialDataSpec(kind="random_band", band=(1.0, 2.0), target_h05=0.6),
        )
        rep = analysis.max_principle_check(dyn.integrate(cfg), tolerance=1e-6)
        worst_ratio = max(worst_ratio, rep.max_ratio)
        worst_tail = max(worst_tail, rep.constants["tail_max"])
    resolved_ok = worst_ratio <= 1 + 1e-6 and worst_tail < 1e-10

    rough_cfg = dyn.RunConfig(
        nu=0.05, n=4, dt=2e-3, t_end=2.0, seed=0, diag_every=10,
        initial_data=dyn.InitialDataSpec(kind="single_mode", mode=(1, 0, 0), amplitude=(1.0, 0.0, 0.0)),
    )
    rough = analysis.max_principle_check(dyn.integrate(rough_cfg))
    rough_documented = (
        rough.verdict == analysis.VERDICT_VIOLATED
        and rough.constants["tail_max"] > 1e-10
        and "admissible" in rough.notes
    )
    criterion(
        4,
        "maximum principle",
        resolved_ok and rough_documented,
        f"10 resolved runs: worst ratio {worst_ratio:.8f} (tol 1+1e-6), worst tail "
        f"{worst_tail:.1e} (< 1e-10); under-resolved run overshoots by "
        f"{rough.max_ratio - 1:.3f} with tail {rough.constants['tail_max']:.2e} (documented)",
    )


def test_05_momentum_bound():
    worst_margin = np.inf
    max_drift = 0.0
    all_hold = True
    for j in range(10):
        cfg = seeded_band_config(2000 + j, n=8, dt=5e-4, t_end=0.1)
        traj = dyn.integrate(cfg)
        rep = analysis.momentum_bound_check(traj, tolerance=1e-8)
        all_hold = all_hold and rep.verdict == analysis.VERDICT_HOLDS
        max_drift = max(max_drift, float(rep.lhs_trace.max()))
        worst_margin = min(worst_margin, float(np.min(rep.rhs_trace - rep.lhs_trace)))
    criterion(
        5,
        "momentum bound",
        all_hold and max_drift >= 1e-6,
        f"10 zero-mean runs hold with trapezoid tolerance 1e-8 "
        f"(worst margin {worst_margin:.3e}); largest drift {max_drift:.3e} (>= 1e-6)",
    )


def test_06_interpolation_inequality():
    grid = sp.get_grid(6)
    worst = 0.0
    for seed in range(1000):
        w = sp.random_band_field(
            grid, np.random.default_rng(seed), band=(1, 6), decay=0.5 * (seed % 4)
        )
        lhs = sp.seminorm(w, 1.0) ** 2
        rhs = sp.seminorm(w, 0.5) * sp.seminorm(w, 1.5)
        if rhs > 0:
            worst = max(worst, lhs / rhs)
    criterion(
        6,
        "interpolation inequality",
        worst <= 1 + 1e-12,
        f"1000 random fields, max ratio {worst:.15f} (tol 1+1e-12)",
    )


def test_07_existence_time():
    rng = np.random.default_rng(7)
    worst = 0.0
    with mpmath.workdps(60):
        for _ in range(100):
            l1 = float(rng.uniform(0.0, 60.0))
            h1_sq = float(rng.uniform(0.0, 30.0))
            est = analysis.existence_from_norms(l1, h1_sq)
            l1m, h1m = mpmath.mpf(l1), mpmath.mpf(h1_sq)
            alpha = (4 + l1m**4) ** mpmath.mpf("0.2")
            beta = (2 + 4 * l1m**4) ** mpmath.mpf("0.2")
            t_star = 1 / (4 * alpha * (alpha * h1m + beta) ** 4)
            worst = max(
                worst,
                abs(est.alpha - float(alpha)) / float(alpha),
                abs(est.beta - float(beta)) / float(beta),
                abs(est.t_star - float(t_star)) / float(t_star),
            )
    arithmetic_ok = worst <= 1e-14

    no_blowup = True
    horizons = []
    for j in range(3):
        cfg = seeded_band_config(
            3000 + j,
            n=8,
            initial_data=dyn.InitialDataSpec(kind="random_band", band=(1.0, 3.0), target_h05=0.5),
        )
        grid = cfg.make_grid()
        u0 = sp.project(dyn.build_initial_data(cfg, grid), grid.n)
        est = analysis.existence_time(u0)
        run = replace(cfg, t_end=est.t_star, dt=est.t_star / 64.0, diag_every=8)
        traj = dyn.integrate(run, u0)
        horizons.append(est.t_star)
        no_blowup = no_blowup and traj.blowup is None and traj.final_time >= est.t_star * (1 - 1e-12)
    criterion(
        7,
        "existence-time arithmetic and horizon",
        arithmetic_ok and no_blowup,
        f"100 random pairs within {worst:.2e} of 60-digit arithmetic (tol 1e-14); "
        f"3 seeded runs reach T* (max {max(horizons):.3e}) without blowup",
    )


def test_08_stability_order():
    cfg = seeded_band_config(4000, n=8, dt=1e-3, t_end=0.1, diag_every=4)
    result = analysis.stability_experiment(cfg, [1e-2, 1e-3, 1e-4])
    criterion(
        8,
        "continuous-dependence order",
        0.9 <= result.order <= 1.1,
        f"fitted order {result.order:.4f} over deltas 1e-2..1e-4 (expected in [0.9, 1.1])",
    )


def test_09_scaling_residual():
    cfg = seeded_band_config(
        5000, n=12, dt=1e-3, t_end=0.06, diag_every=6, snapshot_every=6,
        initial_data=dyn.InitialDataSpec(kind="random_band", band=(1.0, 3.0), target_h05=1.0),
    )
    traj = dyn.integrate(cfg)
    base = dyn.scaling_residual(traj, 1)
    scaled = dyn.scaling_residual(traj, 2)
    criterion(
        9,
        "parabolic rescaling",
        scaled <= 10.0 * base,
        f"residual {scaled:.3e} at lam=2 vs baseline {base:.3e} "
        f"(ratio {scaled / base:.3f}, must be within 10x)",
    )


def test_10_smoothing():
    eps = 0.01
    cfg = seeded_band_config(
        6000, n=12, dt=1e-3, t_end=0.12, diag_every=5, snapshot_every=10,
        initial_data=dyn.InitialDataSpec(kind="random_band", band=(1.0, 9.0), decay=2.1, target_h05=1.0),
    )
    traj = dyn.integrate(cfg)
    times = traj.diag_array("t")
    semi2 = traj.diag_array("semi_2")[times >= eps]
    finite_ok = bool(np.all(np.isfinite(semi2)))
    rep = analysis.smoothing_check(traj, eps=eps)
    criterion(
        10,
        "instantaneous smoothing",
        finite_ok and rep.verdict == analysis.VERDICT_HOLDS,
        f"order-2 seminorm finite for t >= {eps}; decay slope "
        f"{rep.constants['slope_eps']:.3f} -> {rep.constants['slope_late']:.3f} "
        "strictly steepens between eps and 10 eps",
    )


def test_11_determinism(tmp_path):
    cfg_text = (
        "[run]\nnu = 1.0\nn = 6\ndt = 1e-3\nt_end = 0.03\nseed = 99\n"
        "[initial_data]\nkind = random_band\nband = 1:3\ntarget_h05 = 1.0\n"
        "[experiment]\nname = momentum\nruns = 2\n"
        "[output]\nfigures = false\ndirectory = {out}\n"
    )
    digests = []
    for sub in ("first", "second"):
        path = tmp_path / f"{sub}.ini"
        path.write_text(cfg_text.format(out=tmp_path / sub))
        spec, errors = validate_config(path)
        assert not errors
        experiments.run_experiment(spec)
        payload = b""
        base = tmp_path / sub
        for rel in sorted(p.relative_to(base) for p in base.rglob("*.csv")):
            payload += rel.as_posix().encode() + (base / rel).read_bytes()
        digests.append(payload)
    criterion(
        11,
        "byte-identical reruns",
        digests[0] == digests[1],
        f"{len(digests[0])} bytes of CSV output identical across two runs with seed 99",
    )
