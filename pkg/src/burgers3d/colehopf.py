"""Exact reference solutions for gradient initial data.

If theta > 0 solves the heat equation theta_t = nu lap(theta), then
u = -2 nu grad(log theta) solves the diffusive Burgers equations, and seeding
theta(0) = exp(-phi/(2 nu)) gives the solution with initial data grad(phi).
Only gradient fields arise this way, which is what makes them usable as an
independent oracle for the Galerkin solver: the entire evolution reduces to an
exact heat multiplier on a fine evaluation grid.

The oracle is self-checking: it refuses viscosities small enough to make
exp(-phi/(2 nu)) numerically untrustworthy, and it verifies that the spectral
tail of theta(0) is negligible on the evaluation grid before answering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

from . import spectral as sp
from .errors import OracleError

# refuse nu below this multiple of ||phi||_inf (exp amplitude e^{1/(2 ratio)})
NU_FLOOR_RATIO = 0.05
THETA_FLOOR = 1e-300
TAIL_TOL = 1e-12
_MAX_AUTO_POINTS = 768


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Scalar periodic potential, mean-zero and Hermitian-symmetric."""

    grid: sp.WavenumberGrid
    coeffs: np.ndarray  # (M, M, M) complex128

    def __post_init__(self):
        m = self.grid.m
        if self.coeffs.shape != (m, m, m):
            raise ValueError("potential coefficients do not match the grid")
        c = np.asarray(self.coeffs, dtype=np.complex128).copy()
        c[0, 0, 0] = 0.0
        defect = np.max(np.abs(c - np.conj(sp._mirror(c))))
        scale = max(float(np.max(np.abs(c))), 1.0)
        if defect > 1e-12 * scale:
            raise ValueError("potential is not Hermitian-symmetric (not real-valued)")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def band(self) -> int:
        """Smallest integer radius containing every active mode."""
        active = np.abs(self.coeffs) > 0
        if not active.any():
            return 1
        return int(np.ceil(np.max(self.grid.k_norm[active])))


def potential_from_cosines(terms, n: int | None = None) -> PotentialField:
    """Potential sum_j a_j cos(k_j . x) from (mode, amplitude) pairs."""
    terms = [(tuple(int(c) for c in mode), float(a)) for mode, a in terms]
    if n is None:
        n = max(max(abs(c) for c in mode) for mode, _ in terms)
    grid = sp.get_grid(n)
    coeffs = np.zeros((grid.m,) * 3, dtype=np.complex128)
    for mode, a in terms:
        if mode == (0, 0, 0):
            continue  # constants do not contribute to a mean-zero potential
        coeffs[sp.mode_index(grid, mode)] += a / 2.0
        coeffs[sp.mode_index(grid, tuple(-c for c in mode))] += a / 2.0
    return PotentialField(grid, coeffs)


def make_gradient_data(phi: PotentialField) -> sp.SpectralVectorField:
    """Initial data grad(phi), computed spectrally: u_k = i k phi_k."""
    return sp.SpectralVectorField(phi.grid, sp.gradient_of_scalar(phi.grid, phi.coeffs))


def potential_sup_norm(phi: PotentialField, points: int | None = None) -> float:
    p = points if points is not None else max(4 * phi.grid.n, sp.min_physical_points(phi.grid.n))
    phys = sp._inverse_transform(phi.coeffs, phi.grid, p)
    return float(np.max(np.abs(phys)))


def _wavenumbers(points: int):
    k = np.rint(np.fft.fftfreq(points, d=1.0 / points)).astype(np.float64)
    kx = k.reshape(-1, 1, 1)
    ky = k.reshape(1, -1, 1)
    kz = np.arange(points // 2 + 1, dtype=np.float64).reshape(1, 1, -1)
    return kx, ky, kz


def _half_tail_fraction(half: np.ndarray, points: int) -> float:
    """Energy fraction beyond |k|_inf > points/3, mean mode excluded."""
    kx, ky, kz = _wavenumbers(points)
    kinf = np.maximum(np.maximum(np.abs(kx), np.abs(ky)), kz)
    # Hermitian double-count for interior k3 planes
    w = np.ones(points // 2 + 1)
    top = points // 2 if points % 2 == 0 else points // 2 + 1
    w[1:top] = 2.0
    energy = (half.real**2 + half.imag**2) * w.reshape(1, 1, -1)
    total = float(energy.sum() - energy[0, 0, 0])
    if total <= 0.0:
        return 0.0
    tail = float(energy[kinf > points / 3.0].sum())
    return tail / total


class _ThetaState:
    """Heat-equation state exp multiplier applied to theta(0) = exp(-phi/(2 nu))."""

    def __init__(self, phi: PotentialField, nu: float, points: int):
        phi_phys = sp._inverse_transform(phi.coeffs, phi.grid, points)
        sup = float(np.max(np.abs(phi_phys)))
        if nu < NU_FLOOR_RATIO * sup:
            raise OracleError(
                f"nu={nu} below the floor {NU_FLOOR_RATIO}*||phi||_inf={NU_FLOOR_RATIO * sup:.3g}; "
                "exp(-phi/(2 nu)) would lose too much precision"
            )
        self.points = points
        self.nu = nu
        theta0 = np.exp(-phi_phys / (2.0 * nu))
        self.half0 = _fft.rfftn(theta0, workers=sp._WORKERS)
        self.tail_fraction = _half_tail_fraction(self.half0, points)
        kx, ky, kz = _wavenumbers(points)
        self.k_sq = kx * kx + ky * ky + kz * kz

    def evaluate(self, t: float):
        """theta(t) and grad theta(t) on the evaluation grid."""
        p = self.points
        damped = self.half0 * np.exp(-self.nu * self.k_sq * t)
        shape = (p, p, p)
        theta = _fft.irfftn(damped, s=shape, axes=(0, 1, 2), workers=sp._WORKERS)
        kx, ky, kz = _wavenumbers(p)
        stack = np.stack([1j * kx * damped, 1j * ky * damped, 1j * kz * damped])
        grad = _fft.irfftn(stack, s=shape, axes=(1, 2, 3), workers=sp._WORKERS)
        return theta, grad

    def velocity(self, t: float) -> np.ndarray:
        theta, grad = self.evaluate(t)
        tmin = float(theta.min())
        if not np.isfinite(tmin) or tmin <= THETA_FLOOR:
            raise OracleError(
                f"theta reached {tmin:.3g}; evaluation grid or viscosity insufficient"
            )
        return -2.0 * self.nu * grad / theta


def _resolve_state(phi: PotentialField, nu: float, eval_points: int | None) -> _ThetaState:
    if nu <= 0:
        raise OracleError("viscosity must be positive")
    min_points = max(4 * phi.band, 2 * phi.grid.n + 2, 16)
    if eval_points is not None:
        if eval_points < min_points:
            raise OracleError(
                f"eval_points={eval_points} below 4x the potential band ({min_points})"
            )
        state = _ThetaState(phi, nu, int(eval_points))
        if state.tail_fraction > TAIL_TOL:
            raise OracleError(
                f"theta(0) spectral tail {state.tail_fraction:.3g} exceeds {TAIL_TOL}; "
                "increase eval_points"
            )
        return state
    points = _fft.next_fast_len(max(min_points, 32), real=True)
    while True:
        state = _ThetaState(phi, nu, points)
        if state.tail_fraction <= TAIL_TOL:
            return state
        if points >= _MAX_AUTO_POINTS:
            raise OracleError(
                f"theta(0) tail {state.tail_fraction:.3g} still above {TAIL_TOL} "
                f"at {points} points per axis"
            )
        points = _fft.next_fast_len(2 * points, real=True)


def solve(
    phi: PotentialField, nu: float, t: float, eval_points: int | None = None
) -> sp.RealVectorSample:
    """Exact Burgers solution with data grad(phi) at time t, on a fine grid.

    Computes theta(0) = exp(-phi/(2 nu)), applies the exact heat multiplier,
    and forms u = -2 nu grad(theta)/theta pointwise.  Raises OracleError when
    the answer would not deserve the name "exact": nu below the configured
    floor, theta(0) not resolved on the grid, or theta touching zero.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    state = _resolve_state(phi, nu, eval_points)
    return sp.RealVectorSample(phi.grid, state.velocity(t))


def solve_times(phi, nu, times, eval_points=None):
    """As `solve`, evaluated at several times with one shared theta state."""
    state = _resolve_state(phi, nu, eval_points)
    return [sp.RealVectorSample(phi.grid, state.velocity(t)) for t in times]


def effective_potential(phi: PotentialField, nu: float, t: float,
                        eval_points: int | None = None, band: int | None = None) -> PotentialField:
    """Potential whose gradient data reproduces the oracle solution at time t.

    Built as -2 nu (log theta(t) - mean log theta(t)); restarting the oracle
    from it continues the original solution (semigroup property).
    """
    state = _resolve_state(phi, nu, eval_points)
    theta, _ = state.evaluate(t)
    if float(theta.min()) <= THETA_FLOOR:
        raise OracleError("theta reached the floor; cannot take its logarithm")
    log_theta = np.log(theta)
    psi = -2.0 * nu * (log_theta - log_theta.mean())
    n_eff = band if band is not None else max((state.points - 2) // 4, phi.grid.n)
    grid = sp.get_grid(n_eff)
    coeffs = sp._forward_transform(psi, grid)
    return PotentialField(grid, coeffs)


def burgers_residual(
    phi: PotentialField,
    nu: float,
    t: float,
    cadence: float = 1e-3,
    eval_points: int | None = None,
    truncation: int | None = None,
    stencil: int = 5,
) -> float:
    """L2 residual of the Burgers equation on the oracle output at time t.

    Spatial terms are evaluated spectrally from the band-limited interpolant of
    the oracle samples; the time derivative uses a centered difference of the
    stated stencil width (3 or 5) at the given cadence.  Validates the
    transform itself: small residual means the oracle really solves the
    equation.
    """
    if stencil not in (3, 5):
        raise ValueError("stencil must be 3 or 5")
    reach = (stencil - 1) // 2
    if t - reach * cadence < 0:
        raise ValueError("time too close to zero for the centered stencil")
    state = _resolve_state(phi, nu, eval_points)
    points = state.points
    n_r = truncation if truncation is not None else min((points - 2) // 2, 3 * phi.band + 8)
    grid = sp.get_grid(n_r, physical_points=max(points, sp.default_dealias_points(n_r)))

    offsets = range(-reach, reach + 1)
    fields = {}
    for j in offsets:
        values = state.velocity(t + j * cadence)
        fields[j] = sp.SpectralVectorField(grid, sp._forward_transform(values, grid))
        if j == 0:
            # the truncation must capture the oracle output, otherwise the
            # residual would just measure interpolation error
            back = sp._inverse_transform(fields[0].coeffs, grid, points)
            defect = float(np.max(np.abs(back - values)))
            scale = max(float(np.max(np.abs(values))), 1e-30)
            if defect > 1e-9 * scale:
                raise OracleError(
                    f"oracle output not band-limited at truncation {n_r} "
                    f"(interpolation defect {defect:.3g})"
                )
    if stencil == 3:
        dudt = (fields[1].coeffs - fields[-1].coeffs) / (2.0 * cadence)
    else:
        dudt = (
            -fields[2].coeffs + 8.0 * fields[1].coeffs
            - 8.0 * fields[-1].coeffs + fields[-2].coeffs
        ) / (12.0 * cadence)
    u_t = fields[0]
    advection = sp.nonlinear_term(u_t)
    residual = dudt + advection.coeffs + nu * grid.k_sq * u_t.coeffs
    return sp.l2_norm(sp.SpectralVectorField(grid, residual))


@dataclass(frozen=True)
class ErrorRow:
    """One row of a solver-versus-oracle error table."""

    n: int
    dt: float
    t: float
    err_l2: float
    err_linf: float
    err_h05: float


def compare(traj, phi: PotentialField, eval_points: int | None = None) -> list[ErrorRow]:
    """Error traces of a numerical trajectory against the oracle.

    The trajectory must have started from grad(phi) truncated to its grid;
    anything else is a misuse and raises ValueError.  Returns one row per
    stored snapshot with L2, sup, and order-1/2 seminorm errors.
    """
    if not traj.config.nonlinear:
        raise ValueError(
            "trajectory was integrated without the advection term; "
            "it does not solve the equation the oracle solves"
        )
    grid = traj.grid
    nu = traj.config.nu
    expected = sp.project(regrid_field(make_gradient_data(phi), grid), grid.n)
    u0 = traj.snapshots[0]
    scale = max(sp.l2_norm(expected), 1e-30)
    if sp.l2_norm(u0 - expected) > 1e-8 * scale:
        raise ValueError("trajectory initial data does not match grad(phi) up to truncation")

    if eval_points is not None:
        points = max(int(eval_points), sp.min_physical_points(grid.n))
        state = _resolve_state(phi, nu, points)
    else:
        state = _resolve_state(phi, nu, None)
        points = max(state.points, 4 * grid.n, sp.min_physical_points(grid.n))
        if points != state.points:
            state = _resolve_state(phi, nu, points)
    n_cmp = min((points - 2) // 2, 2 * grid.n)
    cmp_grid = sp.get_grid(n_cmp)
    rows = []
    for t, u_num in zip(traj.times, traj.snapshots):
        exact = state.velocity(t)
        num = sp._inverse_transform(u_num.coeffs, grid, points)
        diff = num - exact
        mag_sq = np.einsum("cijk,cijk->ijk", diff, diff)
        err_linf = float(np.sqrt(mag_sq.max()))
        err_l2 = float(np.sqrt(mag_sq.sum() * (2 * np.pi / points) ** 3))
        dhat = sp.SpectralVectorField(cmp_grid, sp._forward_transform(diff, cmp_grid))
        rows.append(
            ErrorRow(grid.n, traj.config.dt, float(t), err_l2, err_linf, sp.seminorm(dhat, 0.5))
        )
    return rows


def regrid_field(f: sp.SpectralVectorField, grid: sp.WavenumberGrid) -> sp.SpectralVectorField:
    """Copy a field onto another truncation order, padding or cropping modes."""
    src = f.grid
    if src.n == grid.n:
        return sp.SpectralVectorField(grid, f.coeffs.copy())
    keep = min(src.n, grid.n)
    out = np.zeros((3, grid.m, grid.m, grid.m), dtype=np.complex128)
    src_nat = np.fft.fftshift(f.coeffs, axes=(1, 2, 3))
    lo_s, hi_s = src.n - keep, src.n + keep + 1
    lo_d, hi_d = grid.n - keep, grid.n + keep + 1
    out_nat = np.fft.fftshift(out, axes=(1, 2, 3))
    out_nat[:, lo_d:hi_d, lo_d:hi_d, lo_d:hi_d] = src_nat[:, lo_s:hi_s, lo_s:hi_s, lo_s:hi_s]
    return sp.SpectralVectorField(grid, np.fft.ifftshift(out_nat, axes=(1, 2, 3)))
