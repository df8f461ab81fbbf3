"""Truncated Fourier representation of real periodic vector fields on the 2pi torus.

A field is a trigonometric polynomial u(x) = sum_k u_k exp(i k.x) with integer
wavenumbers in the cube |k|_inf <= n.  Coefficients are stored component-major
as complex arrays of shape (3, M, M, M) with M = 2n+1 and each axis in FFT
("wrapped") order 0, 1, ..., n, -n, ..., -1, so a cube embeds into any larger
FFT grid by scattering.  Real-valuedness is the Hermitian symmetry
u_{-k} = conj(u_k); constructors here enforce or preserve it.

Integral quantities carry the torus volume 8 pi^3: the L2 norm is
sqrt(8 pi^3 sum_k |u_k|^2) and the order-s seminorm weights each mode by |k|^s
(with 0^0 = 1 so the order-0 seminorm is the L2 norm).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as _fft

from .errors import GridMismatchError, ResolutionError

VOLUME = (2.0 * np.pi) ** 3

# scipy.fft worker pool; -1 means all available cores.
_WORKERS = -1


def default_dealias_points(n: int) -> int:
    """Default collocation resolution for quadratic products.

    At least 3n+2 points per axis, so the pointwise product of two fields
    truncated at order n has no aliasing in the retained modes, rounded up to
    an FFT-friendly length.
    """
    return _fft.next_fast_len(3 * n + 2, real=True)


def min_physical_points(n: int) -> int:
    """Hard lower bound on collocation resolution for truncation order n."""
    return 2 * n + 2


class _HalfGridPlan:
    """Index tables mapping the coefficient cube onto an rfftn half-spectrum."""

    def __init__(self, n: int, points: int):
        m = 2 * n + 1
        k1d = np.rint(np.fft.fftfreq(m, d=1.0 / m)).astype(np.intp)
        self.points = points
        self.wrap = k1d % points                  # cube axis index -> FFT grid index
        self.mirror_wrap = (-k1d) % points
        self.pos3 = np.arange(n + 1)              # k3 >= 0 block of the cube
        self.neg3_src = np.arange(n + 1, m)       # cube indices carrying k3 < 0
        self.neg3_tgt = np.arange(n, 0, -1)       # corresponding -k3 values
        self._scatter_ix = np.ix_(self.wrap, self.wrap, self.pos3)
        self._gather_neg_ix = np.ix_(self.mirror_wrap, self.mirror_wrap, self.neg3_tgt)

    def scatter(self, coeffs: np.ndarray) -> np.ndarray:
        """Embed cube coefficients into a zeroed half-spectrum of this plan's size."""
        p = self.points
        lead = coeffs.shape[:-3]
        n1 = self.pos3.size
        half = np.zeros(lead + (p, p, p // 2 + 1), dtype=np.complex128)
        half[(Ellipsis, *self._scatter_ix)] = coeffs[..., :, :, :n1]
        return half

    def gather(self, half: np.ndarray) -> np.ndarray:
        """Extract cube coefficients from an rfftn half-spectrum (Hermitian fill).

        Modes with k3 < 0 are conjugate copies of their mirrors, and the k3 = 0
        plane is symmetrized, so the result is exactly Hermitian whenever the
        half-spectrum came from real data.
        """
        m = self.wrap.size
        n1 = self.pos3.size
        lead = half.shape[:-3]
        cube = np.empty(lead + (m, m, m), dtype=np.complex128)
        cube[..., :, :, :n1] = half[(Ellipsis, *self._scatter_ix)]
        cube[..., :, :, n1:] = np.conj(half[(Ellipsis, *self._gather_neg_ix)])
        rev = (-np.arange(m)) % m
        plane = cube[..., :, :, 0]
        cube[..., :, :, 0] = 0.5 * (plane + np.conj(plane[..., rev, :][..., :, rev]))
        return cube


class WavenumberGrid:
    """Wavenumber bookkeeping for truncation order n.

    Stores the integer mode cube |k|_inf <= n (closed under negation), the
    per-mode Euclidean norms, and cached transform plans.  `physical_points`
    is the default collocation resolution for products and pointwise norms.
    """

    def __init__(self, n: int, physical_points: int | None = None):
        if n < 1:
            raise ValueError(f"truncation order must be >= 1, got {n}")
        self.n = int(n)
        self.m = 2 * self.n + 1
        if physical_points is None:
            physical_points = default_dealias_points(self.n)
        physical_points = int(physical_points)
        if physical_points < min_physical_points(self.n):
            raise ResolutionError(
                f"physical_points={physical_points} below the minimum "
                f"{min_physical_points(self.n)} for n={self.n}"
            )
        self.physical_points = physical_points

        k1d = np.rint(np.fft.fftfreq(self.m, d=1.0 / self.m)).astype(np.int64)
        self.k1d = k1d
        self.kx = k1d.reshape(-1, 1, 1).astype(np.float64)
        self.ky = k1d.reshape(1, -1, 1).astype(np.float64)
        self.kz = k1d.reshape(1, 1, -1).astype(np.float64)
        ksq_int = (
            k1d.reshape(-1, 1, 1) ** 2
            + k1d.reshape(1, -1, 1) ** 2
            + k1d.reshape(1, 1, -1) ** 2
        )
        self.k_sq_int = ksq_int
        self.k_sq = ksq_int.astype(np.float64)
        self.k_norm = np.sqrt(self.k_sq)
        for arr in (self.k1d, self.kx, self.ky, self.kz, self.k_sq_int, self.k_sq, self.k_norm):
            arr.setflags(write=False)
        self._plans: dict[int, _HalfGridPlan] = {}
        self._weights: dict[float, np.ndarray] = {}
        self._ball_masks: dict[int, np.ndarray] = {}
        self._cache_lock = threading.Lock()

    def __repr__(self):
        return f"WavenumberGrid(n={self.n}, physical_points={self.physical_points})"

    def __eq__(self, other):
        return (
            isinstance(other, WavenumberGrid)
            and self.n == other.n
            and self.physical_points == other.physical_points
        )

    def __hash__(self):
        return hash((self.n, self.physical_points))

    def plan(self, points: int) -> _HalfGridPlan:
        if points < min_physical_points(self.n):
            raise ResolutionError(
                f"{points} points per axis cannot represent modes up to n={self.n}"
            )
        plan = self._plans.get(points)
        if plan is None:
            with self._cache_lock:
                plan = self._plans.get(points)
                if plan is None:
                    plan = _HalfGridPlan(self.n, points)
                    self._plans[points] = plan
        return plan

    def seminorm_weight(self, two_s: float) -> np.ndarray:
        """Cached cube of |k|^(two_s), with 0^0 := 1."""
        w = self._weights.get(two_s)
        if w is None:
            with self._cache_lock:
                w = self._weights.get(two_s)
                if w is None:
                    with np.errstate(divide="ignore"):
                        w = self.k_norm ** two_s
                    w.setflags(write=False)
                    self._weights[two_s] = w
        return w

    def ball_mask(self, radius: int) -> np.ndarray:
        """Boolean cube marking modes with Euclidean |k| <= radius (exact, integer)."""
        mask = self._ball_masks.get(radius)
        if mask is None:
            with self._cache_lock:
                mask = self._ball_masks.get(radius)
                if mask is None:
                    mask = self.k_sq_int <= radius * radius
                    mask.setflags(write=False)
                    self._ball_masks[radius] = mask
        return mask


@lru_cache(maxsize=64)
def get_grid(n: int, physical_points: int | None = None) -> WavenumberGrid:
    """Shared grid instances; equal parameters return the same object."""
    return WavenumberGrid(n, physical_points)


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    """Three-component velocity field as truncated Fourier coefficients."""

    grid: WavenumberGrid
    coeffs: np.ndarray  # (3, M, M, M) complex128

    def __post_init__(self):
        m = self.grid.m
        if self.coeffs.shape != (3, m, m, m):
            raise ValueError(
                f"coefficient array shape {self.coeffs.shape} does not match grid n={self.grid.n}"
            )
        if self.coeffs.dtype != np.complex128:
            object.__setattr__(self, "coeffs", self.coeffs.astype(np.complex128))

    def copy(self) -> "SpectralVectorField":
        return SpectralVectorField(self.grid, self.coeffs.copy())

    def __add__(self, other):
        _require_same_grid(self, other)
        return SpectralVectorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _require_same_grid(self, other)
        return SpectralVectorField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return SpectralVectorField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class RealVectorSample:
    """Collocation values of a vector field on a uniform grid over [0, 2pi)^3."""

    grid: WavenumberGrid
    values: np.ndarray  # (3, P, P, P) float64

    @property
    def points(self) -> int:
        return self.values.shape[-1]


def _require_same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatchError(f"fields live on different grids: {f.grid} vs {g.grid}")


def zero_field(grid: WavenumberGrid) -> SpectralVectorField:
    m = grid.m
    return SpectralVectorField(grid, np.zeros((3, m, m, m), dtype=np.complex128))


def mode_index(grid: WavenumberGrid, mode) -> tuple[int, int, int]:
    """Cube array index of an integer mode triple."""
    m1, m2, m3 = (int(c) for c in mode)
    if max(abs(m1), abs(m2), abs(m3)) > grid.n:
        raise ValueError(f"mode {mode} outside truncation |k|_inf <= {grid.n}")
    m = grid.m
    return (m1 % m, m2 % m, m3 % m)


def cosine_field(grid: WavenumberGrid, mode, amplitude) -> SpectralVectorField:
    """Field a * cos(k.x) for an integer mode k and amplitude vector a."""
    amp = np.asarray(amplitude, dtype=np.float64)
    out = zero_field(grid)
    idx = mode_index(grid, mode)
    if idx == (0, 0, 0):
        out.coeffs[(slice(None), *idx)] = amp
        return out
    neg = mode_index(grid, [-c for c in mode])
    out.coeffs[(slice(None), *idx)] = amp / 2.0
    out.coeffs[(slice(None), *neg)] = amp / 2.0
    return out


def constant_field(grid: WavenumberGrid, value) -> SpectralVectorField:
    return cosine_field(grid, (0, 0, 0), value)


def _mirror(coeffs: np.ndarray) -> np.ndarray:
    """coeffs evaluated at -k (wrapped-order index reversal on the last 3 axes)."""
    m = coeffs.shape[-1]
    rev = (-np.arange(m)) % m
    return coeffs[..., rev, :, :][..., :, rev, :][..., :, :, rev]


def hermitianize(coeffs: np.ndarray) -> np.ndarray:
    """Project coefficients onto the Hermitian-symmetric (real-field) subspace."""
    return 0.5 * (coeffs + np.conj(_mirror(coeffs)))


def hermitian_defect(f: SpectralVectorField) -> float:
    """Max deviation from u_{-k} = conj(u_k); zero for real-valued fields."""
    return float(np.max(np.abs(f.coeffs - np.conj(_mirror(f.coeffs)))))


def random_band_field(
    grid: WavenumberGrid,
    rng,
    band=(1.0, 4.0),
    decay: float = 0.0,
    target_h05: float | None = None,
    zero_mean: bool = True,
) -> SpectralVectorField:
    """Random Hermitian-symmetric field supported on lo <= |k| <= hi.

    Coefficient amplitudes are Gaussian with an optional |k|^-decay envelope;
    when `target_h05` is given the field is rescaled so its order-1/2 seminorm
    matches it exactly.
    """
    rng = np.random.default_rng(rng)
    m = grid.m
    re = rng.standard_normal((3, m, m, m))
    im = rng.standard_normal((3, m, m, m))
    lo, hi = band
    mask = (grid.k_norm >= lo) & (grid.k_norm <= hi)
    if zero_mean:
        mask = mask.copy()
        mask[0, 0, 0] = False
    envelope = np.where(grid.k_norm > 0, grid.k_norm, 1.0) ** (-decay)
    coeffs = (re + 1j * im) * (mask * envelope)
    coeffs = hermitianize(coeffs)
    field = SpectralVectorField(grid, coeffs)
    if target_h05 is not None:
        current = seminorm(field, 0.5)
        if current == 0.0:
            raise ValueError("cannot rescale a zero field to a seminorm target")
        field = field * (target_h05 / current)
    return field


# ---------------------------------------------------------------------------
# transforms

def _inverse_transform(coeffs: np.ndarray, grid: WavenumberGrid, points: int) -> np.ndarray:
    """Synthesize collocation values of sum_k c_k exp(i k.x) on points^3 nodes."""
    plan = grid.plan(points)
    half = plan.scatter(coeffs * float(points) ** 3)
    axes = tuple(range(coeffs.ndim - 3, coeffs.ndim))
    return _fft.irfftn(half, s=(points, points, points), axes=axes, workers=_WORKERS)


def _forward_transform(values: np.ndarray, grid: WavenumberGrid) -> np.ndarray:
    """Fourier coefficients of collocation values, truncated to the grid cube."""
    points = values.shape[-1]
    plan = grid.plan(points)
    axes = tuple(range(values.ndim - 3, values.ndim))
    half = _fft.rfftn(values, axes=axes, workers=_WORKERS)
    return plan.gather(half) / float(points) ** 3


def to_physical(f: SpectralVectorField, points: int | None = None) -> RealVectorSample:
    """Evaluate the trigonometric polynomial on a uniform points^3 grid.

    Exact for band-limited fields up to round-off.  Requires
    points >= 2n+2.
    """
    if points is None:
        points = f.grid.physical_points
    if points < min_physical_points(f.grid.n):
        raise ResolutionError(
            f"points={points} below minimum {min_physical_points(f.grid.n)} for n={f.grid.n}"
        )
    return RealVectorSample(f.grid, _inverse_transform(f.coeffs, f.grid, points))


def to_spectral(s: RealVectorSample, n: int, physical_points: int | None = None) -> SpectralVectorField:
    """Forward transform of collocation values, truncated to |k|_inf <= n.

    Hermitian symmetry of the output is exact by construction from real input.
    Requires s.points >= 2n+2.
    """
    if s.points < min_physical_points(n):
        raise ResolutionError(f"sample with {s.points} points cannot resolve n={n}")
    grid = s.grid if (s.grid.n == n and physical_points is None) else get_grid(n, physical_points)
    return SpectralVectorField(grid, _forward_transform(np.asarray(s.values, np.float64), grid))


# ---------------------------------------------------------------------------
# multipliers, norms, projections

def lambda_pow(f: SpectralVectorField, s: float) -> SpectralVectorField:
    """Fourier multiplier |k|^s; order 2 equals minus the Laplacian."""
    if s < 0:
        raise ValueError("negative multiplier orders are out of scope")
    return SpectralVectorField(f.grid, f.coeffs * f.grid.seminorm_weight(float(s)))


def seminorm(f: SpectralVectorField, s: float) -> float:
    """Order-s seminorm: L2 norm of the |k|^s multiplier applied to f."""
    if s < 0:
        raise ValueError("negative seminorm orders are out of scope")
    w = f.grid.seminorm_weight(2.0 * float(s))
    c = f.coeffs
    total = float(np.sum((c.real * c.real + c.imag * c.imag) * w))
    return float(np.sqrt(VOLUME * total))


def l2_norm(f: SpectralVectorField) -> float:
    return seminorm(f, 0.0)


def hs_norm_split(f: SpectralVectorField, s: float) -> float:
    """Sobolev norm as the sum ||f||_L2 + ||f||_s."""
    return l2_norm(f) + seminorm(f, s)


def hs_norm_bessel(f: SpectralVectorField, s: float) -> float:
    """Sobolev norm as sqrt(8 pi^3 sum (1 + |k|^{2s}) |f_k|^2)."""
    w = 1.0 + f.grid.seminorm_weight(2.0 * float(s))
    c = f.coeffs
    total = float(np.sum((c.real * c.real + c.imag * c.imag) * w))
    return float(np.sqrt(VOLUME * total))


def inner_l2(f: SpectralVectorField, g: SpectralVectorField) -> float:
    """Plancherel inner product 8 pi^3 Re sum_k f_k . conj(g_k)."""
    _require_same_grid(f, g)
    return VOLUME * float(np.vdot(g.coeffs, f.coeffs).real)


def mean(f: SpectralVectorField) -> np.ndarray:
    """Integral of the field over the torus: 8 pi^3 times the zero mode."""
    return VOLUME * f.coeffs[:, 0, 0, 0].real.copy()


def momentum_rhs_rate(f: SpectralVectorField) -> float:
    """8 pi^3 ||f||_{1/2}^2, the bound on the mean-drift rate of a solution."""
    return VOLUME * seminorm(f, 0.5) ** 2


def project(f: SpectralVectorField, radius: int) -> SpectralVectorField:
    """Zero all modes with Euclidean |k| > radius; idempotent."""
    if radius < 0:
        raise ValueError("projection radius must be nonnegative")
    return SpectralVectorField(f.grid, f.coeffs * f.grid.ball_mask(int(radius)))


def linf_norm(f: SpectralVectorField, points: int | None = None) -> float:
    """Sup over collocation nodes of the pointwise Euclidean magnitude |u(x)|.

    Oversampling (default 4n points per axis) controls how well the grid max
    approximates the true sup of the trigonometric polynomial.
    """
    sample = to_physical(f, points if points is not None else _norm_points(f.grid))
    mag_sq = np.einsum("cijk,cijk->ijk", sample.values, sample.values)
    return float(np.sqrt(np.max(mag_sq)))


def l1_norm(f: SpectralVectorField, points: int | None = None) -> float:
    """Quadrature of |u(x)| over the torus on an oversampled grid (default 4n)."""
    sample = to_physical(f, points if points is not None else _norm_points(f.grid))
    mag = np.sqrt(np.einsum("cijk,cijk->ijk", sample.values, sample.values))
    p = sample.points
    return float(np.sum(mag) * (2.0 * np.pi / p) ** 3)


def _norm_points(grid: WavenumberGrid) -> int:
    return max(4 * grid.n, min_physical_points(grid.n))


def pointwise_norms(f: SpectralVectorField, points: int | None = None) -> tuple[float, float]:
    """(sup norm, L1 norm) from a single shared collocation sample."""
    sample = to_physical(f, points if points is not None else _norm_points(f.grid))
    mag_sq = np.einsum("cijk,cijk->ijk", sample.values, sample.values)
    linf = float(np.sqrt(np.max(mag_sq)))
    l1 = float(np.sum(np.sqrt(mag_sq)) * (2.0 * np.pi / sample.points) ** 3)
    return linf, l1


def spectral_tail_fraction(f: SpectralVectorField, cut: float | None = None) -> float:
    """Fraction of L2 energy carried by modes with |k| above the cut.

    The default cut is two thirds of the truncation order, i.e. the top third
    of the resolved wavenumber range.
    """
    if cut is None:
        cut = 2.0 * f.grid.n / 3.0
    c = f.coeffs
    energy = c.real * c.real + c.imag * c.imag
    total = float(np.sum(energy))
    if total == 0.0:
        return 0.0
    tail = float(np.sum(energy[:, f.grid.k_norm > cut]))
    return tail / total


def shell_amplitudes(f: SpectralVectorField) -> tuple[np.ndarray, np.ndarray]:
    """RMS coefficient amplitude per integer wavenumber shell.

    Returns (radii, amplitudes) for shells r = 0..n, where each mode is binned
    to the nearest integer |k| and the amplitude is the RMS of |u_k| over the
    shell (all components).
    """
    grid = f.grid
    shells = np.rint(grid.k_norm).astype(np.int64)
    nsh = grid.n + 1
    c = f.coeffs
    energy = (c.real * c.real + c.imag * c.imag).sum(axis=0)
    keep = shells <= grid.n
    e_sum = np.bincount(shells[keep].ravel(), weights=energy[keep].ravel(), minlength=nsh)
    counts = np.bincount(shells[keep].ravel(), minlength=nsh) * 3
    radii = np.arange(nsh)
    with np.errstate(invalid="ignore", divide="ignore"):
        amps = np.sqrt(e_sum / np.maximum(counts, 1))
    return radii, amps


# ---------------------------------------------------------------------------
# differential operators and the quadratic term

def gradient_of_scalar(grid: WavenumberGrid, phi_coeffs: np.ndarray) -> np.ndarray:
    """Spectral gradient of a scalar coefficient cube: (i k_j phi_k)."""
    return np.stack(
        [1j * grid.kx * phi_coeffs, 1j * grid.ky * phi_coeffs, 1j * grid.kz * phi_coeffs]
    )


def curl(f: SpectralVectorField) -> SpectralVectorField:
    """Spectral curl of the field."""
    c = f.coeffs
    g = f.grid
    w1 = 1j * (g.ky * c[2] - g.kz * c[1])
    w2 = 1j * (g.kz * c[0] - g.kx * c[2])
    w3 = 1j * (g.kx * c[1] - g.ky * c[0])
    return SpectralVectorField(g, np.stack([w1, w2, w3]))


def divergence(f: SpectralVectorField) -> np.ndarray:
    """Spectral divergence: scalar coefficient cube i k . u_k."""
    c = f.coeffs
    g = f.grid
    return 1j * (g.kx * c[0] + g.ky * c[1] + g.kz * c[2])


def _advection_coeffs(coeffs: np.ndarray, grid: WavenumberGrid, points: int) -> np.ndarray:
    """Raw-coefficient core of `nonlinear_term` (rotational-form evaluation)."""
    u_phys = _inverse_transform(coeffs, grid, points)
    w1 = 1j * (grid.ky * coeffs[2] - grid.kz * coeffs[1])
    w2 = 1j * (grid.kz * coeffs[0] - grid.kx * coeffs[2])
    w3 = 1j * (grid.kx * coeffs[1] - grid.ky * coeffs[0])
    w_phys = _inverse_transform(np.stack([w1, w2, w3]), grid, points)
    half_speed_sq = 0.5 * np.einsum("cijk,cijk->ijk", u_phys, u_phys)
    cross = np.empty_like(u_phys)
    cross[0] = u_phys[1] * w_phys[2] - u_phys[2] * w_phys[1]
    cross[1] = u_phys[2] * w_phys[0] - u_phys[0] * w_phys[2]
    cross[2] = u_phys[0] * w_phys[1] - u_phys[1] * w_phys[0]
    h_hat = _forward_transform(half_speed_sq, grid)
    cross_hat = _forward_transform(cross, grid)
    return gradient_of_scalar(grid, h_hat) - cross_hat


def nonlinear_term(u: SpectralVectorField, points: int | None = None) -> SpectralVectorField:
    """Quadratic advection term (u.grad)u truncated to the coefficient cube.

    Evaluated pseudo-spectrally in rotational form,
    (u.grad)u = grad(|u|^2/2) - u x curl(u),
    which agrees with the convective form exactly as a truncated convolution.
    With points >= 3n+1 (the default) the result equals the exact truncated
    convolution; the hard floor is 2n+2 points.
    """
    grid = u.grid
    p = points if points is not None else grid.physical_points
    if p < min_physical_points(grid.n):
        raise ResolutionError(
            f"dealias resolution {p} below threshold {min_physical_points(grid.n)} for n={grid.n}"
        )
    return SpectralVectorField(grid, _advection_coeffs(u.coeffs, grid, p))
