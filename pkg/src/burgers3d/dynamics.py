"""Time integration of the spectrally truncated Burgers system.

The state is a field supported on the Euclidean mode ball |k| <= n; the
evolution is

    du/dt = -P_n[(u.grad)u] + nu lap(u),

with P_n the ball projection.  The stiff linear part is handled exactly
through heat multipliers, so both integrators (exponential time differencing
and integrating-factor Runge-Kutta, fourth order each) reproduce the pure heat
flow to round-off for any step size.

Internally the integrators keep only the ball modes as flat arrays; gathering
products back onto the ball realizes the projection, and all multiplier tables
are one-dimensional.  Public inputs and outputs are ordinary coefficient-cube
fields.

Also provided: the heat/nonlinear splitting u = v + w where v is the exact
heat evolution of the data and w solves the zero-data remainder equation, a
lockstep pair integrator for continuous-dependence experiments, and a residual
evaluator for parabolically rescaled trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from . import colehopf, fieldfile
from . import spectral as sp
from .errors import CadenceError, ConfigError

INTEGRATORS = ("etdrk4", "if_rk4")
INITIAL_DATA_KINDS = (
    "single_mode",
    "random_band",
    "gradient_potential",
    "taylor_green_like",
    "from_file",
)


@dataclass(frozen=True)
class InitialDataSpec:
    """Recipe for the initial velocity field."""

    kind: str = "random_band"
    mode: tuple[int, int, int] = (1, 0, 0)
    amplitude: tuple[float, float, float] = (0.0, 1.0, 0.0)
    band: tuple[float, float] = (1.0, 3.0)
    target_h05: float = 1.0
    decay: float = 0.0
    scale: float = 1.0
    potential: tuple = ()  # ((k1, k2, k3), amplitude) cosine terms
    path: str = ""

    def __post_init__(self):
        if self.kind not in INITIAL_DATA_KINDS:
            raise ConfigError(f"unknown initial data kind {self.kind!r}")


@dataclass(frozen=True)
class RunConfig:
    """Full description of one deterministic solver run."""

    nu: float = 1.0
    n: int = 16
    dt: float = 1e-3
    t_end: float = 0.25
    integrator: str = "etdrk4"
    dealias_points: int | None = None
    initial_data: InitialDataSpec = field(default_factory=InitialDataSpec)
    seed: int = 0
    diag_every: int = 1
    snapshot_every: int = 0  # 0: keep only the first and last snapshot
    linf_points: int | None = None
    nonlinear: bool = True
    normalize_viscosity: bool = False
    blowup_factor: float = 1e6

    def __post_init__(self):
        if self.nu <= 0:
            raise ConfigError(f"viscosity must be positive, got {self.nu}")
        if self.n < 1:
            raise ConfigError(f"truncation order must be >= 1, got {self.n}")
        if self.dt <= 0:
            raise ConfigError(f"time step must be positive, got {self.dt}")
        if self.t_end < 0:
            raise ConfigError(f"final time must be nonnegative, got {self.t_end}")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if self.diag_every < 1:
            raise ConfigError("diag_every must be >= 1")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.dealias_points is not None and self.dealias_points < sp.min_physical_points(self.n):
            raise ConfigError(
                f"dealias_points={self.dealias_points} below the minimum "
                f"{sp.min_physical_points(self.n)} for n={self.n}"
            )
        if self.blowup_factor <= 1:
            raise ConfigError("blowup_factor must exceed 1")

    def resolved_dealias(self) -> int:
        if self.dealias_points is not None:
            return self.dealias_points
        return sp.default_dealias_points(self.n)

    def resolved_linf_points(self) -> int:
        if self.linf_points is not None:
            return self.linf_points
        return max(4 * self.n, sp.min_physical_points(self.n))

    def make_grid(self) -> sp.WavenumberGrid:
        return sp.get_grid(self.n, self.resolved_dealias())


def build_initial_data(config: RunConfig, grid: sp.WavenumberGrid | None = None) -> sp.SpectralVectorField:
    """Construct the configured initial field (before ball projection)."""
    spec = config.initial_data
    if grid is None:
        grid = config.make_grid()
    if spec.kind == "single_mode":
        return sp.cosine_field(grid, spec.mode, spec.amplitude)
    if spec.kind == "random_band":
        rng = np.random.default_rng(np.random.SeedSequence(config.seed))
        return sp.random_band_field(
            grid, rng, band=spec.band, decay=spec.decay, target_h05=spec.target_h05
        )
    if spec.kind == "gradient_potential":
        if not spec.potential:
            raise ConfigError("gradient_potential initial data needs potential terms")
        phi = colehopf.potential_from_cosines(spec.potential)
        if phi.band > grid.n:
            raise ConfigError(
                f"potential band {phi.band} exceeds the truncation order {grid.n}"
            )
        return colehopf.regrid_field(colehopf.make_gradient_data(phi), grid)
    if spec.kind == "taylor_green_like":
        p = sp.min_physical_points(grid.n)
        x = np.arange(p) * 2 * np.pi / p
        c1, s1 = np.cos(x)[:, None, None], np.sin(x)[:, None, None]
        c2, s2 = np.cos(x)[None, :, None], np.sin(x)[None, :, None]
        c3 = np.cos(x)[None, None, :]
        values = np.zeros((3, p, p, p))
        values[0] = spec.scale * s1 * c2 * c3
        values[1] = -spec.scale * c1 * s2 * c3
        return sp.to_spectral(sp.RealVectorSample(grid, values), grid.n)
    if spec.kind == "from_file":
        loaded, _, _ = fieldfile.load_field(spec.path)
        if loaded.grid.n != grid.n:
            loaded = colehopf.regrid_field(loaded, grid)
        elif loaded.grid != grid:
            loaded = sp.SpectralVectorField(grid, loaded.coeffs)
        return loaded
    raise ConfigError(f"unhandled initial data kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# diagnostics

DIAGNOSTIC_COLUMNS = (
    "t",
    "l2",
    "l1",
    "linf",
    "semi_0_5",
    "semi_1",
    "semi_1_5",
    "semi_2",
    "mom_x",
    "mom_y",
    "mom_z",
    "cum_semi_0_5_sq",
    "cum_semi_1_5_sq",
    "tail_fraction",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One time sample of every monitored norm and functional."""

    t: float
    l2: float
    l1: float
    linf: float
    semi_0_5: float
    semi_1: float
    semi_1_5: float
    semi_2: float
    mom_x: float
    mom_y: float
    mom_z: float
    cum_semi_0_5_sq: float
    cum_semi_1_5_sq: float
    tail_fraction: float

    def as_row(self) -> tuple:
        return tuple(getattr(self, c) for c in DIAGNOSTIC_COLUMNS)


@dataclass(frozen=True)
class BlowupReport:
    """Where and why the blowup detector stopped a run."""

    time: float
    reason: str
    l2: float


class _DiagnosticsAccumulator:
    """Emits records at the diagnostics cadence, carrying trapezoid integrals."""

    def __init__(self, grid: sp.WavenumberGrid, linf_points: int):
        self.grid = grid
        self.linf_points = linf_points
        self.records: list[DiagnosticsRecord] = []
        self._prev = None  # (t, semi05_sq, semi15_sq)
        self._cum05 = 0.0
        self._cum15 = 0.0

    def emit(self, t: float, field: sp.SpectralVectorField) -> DiagnosticsRecord:
        grid = self.grid
        c = field.coeffs
        abs2 = (c.real * c.real + c.imag * c.imag).sum(axis=0)

        def weighted(two_s: float) -> float:
            return float(np.sum(abs2 * grid.seminorm_weight(two_s)) * sp.VOLUME)

        l2 = math.sqrt(weighted(0.0))
        s05_sq = weighted(1.0)
        s1_sq = weighted(2.0)
        s15_sq = weighted(3.0)
        s2_sq = weighted(4.0)
        linf, l1 = sp.pointwise_norms(field, self.linf_points)
        mom = sp.VOLUME * c[:, 0, 0, 0].real
        total = float(abs2.sum())
        if total > 0.0:
            tail = float(abs2[grid.k_norm > 2.0 * grid.n / 3.0].sum()) / total
        else:
            tail = 0.0
        if self._prev is not None:
            t0, p05, p15 = self._prev
            self._cum05 += 0.5 * (p05 + s05_sq) * (t - t0)
            self._cum15 += 0.5 * (p15 + s15_sq) * (t - t0)
        self._prev = (t, s05_sq, s15_sq)
        rec = DiagnosticsRecord(
            t=float(t),
            l2=l2,
            l1=l1,
            linf=linf,
            semi_0_5=math.sqrt(s05_sq),
            semi_1=math.sqrt(s1_sq),
            semi_1_5=math.sqrt(s15_sq),
            semi_2=math.sqrt(s2_sq),
            mom_x=float(mom[0]),
            mom_y=float(mom[1]),
            mom_z=float(mom[2]),
            cum_semi_0_5_sq=self._cum05,
            cum_semi_1_5_sq=self._cum15,
            tail_fraction=tail,
        )
        self.records.append(rec)
        return rec


@dataclass
class TrajectoryHandle:
    """In-memory view of one run: snapshots plus the diagnostics stream."""

    config: RunConfig
    grid: sp.WavenumberGrid
    times: list[float]
    snapshots: list[sp.SpectralVectorField]
    diagnostics: list[DiagnosticsRecord]
    blowup: BlowupReport | None = None

    def diag_array(self, column: str) -> np.ndarray:
        if column not in DIAGNOSTIC_COLUMNS:
            raise KeyError(f"unknown diagnostics column {column!r}")
        return np.array([getattr(r, column) for r in self.diagnostics], dtype=float)

    @property
    def final_time(self) -> float:
        return self.times[-1]


# ---------------------------------------------------------------------------
# operators (public, cube-based)

def heat_propagate(f: sp.SpectralVectorField, nu: float, t: float) -> sp.SpectralVectorField:
    """Exact heat flow: every mode damped by exp(-nu |k|^2 t); mean unchanged."""
    if t < 0:
        raise ValueError("heat propagation requires t >= 0")
    return sp.SpectralVectorField(f.grid, f.coeffs * np.exp(-nu * t * f.grid.k_sq))


def galerkin_rhs(u: sp.SpectralVectorField, nu: float, points: int | None = None) -> sp.SpectralVectorField:
    """Right-hand side -P_n[(u.grad)u] + nu lap(u) of the truncated system."""
    grid = u.grid
    out = -nu * grid.k_sq * u.coeffs
    adv = sp.nonlinear_term(u, points)
    out -= sp.project(adv, grid.n).coeffs
    return sp.SpectralVectorField(grid, out)


# ---------------------------------------------------------------------------
# ball-compressed state

class _BallKit:
    """Hermitian-reduced state on the Euclidean mode ball, with fast products.

    Real fields satisfy u_{-k} = conj(u_k), so the integrators carry only the
    ball modes with k3 >= 0, packed in the memory order of the rfftn
    half-spectrum.  Scatter and gather then touch contiguous-ish offsets, the
    gather realizes the Galerkin ball projection for free, and the k3 = 0
    plane is symmetrized so reconstructed cubes are exactly Hermitian.
    """

    def __init__(self, grid: sp.WavenumberGrid, points: int):
        if points < sp.min_physical_points(grid.n):
            raise ConfigError(
                f"dealias resolution {points} below threshold "
                f"{sp.min_physical_points(grid.n)} for n={grid.n}"
            )
        self.grid = grid
        self.points = int(points)
        self.scale = float(points) ** 3
        p = self.points
        ph = p // 2 + 1
        k1d = grid.k1d
        i1, i2, i3 = np.nonzero(grid.ball_mask(grid.n))
        kv1, kv2, kv3 = k1d[i1], k1d[i2], k1d[i3]

        # independent modes: k3 >= 0, ordered by half-grid memory offset
        keep = kv3 >= 0
        j1, j2, j3 = i1[keep], i2[keep], i3[keep]
        q1, q2, q3 = kv1[keep], kv2[keep], kv3[keep]
        wrap = (k1d % p).astype(np.intp)
        offsets = (wrap[j1] * p + wrap[j2]) * ph + q3
        order = np.argsort(offsets, kind="stable")
        self.offsets = offsets[order]
        self.cube_pos = (j1[order], j2[order], j3[order])
        q1, q2, q3 = q1[order], q2[order], q3[order]
        self.n_modes = q1.size
        self.k1 = q1.astype(np.float64)
        self.k2 = q2.astype(np.float64)
        self.k3 = q3.astype(np.float64)
        self.k_sq = self.k1**2 + self.k2**2 + self.k3**2
        self.k_norm = np.sqrt(self.k_sq)
        # Plancherel weights: conjugate partners of k3 > 0 modes are implicit
        self.weight = np.where(q3 > 0, 2.0, 1.0)
        self.zero_pos = int(np.nonzero(self.k_sq == 0.0)[0][0])

        # remaining ball modes (k3 < 0): reconstructed as conj of their mirror
        neg = ~keep
        self.cube_neg = (i1[neg], i2[neg], i3[neg])
        mirror_off = (wrap[(-kv1[neg]) % grid.m] * p + wrap[(-kv2[neg]) % grid.m]) * ph + (
            -kv3[neg]
        )
        self.neg_source = np.searchsorted(self.offsets, mirror_off).astype(np.intp)

        # k3 = 0 plane: both members of each conjugate pair are stored
        plane = np.nonzero(q3 == 0)[0]
        plane_off = (wrap[(-q1[plane]) % grid.m] * p + wrap[(-q2[plane]) % grid.m]) * ph
        self.plane = plane
        self.plane_mirror = np.searchsorted(self.offsets, plane_off).astype(np.intp)

        # persistent scatter buffer: the scatter always writes the same
        # offsets, so the zero background never needs refreshing
        self._half6 = np.zeros((6, p * p * ph), dtype=np.complex128)
        self._quad = np.empty((4, p, p, p), dtype=np.float64)
        self._curl = np.empty((3, self.n_modes), dtype=np.complex128)
        self._jk1s = 1j * self.scale * self.k1
        self._jk2s = 1j * self.scale * self.k2
        self._jk3s = 1j * self.scale * self.k3

    def from_cube(self, coeffs: np.ndarray) -> np.ndarray:
        """Pack the independent ball modes of a (Hermitian) coefficient cube."""
        return np.ascontiguousarray(coeffs[(Ellipsis, *self.cube_pos)])

    def to_cube(self, state: np.ndarray) -> np.ndarray:
        """Reconstruct the coefficient cube; exactly Hermitian by construction."""
        m = self.grid.m
        cube = np.zeros(state.shape[:-1] + (m, m, m), dtype=np.complex128)
        cube[(Ellipsis, *self.cube_pos)] = state
        cube[(Ellipsis, *self.cube_neg)] = np.conj(state[..., self.neg_source])
        return cube

    def symmetrize_plane(self, state: np.ndarray) -> np.ndarray:
        """Project the k3 = 0 plane onto its Hermitian part, in place."""
        pl = state[..., self.plane]
        mirrored = np.conj(state[..., self.plane_mirror])
        state[..., self.plane] = 0.5 * (pl + mirrored)
        return state

    def inverse(self, state: np.ndarray) -> np.ndarray:
        """Collocation values of the ball-supported field."""
        p = self.points
        lead = state.shape[:-1]
        half = np.zeros(lead + (p * p * (p // 2 + 1),), dtype=np.complex128)
        half[..., self.offsets] = state * self.scale
        half = half.reshape(lead + (p, p, p // 2 + 1))
        axes = tuple(range(len(lead), len(lead) + 3))
        return _fft.irfftn(half, s=(p, p, p), axes=axes, workers=sp._WORKERS)

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Independent ball modes of collocation values (implicit projection)."""
        lead = values.shape[:-3]
        axes = tuple(range(len(lead), len(lead) + 3))
        half = _fft.rfftn(values, axes=axes, workers=sp._WORKERS)
        out = half.reshape(lead + (-1,))[..., self.offsets]
        self.symmetrize_plane(out)
        out /= self.scale
        return out

    def advection(self, state: np.ndarray) -> np.ndarray:
        """Ball projection of (u.grad)u in rotational form.

        The P^3 transform normalization cancels between the inverse and forward
        legs up to one factor, which is applied to the small gathered spectrum.
        Uses the kit's persistent buffers, so concurrent calls on one kit are
        not allowed; every integration frame owns its own kit.
        """
        p = self.points
        shape = (p, p, p)
        half6 = self._half6.reshape(6, p, p, p // 2 + 1)
        self._half6[:3, self.offsets] = state
        curl = self._curl
        np.multiply(self.k2, state[2], out=curl[0])
        curl[0] -= self.k3 * state[1]
        np.multiply(self.k3, state[0], out=curl[1])
        curl[1] -= self.k1 * state[2]
        np.multiply(self.k1, state[1], out=curl[2])
        curl[2] -= self.k2 * state[0]
        curl *= 1j
        self._half6[3:, self.offsets] = curl
        u = _fft.irfftn(half6[:3], s=shape, axes=(1, 2, 3), workers=sp._WORKERS)
        w = _fft.irfftn(half6[3:], s=shape, axes=(1, 2, 3), workers=sp._WORKERS)
        quad = self._quad
        np.einsum("cijk,cijk->ijk", u, u, out=quad[0])
        quad[0] *= 0.5
        np.multiply(u[1], w[2], out=quad[1])
        quad[1] -= u[2] * w[1]
        np.multiply(u[2], w[0], out=quad[2])
        quad[2] -= u[0] * w[2]
        np.multiply(u[0], w[1], out=quad[3])
        quad[3] -= u[1] * w[0]
        spec = _fft.rfftn(quad, axes=(1, 2, 3), workers=sp._WORKERS).reshape(4, -1)[
            :, self.offsets
        ]
        self.symmetrize_plane(spec)
        h_hat = spec[0]
        out = np.multiply(spec[1:], -self.scale)
        out[0] += self._jk1s * h_hat
        out[1] += self._jk2s * h_hat
        out[2] += self._jk3s * h_hat
        return out

    def l2_norm(self, state: np.ndarray) -> float:
        mag = (state.real**2 + state.imag**2).sum(axis=0)
        return math.sqrt(sp.VOLUME * float(np.einsum("i,i->", mag, self.weight)))


# ---------------------------------------------------------------------------
# exponential integrators

def _phi_functions(z: np.ndarray):
    """phi_1, phi_2, phi_3 for real nonpositive z, with a series branch near 0."""
    z = np.asarray(z, dtype=np.float64)
    small = np.abs(z) < 0.35
    safe = np.where(small, 1.0, z)
    em1 = np.expm1(z)
    p1 = em1 / safe
    p2 = (em1 - z) / (safe * safe)
    p3 = (em1 - z - 0.5 * z * z) / (safe * safe * safe)
    # phi_m(z) = sum_j z^j / (j+m)!  (16 terms: far below double round-off at |z|<0.35)
    terms = 16
    for m, target in ((1, p1), (2, p2), (3, p3)):
        acc = np.zeros_like(z)
        for j in range(terms, -1, -1):
            acc = acc * z + 1.0 / math.factorial(j + m)
        np.copyto(target, acc, where=small)
    return p1, p2, p3


class _ExponentialStepper:
    """Multiplier tables for one (linear operator, step size, scheme) triple."""

    def __init__(self, lin: np.ndarray, h: float, scheme: str):
        z = h * lin
        self.h = h
        self.scheme = scheme
        self.E = np.exp(z)
        self.E2 = np.exp(0.5 * z)
        if scheme == "etdrk4":
            p1h, _, _ = _phi_functions(0.5 * z)
            p1, p2, p3 = _phi_functions(z)
            self.Q = 0.5 * h * p1h
            self.f1 = h * (p1 - 3.0 * p2 + 4.0 * p3)
            self.f2 = h * (p2 - 2.0 * p3)
            self.f3 = h * (4.0 * p3 - p2)

    def step(self, c, nonlin):
        """Advance plain state coefficients by one step.

        The arrays produced by `nonlin` are consumed in place; the input state
        is never modified.
        """
        if nonlin is None:
            return self.E * c
        if self.scheme == "etdrk4":
            e2c = self.E2 * c
            n1 = nonlin(c)
            a = self.Q * n1
            a += e2c
            n2 = nonlin(a)
            b = self.Q * n2
            b += e2c
            n3 = nonlin(b)
            a *= self.E2  # a becomes E2 * (stage a)
            cc = np.multiply(n3, 2.0, out=b)  # b is dead, reuse its storage
            cc -= n1
            cc *= self.Q
            cc += a
            n4 = nonlin(cc)
            out = self.E * c
            n1 *= self.f1
            out += n1
            n2 += n3
            n2 *= self.f2
            n2 *= 2.0
            out += n2
            n4 *= self.f3
            out += n4
            return out
        h = self.h
        k1 = nonlin(c)
        s1 = 0.5 * h * k1
        s1 += c
        s1 *= self.E2
        k2 = nonlin(s1)
        s2 = 0.5 * h * k2
        e2c = self.E2 * c
        s2 += e2c
        k3 = nonlin(s2)
        s3 = h * self.E2 * k3
        s3 += self.E * c
        k4 = nonlin(s3)
        out = self.E * c
        k1 *= (h / 6.0) * self.E
        out += k1
        k2 += k3
        k2 *= (h / 3.0) * self.E2
        out += k2
        k4 *= h / 6.0
        out += k4
        return out

    def step_split(self, v, w, nonlin):
        """Advance the (heat part, zero-data remainder) pair by one step.

        v evolves by the exact heat multiplier; w sees the advection of the
        recombined field u = v + w evaluated at the stage times.
        """
        vh = self.E2 * v
        vE = self.E * v
        if nonlin is None:
            return vE, self.E * w
        if self.scheme == "etdrk4":
            e2w = self.E2 * w
            n1 = nonlin(v + w)
            a = e2w + self.Q * n1
            n2 = nonlin(vh + a)
            b = e2w + self.Q * n2
            n3 = nonlin(vh + b)
            cc = self.E2 * a + self.Q * (2.0 * n3 - n1)
            n4 = nonlin(vE + cc)
            w_next = self.E * w + self.f1 * n1 + 2.0 * self.f2 * (n2 + n3) + self.f3 * n4
            return vE, w_next
        h = self.h
        k1 = nonlin(v + w)
        k2 = nonlin(vh + self.E2 * (w + 0.5 * h * k1))
        k3 = nonlin(vh + self.E2 * w + 0.5 * h * k2)
        k4 = nonlin(vE + self.E * w + h * self.E2 * k3)
        w_next = self.E * w + (h / 6.0) * (self.E * k1 + 2.0 * self.E2 * (k2 + k3) + k4)
        return vE, w_next


class _RunFrame:
    """Internal integration frame, handling the optional nu=1 normalization.

    With normalization on, the run advances w(x, tau) = u(x, tau/nu)/nu at unit
    viscosity and maps every emitted state back to the physical frame, so all
    outputs are directly comparable with an unnormalized run.
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.grid = config.make_grid()
        self.kit = _BallKit(self.grid, config.resolved_dealias())
        self.normalize = config.normalize_viscosity and config.nu != 1.0
        self.nu_int = 1.0 if self.normalize else config.nu
        self.t_scale = config.nu if self.normalize else 1.0  # tau = t_scale * t
        self.amp = config.nu if self.normalize else 1.0      # u = amp * state

    def to_internal(self, u0: sp.SpectralVectorField) -> np.ndarray:
        return self.kit.from_cube(u0.coeffs) / self.amp

    def to_physical_field(self, flat: np.ndarray) -> sp.SpectralVectorField:
        return sp.SpectralVectorField(self.grid, self.kit.to_cube(self.amp * flat))

    def physical_l2(self, flat: np.ndarray) -> float:
        return self.amp * self.kit.l2_norm(flat)

    def nonlinear_fn(self):
        if not self.config.nonlinear:
            return None
        kit = self.kit

        def nonlin(c):
            out = kit.advection(c)
            np.negative(out, out)
            return out

        return nonlin

    def stepper(self, h_internal: float) -> _ExponentialStepper:
        return _ExponentialStepper(-self.nu_int * self.kit.k_sq, h_internal, self.config.integrator)


def _step_plan(t_end: float, dt: float) -> list[float]:
    """Step sizes covering [0, t_end]; a shorter final step if dt does not divide it."""
    if t_end == 0.0:
        return []
    n_full = int(math.floor(t_end / dt + 1e-9))
    rem = t_end - n_full * dt
    steps = [dt] * n_full
    if rem > 1e-9 * dt:
        steps.append(rem)
    return steps


class _Emitter:
    """Shared cadence/blowup logic for the three integration drivers."""

    def __init__(self, frame: _RunFrame, n_trajectories: int):
        cfg = frame.config
        self.frame = frame
        self.diags = [
            _DiagnosticsAccumulator(frame.grid, cfg.resolved_linf_points())
            for _ in range(n_trajectories)
        ]
        self.times: list[float] = []
        self.snaps: list[list[sp.SpectralVectorField]] = [[] for _ in range(n_trajectories)]
        self.blowup: BlowupReport | None = None
        self._floor = None
        self._pre_limit = None

    def start(self, states):
        fields = [self.frame.to_physical_field(s) for s in states]
        for d, f in zip(self.diags, fields):
            d.emit(0.0, f)
        self.times.append(0.0)
        for snaps, f in zip(self.snaps, fields):
            snaps.append(f)
        self._floor = max(max(self.frame.physical_l2(s) for s in states), 1e-30)
        # cheap per-step prefilter: sum |z_k|^2 without the Hermitian weights
        # under-counts the squared norm by at most a factor 2, so this limit
        # can only over-trigger, never miss a true ceiling crossing
        ceiling = self.frame.config.blowup_factor * self._floor
        self._pre_limit = ceiling**2 / (2.0 * sp.VOLUME * self.frame.amp**2)
        return fields

    def check_blowup(self, t: float, states) -> bool:
        cfg = self.frame.config
        for s in states:
            # plain ufunc reduction: BLAS kernels here would leave their worker
            # threads spinning into the next FFT call and starve its pool
            v = s.view(np.float64)
            proxy = float(np.einsum("ij,ij->", v, v))
            if proxy <= self._pre_limit:
                continue
            # suspicion confirmed the expensive way: NaN/Inf also land here
            # because the comparison above is false for them
            if not np.all(np.isfinite(s)):
                self.blowup = BlowupReport(float(t), "non-finite coefficients", float("inf"))
                return True
            l2 = self.frame.physical_l2(s)
            if l2 > cfg.blowup_factor * self._floor:
                self.blowup = BlowupReport(float(t), "L2 ceiling exceeded", float(l2))
                return True
        return False

    def emit(self, step_index: int, last: bool, t: float, states) -> list | None:
        cfg = self.frame.config
        emit_diag = last or ((step_index + 1) % cfg.diag_every == 0)
        emit_snap = last or (
            cfg.snapshot_every and (step_index + 1) % cfg.snapshot_every == 0
        )
        if not (emit_diag or emit_snap):
            return None
        fields = [self.frame.to_physical_field(s) for s in states]
        if emit_diag:
            for d, f in zip(self.diags, fields):
                d.emit(t, f)
        if emit_snap:
            self.times.append(t)
            for snaps, f in zip(self.snaps, fields):
                snaps.append(f)
        return fields

    def trajectory(self, i: int) -> TrajectoryHandle:
        return TrajectoryHandle(
            self.frame.config,
            self.frame.grid,
            list(self.times),
            self.snaps[i],
            self.diags[i].records,
            self.blowup,
        )


def _drive(frame: _RunFrame, advance, states) -> _Emitter:
    """Run the step loop with cadence emission and blowup checks."""
    cfg = frame.config
    emitter = _Emitter(frame, len(states))
    emitter.start(states)
    steps = _step_plan(cfg.t_end, cfg.dt)
    stepper = frame.stepper(frame.t_scale * cfg.dt)
    t_int = 0.0
    for i, h_phys in enumerate(steps):
        h_int = h_phys * frame.t_scale
        if abs(h_int - stepper.h) > 1e-15 * max(h_int, stepper.h):
            stepper = frame.stepper(h_int)
        states = advance(stepper, states)
        t_int += h_int
        t = t_int / frame.t_scale
        if emitter.check_blowup(t, states):
            break
        emitter.emit(i, i == len(steps) - 1, t, states)
    return emitter


def integrate(config: RunConfig, u0: sp.SpectralVectorField | None = None) -> TrajectoryHandle:
    """Advance the ball-projected data to t_end, recording diagnostics.

    Deterministic for a fixed config (the seed feeds the initial data).  The
    detector stops the run on non-finite coefficients or when the L2 norm
    exceeds blowup_factor times its initial value, returning the trajectory up
    to the last valid time together with a BlowupReport.
    """
    frame = _RunFrame(config)
    if u0 is None:
        u0 = build_initial_data(config, frame.grid)
    elif u0.grid.n != frame.grid.n:
        raise ConfigError(f"initial field has n={u0.grid.n}, config expects {config.n}")
    nonlin = frame.nonlinear_fn()
    state = frame.to_internal(u0)

    def advance(stepper, states):
        return (stepper.step(states[0], nonlin),)

    emitter = _drive(frame, advance, (state,))
    return emitter.trajectory(0)


def split_evolve(
    config: RunConfig, u0: sp.SpectralVectorField | None = None
) -> tuple[TrajectoryHandle, TrajectoryHandle]:
    """Evolve the heat part v and the zero-data remainder w separately.

    v is the exact heat flow of the projected data; w solves
    dw/dt = -P_n[((v+w).grad)(v+w)] + nu lap(w) with w(0) = 0.  The sum v + w
    reproduces `integrate` exactly up to round-off.
    """
    frame = _RunFrame(config)
    if u0 is None:
        u0 = build_initial_data(config, frame.grid)
    nonlin = frame.nonlinear_fn()
    v = frame.to_internal(u0)
    w = np.zeros_like(v)

    def advance(stepper, states):
        return stepper.step_split(states[0], states[1], nonlin)

    emitter = _drive(frame, advance, (v, w))
    return emitter.trajectory(0), emitter.trajectory(1)


@dataclass(frozen=True)
class DifferenceRecord:
    """Norms of the difference of two lockstep trajectories at one time."""

    t: float
    semi_0_5: float
    l2: float
    mom_x: float
    mom_y: float
    mom_z: float


def paired_integrate(
    config: RunConfig,
    u0_a: sp.SpectralVectorField,
    u0_b: sp.SpectralVectorField,
) -> tuple[TrajectoryHandle, TrajectoryHandle, list[DifferenceRecord]]:
    """Advance two initial fields with identical stepping, tracing their difference."""
    frame = _RunFrame(config)
    nonlin = frame.nonlinear_fn()
    a = frame.to_internal(u0_a)
    b = frame.to_internal(u0_b)
    kit = frame.kit
    diffs: list[DifferenceRecord] = []

    def record_diff(t, sa, sb):
        d = frame.amp * (sa - sb)
        mag = (d.real**2 + d.imag**2).sum(axis=0)
        semi05 = math.sqrt(sp.VOLUME * float(np.einsum("i,i->", mag, kit.weight * kit.k_norm)))
        l2 = math.sqrt(sp.VOLUME * float(np.einsum("i,i->", mag, kit.weight)))
        mom = sp.VOLUME * d[:, kit.zero_pos].real
        diffs.append(
            DifferenceRecord(
                t=float(t),
                semi_0_5=semi05,
                l2=l2,
                mom_x=float(mom[0]),
                mom_y=float(mom[1]),
                mom_z=float(mom[2]),
            )
        )

    def advance(stepper, states):
        return (stepper.step(states[0], nonlin), stepper.step(states[1], nonlin))

    cfg = config
    emitter = _Emitter(frame, 2)
    emitter.start((a, b))
    record_diff(0.0, a, b)
    steps = _step_plan(cfg.t_end, cfg.dt)
    stepper = frame.stepper(frame.t_scale * cfg.dt)
    t_int = 0.0
    for i, h_phys in enumerate(steps):
        h_int = h_phys * frame.t_scale
        if abs(h_int - stepper.h) > 1e-15 * max(h_int, stepper.h):
            stepper = frame.stepper(h_int)
        a, b = advance(stepper, (a, b))
        t_int += h_int
        t = t_int / frame.t_scale
        if emitter.check_blowup(t, (a, b)):
            break
        last = i == len(steps) - 1
        if last or (i + 1) % cfg.diag_every == 0:
            record_diff(t, a, b)
        emitter.emit(i, last, t, (a, b))
    return emitter.trajectory(0), emitter.trajectory(1), diffs


# ---------------------------------------------------------------------------
# parabolic rescaling

def dilate_field(f: sp.SpectralVectorField, lam: int) -> sp.SpectralVectorField:
    """The rescaled field lam * u(lam x): mode k of u becomes mode lam*k."""
    if lam < 1:
        raise ValueError("the scaling factor must be a positive integer")
    if lam == 1:
        return f
    n_big = lam * f.grid.n
    grid_big = sp.get_grid(n_big)
    out_nat = np.zeros((3, grid_big.m, grid_big.m, grid_big.m), dtype=np.complex128)
    src_nat = np.fft.fftshift(f.coeffs, axes=(1, 2, 3))
    sel = slice(0, 2 * n_big + 1, lam)
    out_nat[:, sel, sel, sel] = lam * src_nat
    return sp.SpectralVectorField(grid_big, np.fft.ifftshift(out_nat, axes=(1, 2, 3)))


def _uniform_snapshot_spacing(times: list[float]) -> float:
    if len(times) < 3:
        raise CadenceError("need at least three snapshots for a centered time derivative")
    gaps = np.diff(np.asarray(times))
    if np.max(np.abs(gaps - gaps[0])) > 1e-9 * gaps[0]:
        raise CadenceError("snapshots are not uniformly spaced")
    return float(gaps[0])


def scaling_residual(traj: TrajectoryHandle, lam: int = 1) -> float:
    """Max L2 residual of the equation on the parabolically rescaled trajectory.

    Builds u_lam(x, s) = lam u(lam x, lam^2 s) from the stored snapshots (an
    integer lam maps the torus to itself), takes the time derivative by a
    centered second-order difference on the snapshot cadence, evaluates the
    unprojected advection term and the diffusion term spectrally, and returns
    the largest L2 norm of the combination over the interior sample times.
    """
    if lam * traj.grid.n > 128:
        raise ValueError(f"lam={lam} would need truncation {lam * traj.grid.n} > 128")
    dt_snap = _uniform_snapshot_spacing(traj.times)
    ds = dt_snap / (lam * lam)
    nu = traj.config.nu
    include_advection = traj.config.nonlinear

    big = [dilate_field(f, lam) for f in traj.snapshots]
    grid_big = big[0].grid
    n_big = grid_big.n
    points = _fft.next_fast_len(4 * n_big + 2, real=True)
    cell = (2.0 * np.pi / points) ** 3

    worst = 0.0
    for j in range(1, len(big) - 1):
        dudt = (big[j + 1].coeffs - big[j - 1].coeffs) / (2.0 * ds)
        linear = dudt + nu * grid_big.k_sq * big[j].coeffs
        resid = sp._inverse_transform(linear, grid_big, points)
        if include_advection:
            u_phys = sp._inverse_transform(big[j].coeffs, grid_big, points)
            for comp in range(3):
                grad = sp._inverse_transform(
                    sp.gradient_of_scalar(grid_big, big[j].coeffs[comp]), grid_big, points
                )
                resid[comp] += (
                    u_phys[0] * grad[0] + u_phys[1] * grad[1] + u_phys[2] * grad[2]
                )
        norm = math.sqrt(float(np.sum(resid * resid)) * cell)
        worst = max(worst, norm)
    return worst
