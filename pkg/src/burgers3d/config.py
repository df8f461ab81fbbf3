"""Human-editable experiment configuration files.

Grammar: INI-style sections of key = value pairs, parsed by configparser.
Recognized sections and keys (all optional; defaults in parentheses):

    [run]
    nu (1.0)                viscosity, > 0
    n (16)                  truncation order
    dt (1e-3)               time step
    t_end (0.25)            final time
    integrator (etdrk4)     etdrk4 | if_rk4
    dealias_points (auto)   'auto' or an integer >= 2n+2
    seed (0)                64-bit master seed
    diag_every (1)          steps between diagnostics records
    snapshot_every (0)      steps between stored snapshots, 0 = ends only
    linf_points (auto)      'auto' (4n) or an integer
    nonlinear (true)        advection term on/off
    normalize_viscosity (false)  integrate at unit viscosity and map back
    blowup_factor (1e6)     L2 ceiling relative to the initial value

    [initial_data]
    kind (random_band)      single_mode | random_band | gradient_potential |
                            taylor_green_like | from_file
    mode (1,0,0)            integer triple, single_mode only
    amplitude (0,1,0)       vector amplitude, single_mode only
    band (1:3)              lo:hi Euclidean shell bounds, random_band only
    target_h05 (1.0)        order-1/2 seminorm after rescaling
    decay (0.0)             spectral envelope exponent, random_band only
    scale (1.0)             amplitude, taylor_green_like only
    potential ()            k1,k2,k3:amp; k1,k2,k3:amp  cosine terms
    path ()                 snapshot file, from_file only

    [experiment]
    name                    one of EXPERIMENTS (required by `run`)
    runs (10)               number of seeded runs, where applicable
    n_sweep (8,16,32)       truncation sweep
    delta_sweep (1e-2,1e-3,1e-4)  perturbation sweep
    lambda (2)              integer rescaling factor
    eps (0.01)              smoothing probe time
    margin (0.05)           guard fraction before the existence horizon
    a1,a2,a3,cprime (1.0)   splitting-bound constants
    gronwall_c (1.0)        integrand constant for the stability bound
    h1_constant ()          optional strict constant for the growth-curve check
    tail_threshold (1e-10)  resolution admissibility cut
    linf_tolerance (1e-6)   sup-norm growth tolerance
    error_budget (1e-8)     oracle-agreement target
    ratio_limit (inf)       --strict escalation threshold for ratio-mode checks
    under_resolved (true)   include the under-resolved companion run

    [output]
    directory (out)         artifact directory
    figures (true)          render PNG figures
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

from . import dynamics as dyn

EXPERIMENTS = (
    "max_principle",
    "momentum",
    "existence_time",
    "h1_bound",
    "splitting",
    "stability",
    "colehopf_convergence",
    "smoothing",
    "scaling",
)

_RUN_KEYS = {
    "nu", "n", "dt", "t_end", "integrator", "dealias_points", "seed", "diag_every",
    "snapshot_every", "linf_points", "nonlinear", "normalize_viscosity", "blowup_factor",
}
_INIT_KEYS = {"kind", "mode", "amplitude", "band", "target_h05", "decay", "scale", "potential", "path"}
_EXP_KEYS = {
    "name", "runs", "n_sweep", "delta_sweep", "lambda", "eps", "margin",
    "a1", "a2", "a3", "cprime", "gronwall_c", "h1_constant", "tail_threshold",
    "linf_tolerance", "error_budget", "ratio_limit", "under_resolved",
}
_OUT_KEYS = {"directory", "figures"}


@dataclass
class ExperimentSpec:
    """Resolved experiment description: base run plus experiment parameters."""

    name: str
    run: dyn.RunConfig
    runs: int = 10
    n_sweep: tuple = (8, 16, 32)
    delta_sweep: tuple = (1e-2, 1e-3, 1e-4)
    lam: int = 2
    eps: float = 0.01
    margin: float = 0.05
    constants: dict = field(default_factory=lambda: {"a1": 1.0, "a2": 1.0, "a3": 1.0, "cprime": 1.0})
    gronwall_c: float = 1.0
    h1_constant: float | None = None
    tail_threshold: float = 1e-10
    linf_tolerance: float = 1e-6
    error_budget: float = 1e-8
    ratio_limit: float = math.inf
    under_resolved: bool = True
    directory: str = "out"
    figures: bool = True


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_triple(text: str) -> tuple[int, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated integers, got {text!r}")
    return tuple(int(p) for p in parts)


def _parse_vector(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(float(p) for p in parts)


def _parse_band(text: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(":")]
    if len(parts) != 2:
        raise ValueError(f"expected lo:hi, got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if lo < 0 or hi < lo:
        raise ValueError(f"band bounds must satisfy 0 <= lo <= hi, got {text!r}")
    return lo, hi


def _parse_potential(text: str) -> tuple:
    terms = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        mode_part, _, amp_part = chunk.partition(":")
        terms.append((_parse_triple(mode_part), float(amp_part)))
    return tuple(terms)


def _parse_list(text: str, conv):
    return tuple(conv(p.strip()) for p in text.split(",") if p.strip())


def validate_config(path) -> tuple[ExperimentSpec | None, list[str]]:
    """Parse and validate a config file, reporting every violation found.

    Returns (spec, []) on success or (None, errors).  The experiment name may
    be absent; the run section is still validated and `spec.name` is empty.
    """
    errors: list[str] = []
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    except configparser.Error as exc:
        return None, [f"config syntax: {exc}"]

    known = {"run": _RUN_KEYS, "initial_data": _INIT_KEYS, "experiment": _EXP_KEYS, "output": _OUT_KEYS}
    for section in parser.sections():
        if section not in known:
            errors.append(f"unknown section [{section}]")
            continue
        for key in parser[section]:
            if key not in known[section]:
                errors.append(f"unknown key {key!r} in [{section}]")

    def take(section, key, conv, default):
        if section in parser and key in parser[section]:
            raw = parser[section][key]
            try:
                return conv(raw)
            except (ValueError, TypeError) as exc:
                errors.append(f"[{section}] {key}: {exc}")
                return default
        return default

    def auto_or_int(raw):
        raw = raw.strip()
        if raw == "auto":
            return None
        return int(raw)

    run_kwargs = {
        "nu": take("run", "nu", float, 1.0),
        "n": take("run", "n", int, 16),
        "dt": take("run", "dt", float, 1e-3),
        "t_end": take("run", "t_end", float, 0.25),
        "integrator": take("run", "integrator", str.strip, "etdrk4"),
        "dealias_points": take("run", "dealias_points", auto_or_int, None),
        "seed": take("run", "seed", int, 0),
        "diag_every": take("run", "diag_every", int, 1),
        "snapshot_every": take("run", "snapshot_every", int, 0),
        "linf_points": take("run", "linf_points", auto_or_int, None),
        "nonlinear": take("run", "nonlinear", _parse_bool, True),
        "normalize_viscosity": take("run", "normalize_viscosity", _parse_bool, False),
        "blowup_factor": take("run", "blowup_factor", float, 1e6),
    }
    init_kwargs = {
        "kind": take("initial_data", "kind", str.strip, "random_band"),
        "mode": take("initial_data", "mode", _parse_triple, (1, 0, 0)),
        "amplitude": take("initial_data", "amplitude", _parse_vector, (0.0, 1.0, 0.0)),
        "band": take("initial_data", "band", _parse_band, (1.0, 3.0)),
        "target_h05": take("initial_data", "target_h05", float, 1.0),
        "decay": take("initial_data", "decay", float, 0.0),
        "scale": take("initial_data", "scale", float, 1.0),
        "potential": take("initial_data", "potential", _parse_potential, ()),
        "path": take("initial_data", "path", str.strip, ""),
    }

    name = take("experiment", "name", str.strip, "")
    if name and name not in EXPERIMENTS:
        errors.append(f"[experiment] name: unknown experiment {name!r}; see `burgers3d list`")

    # collect individual structural violations before building the dataclasses
    if run_kwargs["nu"] <= 0:
        errors.append("[run] nu: viscosity must be positive")
    if run_kwargs["n"] < 1:
        errors.append("[run] n: truncation order must be >= 1")
    if run_kwargs["dt"] <= 0:
        errors.append("[run] dt: time step must be positive")
    if run_kwargs["t_end"] < 0:
        errors.append("[run] t_end: final time must be nonnegative")
    if run_kwargs["integrator"] not in dyn.INTEGRATORS:
        errors.append(f"[run] integrator: must be one of {dyn.INTEGRATORS}")
    if run_kwargs["diag_every"] < 1:
        errors.append("[run] diag_every: must be >= 1")
    if run_kwargs["snapshot_every"] < 0:
        errors.append("[run] snapshot_every: must be >= 0")
    if run_kwargs["blowup_factor"] <= 1:
        errors.append("[run] blowup_factor: must exceed 1")
    dealias = run_kwargs["dealias_points"]
    n = run_kwargs["n"]
    if dealias is not None and n >= 1 and dealias < 2 * n + 2:
        errors.append(
            f"[run] dealias_points: {dealias} is below the minimum 2n+2 = {2 * n + 2}"
        )
    if init_kwargs["kind"] not in dyn.INITIAL_DATA_KINDS:
        errors.append(f"[initial_data] kind: must be one of {dyn.INITIAL_DATA_KINDS}")
    if init_kwargs["kind"] == "gradient_potential" and not init_kwargs["potential"]:
        errors.append("[initial_data] potential: required for gradient_potential data")
    if init_kwargs["kind"] == "from_file" and not init_kwargs["path"]:
        errors.append("[initial_data] path: required for from_file data")
    if (
        run_kwargs["dt"] > 0
        and run_kwargs["t_end"] > 0
        and run_kwargs["diag_every"] >= 1
        and run_kwargs["diag_every"] * run_kwargs["dt"] > run_kwargs["t_end"]
    ):
        errors.append(
            "[run] diag_every: diagnostics cadence exceeds the run length "
            f"({run_kwargs['diag_every']} steps of dt={run_kwargs['dt']} vs t_end={run_kwargs['t_end']})"
        )

    exp_kwargs = {
        "runs": take("experiment", "runs", int, 10),
        "n_sweep": take("experiment", "n_sweep", lambda t: _parse_list(t, int), (8, 16, 32)),
        "delta_sweep": take(
            "experiment", "delta_sweep", lambda t: _parse_list(t, float), (1e-2, 1e-3, 1e-4)
        ),
        "lam": take("experiment", "lambda", int, 2),
        "eps": take("experiment", "eps", float, 0.01),
        "margin": take("experiment", "margin", float, 0.05),
        "gronwall_c": take("experiment", "gronwall_c", float, 1.0),
        "h1_constant": take("experiment", "h1_constant", float, None),
        "tail_threshold": take("experiment", "tail_threshold", float, 1e-10),
        "linf_tolerance": take("experiment", "linf_tolerance", float, 1e-6),
        "error_budget": take("experiment", "error_budget", float, 1e-8),
        "ratio_limit": take("experiment", "ratio_limit", float, math.inf),
        "under_resolved": take("experiment", "under_resolved", _parse_bool, True),
    }
    constants = {
        "a1": take("experiment", "a1", float, 1.0),
        "a2": take("experiment", "a2", float, 1.0),
        "a3": take("experiment", "a3", float, 1.0),
        "cprime": take("experiment", "cprime", float, 1.0),
    }
    out_kwargs = {
        "directory": take("output", "directory", str.strip, "out"),
        "figures": take("output", "figures", _parse_bool, True),
    }
    if exp_kwargs["runs"] < 1:
        errors.append("[experiment] runs: must be >= 1")
    if exp_kwargs["lam"] < 1:
        errors.append("[experiment] lambda: must be a positive integer")
    if any(d <= 0 for d in exp_kwargs["delta_sweep"]):
        errors.append("[experiment] delta_sweep: perturbation sizes must be positive")
    if any(nn < 1 for nn in exp_kwargs["n_sweep"]):
        errors.append("[experiment] n_sweep: truncation orders must be >= 1")

    # oracle experiments must respect the viscosity floor of the exact solver
    if name == "colehopf_convergence":
        terms = init_kwargs["potential"] or _DEFAULT_POTENTIAL
        phi_sup_bound = sum(abs(a) for _, a in terms)
        if run_kwargs["nu"] < 0.05 * phi_sup_bound:
            errors.append(
                f"[run] nu: {run_kwargs['nu']} is below the oracle floor "
                f"0.05 * ||phi||_inf ~= {0.05 * phi_sup_bound:.3g}; the exact solution "
                "of theta would not be trustworthy"
            )

    if errors:
        return None, errors

    run = dyn.RunConfig(initial_data=dyn.InitialDataSpec(**init_kwargs), **run_kwargs)
    spec = ExperimentSpec(name=name, run=run, constants=constants, **exp_kwargs, **out_kwargs)
    return spec, []


_DEFAULT_POTENTIAL = (((1, 1, 0), 0.25), ((1, -1, 0), 0.25))


def spec_with_overrides(spec: ExperimentSpec, seed=None, out=None, name=None) -> ExperimentSpec:
    updates = {}
    if seed is not None:
        updates["run"] = replace(spec.run, seed=int(seed))
    if out is not None:
        updates["directory"] = out
    if name is not None:
        updates["name"] = name
    return replace(spec, **updates) if updates else spec
