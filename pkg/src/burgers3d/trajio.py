"""On-disk layout for runs: manifest, diagnostics CSV, snapshot files.

A trajectory directory contains

    manifest.json       full resolved configuration echo, code version,
                        snapshot index, and completion status
    diagnostics.csv     the diagnostics stream (fixed column order)
    snapshots/          one spectral field file per stored snapshot

Floats in CSV files are written with repr, which round-trips exactly, so
re-running an experiment with the same seed reproduces the files byte for
byte and re-reading loses nothing.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from . import __version__, fieldfile
from . import dynamics as dyn
from . import spectral as sp

DIAGNOSTICS_NAME = "diagnostics.csv"
MANIFEST_NAME = "manifest.json"
ERROR_TABLE_COLUMNS = ("n", "dt", "t", "err_l2", "err_linf", "err_h05")
REPORT_COLUMNS = ("name", "verdict", "max_ratio", "tolerance", "constants", "notes")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def write_diagnostics(path, records) -> None:
    write_csv(path, dyn.DIAGNOSTIC_COLUMNS, (r.as_row() for r in records))


def read_diagnostics(path) -> list[dyn.DiagnosticsRecord]:
    header, rows = read_csv(path)
    if tuple(header) != dyn.DIAGNOSTIC_COLUMNS:
        raise ValueError(f"{path}: unexpected diagnostics schema {header}")
    return [dyn.DiagnosticsRecord(*(float(v) for v in row)) for row in rows]


def write_reports(path, reports) -> None:
    rows = []
    for rep in reports:
        rec = rep.to_record()
        rows.append(
            (
                rec["name"],
                rec["verdict"],
                _fmt(rec["max_ratio"]),
                _fmt(rec["tolerance"]),
                '"' + rec["constants"] + '"',
                '"' + rec["notes"].replace('"', "'") + '"',
            )
        )
    write_csv(path, REPORT_COLUMNS, rows)


def write_error_table(path, rows) -> None:
    write_csv(
        path,
        ERROR_TABLE_COLUMNS,
        ((r.n, r.dt, r.t, r.err_l2, r.err_linf, r.err_h05) for r in rows),
    )


def config_to_dict(config: dyn.RunConfig) -> dict:
    d = dataclasses.asdict(config)
    d["resolved_dealias_points"] = config.resolved_dealias()
    d["resolved_linf_points"] = config.resolved_linf_points()
    return d


def config_from_dict(d: dict) -> dyn.RunConfig:
    d = dict(d)
    d.pop("resolved_dealias_points", None)
    d.pop("resolved_linf_points", None)
    init = d.pop("initial_data")
    potential = tuple((tuple(mode), float(a)) for mode, a in init.get("potential", ()))
    spec = dyn.InitialDataSpec(
        kind=init["kind"],
        mode=tuple(init["mode"]),
        amplitude=tuple(init["amplitude"]),
        band=tuple(init["band"]),
        target_h05=init["target_h05"],
        decay=init["decay"],
        scale=init["scale"],
        potential=potential,
        path=init["path"],
    )
    return dyn.RunConfig(initial_data=spec, **d)


def save_trajectory(traj: dyn.TrajectoryHandle, directory) -> None:
    os.makedirs(directory, exist_ok=True)
    snap_dir = os.path.join(directory, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    index = []
    for i, (t, field) in enumerate(zip(traj.times, traj.snapshots)):
        name = f"snap_{i:06d}.svf"
        fieldfile.save_field(os.path.join(snap_dir, name), field, name="u", time=t)
        index.append({"file": name, "t": t})
    manifest = {
        "format": "burgers3d-trajectory/1",
        "code_version": __version__,
        "config": config_to_dict(traj.config),
        "snapshots": index,
        "blowup": dataclasses.asdict(traj.blowup) if traj.blowup else None,
    }
    with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_diagnostics(os.path.join(directory, DIAGNOSTICS_NAME), traj.diagnostics)


def load_trajectory(directory) -> dyn.TrajectoryHandle:
    with open(os.path.join(directory, MANIFEST_NAME)) as fh:
        manifest = json.load(fh)
    config = config_from_dict(manifest["config"])
    records = read_diagnostics(os.path.join(directory, DIAGNOSTICS_NAME))
    times = []
    snapshots = []
    for entry in manifest["snapshots"]:
        field, _, t = fieldfile.load_field(os.path.join(directory, "snapshots", entry["file"]))
        if field.grid != config.make_grid():
            field = sp.SpectralVectorField(config.make_grid(), field.coeffs)
        times.append(t)
        snapshots.append(field)
    blowup = dyn.BlowupReport(**manifest["blowup"]) if manifest.get("blowup") else None
    return dyn.TrajectoryHandle(config, config.make_grid(), times, snapshots, records, blowup)
