"""Figure rendering for experiment reports.

All plots go straight to PNG files next to the delimited output; nothing is
shown interactively.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def trace_plot(path, times, curves: dict, title: str, ylabel: str, logy: bool = False):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, values in curves.items():
        ax.plot(times, values, label=label, lw=1.4)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def bound_plot(path, report, logy: bool = True):
    """Left- and right-hand traces of one estimate check."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(report.times, report.lhs_trace, label="left side", lw=1.6)
    ax.plot(report.times, report.rhs_trace, label="right side", lw=1.6, ls="--")
    if logy and np.all(np.asarray(report.rhs_trace) > 0):
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_title(f"{report.name}: {report.verdict} (max ratio {report.max_ratio:.3g})")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def convergence_plot(path, ns, errors: dict, title: str):
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for label, errs in errors.items():
        ax.semilogy(ns, errs, "o-", label=label)
    ax.set_xlabel("truncation order n")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def sweep_plot(path, deltas, sups, order: float):
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    ax.loglog(deltas, sups, "o-", label="sup_t ||u - v||_{1/2}")
    ref = np.asarray(deltas) * sups[0] / deltas[0]
    ax.loglog(deltas, ref, "k:", label="slope 1 reference")
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("response")
    ax.set_title(f"continuous dependence, fitted order {order:.3f}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def spectrum_plot(path, series, title: str):
    """Shell-amplitude spectra: series = [(label, radii, amplitudes), ...]."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, radii, amps in series:
        keep = amps > 0
        ax.semilogy(radii[keep], amps[keep], "o-", ms=3, label=label)
    ax.set_xlabel("|k| shell")
    ax.set_ylabel("rms amplitude")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    _finish(fig, path)


def residual_plot(path, labels, values, title: str):
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    ax.bar(labels, values)
    ax.set_yscale("log")
    ax.set_ylabel("L2 residual")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    _finish(fig, path)
