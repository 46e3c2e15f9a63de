"""Figure rendering for CLI reports.

Every plot is written to a file next to its CSV/JSON data (headless Agg
backend); nothing here is interactive. Figures are a convenience view of the
delimited output, which remains the canonical artifact.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_discrepancy_per_policy(values, path, title="lambda-discrepancy per policy"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    values = np.asarray(values, dtype=float)
    ax.plot(np.arange(len(values)), np.sort(values), ".", ms=4)
    ax.set_xlabel("policy (sorted)")
    ax.set_ylabel("discrepancy")
    ax.set_yscale("symlog", linthresh=1e-10)
    ax.set_title(title)
    return _finish(fig, path)


def plot_sweep_curves(curves: dict[str, tuple[np.ndarray, np.ndarray]], path,
                      xlabel="mix", title="discrepancy sweep"):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, (xs, ys) in curves.items():
        ax.plot(xs, ys, "o-", ms=3, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("discrepancy")
    ax.set_title(title)
    ax.legend()
    return _finish(fig, path)


def plot_optimization_traces(traces: dict[str, np.ndarray], path,
                             ylabel="objective", title="optimization trace",
                             logy=True):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, trace in traces.items():
        ax.plot(np.arange(len(trace)), trace, lw=1, label=label)
    ax.set_xlabel("step")
    ax.set_ylabel(ylabel)
    if logy:
        ax.set_yscale("symlog", linthresh=1e-12)
    ax.set_title(title)
    if len(traces) <= 12:
        ax.legend(fontsize=7)
    return _finish(fig, path)


def plot_sample_check(closed_q, sampled_q, path, title="closed-form vs sampled Q"):
    fig, ax = plt.subplots(figsize=(4.2, 4.2))
    c = np.asarray(closed_q).ravel()
    s = np.asarray(sampled_q).ravel()
    ok = np.isfinite(s)
    ax.plot(c[ok], s[ok], "o", ms=4)
    lims = [min(c[ok].min(), s[ok].min()), max(c[ok].max(), s[ok].max())]
    ax.plot(lims, lims, "k--", lw=1)
    ax.set_xlabel("closed form")
    ax.set_ylabel("sampled")
    ax.set_title(title)
    return _finish(fig, path)
