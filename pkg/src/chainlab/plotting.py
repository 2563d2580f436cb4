"""Figures written next to the CSV reports.

All figures go through the Agg backend and are saved without a software
stamp, so identical inputs give identical PNG bytes.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "figure.figsize": (6.4, 4.4),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}

_LABEL_COLORS = {"Stable": "tab:blue", "Unstable": "tab:red", "Inconclusive": "0.6"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_trajectory(record, path, cars=None):
    """Gap histories for a few cars plus the running extrema per car."""
    n = record.n_cars
    if cars is None:
        cars = sorted({1, max(1, n // 4), max(1, n // 2), n})
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.4))
        for k in cars:
            ax1.plot(record.times, record.gaps[:, k - 1], lw=0.8, label=f"car {k}")
        ax1.set_xlabel("t")
        ax1.set_ylabel("gap $r_k$")
        ax1.legend(fontsize=8, ncol=2)
        ks = np.arange(1, n + 1)
        ax2.fill_between(ks, record.gap_min, record.gap_max, alpha=0.3, step="mid")
        ax2.plot(ks, record.gap_min, lw=0.8, label="min")
        ax2.plot(ks, record.gap_max, lw=0.8, label="max")
        ax2.axhline(0.0, color="k", lw=0.6)
        ax2.set_xlabel("car k")
        ax2.set_ylabel("gap range")
        ax2.legend(fontsize=8)
        _save(fig, path)


def plot_spectrum(re, im, mask, params, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.contourf(re, im, mask.astype(float), levels=[0.5, 1.5], colors=["tab:orange"], alpha=0.6)
        ax.contour(re, im, mask.astype(float), levels=[0.5], colors="k", linewidths=0.7)
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_xlabel("Re z")
        ax.set_ylabel("Im z")
        ax.set_title(f"spectrum, alpha={params.alpha:g}, omega={params.omega:g}")
        ax.set_aspect("equal")
        _save(fig, path)


def plot_saddle(ks, predicted, simulated, path, refined=None):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(ks, np.abs(simulated), ".", ms=3, label="simulated")
        ax.semilogy(ks, np.abs(predicted), lw=0.8, label="asymptotic")
        if refined is not None:
            ax.semilogy(ks, np.abs(refined), lw=0.8, ls="--", label="leading term")
        ax.set_xlabel("k")
        ax.set_ylabel(r"$|q_{k+1}(\mu k)|$")
        ax.legend(fontsize=8)
        _save(fig, path)


def plot_phase_diagram(cells, path):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for label, color in _LABEL_COLORS.items():
            pts = [(c.omega, c.alpha) for c in cells if c.empirical_label == label]
            if pts:
                w, a = zip(*pts)
                ax.scatter(w, a, s=14, c=color, label=label)
        w_max = max(c.omega for c in cells)
        ws = np.linspace(0.0, w_max, 50)
        ax.plot(ws, 2.0 * ws, "k-", lw=0.8, label=r"$\alpha = 2\omega$")
        ax.plot(ws, math.sqrt(2.0) * ws, "k--", lw=0.8, label=r"$\alpha = \sqrt{2}\omega$")
        ax.set_xlabel(r"$\omega$")
        ax.set_ylabel(r"$\alpha$")
        ax.set_ylim(0.0, max(c.alpha for c in cells) * 1.05)
        ax.legend(fontsize=8, loc="upper left")
        _save(fig, path)


def plot_density(times, series, law, path, labels):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for s, lab in zip(series, labels):
            ax.plot(times, s, lw=0.9, label=lab)
        ax.plot(times, law, "k--", lw=0.9, label="limit law")
        ax.set_xlabel("t")
        ax.set_ylabel("$L_N(t)$")
        ax.legend(fontsize=8)
        _save(fig, path)
