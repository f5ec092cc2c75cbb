"""PNG renderings of scenario outputs, written next to the data files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_LINESTYLES = {"effective": "--", "full": "-"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_populations(series, path, title="four-photon exchange from |f,0>"):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for label, traj in series:
        ls = _LINESTYLES.get(label, "-")
        for name, vals in traj.observables.items():
            ax.plot(traj.times * 1e6, vals, ls, label=f"{name.replace('pop_', '')} ({label})")
    ax.set_xlabel("t (us)")
    ax.set_ylabel("population")
    ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def plot_fidelity_purity(series, path):
    fig, (a1, a2) = plt.subplots(1, 2, figsize=(8, 3.4))
    for label, traj in series:
        ls = _LINESTYLES.get(label, "-")
        a1.plot(traj.times * 1e6, traj.observables["fidelity"], ls, label=label)
        a2.plot(traj.times * 1e6, traj.observables["purity"], ls, label=label)
    a1.set_ylabel("cat overlap")
    a2.set_ylabel("cavity purity")
    for ax in (a1, a2):
        ax.set_xlabel("t (us)")
        ax.set_ylim(0, 1.02)
        ax.legend(fontsize=8)
    _save(fig, path)


def plot_wigner(x, w, path, title=""):
    fig, ax = plt.subplots(figsize=(4, 3.4))
    lim = float(np.max(np.abs(w))) or 1.0
    im = ax.pcolormesh(x, x, w, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    fig.colorbar(im, ax=ax)
    ax.set_aspect("equal")
    ax.set_xlabel("Re beta")
    ax.set_ylabel("Im beta")
    ax.set_title(title, fontsize=8)
    _save(fig, path)


def plot_time_to_threshold(curves: dict, path, threshold=0.9):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for a2, pts in sorted(curves.items()):
        g = [p[0] / 1e6 for p in pts if p[1] is not None]
        t = [p[1] * 1e6 for p in pts if p[1] is not None]
        line, = ax.plot(g, t, "o-", ms=3, label=f"|alpha|^2 = {a2:g}")
        if t:
            i = int(np.argmin(t))
            ax.plot(g[i], t[i], "o", ms=8, color=line.get_color())
    ax.set_xscale("log")
    ax.set_xlabel("Gamma_fg / 2pi (MHz)")
    ax.set_ylabel(f"time to {threshold:.0%} fidelity (us)")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_error_budget(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.4))
    for k1 in sorted({r[1] for r in rows}):
        sel = [r for r in rows if r[1] == k1]
        ax.loglog([r[0] for r in sel], [max(r[5], 1e-300) for r in sel], "o-", ms=3,
                  label=f"kappa_1ph/2pi = {k1:g} Hz")
    ax.axhline(1.0, color="k", lw=0.8)
    ax.set_xlabel("delta t (s)")
    ax.set_ylabel("p2 / p1")
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_series(traj, path):
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for name, vals in traj.observables.items():
        ax.plot(traj.times * 1e6, vals, label=name)
    ax.set_xlabel("t (us)")
    ax.legend(fontsize=8)
    _save(fig, path)
