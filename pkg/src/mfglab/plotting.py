"""Figures written next to the CSV output (non-interactive backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def quantization_figure(path, measure, quant):
    lo, hi = measure.support()
    pad = 0.1 * (hi - lo if hi > lo else 1.0)
    xs = np.linspace(lo - pad, hi + pad, 800)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(xs, [float(measure.cdf(x)) for x in xs], where="post", label="CDF")
    for a in quant.partition.cut_points:
        ax.axvline(float(a), color="0.7", lw=0.8)
    pts = [float(p) for p in quant.points]
    ax.plot(pts, (np.arange(len(pts)) + 0.5) / len(pts), "o", label="quantization points")
    ax.set_xlabel("x")
    ax.set_ylabel("m((-inf, x])")
    ax.legend(loc="lower right")
    _save(fig, path)


def equilibrium_figure(path, report):
    s = np.array(report.samples)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(s[:, 0], s[:, 1], lw=1.0, label="F(sigma)")
    ax.axhline(0, color="0.5", lw=0.8)
    for r, _ in report.roots:
        ax.plot([r], [0], "o", color="C3")
    for j in report.jump_crossings:
        ax.axvline(j, color="C2", ls="--", lw=0.8)
    ax.set_xlabel("sigma")
    ax.set_ylabel("F")
    ax.legend()
    _save(fig, path)


def nplayer_figure(path, points, patterns):
    pts = np.array([float(p) for p in points])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k, (name, sig) in enumerate(patterns.items()):
        ax.plot(pts, np.array(sig, dtype=float) + 0.04 * k, "o", ms=4, label=name)
    ax.set_xlabel("player position at the horizon")
    ax.set_ylabel("sigma_i (patterns offset)")
    ax.legend()
    _save(fig, path)


def pde_figure(path, snapshots):
    g = snapshots[0].grid
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if g.ndim == 1:
        x = g.centers()
        for s in snapshots:
            ax.plot(x, s.u, lw=1.0, label=f"t = {s.t:.3g}")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.legend(fontsize=7)
    else:
        (a0, b0, _), (a1, b1, _) = g.axes
        im = ax.imshow(snapshots[-1].u.T, origin="lower", extent=(a0, b0, a1, b1), aspect="auto")
        fig.colorbar(im, ax=ax)
        ax.set_xlabel("x_1")
        ax.set_ylabel("x_2")
        ax.set_title(f"t = {snapshots[-1].t:.3g}")
    _save(fig, path)


def selection_figure(path, state, means, values):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(state.grid.centers(), state.u, lw=1.0, label=f"entropy solution, t = {state.t:.3g}")
    ok = [(m, v) for m, v in zip(means, values) if v is not None]
    if ok:
        ax.plot(*zip(*ok), "o", label="selected")
    ax.set_xlabel("mean")
    ax.set_ylabel("sigma")
    ax.legend()
    _save(fig, path)


def sweep_figure(path, rows, fit):
    eps = np.array([r.eps for r in rows])
    err = np.array([r.l1 for r in rows])
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.loglog(eps, err, "o-", label="L1(entropy, viscous)")
    if fit is not None:
        ax.loglog(eps, np.exp(fit.intercept) * eps**fit.slope, "--",
                  label=f"fit slope {fit.slope:.2f}")
    ax.set_xlabel("eps")
    ax.set_ylabel("error")
    ax.legend()
    _save(fig, path)
