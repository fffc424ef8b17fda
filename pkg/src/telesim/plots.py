"""Figure rendering for the command-line report path.

Every CLI command that writes delimited output also renders the matching
figure next to it.  All figures go through the Agg backend and carry no
timestamps, so reruns are byte-stable.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_KW = {"dpi": 130, "bbox_inches": "tight", "metadata": {"Software": "telesim"}}


def _finish(fig, path):
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def state_fidelity_figure(path, labels, fidelities, errors=None, bound=2.0 / 3.0):
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(len(labels))
    ax.bar(x, fidelities, yerr=errors, capsize=3, color="#3b6ea5", width=0.6)
    ax.axhline(bound, color="crimson", ls="--", lw=1.2,
               label=f"classical limit {bound:.3f}")
    ax.set_xticks(x, labels)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("input state")
    ax.set_ylabel("teleportation fidelity")
    ax.legend(loc="lower right")
    _finish(fig, path)


def attenuation_figure(path, db, rate_hz, visibility, model_rate=None,
                       model_vis=None, vis_sigma=None):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
    ax1.semilogy(db, rate_hz, "o", color="#3b6ea5", label="Monte-Carlo")
    if model_rate is not None:
        ax1.semilogy(db, model_rate, "-", color="#1f3d5c", label="model")
    ax1.set_ylabel("four-fold rate (Hz)")
    ax1.legend()
    ax2.errorbar(db, visibility, yerr=vis_sigma, fmt="s", color="#a53b3b",
                 label="Monte-Carlo")
    if model_vis is not None:
        ax2.plot(db, model_vis, "-", color="#5c1f1f", label="model")
    ax2.axhline(1.0 / 3.0, color="k", ls="--", lw=1.0, label="classical 1/3")
    ax2.set_xlabel("link attenuation (dB)")
    ax2.set_ylabel("visibility")
    ax2.set_ylim(-0.05, 1.05)
    ax2.legend()
    _finish(fig, path)


def window_figure(path, tau_ns, visibility, sigma_violation, vis_sigma=None):
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 7), sharex=True)
    ax1.errorbar(tau_ns, visibility, yerr=vis_sigma, fmt="o-", color="#3b6ea5")
    ax1.axhline(1.0 / 3.0, color="k", ls="--", lw=1.0, label="classical 1/3")
    ax1.set_ylabel("visibility")
    ax1.legend()
    ax2.plot(tau_ns, sigma_violation, "s-", color="#a53b3b")
    ax2.set_xlabel("coincidence window (ns)")
    ax2.set_ylabel("bound violation (sigma)")
    _finish(fig, path)


def chi_figure(path, chi, title="process matrix (real part)"):
    fig = plt.figure(figsize=(6, 5))
    ax = fig.add_subplot(projection="3d")
    labels = ["I", "X", "Y", "Z"]
    xx, yy = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    xx, yy = xx.ravel(), yy.ravel()
    vals = np.real(np.asarray(chi)).ravel()
    ax.bar3d(xx - 0.35, yy - 0.35, np.zeros_like(vals), 0.7, 0.7, vals,
             color="#3b6ea5", alpha=0.85, shade=True)
    ax.set_xticks(range(4), labels)
    ax.set_yticks(range(4), labels)
    ax.set_zlim(min(0.0, vals.min()), max(1.0, vals.max()))
    ax.set_title(title)
    _finish(fig, path)


def ellipsoid_figure(path, points):
    fig = plt.figure(figsize=(6, 6))
    ax = fig.add_subplot(projection="3d")
    u = np.linspace(0, 2 * np.pi, 24)
    v = np.linspace(0, np.pi, 16)
    ax.plot_wireframe(np.outer(np.cos(u), np.sin(v)),
                      np.outer(np.sin(u), np.sin(v)),
                      np.outer(np.ones_like(u), np.cos(v)),
                      color="gray", lw=0.3, alpha=0.5)
    pts = np.asarray(points)
    ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=4, color="#3b6ea5", alpha=0.7)
    for setter in (ax.set_xlim, ax.set_ylim, ax.set_zlim):
        setter(-1.05, 1.05)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.set_zlabel("z")
    ax.set_title("Bloch sphere image under the channel")
    _finish(fig, path)


def density_figure(path, rho, title="reconstructed state"):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(7, 3.2))
    m = np.asarray(rho)
    for ax, part, name in ((ax1, m.real, "Re"), (ax2, m.imag, "Im")):
        im = ax.imshow(part, vmin=-1, vmax=1, cmap="RdBu_r")
        ax.set_xticks([0, 1], ["H", "V"])
        ax.set_yticks([0, 1], ["H", "V"])
        ax.set_title(f"{name}(rho)")
        for i in range(2):
            for j in range(2):
                ax.text(j, i, f"{part[i, j]:.3f}", ha="center", va="center",
                        fontsize=9)
    fig.colorbar(im, ax=(ax1, ax2), shrink=0.8)
    fig.suptitle(title)
    _finish(fig, path)
