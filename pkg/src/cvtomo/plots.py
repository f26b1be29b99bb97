"""Figure rendering for campaign reports.

Everything draws on the Agg backend and writes straight to files; nothing
here opens a window.  The functions take plain arrays plus the campaign
curve objects, so they stay usable from scripts as well as the CLI.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_error_curves(path, curves) -> None:
    """Log-log squared-error-vs-copies panels, one per modality.

    ``curves`` is an iterable of objects with attributes ``modality``,
    ``checkpoints``, ``trial_errors`` (trials x checkpoints), ``mean_errors``
    and ``crlb``.  Individual trials are drawn faintly under the mean and
    the bound.
    """
    curves = list(curves)
    fig, axes = plt.subplots(
        1, len(curves), figsize=(5.5 * len(curves), 4.2), squeeze=False
    )
    for ax, curve in zip(axes[0], curves):
        ks = np.asarray(curve.checkpoints, dtype=np.float64)
        for row in np.asarray(curve.trial_errors):
            ax.plot(ks, row, color="0.75", lw=0.7, zorder=1)
        ax.plot(ks, curve.mean_errors, "o-", color="C0", ms=4, label="mean squared error")
        ax.plot(ks, curve.crlb, "--", color="C3", label="CRLB")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("copies K")
        ax.set_ylabel(r"$\|\hat\rho - \rho\|_F^2$")
        ax.set_title(curve.modality)
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_wigner_heatmap(path, xs, ps, w) -> None:
    """Diverging heatmap of W(x, p); ``w[i, j]`` belongs to (xs[i], ps[j])."""
    w = np.asarray(w)
    scale = float(np.abs(w).max()) or 1.0
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    mesh = ax.pcolormesh(
        xs, ps, w.T, cmap="RdBu_r", vmin=-scale, vmax=scale, shading="nearest"
    )
    fig.colorbar(mesh, ax=ax, label="W(x, p)")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
