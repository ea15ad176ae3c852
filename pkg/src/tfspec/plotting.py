"""Figures for TF fields, ambiguity magnitudes, windows and MC z-scores.

Rendering uses the Agg canvas directly (no pyplot state) and strips the PNG
software tag, so equal inputs produce byte-identical files.
"""
import io

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .core import centered
from .io import atomic_write

__all__ = ["STYLE", "tf_figure", "ambiguity_figure", "windows_figure", "zscore_figure", "save_png"]

STYLE = {
    "font.size": 8,
    "axes.labelsize": 9,
    "axes.titlesize": 9,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "image.cmap": "viridis",
}
_SIZE = (4.2, 3.4)
_DPI = 100


def _figure():
    import matplotlib

    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=_SIZE, dpi=_DPI)
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(1, 1, 1)
    return fig, ax


def _centered_image(values):
    # reorder rows/cols so the origin sits mid-axis
    L = values.shape[0]
    order = np.argsort(centered(L), kind="stable")
    return values[np.ix_(order, order)], centered(L)[order]


def tf_figure(values, title="", alpha=0.0):
    """Real part of a TF field over (time sample, frequency bin)."""
    v = np.real(np.asarray(values))
    L = v.shape[0]
    fig, ax = _figure()
    # frequency on the vertical axis, centered so that bin 0 is mid-plot
    order = np.argsort(centered(L), kind="stable")
    img, ks = v.T[order], centered(L)[order]
    im = ax.imshow(img, origin="lower", aspect="auto", interpolation="nearest",
                   extent=(-0.5, L - 0.5, ks[0] - 0.5, ks[-1] + 0.5))
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("time sample n")
    ax.set_ylabel("frequency bin l")
    ax.set_title(f"{title} (alpha={alpha:g})" if title else f"alpha={alpha:g}")
    fig.tight_layout()
    return fig


def ambiguity_figure(values, title="|EA|"):
    """Magnitude of an ambiguity/spreading field with centered lag and Doppler."""
    img, c = _centered_image(np.abs(np.asarray(values)))
    fig, ax = _figure()
    im = ax.imshow(img.T, origin="lower", aspect="auto", interpolation="nearest",
                   extent=(c[0] - 0.5, c[-1] + 0.5, c[0] - 0.5, c[-1] + 0.5))
    fig.colorbar(im, ax=ax)
    ax.set_xlabel("lag m")
    ax.set_ylabel("Doppler k")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def windows_figure(windows, title="windows"):
    w = np.atleast_2d(np.asarray(windows))
    fig, ax = _figure()
    n = np.arange(w.shape[1])
    for j, g in enumerate(w):
        ax.plot(n, np.real(g), lw=0.9, label=f"{j + 1}")
    if w.shape[0] <= 8:
        ax.legend(fontsize=6, ncol=2, frameon=False)
    ax.set_xlabel("sample")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def zscore_figure(z_mean, z_var, limit=5.0):
    """Histogram of per-cell z-scores for the mean and variance fields."""
    fig, ax = _figure()
    zm = np.ravel(z_mean)
    zv = np.ravel(z_var)
    finite = np.concatenate([zm[np.isfinite(zm)], zv[np.isfinite(zv)]])
    top = max(limit + 1.0, float(np.abs(finite).max()) if finite.size else 0.0)
    bins = np.linspace(-top, top, 41)
    ax.hist(np.clip(zm, -top, top), bins=bins, alpha=0.6, label="mean")
    ax.hist(np.clip(zv, -top, top), bins=bins, alpha=0.6, label="variance")
    for s in (-limit, limit):
        ax.axvline(s, color="k", lw=0.8, ls="--")
    ax.legend(frameon=False)
    ax.set_xlabel("z")
    ax.set_ylabel("cells")
    fig.tight_layout()
    return fig


def save_png(fig, path):
    buf = io.BytesIO()
    fig.savefig(buf, format="png", metadata={"Software": None})
    atomic_write(path, buf.getvalue())
    return path
