"""Optional rendering of radial profiles and bound margins to image files."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_radial_profile(samples, path: str, quantity: str = "rho~") -> str:
    """Plot a RadialSamples object with its error band."""
    import numpy as np

    r = np.asarray(samples.radii, dtype=float)
    v = np.array([e.value for e in samples.values])
    err = np.array([e.error for e in samples.values])
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(r, v, "-", lw=1.2, color="tab:blue")
    ax.fill_between(r, v - err, v + err, alpha=0.25, color="tab:blue")
    ax.set_xlabel("r")
    ax.set_ylabel(quantity)
    ax.set_title(f"{quantity} radial profile")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_bound_margins(bounds, path: str) -> str:
    """Horizontal bar chart of margins for each non-skipped bound row."""
    rows = [b for b in bounds if b.get("verdict") != "skipped"]
    names = [b["name"] for b in rows]
    margins = [b["margin"] for b in rows]
    errors = [b.get("error", 0.0) for b in rows]
    fig, ax = plt.subplots(figsize=(6.0, 0.5 * max(4, len(rows))))
    colors = ["tab:red" if b["verdict"] == "violated-beyond-error"
              else "tab:green" for b in rows]
    ax.barh(names, margins, xerr=errors, color=colors, height=0.6)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("margin (lhs - rhs)")
    ax.set_title("bound margins")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def figure_paths(out_path: str) -> tuple[str, str]:
    """Image file names placed alongside a report output path."""
    base, _ = os.path.splitext(out_path)
    return base + "_profile.png", base + "_bounds.png"
