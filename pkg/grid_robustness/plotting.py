"""Static SVG rendering of sweep curves."""

from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import utils  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "grid-robustness"


def plot_sweep(
    filename: str,
    zbar: Sequence[float],
    certified: Sequence[float],
    empirical: Optional[Sequence[float]] = None,
    ybar_bound: Optional[Sequence[float]] = None,
    xlabel: str = "zbar (rad)",
):
    """Certified and empirical mu(zbar), with the certified frequency bound on a second panel."""
    panels = 2 if ybar_bound is not None else 1
    fig, axes = plt.subplots(panels, 1, figsize=(6, 3.2 * panels), squeeze=False)
    ax = axes[0, 0]
    ax.plot(zbar, certified, label="certified", color="tab:blue")
    if empirical is not None:
        ax.plot(zbar, empirical, label="empirical upper bound", color="tab:orange", linestyle="--")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("mu (pu)")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best")
    if ybar_bound is not None:
        ax = axes[1, 0]
        ax.plot(zbar, ybar_bound, color="tab:green")
        ax.set_xlabel(xlabel)
        ax.set_ylabel("certified ybar (Hz)")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(filename, format="svg", metadata={"Date": None})
    except Exception as e:
        utils.print_error(f"Failed to save plot {filename}: {e}")
        raise
    finally:
        plt.close(fig)
