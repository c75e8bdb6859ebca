"""Static curve export for a training trace: CSV plus an SVG line chart."""
import logging
from pathlib import Path

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from mman.metrics.convergence import ConvergenceTrace  # noqa: E402

logger = logging.getLogger(__name__)

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "mman",
    "svg.fonttype": "none",
}
"""fixed hash salt keeps SVG ids stable between runs"""


def export_curves(trace: ConvergenceTrace, out_dir: str | Path, stem: str = "curves") -> tuple[Path, Path]:
    """writes `<stem>.csv` and `<stem>.svg`: D(real)/D(fake) per discriminator and the generator loss

    :return: (csv path, svg path)
    """
    if len(trace) == 0:
        raise ValueError("Cannot export curves of an empty trace.")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = trace.frame
    csv_path = trace.to_csv(out_dir / f"{stem}.csv")

    names = trace.discriminators
    with mpl.rc_context(STYLE):
        fig, (d_ax, g_ax) = plt.subplots(nrows=2, ncols=1, sharex=True, figsize=(6.0, 5.0))
        for name in names:
            d_ax.plot(frame.index, frame[f"d_real_{name}"], label=f"D_{name}(real)")
            d_ax.plot(frame.index, frame[f"d_fake_{name}"], label=f"D_{name}(fake)", linestyle="--")
        d_ax.axhline(0.5, color="grey", linewidth=0.6, linestyle=":")
        d_ax.set_ylim(-0.05, 1.05)
        d_ax.set_ylabel("discriminator output")
        if names:
            d_ax.legend(loc="best")
        else:
            d_ax.text(0.5, 0.5, "no discriminator", ha="center", va="center", transform=d_ax.transAxes)

        g_ax.plot(frame.index, frame["L_G"], label="generator loss", color="black")
        g_ax.set_xlabel("iteration")
        g_ax.set_ylabel("loss")
        g_ax.legend(loc="best")
        fig.tight_layout()

        svg_path = out_dir / f"{stem}.svg"
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    logger.info(f"wrote {csv_path.name} and {svg_path.name} to {out_dir}")
    return csv_path, svg_path
