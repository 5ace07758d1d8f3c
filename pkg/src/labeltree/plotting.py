"""Report figures: depth/precision trade-off and label coverage curves."""

import math
import os
import tempfile

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
STYLE = {"font.size": 9, "axes.labelsize": 9, "legend.fontsize": 8,
         "xtick.labelsize": 8, "ytick.labelsize": 8}


def _figure(width=4.5):
    fig = Figure(figsize=(width, width * GOLDEN))
    FigureCanvasAgg(fig)
    return fig


def _save(fig, path):
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".png")
    os.close(fd)
    try:
        # no Software tag, so identical data gives identical bytes
        fig.savefig(tmp, format="png", dpi=150, metadata={"Software": None})
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _styled(draw):
    import matplotlib
    with matplotlib.rc_context(STYLE):
        return draw()


def plot_tradeoff(reports, path, ks=(1,)):
    """Expected depth@k against precision@k, one point per lambda'."""
    def draw():
        fig = _figure()
        ax = fig.add_subplot(1, 1, 1)
        for k in ks:
            xs = [r.expected_depth_at[k] for r in reports]
            ys = [r.precision_at[k] for r in reports]
            ax.plot(xs, ys, marker="o", ms=3, lw=1, label=f"k={k}")
            for r, x, y in zip(reports, xs, ys):
                ax.annotate(f"{r.lambda_prime:g}", (x, y), fontsize=6,
                            xytext=(3, 3), textcoords="offset points")
        ax.set_xlabel("expected depth@k")
        ax.set_ylabel("precision@k")
        ax.grid(alpha=0.3, lw=0.5)
        if len(ks) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
    _styled(draw)


def plot_coverage(curves, path):
    """``curves`` maps a legend name to ``(label_fraction, context_fraction)`` pairs."""
    def draw():
        fig = _figure()
        ax = fig.add_subplot(1, 1, 1)
        for name, curve in curves.items():
            qs = [q for q, _ in curve]
            cov = [c for _, c in curve]
            ax.step(qs, cov, where="post", lw=1, label=name)
        ax.set_xscale("symlog", linthresh=1e-3)
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("fraction of labels (most frequent first)")
        ax.set_ylabel("fraction of contexts covered")
        ax.grid(alpha=0.3, lw=0.5)
        ax.legend(frameon=False, loc="lower right")
        fig.tight_layout()
        _save(fig, path)
    _styled(draw)
