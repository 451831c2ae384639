"""Loss-curve figures rendered next to the delimited run output."""

from __future__ import annotations

import threading

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# Matplotlib's text layout engine is not thread-safe; concurrent jobs
# rendering their reports must take turns.
_RENDER_LOCK = threading.Lock()


def save_loss_curves(history, path) -> None:
    """Plot total/content/style/tv against iteration and write a PNG.

    ``history`` is a sequence of LossBreakdown records, one per iteration.
    """
    iterations = range(1, len(history) + 1)
    with _RENDER_LOCK:
        fig = Figure(figsize=(7.0, 4.2))
        FigureCanvasAgg(fig)
        ax = fig.add_subplot()
        plotted = False
        for label, series in (
            ("total", [b.total for b in history]),
            ("content", [b.content for b in history]),
            ("style", [b.style for b in history]),
            ("tv", [b.tv for b in history]),
        ):
            if any(v != 0.0 for v in series):
                ax.plot(iterations, series, label=label, linewidth=1.2)
                plotted = True
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        if history and all(b.total > 0 for b in history):
            ax.set_yscale("log")
        if plotted:
            ax.legend(loc="upper right", frameon=False)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
