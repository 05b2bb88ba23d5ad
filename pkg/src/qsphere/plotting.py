"""Static figures for CLI tables, rendered off-screen with the Agg backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 150,
    "font.size": 9,
    "axes.linewidth": 0.6,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _numeric(values) -> np.ndarray | None:
    try:
        arr = np.asarray([float(v) for v in values])
    except (TypeError, ValueError):
        return None
    return arr


def plot_table(rows: list[dict], path: str, *, x: str | None = None, y: list[str] | None = None,
               logx: bool = False, logy: bool = False, title: str | None = None) -> str:
    """Plot numeric columns of a table against a chosen column and save the figure.

    Parameters
    ----------
    rows : list of dict
        Records as emitted by the CLI.
    path : str
        Output file; the format follows the extension (png, pdf, svg).
    x : str, optional
        Abscissa column; defaults to the first column.  A non-numeric
        abscissa gives a bar chart of the first ``y`` column.
    y : list of str, optional
        Ordinate columns; defaults to every other numeric column except flags.
    logx, logy : bool
        Logarithmic axes.
    title : str, optional

    Returns
    -------
    str
        The path written.
    """
    if not rows:
        raise ValueError("nothing to plot: empty table")
    keys = list(rows[0])
    x = x or keys[0]
    cols = {k: _numeric([r[k] for r in rows]) for k in keys}
    if y is None:
        y = [k for k in keys if k != x and cols[k] is not None and not isinstance(rows[0][k], bool)]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        xs = cols[x]
        if xs is None:
            vals = np.abs(cols[y[0]]) if y else np.zeros(len(rows))
            ax.bar(range(len(rows)), vals, color="0.4")
            ax.set_xticks(range(len(rows)))
            ax.set_xticklabels([str(r[x]) for r in rows], rotation=45, ha="right")
            ax.set_ylabel(y[0] if y else "")
            if logy:
                ax.set_yscale("log")
        else:
            for k in y:
                ys = cols[k]
                if logy:
                    ys = np.abs(ys)
                ax.plot(xs, ys, marker="o" if len(rows) < 40 else None, label=k)
            ax.set_xlabel(x)
            if logx:
                ax.set_xscale("log")
            if logy:
                ax.set_yscale("log")
            if len(y) > 1:
                ax.legend()
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return path
