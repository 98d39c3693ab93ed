"""Figure rendering for convergence traces, recursion tables and segment scans."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _new_axes(width: float = 6.4):
    fig, ax = plt.subplots(figsize=(width, width * GOLDEN))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _mask_positive(values):
    v = np.asarray(values, dtype=float)
    out = np.where(v > 0, v, np.nan)
    return out


def plot_trace(columns: dict, path) -> str:
    """Semilog convergence plot of a trace CSV (c, envelope, unital deviation)."""
    fig, ax = _new_axes()
    it = columns["iter"]
    ax.semilogy(it, _mask_positive(columns["c"]), "o-", label="defect c")
    ax.semilogy(it, _mask_positive(columns["bound"]), "s--", label="envelope")
    ax.semilogy(it, _mask_positive(columns["unital_dev"]), "^:", label="unital deviation")
    if "mult_defect" in columns:
        ax.semilogy(it, _mask_positive(columns["mult_defect"]), "d-.",
                    label="multiplicativity defect")
    ax.set_xlabel("iteration")
    ax.set_ylabel("defect")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_lemma(columns: dict, path) -> str:
    """Extremal recursion against its doubly exponential envelope."""
    fig, ax = _new_axes()
    it = columns["i"]
    ax.semilogy(it, _mask_positive(columns["c"]), "o-", label="extremal c")
    ax.semilogy(it, _mask_positive(columns["bound"]), "s--", label="envelope")
    ax.set_xlabel("index")
    ax.set_ylabel("defect")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_segment(columns: dict, path) -> str:
    """Defect along the segment toward the average."""
    fig, ax = _new_axes()
    ax.plot(columns["t"], columns["c"], "o-")
    ax.set_xlabel("t")
    ax.set_ylabel("defect c")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_csv(csv_columns: dict, path) -> str:
    """Dispatch on the CSV header and render the matching figure."""
    if "t" in csv_columns:
        return plot_segment(csv_columns, path)
    if "b_limit" in csv_columns:
        return plot_lemma(csv_columns, path)
    if "iter" in csv_columns:
        return plot_trace(csv_columns, path)
    raise ValueError("unrecognized CSV columns; cannot render")
