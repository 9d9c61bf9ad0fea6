"""CSV and SVG writers.

CSV: UTF-8, LF line endings, floats with 17 significant digits so every
value round-trips exactly, optional ``#``-prefixed provenance lines above
the header.
"""

from __future__ import annotations

import io
import os
from typing import Mapping

import numpy as np

CHAIN_COLUMNS = ("t", "P_e", "alpha_next_sq", "bloch_norm", "excitation")
SINGLE_ION_COLUMNS = ("t", "P_e")

# line styles keyed by scenario label (DI dashed, JC dash-dot, carrier dotted)
LINE_STYLES = {
    "Carrier": dict(linestyle=":", color="tab:orange"),
    "No int.": dict(linestyle="-", color="tab:green"),
    "JC": dict(linestyle="-.", color="tab:red"),
    "JC exact": dict(linestyle="-", color="tab:gray", linewidth=0.8),
    "CI": dict(linestyle="-", color="tab:blue"),
    "DI": dict(linestyle="--", color="black"),
}


def fmt(x) -> str:
    return f"{float(x):.17g}"


def _provenance_lines(provenance: Mapping) -> list[str]:
    out = []
    for key in sorted(provenance):
        value = provenance[key]
        if isinstance(value, float):
            value = fmt(value)
        elif isinstance(value, complex):
            value = f"{fmt(value.real)}{'+' if value.imag >= 0 else '-'}{fmt(abs(value.imag))}j"
        out.append(f"# {key}={value}")
    return out


def _emit(lines: list[str], sink) -> int:
    data = ("\n".join(lines) + "\n").encode("utf-8")
    if isinstance(sink, io.TextIOBase):
        sink.write(data.decode("utf-8"))
    else:
        sink.write(data)
    return len(data)


def _table(header, columns, provenance=None) -> list[str]:
    lines = _provenance_lines(provenance) if provenance else []
    lines.append(",".join(header))
    for row in zip(*columns):
        lines.append(",".join(fmt(v) for v in row))
    return lines


def write_timeseries(result, sink, provenance: bool = False) -> int:
    """Write one run as CSV; returns the number of bytes written.

    Chain runs use ``t,P_e,alpha_next_sq,bloch_norm,excitation``; single-ion
    runs use ``t,P_e``.
    """
    series = result.series
    chain = "alpha_next_sq" in series.records
    header = CHAIN_COLUMNS if chain else SINGLE_ION_COLUMNS
    columns = [series.times] + [series[name] for name in header[1:]]
    return _emit(_table(header, columns, result.provenance if provenance else None), sink)


def write_snapshots(result, sink) -> int:
    """Companion wide CSV with every site's complex amplitude."""
    series = result.series
    amps = series["amplitudes"]
    header = ["t"]
    columns = [series.times]
    for k in range(amps.shape[1]):
        header += [f"re_{k + 1}", f"im_{k + 1}"]
        columns += [amps[:, k].real, amps[:, k].imag]
    return _emit(_table(header, columns), sink)


def column_name(prefix: str, label: str) -> str:
    return f"{prefix}_{label.replace('.', '').replace(' ', '')}"


def write_scenario_table(results: Mapping[str, object], sink, quantities=("P_e",),
                         provenance: Mapping | None = None, extra: Mapping | None = None) -> int:
    """One CSV with a column per (quantity, scenario); all runs share a time grid.

    ``extra`` maps column names to arrays appended after the scenario columns.
    """
    if not results:
        raise ValueError("no results to write")
    times = next(iter(results.values())).series.times
    header, columns = ["t"], [times]
    for q in quantities:
        for label, res in results.items():
            if not np.array_equal(res.series.times, times):
                raise ValueError("scenario runs must share one time grid")
            header.append(column_name(q, label))
            columns.append(res.series[q])
    for name, values in (extra or {}).items():
        header.append(name)
        columns.append(values)
    return _emit(_table(header, columns, provenance), sink)


def read_csv(path_or_text) -> tuple[list[str], np.ndarray, list[str]]:
    """Parse a CSV written here: returns (header, data, provenance lines)."""
    text = path_or_text
    if os.path.exists(str(path_or_text)):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    comments, body = [], []
    for line in text.splitlines():
        (comments if line.startswith("#") else body).append(line)
    header = body[0].split(",")
    data = np.array([[float(v) for v in row.split(",")] for row in body[1:]])
    return header, data.reshape(len(body) - 1, len(header)), comments


def emit_plot(curves: Mapping[str, tuple], path, xlabel: str = "Jt", ylabel: str = "P_e",
              title: str | None = None, panels: Mapping[str, Mapping[str, tuple]] | None = None) -> None:
    """Write an SVG overlaying ``curves`` (label -> (t, y)).

    ``panels`` (ylabel -> curves) draws several stacked axes instead. The
    output is byte-identical for identical inputs.
    """
    from matplotlib import rc_context
    from matplotlib.backends.backend_svg import FigureCanvasSVG
    from matplotlib.figure import Figure

    panels = dict(panels) if panels else {ylabel: curves}
    if not panels or any(len(c) == 0 for c in panels.values()):
        raise ValueError("nothing to plot")
    for group in panels.values():
        for label, (t, y) in group.items():
            if len(t) == 0 or len(t) != len(y):
                raise ValueError(f"curve {label!r} is empty or misaligned")

    with rc_context({"svg.hashsalt": "ionwave", "svg.fonttype": "path",
                     "path.simplify": False}):
        fig = Figure(figsize=(6.0, 2.8 * len(panels)))
        FigureCanvasSVG(fig)
        axes = fig.subplots(len(panels), 1, sharex=True, squeeze=False)[:, 0]
        for ax, (ylab, group) in zip(axes, panels.items()):
            for label, (t, y) in group.items():
                ax.plot(t, y, label=label, **LINE_STYLES.get(label, {}))
            ax.set_ylabel(ylab)
            ax.legend(loc="upper right", fontsize="small", frameon=False)
        axes[-1].set_xlabel(xlabel)
        if title:
            axes[0].set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
