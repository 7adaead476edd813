"""CSV emission and optional figure rendering of experiment records."""

from __future__ import annotations

import csv
import dataclasses
from pathlib import Path

from ..errors import LFMimoError
from ..evaluate import RateRecord

__all__ = ["RATE_COLUMNS", "OutputError", "emit_csv", "read_csv", "render_plot"]

RATE_COLUMNS = ("scheme", "snr_db", "B", "M", "N", "K", "trials", "sum_rate_mean", "sum_rate_stderr", "seed")


class OutputError(LFMimoError, OSError):
    """Writing results failed; ``path`` names the destination."""

    def __init__(self, message, path):
        super().__init__(message)
        self.path = str(path)


def _fmt(value) -> str:
    # repr gives the shortest string that parses back to the same double
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(records, path, columns=None) -> Path:
    """Write a header row and one row per record.

    Rate records use :data:`RATE_COLUMNS`; other record types default to
    their dataclass field order. Floats are written with full round-trip
    precision. An empty list yields a header-only file.
    """
    records = list(records)
    if columns is None:
        columns = RATE_COLUMNS if not records or isinstance(records[0], RateRecord) else \
            tuple(f.name for f in dataclasses.fields(records[0]))
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for rec in records:
                writer.writerow([_fmt(getattr(rec, c)) for c in columns])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}", path) from exc
    return path


def read_csv(path) -> list[dict]:
    """Parse a file written by :func:`emit_csv`; numeric fields come back as int or float."""
    rows = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, raw in row.items():
                for cast in (int, float):
                    try:
                        parsed[key] = cast(raw)
                        break
                    except ValueError:
                        continue
                else:
                    parsed[key] = raw
            rows.append(parsed)
    return rows


def _series(records, xkey, group):
    out = {}
    for rec in records:
        out.setdefault(group(rec), []).append((getattr(rec, xkey), rec.sum_rate_mean if hasattr(rec, "sum_rate_mean")
                                                else rec.gap))
    return {k: sorted(v) for k, v in out.items()}


def render_plot(records, path, kind: str = "rate", title: str | None = None) -> Path:
    """Render the records to an image next to the CSV; the x axis follows whichever sweep varies."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    records = list(records)
    fig, ax = plt.subplots(figsize=(5.0, 3.8))
    if kind == "gap":
        series = _series(records, "B", lambda r: f"M={r.M}")
        ax.set_xlabel("feedback bits B")
        ax.set_ylabel("normalized gap")
    elif kind == "convergence":
        series = _series(records, "iteration", lambda r: f"{r.scheme.upper()} {r.snr_db:g} dB")
        ax.set_xlabel("iteration")
        ax.set_ylabel("sum rate [bit/s/Hz]")
    else:
        varying = [k for k in ("snr_db", "B", "K") if len({getattr(r, k) for r in records}) > 1] or ["snr_db"]
        xkey = varying[0]
        rest = [k for k in varying[1:]]

        def group(r):
            tag = r.scheme.upper().replace("_", " ")
            return tag + "".join(f", {k}={getattr(r, k):g}" for k in rest)

        series = _series(records, xkey, group)
        ax.set_xlabel({"snr_db": "SNR [dB]", "B": "feedback bits B", "K": "users K"}[xkey])
        ax.set_ylabel("sum rate [bit/s/Hz]")
    for label, pts in series.items():
        xs, ys = zip(*pts)
        style = "--" if label.startswith("BOUND") else "-o"
        ax.plot(xs, ys, style, label=label, markersize=3, linewidth=1.2)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    try:
        fig.savefig(path, dpi=150)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}", path) from exc
    finally:
        plt.close(fig)
    return path
