"""File formats: CSV tables, JSON params/graphs/reports, DOT graphs.

All writes are atomic (temp file in the target directory, then rename)
and deterministic: JSON keys are sorted, DOT nodes keep input order with
edges sorted lexicographically, and no output embeds timestamps, so a
rerun with the same inputs is byte-identical.

Counts CSV: header row of series labels, one row per time step. RFC-4180
quoting with CRLF row endings.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
import sys
import tempfile
from typing import Iterable

import numpy as np

from .graphs import GraphResult
from .params import CountPanel, ModelParams

__all__ = [
    "atomic_write_text",
    "write_counts_csv",
    "read_counts_csv",
    "write_covariates_csv",
    "read_covariates_csv",
    "write_params_json",
    "read_params_json",
    "graph_dict",
    "write_graph_files",
    "write_rho_csv",
    "write_weights_csv",
    "write_trace_csv",
    "write_sweep_csv",
    "write_curve_csv",
    "write_order_table_csv",
    "write_report_json",
    "write_manifest",
]


def atomic_write_text(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(rows: Iterable[Iterable]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf)  # csv default emits CRLF per RFC 4180
    for row in rows:
        w.writerow(list(row))
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _fmt(x: float) -> str:
    """Stable shortest float formatting for CSV cells."""
    return repr(float(x))


# ---------------------------------------------------------------- counts

def write_counts_csv(path: str, panel: CountPanel, normalized: bool = False) -> None:
    """One column per series, one row per time step. ``normalized`` divides
    each series by its maximum count (privacy-safe derived table)."""
    rows = [list(panel.series_labels)]
    if normalized:
        denom = np.maximum(panel.counts.max(axis=1), 1).astype(float)
        vals = panel.counts / denom[:, None]
        for t in range(panel.N):
            rows.append([_fmt(v) for v in vals[:, t]])
    else:
        for t in range(panel.N):
            rows.append([int(v) for v in panel.counts[:, t]])
    atomic_write_text(path, _csv_text(rows))


def read_counts_csv(path: str) -> tuple[np.ndarray, list[str]]:
    """Returns (counts (n, N) int64, labels). Cell errors name row/column."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        table = [row for row in reader if row]
    if len(table) < 2:
        raise ValueError(f"{path}: need a header row and at least one data row")
    labels = [c.strip() for c in table[0]]
    n = len(labels)
    cols = [[] for _ in range(n)]
    for r, row in enumerate(table[1:], start=2):
        if len(row) != n:
            raise ValueError(f"{path} row {r}: expected {n} cells, got {len(row)}")
        for c, cell in enumerate(row):
            s = cell.strip()
            try:
                v = int(s)
            except ValueError:
                raise ValueError(
                    f"{path} row {r} column {c + 1} ('{labels[c]}'): "
                    f"non-integer count {s!r}"
                ) from None
            if v < 0:
                raise ValueError(
                    f"{path} row {r} column {c + 1} ('{labels[c]}'): "
                    f"negative count {v}"
                )
            cols[c].append(v)
    return np.array(cols, dtype=np.int64), labels


# ------------------------------------------------------------ covariates

def write_covariates_csv(path: str, z: np.ndarray) -> None:
    z = np.asarray(z, dtype=float)
    rows = [[f"z{j + 1}" for j in range(z.shape[1])]]
    rows += [[_fmt(v) for v in z[t]] for t in range(z.shape[0])]
    atomic_write_text(path, _csv_text(rows))


def read_covariates_csv(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        table = [row for row in csv.reader(fh) if row]
    if not table:
        raise ValueError(f"{path}: empty covariates file")
    start = 0
    try:
        float(table[0][0])
    except ValueError:
        start = 1  # header row
    out = []
    width = None
    for r, row in enumerate(table[start:], start=start + 1):
        vals = []
        for c, cell in enumerate(row):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path} row {r} column {c + 1}: non-numeric covariate "
                    f"{cell.strip()!r}"
                ) from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ValueError(f"{path} row {r}: ragged row")
        out.append(vals)
    z = np.array(out, dtype=float)
    if not np.isfinite(z).all():
        raise ValueError(f"{path}: covariates must be finite")
    return z


# ---------------------------------------------------------------- params

def write_params_json(path: str, params: ModelParams,
                      labels: list[str] | None = None) -> None:
    obj = {
        "n": params.n,
        "p": params.p,
        "q": params.q,
        "beta": params.beta.tolist(),
        "ar_coeffs": params.ar_coeffs.tolist(),
        "sigma": params.sigma.tolist(),
    }
    if labels is not None:
        obj["series_labels"] = list(labels)
    atomic_write_text(path, _json_text(obj))


def read_params_json(path: str) -> tuple[ModelParams, list[str] | None]:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    try:
        beta = np.asarray(obj["beta"], dtype=float)
        ar = np.asarray(obj["ar_coeffs"], dtype=float)
        sigma = np.asarray(obj["sigma"], dtype=float)
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc}") from None
    if ar.size == 0:
        ar = ar.reshape(0, beta.shape[1], beta.shape[1])
    params = ModelParams(beta, ar, sigma)
    return params, obj.get("series_labels")


# ---------------------------------------------------------------- graphs

def graph_dict(graph: GraphResult) -> dict:
    return {
        "nodes": list(graph.labels),
        "undirected": [
            {"i": i, "j": j, "rho": rho} for i, j, rho in graph.undirected
        ],
        "directed": [
            {"from": i, "to": j, "weights": list(map(float, w))}
            for i, j, w in graph.directed
        ],
        "iw": graph.in_weight.tolist(),
        "ow": graph.out_weight.tolist(),
    }


def _dot_undirected(graph: GraphResult) -> str:
    lines = ["graph partial_correlation {"]
    for lab in graph.labels:
        lines.append(f'  "{lab}";')
    edges = sorted(
        (graph.labels[i], graph.labels[j], rho) for i, j, rho in graph.undirected
    )
    for li, lj, rho in edges:
        lines.append(f'  "{li}" -- "{lj}" [label="{rho:.6g}", weight="{rho:.6g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_directed(graph: GraphResult) -> str:
    lines = ["digraph granger_causality {"]
    for lab in graph.labels:
        lines.append(f'  "{lab}";')
    edges = sorted(
        (graph.labels[i], graph.labels[j], w) for i, j, w in graph.directed
    )
    for li, lj, w in edges:
        lab = "/".join(f"{v:.6g}" for v in w)
        lines.append(f'  "{li}" -> "{lj}" [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_graph_files(outdir: str, graph: GraphResult) -> dict[str, str]:
    """graph.json (full schema), per-kind JSON views, and two DOT files."""
    os.makedirs(outdir, exist_ok=True)
    full = graph_dict(graph)
    paths = {
        "graph_json": os.path.join(outdir, "graph.json"),
        "undirected_json": os.path.join(outdir, "undirected.json"),
        "directed_json": os.path.join(outdir, "directed.json"),
        "undirected_dot": os.path.join(outdir, "undirected.dot"),
        "directed_dot": os.path.join(outdir, "directed.dot"),
    }
    atomic_write_text(paths["graph_json"], _json_text(full))
    atomic_write_text(
        paths["undirected_json"],
        _json_text({"nodes": full["nodes"], "undirected": full["undirected"]}),
    )
    atomic_write_text(
        paths["directed_json"],
        _json_text({"nodes": full["nodes"], "directed": full["directed"],
                    "iw": full["iw"], "ow": full["ow"]}),
    )
    atomic_write_text(paths["undirected_dot"], _dot_undirected(graph))
    atomic_write_text(paths["directed_dot"], _dot_directed(graph))
    return paths


def write_rho_csv(path: str, labels: list[str], rho: np.ndarray) -> None:
    rows = [[""] + list(labels)]
    for i, lab in enumerate(labels):
        rows.append([lab] + [_fmt(v) for v in rho[i]])
    atomic_write_text(path, _csv_text(rows))


def write_weights_csv(path: str, labels: list[str], iw: np.ndarray,
                      ow: np.ndarray) -> None:
    rows = [["series", "in_weight", "out_weight"]]
    for i, lab in enumerate(labels):
        rows.append([lab, _fmt(iw[i]), _fmt(ow[i])])
    atomic_write_text(path, _csv_text(rows))


# ------------------------------------------------------- traces & sweeps

def write_trace_csv(path: str, trace) -> None:
    rows = [["iteration", "q", "q_se", "penalty", "rel_change",
             "acceptance_mean", "m_step_improved"]]
    for k, it in enumerate(trace.iterations, start=1):
        rows.append([k, _fmt(it.q), _fmt(it.q_se), _fmt(it.penalty),
                     _fmt(it.rel_change), _fmt(float(np.mean(it.acceptance))),
                     int(it.m_step_improved)])
    atomic_write_text(path, _csv_text(rows))


def _edge_counts(pt) -> tuple[object, object]:
    if pt.graph is None:
        return "", ""
    return len(pt.graph.undirected), len(pt.graph.directed)


def write_sweep_csv(path: str, points) -> None:
    rows = [["gamma", "loglik", "h1", "bic", "aicc",
             "undirected_edges", "directed_edges", "error"]]
    for pt in points:
        ue, de = _edge_counts(pt)
        rows.append([_fmt(pt.gamma), _fmt(pt.loglik_mc), _fmt(pt.penalty),
                     _fmt(pt.bic), _fmt(pt.aicc), ue, de, pt.error or ""])
    atomic_write_text(path, _csv_text(rows))


def write_curve_csv(path: str, points) -> None:
    rows = [["gamma", "penalty", "loglik"]]
    for pt in points:
        if pt.ok:
            rows.append([_fmt(pt.gamma), _fmt(pt.penalty), _fmt(pt.loglik_mc)])
    atomic_write_text(path, _csv_text(rows))


def write_order_table_csv(path: str, points, chosen_order: int | None) -> None:
    rows = [["order", "loglik", "aicc", "bic", "chosen", "error"]]
    for pt in points:
        rows.append([pt.order, _fmt(pt.loglik_mc), _fmt(pt.aicc), _fmt(pt.bic),
                     int(pt.order == chosen_order), pt.error or ""])
    atomic_write_text(path, _csv_text(rows))


def write_report_json(path: str, report) -> None:
    pts = []
    for pt in report.points:
        ue, de = _edge_counts(pt)
        pts.append({
            "gamma": pt.gamma,
            "order": pt.order,
            "loglik": None if math.isnan(pt.loglik_mc) else pt.loglik_mc,
            "penalty": None if math.isnan(pt.penalty) else pt.penalty,
            "bic": None if math.isnan(pt.bic) else pt.bic,
            "aicc": None if math.isnan(pt.aicc) else pt.aicc,
            "undirected_edges": ue if ue != "" else None,
            "directed_edges": de if de != "" else None,
            "error": pt.error,
        })
    obj = {
        "chosen_gamma": report.chosen_gamma,
        "chosen_order": report.chosen_order,
        "rationale": report.rationale,
        "points": pts,
    }
    atomic_write_text(path, _json_text(obj))


def write_manifest(outdir: str, command: str, args: dict) -> None:
    """Config echo sufficient to replay the run; no timestamps, so reruns
    into the same location are byte-identical."""
    import numpy
    import scipy

    try:
        import numba
        numba_version = numba.__version__
    except Exception:
        numba_version = None
    from . import __version__

    obj = {
        "command": command,
        "args": {k: v for k, v in sorted(args.items())},
        "rng": "PCG64",
        "versions": {
            "countgraph": __version__,
            "python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "numba": numba_version,
        },
    }
    atomic_write_text(os.path.join(outdir, "manifest.json"), _json_text(obj))
