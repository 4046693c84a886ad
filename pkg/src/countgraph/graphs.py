"""Graph extraction: undirected partial-correlation and directed causality edges.

Undirected edge (i, j) survives when its partial coherence rho_ij exceeds the
threshold rho*. Directed edge i -> j exists when any lag coefficient
A_k(j, i) exceeds the magnitude tolerance (row = effect, column = cause).
IW_i = sum_k sum_{j != i} A_k(i, j) and OW_i = sum_k sum_{j != i} A_k(j, i)
are the signed incoming/outgoing edge-weight totals per node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams
from .spectral import CoherenceField, partial_coherence

__all__ = [
    "GraphResult",
    "partial_graph",
    "causality_graph",
    "edge_weights",
    "extract_graphs",
]

DEFAULT_RHO_STAR = 0.1
DEFAULT_CAUSALITY_TOL = 1e-6


@dataclass
class GraphResult:
    """Both graphs plus node weight totals for one parameter set."""

    n: int
    undirected: list  # [(i, j, rho_ij)] with i < j, 0-based
    directed: list    # [(i, j, weights)] meaning i -> j, weights[k] = A_{k+1}(j, i)
    in_weight: np.ndarray
    out_weight: np.ndarray
    labels: list = field(default_factory=list)

    def undirected_pairs(self) -> set:
        return {(i, j) for i, j, _ in self.undirected}

    def directed_pairs(self) -> set:
        return {(i, j) for i, j, _ in self.directed}


def partial_graph(field: CoherenceField, rho_star: float = DEFAULT_RHO_STAR) -> list:
    """Undirected edges: pairs (i, j), i < j, with rho_ij > rho*."""
    if not 0.0 <= rho_star < 1.0:
        raise ValueError("rho_star must lie in [0, 1)")
    n = field.n
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if field.rho[i, j] > rho_star:
                edges.append((i, j, float(field.rho[i, j])))
    return edges


def causality_graph(params: ModelParams, tol: float = DEFAULT_CAUSALITY_TOL) -> list:
    """Directed edges: (i, j) present iff max_k |A_k(j, i)| > tol, i != j."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    n, p = params.n, params.p
    edges = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            weights = params.ar_coeffs[:, j, i] if p else np.zeros(0)
            if p and np.max(np.abs(weights)) > tol:
                edges.append((i, j, weights.copy()))
    return edges


def edge_weights(params: ModelParams) -> tuple:
    """Signed totals (IW, OW) of incoming and outgoing AR weights per node."""
    n, p = params.n, params.p
    if p == 0:
        zero = np.zeros(n)
        return zero, zero.copy()
    total = params.ar_coeffs.sum(axis=0)
    off = total - np.diag(np.diag(total))
    iw = off.sum(axis=1)
    ow = off.sum(axis=0)
    return iw, ow


def extract_graphs(params: ModelParams, rho_star: float = DEFAULT_RHO_STAR,
                   tol: float = DEFAULT_CAUSALITY_TOL, grid_size: int = 512,
                   labels=None, field: CoherenceField | None = None) -> GraphResult:
    """Assemble a GraphResult from fitted or true parameters."""
    if field is None:
        field = partial_coherence(params, grid_size)
    iw, ow = edge_weights(params)
    return GraphResult(
        n=params.n,
        undirected=partial_graph(field, rho_star),
        directed=causality_graph(params, tol),
        in_weight=iw,
        out_weight=ow,
        labels=list(labels) if labels is not None else [f"s{i + 1}" for i in range(params.n)],
    )
