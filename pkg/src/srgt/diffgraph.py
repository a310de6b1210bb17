"""Weighted multi-relation difference graphs.

Adjacent snapshots are merged into one graph whose edges carry a temporal
state: emerging, persisting, or disappeared, together with the duration of
the current presence run and a duration-derived strength weight.  Disappeared
edges stay traversable for exactly one slice.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum


class EdgeKind(IntEnum):
    EMERGING = 1
    PERSISTING = 2
    DISAPPEARED = 3


@dataclass(frozen=True)
class EdgeState:
    tp: EdgeKind
    k: int
    omega: float


class DiffGraph:
    """Union of two consecutive snapshots with per-edge temporal state."""

    def __init__(self, n_nodes: int, edges: dict):
        self.n_nodes = n_nodes
        self.edges = edges  # (src, dst) -> EdgeState
        adj = [[] for _ in range(n_nodes)]
        for (src, dst) in edges:
            adj[src].append(dst)
        for lst in adj:
            lst.sort()
        self.out_adj = adj


def classify_edges(e_prev: set, e_cur: set) -> dict:
    """Assign each edge of the union its temporal kind."""
    out = {}
    for e in e_cur:
        out[e] = EdgeKind.PERSISTING if e in e_prev else EdgeKind.EMERGING
    for e in e_prev:
        if e not in e_cur:
            out[e] = EdgeKind.DISAPPEARED
    return out


def update_duration(prev: EdgeState | None, tp: EdgeKind,
                    cumulative: bool = False) -> int:
    """Duration of the current presence run; re-emergence restarts at 1.

    With ``cumulative`` the count carries across gaps instead of resetting.
    """
    if tp is EdgeKind.EMERGING:
        if cumulative and prev is not None:
            return prev.k + 1
        return 1
    if prev is None:
        raise ValueError(f"{tp.name} edge has no prior history")
    if tp is EdgeKind.PERSISTING:
        return prev.k + 1
    return prev.k


def compute_weight(tp: EdgeKind, k: int, prev_omega: float | None,
                   alpha: float, beta: float) -> float:
    """Strength coefficient: alpha * k**beta while present, frozen once gone."""
    if tp is EdgeKind.DISAPPEARED:
        if prev_omega is None:
            raise ValueError("disappeared edge requires a previous weight")
        return prev_omega
    return alpha * float(k) ** beta


def build_diff_graph(e_prev: set, e_cur: set, hist: dict, n_nodes: int,
                     alpha: float = 1.0, beta: float = 1.0, *,
                     use_types: bool = True, use_weights: bool = True,
                     cumulative: bool = False):
    """Build one difference graph and the updated state history.

    History entries for edges that left the union (their last state was
    disappeared) are dropped, unless ``cumulative`` duration tracking is on.
    Ablations: ``use_types`` off collapses every edge to one type;
    ``use_weights`` off forces unit weights.  The history always tracks the
    true states so ablations never corrupt the recurrence.
    """
    kinds = classify_edges(e_prev, e_cur)
    new_hist = dict(hist) if cumulative else {}
    edges = {}
    for e, tp in kinds.items():
        prev = hist.get(e)
        k = update_duration(prev, tp, cumulative)
        omega = compute_weight(tp, k, prev.omega if prev else None, alpha, beta)
        state = EdgeState(tp, k, omega)
        new_hist[e] = state
        out_tp = tp if use_types else EdgeKind.PERSISTING
        out_omega = omega if use_weights else 1.0
        edges[e] = EdgeState(out_tp, k, out_omega)
    return DiffGraph(n_nodes, edges), new_hist


def build_snapshot_graph(e_cur: set, n_nodes: int) -> DiffGraph:
    """Raw current snapshot as a graph: single edge type, unit weights."""
    edges = {e: EdgeState(EdgeKind.PERSISTING, 1, 1.0) for e in e_cur}
    return DiffGraph(n_nodes, edges)


def build_diff_sequence(seq, alpha: float = 1.0, beta: float = 1.0, *,
                        use_types: bool = True, use_weights: bool = True,
                        use_diff: bool = True, cumulative: bool = False):
    """Difference graphs for every slice, replaying the state recurrence from t=1."""
    graphs = []
    hist: dict = {}
    prev: set = set()
    for e_cur in seq.snapshots:
        if use_diff:
            g, hist = build_diff_graph(prev, set(e_cur), hist, seq.n_nodes,
                                       alpha, beta, use_types=use_types,
                                       use_weights=use_weights,
                                       cumulative=cumulative)
        else:
            g = build_snapshot_graph(set(e_cur), seq.n_nodes)
        graphs.append(g)
        prev = set(e_cur)
    return graphs


def dump_text(g: DiffGraph) -> str:
    """Debug dump, one ``src dst tp k omega`` line per edge, sorted."""
    lines = []
    for (src, dst) in sorted(g.edges):
        s = g.edges[(src, dst)]
        lines.append(f"{src} {dst} {s.tp.name[0].lower()} {s.k} {s.omega!r}")
    return "\n".join(lines) + "\n"
