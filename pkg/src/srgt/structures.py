"""Per-pair structural attributes over a difference graph.

Degrees, bounded-depth shortest paths with deterministic tie-breaking, and
the edge-type/duration sequences along one shortest path.  Unreachable pairs
within the depth cap get a sentinel distance of ``max_spd + 1``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .diffgraph import DiffGraph

# embedding-table index conventions shared with the model
TYPE_PAD = 0        # padded path positions
TYPE_UNREACHABLE = 4  # pseudo-edge for pairs beyond the depth cap
N_TYPE_ROWS = 5     # pad + {emerging, persisting, disappeared} + unreachable
DUR_PAD = 0


@dataclass(frozen=True)
class PathPolicy:
    max_spd: int = 5
    tie_break: str = "lex"  # lexicographically smallest neighbor expansion

    def __post_init__(self):
        if self.max_spd < 1:
            raise ValueError("max_spd must be >= 1")
        if self.tie_break != "lex":
            raise ValueError(f"unknown tie_break rule {self.tie_break!r}")


@dataclass(frozen=True)
class PairStructure:
    sd_out: int
    td_in: int
    spd: int
    path_types: tuple
    path_durations: tuple


@dataclass(frozen=True)
class PathRecord:
    spd: int
    path_types: tuple
    path_durations: tuple


def node_degrees(g: DiffGraph):
    """Out/in degrees counted over the full union edge set (disappeared included)."""
    out_deg = np.zeros(g.n_nodes, dtype=np.int64)
    in_deg = np.zeros(g.n_nodes, dtype=np.int64)
    for (src, dst) in g.edges:
        out_deg[src] += 1
        in_deg[dst] += 1
    return out_deg, in_deg


def _bfs_tree(g: DiffGraph, src: int, max_depth: int):
    """Distances and BFS parents from ``src``, truncated at ``max_depth``.

    Neighbors are expanded in ascending id order, so the recorded parent
    chain is the deterministic tie-broken shortest path.
    """
    dist = np.full(g.n_nodes, -1, dtype=np.int64)
    parent = np.full(g.n_nodes, -1, dtype=np.int64)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if dist[u] >= max_depth:
            continue
        for v in g.out_adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                parent[v] = u
                queue.append(v)
    return dist, parent


def _path_from_parents(parent, src, dst):
    nodes = [dst]
    while nodes[-1] != src:
        nodes.append(int(parent[nodes[-1]]))
    nodes.reverse()
    return nodes


def _clamp_duration(omega: float, k_max: int) -> int:
    return int(min(max(round(omega), 1), k_max))


def shortest_path(g: DiffGraph, src: int, dst: int, policy: PathPolicy,
                  k_max: int = 64) -> PathRecord:
    """Bounded BFS distance plus the tie-broken path's type/duration sequences."""
    if src == dst:
        return PathRecord(0, (), ())
    dist, parent = _bfs_tree(g, src, policy.max_spd)
    if dist[dst] < 0:
        return PathRecord(policy.max_spd + 1, (), ())
    nodes = _path_from_parents(parent, src, dst)
    types, durs = [], []
    for u, v in zip(nodes, nodes[1:]):
        state = g.edges[(u, v)]
        types.append(int(state.tp))
        durs.append(_clamp_duration(state.omega, k_max))
    return PathRecord(int(dist[dst]), tuple(types), tuple(durs))


def pair_structures(g: DiffGraph, pairs, policy: PathPolicy,
                    k_max: int = 64) -> list:
    """One PairStructure per requested pair, combining degrees and path info."""
    out_deg, in_deg = node_degrees(g)
    cache: dict[int, tuple] = {}
    records = []
    for src, dst in pairs:
        if src not in cache:
            cache[src] = _bfs_tree(g, src, policy.max_spd)
        dist, parent = cache[src]
        if src == dst:
            rec = PathRecord(0, (), ())
        elif dist[dst] < 0:
            rec = PathRecord(policy.max_spd + 1, (), ())
        else:
            nodes = _path_from_parents(parent, src, dst)
            types, durs = [], []
            for u, v in zip(nodes, nodes[1:]):
                state = g.edges[(u, v)]
                types.append(int(state.tp))
                durs.append(_clamp_duration(state.omega, k_max))
            rec = PathRecord(int(dist[dst]), tuple(types), tuple(durs))
        records.append(PairStructure(int(out_deg[src]), int(in_deg[dst]),
                                     rec.spd, rec.path_types, rec.path_durations))
    return records


@dataclass
class PairStructureArrays:
    """All-pairs structural features in dense form, row-major over (src, dst).

    Index arrays feed the model's embedding tables; ``attrs`` is the raw
    [out-degree, in-degree, spd] triple with the unreachable sentinel.
    """

    n: int
    max_spd: int
    attrs: np.ndarray      # (n*n, 3) float64
    spd: np.ndarray        # (n, n) int64
    type_ids: np.ndarray   # (n*n, max_spd) int64
    dur_ids: np.ndarray    # (n*n, max_spd) int64
    mask: np.ndarray       # (n*n, max_spd) bool


def all_pairs_structures(g: DiffGraph, policy: PathPolicy,
                         k_max: int = 64) -> PairStructureArrays:
    """Vectorized all-pairs features for one graph; computed once per time step."""
    n = g.n_nodes
    L = policy.max_spd
    out_deg, in_deg = node_degrees(g)
    spd = np.zeros((n, n), dtype=np.int64)
    type_ids = np.zeros((n * n, L), dtype=np.int64)
    dur_ids = np.zeros((n * n, L), dtype=np.int64)
    mask = np.zeros((n * n, L), dtype=bool)
    sentinel = policy.max_spd + 1
    for src in range(n):
        dist, parent = _bfs_tree(g, src, policy.max_spd)
        for dst in range(n):
            row = src * n + dst
            if src == dst:
                continue  # spd 0, fully masked path
            if dist[dst] < 0:
                spd[src, dst] = sentinel
                type_ids[row, 0] = TYPE_UNREACHABLE
                dur_ids[row, 0] = DUR_PAD
                mask[row, 0] = True
                continue
            spd[src, dst] = dist[dst]
            nodes = _path_from_parents(parent, src, dst)
            for pos, (u, v) in enumerate(zip(nodes, nodes[1:])):
                state = g.edges[(u, v)]
                type_ids[row, pos] = int(state.tp)
                dur_ids[row, pos] = _clamp_duration(state.omega, k_max)
                mask[row, pos] = True
    attrs = np.empty((n * n, 3), dtype=np.float64)
    attrs[:, 0] = np.repeat(out_deg, n)
    attrs[:, 1] = np.tile(in_deg, n)
    attrs[:, 2] = spd.reshape(-1)
    return PairStructureArrays(n=n, max_spd=L, attrs=attrs, spd=spd,
                               type_ids=type_ids, dur_ids=dur_ids, mask=mask)


def dump_pairs(records) -> str:
    lines = []
    for r in records:
        lines.append(f"{r.sd_out} {r.td_in} {r.spd} "
                     f"{','.join(map(str, r.path_types))} "
                     f"{','.join(map(str, r.path_durations))}")
    return "\n".join(lines) + "\n"
