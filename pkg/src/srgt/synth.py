"""Synthetic temporal edge-list generators for desk-scale experiments."""

from __future__ import annotations

import numpy as np


def _sample_pairs(n_nodes: int, count: int, rng: np.random.Generator,
                  exclude: set | None = None) -> list:
    exclude = exclude or set()
    chosen: dict = {}
    while len(chosen) < count:
        src = rng.integers(0, n_nodes, size=2 * (count - len(chosen)) + 8)
        dst = rng.integers(0, n_nodes, size=len(src))
        for i, j in zip(src, dst):
            pair = (int(i), int(j))
            if i == j or pair in exclude or pair in chosen:
                continue
            chosen[pair] = None
            if len(chosen) == count:
                break
    return list(chosen)


def gen_synthetic(kind: str, n_nodes: int, n_slices: int, seed: int,
                  out_path, backbone_size: int | None = None,
                  noise_per_slice: int | None = None,
                  churn_pool: int | None = None) -> str:
    """Write a ``src dst ts`` edge list; timestamp equals the slice index.

    planted-persistent: a fixed backbone present in every slice plus
    per-slice transient noise edges.  churn: a pool of edges toggling on and
    off with a slice-dependent probability.
    """
    if n_nodes < 4:
        raise ValueError("need at least 4 nodes")
    rng = np.random.default_rng(seed)
    lines = []
    if kind == "planted-persistent":
        # backbone = a random Hamiltonian cycle traversed in both directions:
        # persistent, low-dimensional structure whose adjacent nodes share no
        # neighbors (so common-neighbor heuristics carry no signal)
        backbone_size = backbone_size or 2 * n_nodes
        noise_per_slice = (noise_per_slice if noise_per_slice is not None
                           else max(1, round(0.10 * backbone_size)))
        perm = rng.permutation(n_nodes)
        ring = []
        for i in range(n_nodes):
            u, v = int(perm[i]), int(perm[(i + 1) % n_nodes])
            ring += [(u, v), (v, u)]
        backbone = ring[:backbone_size]
        if backbone_size > len(ring):
            backbone += _sample_pairs(n_nodes, backbone_size - len(ring), rng,
                                      exclude=set(ring))
        backbone_set = set(backbone)
        for t in range(n_slices):
            for u, v in backbone:
                lines.append(f"{u} {v} {t}")
            for u, v in _sample_pairs(n_nodes, noise_per_slice, rng,
                                      exclude=backbone_set):
                lines.append(f"{u} {v} {t}")
    elif kind == "churn":
        churn_pool = churn_pool or 4 * n_nodes
        pool = _sample_pairs(n_nodes, churn_pool, rng)
        active = np.zeros(len(pool), dtype=bool)
        for t in range(n_slices):
            # toggle probability drifts across the sequence
            p_toggle = 0.15 + 0.25 * (t % 4 == 0)
            flips = rng.random(len(pool)) < p_toggle
            active ^= flips
            if not active.any():
                active[rng.integers(0, len(pool))] = True
            for idx in np.flatnonzero(active):
                u, v = pool[idx]
                lines.append(f"{u} {v} {t}")
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    text = "\n".join(lines) + "\n"
    with open(out_path, "w") as fh:
        fh.write(text)
    return str(out_path)
