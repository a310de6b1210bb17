"""Finite-difference verification of every differentiable primitive and of the
full model loss (forward steps + link scoring)."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import training
from .autodiff import Tensor, finite_difference_check
from .diffgraph import build_diff_sequence
from .model import SGTConfig, SGTModel
from .snapshots import SnapshotSequence
from .structures import PathPolicy, all_pairs_structures


def check_primitives(seed: int = 0) -> dict:
    """Max relative FD error per primitive on small random shapes."""
    rng = np.random.default_rng(seed)

    def t(*shape):
        return Tensor(rng.normal(size=shape), requires_grad=True)

    results = {}
    a, b = t(3, 4), t(3, 4)
    results["add"] = finite_difference_check(lambda: ad.tsum(ad.mul(ad.add(a, b), a)), [a, b])
    results["mul"] = finite_difference_check(lambda: ad.tsum(ad.mul(a, b)), [a, b])
    results["div"] = finite_difference_check(
        lambda: ad.tsum(ad.div(a, ad.add(ad.mul(b, b), 1.0))), [a, b])
    m, n_ = t(3, 4), t(4, 2)
    results["matmul"] = finite_difference_check(lambda: ad.tsum(ad.matmul(m, n_)), [m, n_])
    results["transpose"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.transpose(m), ad.transpose(m))), [m])
    results["narrow"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.narrow(a, 1, 1, 2), 2.0)), [a])
    results["concat"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.concat([a, b], axis=1), ad.concat([b, a], axis=1))),
        [a, b])
    results["reshape"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.reshape(a, (4, 3)), 3.0)), [a])
    results["abs"] = finite_difference_check(lambda: ad.tsum(ad.tabs(a)), [a])
    results["sigmoid"] = finite_difference_check(lambda: ad.tsum(ad.sigmoid(a)), [a])
    results["log"] = finite_difference_check(
        lambda: ad.tsum(ad.tlog(ad.add(ad.mul(a, a), 1.0))), [a])
    results["relu"] = finite_difference_check(lambda: ad.tsum(ad.relu(a)), [a])
    results["mean"] = finite_difference_check(lambda: ad.tmean(ad.mul(a, a)), [a])
    results["softmax_rows"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.softmax_rows(a), b)), [a, b])
    gamma, beta = t(4), t(4)
    results["layer_norm"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.layer_norm(a, gamma, beta), b)), [a, gamma, beta])
    table = t(6, 3)
    idx = rng.integers(0, 6, size=5)
    w = Tensor(rng.normal(size=(5, 3)))
    results["embedding_lookup"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.embedding_lookup(table, idx), w)), [table])
    x = t(4, 3)
    kernel, bias = t(3, 3, 3), t(3)
    mask = np.array([True, True, False, True])
    wc = Tensor(rng.normal(size=3))
    results["conv1d_collapse"] = finite_difference_check(
        lambda: ad.tsum(ad.mul(ad.conv1d_collapse(x, kernel, bias, mask), wc)),
        [x, kernel, bias])
    xb = t(2, 4, 3)
    maskb = np.array([[True, False, True, True], [False, False, False, False]])
    results["conv1d_collapse_batched"] = finite_difference_check(
        lambda: ad.tsum(ad.conv1d_collapse(xb, kernel, bias, maskb)),
        [xb, kernel, bias])
    return results


def _toy_instance(seed: int, n_nodes=8, d=8, n_layers=2, window=2):
    rng = np.random.default_rng(seed)
    snapshots = []
    for _ in range(window + 1):
        edges = set()
        for _ in range(12):
            u, v = rng.integers(0, n_nodes, size=2)
            if u != v:
                edges.add((int(u), int(v)))
        snapshots.append(frozenset(edges))
    seq = SnapshotSequence(snapshots=tuple(snapshots), n_nodes=n_nodes)
    cfg = SGTConfig(d=d, d_e=4, n_layers=n_layers, n_heads=2, max_spd=3,
                    k_max=6, conv_width=3)
    model = SGTModel(n_nodes, cfg, rng)
    graphs = build_diff_sequence(seq)
    policy = PathPolicy(max_spd=cfg.max_spd)
    structs = [all_pairs_structures(g, policy, cfg.k_max) for g in graphs]
    return model, structs, seq


def check_full_model(seed: int = 0, window: int = 2) -> float:
    """FD check of the loss through ``window`` forward steps plus link scoring."""
    model, structs, seq = _toy_instance(seed, window=window)
    target = sorted(seq.snapshots[window])
    negatives = training.sample_negatives(set(target), seq.n_nodes, 1.0,
                                          np.random.default_rng(seed + 1))
    pairs = target + negatives
    labels = np.array([1.0] * len(target) + [0.0] * len(negatives))
    src = np.array([p[0] for p in pairs])
    dst = np.array([p[1] for p in pairs])

    def loss_fn():
        h = model.params.X
        for structs_t in structs[:window]:
            h = model.forward_step(h, structs_t)
        preds = model.link_score(h, src, dst)
        return training.bce_loss(preds, labels,
                                 list(model.params.parameters()), 1e-4)

    params = list(model.params.parameters())
    return finite_difference_check(loss_fn, params)


def run_gradcheck(seed: int = 0) -> float:
    worst = 0.0
    for name, err in check_primitives(seed).items():
        print(f"  {name:24s} {err:.3e}")
        worst = max(worst, err)
    full = check_full_model(seed)
    print(f"  {'full_model':24s} {full:.3e}")
    return max(worst, full)
