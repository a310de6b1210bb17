"""Test protocol: roll states forward without weight updates, build per-snapshot
edge datasets, fit a logistic classifier on 80% of each snapshot's edges, and
report accuracy / recall / precision / F1 on the held-out 20%.
"""

from __future__ import annotations

import warnings

import numpy as np

from .autodiff import Tensor, no_grad
from .model import SGTModel


def roll_test_states(model: SGTModel, struct_seq, n_train: int):
    """Forward through every slice with frozen weights; return the state
    entering each test slice (history up to, excluding, the target)."""
    states = []
    with no_grad():
        h = Tensor(model.params.X.data.copy())
        for t, structs in enumerate(struct_seq):
            if t >= n_train:
                states.append(h.detach())
            h = model.forward_step(h, structs).detach()
    return states


def compute_metrics(pred_labels, true_labels):
    """(accuracy, recall, precision, f1) with 0-valued degenerate conventions."""
    pred = np.asarray(pred_labels, dtype=np.int64)
    true = np.asarray(true_labels, dtype=np.int64)
    if pred.size == 0 or pred.shape != true.shape:
        raise ValueError("labels must be non-empty and equal length")
    tp = int(((pred == 1) & (true == 1)).sum())
    fp = int(((pred == 1) & (true == 0)).sum())
    fn = int(((pred == 0) & (true == 1)).sum())
    accuracy = float((pred == true).mean())
    if tp + fp == 0:
        warnings.warn("no positive predictions; precision defined as 0")
        precision = 0.0
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        warnings.warn("no positive labels; recall defined as 0")
        recall = 0.0
    else:
        recall = tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return accuracy, recall, precision, f1


def logistic_fit(x: np.ndarray, y: np.ndarray, lr: float = 0.5,
                 tol: float = 1e-6, max_iter: int = 500):
    """Full-batch gradient descent on BCE with intercept; features standardized."""
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    xs = (x - mu) / sd
    w = np.zeros(x.shape[1])
    b = 0.0
    prev = np.inf
    for _ in range(max_iter):
        z = xs @ w + b
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
        pc = np.clip(p, 1e-12, 1 - 1e-12)
        loss = -np.mean(y * np.log(pc) + (1 - y) * np.log(1 - pc))
        if abs(prev - loss) < tol:
            break
        prev = loss
        g = p - y
        w -= lr * (xs.T @ g) / len(y)
        b -= lr * g.mean()
    return w, b, mu, sd


def logistic_predict(x, w, b, mu, sd):
    z = (x - mu) / sd @ w + b
    return (z >= 0).astype(np.int64)


def logistic_eval(features: np.ndarray, labels: np.ndarray, split_seed: int,
                  lr: float = 0.5, tol: float = 1e-6, max_iter: int = 500):
    """Stratified 80/20 split, in-repo logistic regression, held-out metrics."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(split_seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 5:
            raise ValueError(f"need at least 5 examples of class {cls}, got {len(idx)}")
        rng.shuffle(idx)
        cut = int(round(0.8 * len(idx)))
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    train_idx = np.array(sorted(train_idx))
    test_idx = np.array(sorted(test_idx))
    w, b, mu, sd = logistic_fit(features[train_idx], labels[train_idx].astype(float),
                                lr=lr, tol=tol, max_iter=max_iter)
    pred = logistic_predict(features[test_idx], w, b, mu, sd)
    accuracy, recall, precision, f1 = compute_metrics(pred, labels[test_idx])
    return {"accuracy": accuracy, "recall": recall, "precision": precision,
            "f1": f1}


def pair_features(h_state: Tensor, pairs) -> np.ndarray:
    """|h_i - h_j| feature rows for candidate edges."""
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    return np.abs(h_state.data[src] - h_state.data[dst])


def common_neighbor_features(prev_edges: set, pairs) -> np.ndarray:
    """Heuristic baseline feature: undirected common-neighbor count in the
    previous snapshot."""
    neighbors: dict[int, set] = {}
    for u, v in prev_edges:
        neighbors.setdefault(u, set()).add(v)
        neighbors.setdefault(v, set()).add(u)
    counts = [len(neighbors.get(i, set()) & neighbors.get(j, set()))
              for i, j in pairs]
    return np.array(counts, dtype=np.float64)[:, None]


def summarize(metric_dicts):
    """Mean and population std per metric over a list of metric dicts."""
    keys = ("accuracy", "recall", "precision", "f1")
    mean = {k: float(np.mean([m[k] for m in metric_dicts])) for k in keys}
    std = {k: float(np.std([m[k] for m in metric_dicts])) for k in keys}
    return mean, std
