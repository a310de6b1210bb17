"""Windowed recurrent training: negative sampling, BCE + L2 objective,
optimizer driving, and state carry-over along the snapshot sequence.

Gradients are truncated at window boundaries: each window unrolls exactly
``window`` forward steps from a detached entry state (the initial embedding
table for the first window, so it still trains).
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, no_grad
from .model import SGTModel
from .optim import AdamW


@dataclass
class TrainConfig:
    window: int = 5
    epochs: int = 20
    lr: float = 1e-3
    l2_lambda: float = 1e-5
    neg_ratio: float = 1.0
    batch_size: int = 0  # 0 = all target edges
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    grad_clip: float = 1.0  # global gradient-norm ceiling; 0 disables
    lr_final_frac: float = 1.0  # linear decay target as a fraction of lr
    reset_state_each_epoch: bool = True

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.neg_ratio <= 0:
            raise ValueError("neg_ratio must be positive")


def sample_negatives(e_target: set, n_nodes: int, ratio: float,
                     rng: np.random.Generator) -> list:
    """Uniform directed non-edges (no self-loops), deduplicated, seeded."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes to sample negatives")
    count = int(round(ratio * len(e_target)))
    if count == 0:
        return []
    available = n_nodes * (n_nodes - 1) - len(e_target)
    if count > available:
        raise ValueError(f"cannot sample {count} negatives, only {available} non-edges")
    chosen: dict = {}
    while len(chosen) < count:
        need = count - len(chosen)
        src = rng.integers(0, n_nodes, size=2 * need + 8)
        dst = rng.integers(0, n_nodes, size=2 * need + 8)
        for i, j in zip(src, dst):
            pair = (int(i), int(j))
            if i == j or pair in e_target or pair in chosen:
                continue
            chosen[pair] = None
            if len(chosen) == count:
                break
    return list(chosen)


def bce_loss(preds: Tensor, labels, params=(), l2_lambda: float = 0.0) -> Tensor:
    """Mean binary cross entropy (probabilities clamped) plus L2 penalty."""
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {labels.shape}")
    p = ad.clip(preds, 1e-12, 1.0 - 1e-12)
    y = Tensor(labels)
    nll = ad.mul(ad.add(ad.mul(y, ad.tlog(p)),
                        ad.mul(1.0 - y, ad.tlog(1.0 - p))), -1.0)
    total = ad.tmean(nll)
    if l2_lambda:
        reg = None
        for w in params:
            term = ad.tsum(ad.mul(w, w))
            reg = term if reg is None else ad.add(reg, term)
        if reg is not None:
            total = ad.add(total, ad.mul(reg, l2_lambda))
    return total


def clip_gradients(params, max_norm: float) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    params = [p for p in params if p.grad is not None]
    total = float(np.sqrt(sum((p.grad ** 2).sum() for p in params)))
    if total > max_norm:
        scale = max_norm / total
        for p in params:
            p.grad *= scale
    return total


def score_target(model: SGTModel, h: Tensor, e_target: set,
                 cfg: TrainConfig, rng: np.random.Generator):
    """Positives plus sampled negatives, scored on the final window state."""
    positives = sorted(e_target)
    if cfg.batch_size and len(positives) > cfg.batch_size:
        idx = rng.choice(len(positives), size=cfg.batch_size, replace=False)
        positives = [positives[i] for i in sorted(idx)]
    negatives = sample_negatives(e_target, model.n_nodes, cfg.neg_ratio, rng)
    pairs = positives + negatives
    labels = np.array([1.0] * len(positives) + [0.0] * len(negatives))
    src = np.array([p[0] for p in pairs], dtype=np.int64)
    dst = np.array([p[1] for p in pairs], dtype=np.int64)
    return model.link_score(h, src, dst), labels


def train_window(model: SGTModel, window_structs, h_entry: Tensor,
                 e_target: set, optimizer: AdamW, cfg: TrainConfig,
                 rng: np.random.Generator):
    """One optimizer step over one window; returns (loss, detached exit state).

    The exit state is a forward-only replay of the window with the updated
    parameters, gradient history severed.
    """
    h = h_entry
    for structs in window_structs:
        h = model.forward_step(h, structs)
    preds, labels = score_target(model, h, e_target, cfg, rng)
    loss = bce_loss(preds, labels, list(model.params.parameters()), cfg.l2_lambda)
    optimizer.zero_grad()
    loss.backward()
    if cfg.grad_clip:
        clip_gradients(optimizer.params, cfg.grad_clip)
    optimizer.step()
    with no_grad():
        h_exit = Tensor(h_entry.data.copy())
        for structs in window_structs:
            h_exit = model.forward_step(h_exit, structs)
    return loss.item(), h_exit.detach()


def fit(model: SGTModel, struct_seq, edge_sets, cfg: TrainConfig,
        log_path=None):
    """Epochs of sliding windows in temporal order; target is the next snapshot.

    ``struct_seq[t]`` holds the structural features of the difference graph at
    slice ``t``; ``edge_sets[t]`` is the raw snapshot edge set (prediction
    targets are snapshot membership, never the union graph).
    """
    n_slices = len(struct_seq)
    if n_slices < cfg.window + 1:
        raise ValueError(f"need at least window+1={cfg.window + 1} snapshots, "
                         f"got {n_slices}")
    rng = np.random.default_rng(cfg.seed)
    optimizer = AdamW(model.params.parameters(), lr=cfg.lr, beta1=cfg.beta1,
                      beta2=cfg.beta2, eps=cfg.eps,
                      weight_decay=cfg.weight_decay)
    log = []
    h_carry = model.initial_state()
    for epoch in range(cfg.epochs):
        if cfg.epochs > 1:
            frac = epoch / (cfg.epochs - 1)
            optimizer.lr = cfg.lr * (1.0 - frac * (1.0 - cfg.lr_final_frac))
        h_run = model.initial_state() if cfg.reset_state_each_epoch else h_carry
        losses = []
        for start in range(n_slices - cfg.window):
            t0 = time.perf_counter()
            window_structs = struct_seq[start:start + cfg.window]
            target = edge_sets[start + cfg.window]
            loss, _ = train_window(model, window_structs, h_run, set(target),
                                   optimizer, cfg, rng)
            with no_grad():
                h_run = model.forward_step(
                    Tensor(h_run.data.copy()), struct_seq[start]).detach()
            losses.append(loss)
            log.append({"epoch": epoch, "window": start, "loss": loss,
                        "wall_time": time.perf_counter() - t0})
        if not cfg.reset_state_each_epoch:
            with no_grad():
                for t in range(n_slices - cfg.window, n_slices):
                    h_run = model.forward_step(h_run, struct_seq[t]).detach()
            h_carry = h_run
    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["epoch", "window", "loss",
                                                    "wall_time"])
            writer.writeheader()
            writer.writerows(log)
    return log
