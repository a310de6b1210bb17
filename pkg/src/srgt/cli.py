"""Experiment driver: ingest -> difference graphs -> train -> roll -> evaluate.

Subcommands: ingest, train, eval, run, gen-synth, gradcheck.  Results are a
JSON report (no timestamps, byte-reproducible per seed), a CSV training log,
and binary parameter checkpoints.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import evaluation, training
from .config import ExperimentConfig, apply_ablation, load_config, set_key
from .diffgraph import build_diff_sequence
from .model import SGTModel
from .snapshots import parse_edge_list, slice_snapshots, split_train_test
from .structures import PathPolicy, all_pairs_structures
from .synth import gen_synthetic


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10)
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def load_dataset(cfg: ExperimentConfig):
    text = Path(cfg.dataset.path).read_text()
    tel = parse_edge_list(text)
    seq = slice_snapshots(tel, cfg.dataset.n_slices)
    split_train_test(seq, cfg.dataset.n_train)  # validates the split
    return seq


def prepare_structures(cfg: ExperimentConfig, seq):
    """Difference graphs over the full sequence plus cached pair structures."""
    graphs = build_diff_sequence(
        seq, cfg.graph.alpha, cfg.graph.beta,
        use_types=cfg.model.use_edge_types,
        use_weights=cfg.model.use_edge_weights,
        use_diff=cfg.model.use_diff_graph,
        cumulative=cfg.graph.cumulative_duration)
    policy = PathPolicy(max_spd=cfg.model.max_spd)
    structs = [all_pairs_structures(g, policy, cfg.model.k_max) for g in graphs]
    return graphs, structs


def _eval_snapshot(model, h_state, e_target, n_nodes, rng, split_seed,
                   prev_edges, baseline: bool):
    positives = sorted(e_target)
    negatives = training.sample_negatives(set(e_target), n_nodes, 1.0, rng)
    pairs = positives + negatives
    labels = np.array([1] * len(positives) + [0] * len(negatives))
    feats = evaluation.pair_features(h_state, pairs)
    metrics = evaluation.logistic_eval(feats, labels, split_seed)
    result = {"model": metrics}
    if baseline:
        cn = evaluation.common_neighbor_features(prev_edges, pairs)
        result["baseline"] = evaluation.logistic_eval(cn, labels, split_seed)
    return result, (pairs, labels)


def run_seed(cfg: ExperimentConfig, seq, structs, seed: int, out_dir: Path,
             do_train: bool = True):
    """Train and evaluate one repetition; all randomness derives from ``seed``."""
    ss = np.random.SeedSequence(seed)
    init_seed, sample_seed, eval_seed = [int(s.generate_state(1)[0])
                                         for s in ss.spawn(3)]
    n_train = cfg.dataset.n_train
    model = SGTModel(seq.n_nodes, cfg.model, np.random.default_rng(init_seed))
    edge_sets = [set(s) for s in seq.snapshots]
    checkpoint = out_dir / f"checkpoint_seed{seed}.bin"
    if do_train:
        train_cfg = cfg.train
        train_cfg.seed = sample_seed
        training.fit(model, structs[:n_train], edge_sets[:n_train], train_cfg,
                     log_path=out_dir / f"train_log_seed{seed}.csv")
        model.params.save(checkpoint)
    else:
        model.params.load(checkpoint)

    states = evaluation.roll_test_states(model, structs, n_train)
    eval_rng = np.random.default_rng(eval_seed)
    per_snapshot = []
    pooled_feats, pooled_cn, pooled_labels = [], [], []
    for offset, h_state in enumerate(states):
        t = n_train + offset
        e_target = edge_sets[t]
        if len(e_target) < 7:
            continue  # too small for a stratified 80/20 split
        split_seed = int(eval_rng.integers(0, 2 ** 31))
        if cfg.eval.pooled:
            positives = sorted(e_target)
            negatives = training.sample_negatives(e_target, seq.n_nodes, 1.0,
                                                  eval_rng)
            pairs = positives + negatives
            pooled_labels.extend([1] * len(positives) + [0] * len(negatives))
            pooled_feats.append(evaluation.pair_features(h_state, pairs))
            pooled_cn.append(evaluation.common_neighbor_features(
                seq.snapshots[t - 1], pairs))
            continue
        entry, _ = _eval_snapshot(model, h_state, e_target, seq.n_nodes,
                                  eval_rng, split_seed, seq.snapshots[t - 1],
                                  cfg.eval.baseline)
        entry["snapshot"] = t
        per_snapshot.append(entry)
    if cfg.eval.pooled and pooled_feats:
        labels = np.array(pooled_labels)
        split_seed = int(eval_rng.integers(0, 2 ** 31))
        entry = {"snapshot": "pooled",
                 "model": evaluation.logistic_eval(np.vstack(pooled_feats),
                                                   labels, split_seed)}
        if cfg.eval.baseline:
            entry["baseline"] = evaluation.logistic_eval(np.vstack(pooled_cn),
                                                         labels, split_seed)
        per_snapshot = [entry]
    mean, std = evaluation.summarize([e["model"] for e in per_snapshot])
    run = {"seed": seed, "per_snapshot": per_snapshot, "mean": mean, "std": std}
    if cfg.eval.baseline:
        bmean, bstd = evaluation.summarize([e["baseline"] for e in per_snapshot])
        run["baseline_mean"] = bmean
        run["baseline_std"] = bstd
    return run


def run_experiment(cfg: ExperimentConfig, do_train: bool = True) -> str:
    """Full pipeline over every evaluation seed; returns the results file path."""
    apply_ablation(cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        seq = load_dataset(cfg)
    except Exception as exc:
        raise StageError("ingest", exc) from exc
    try:
        _, structs = prepare_structures(cfg, seq)
    except Exception as exc:
        raise StageError("diff-graph", exc) from exc
    runs = []
    for seed in cfg.eval.seeds:
        try:
            runs.append(run_seed(cfg, seq, structs, seed, out_dir, do_train))
        except Exception as exc:
            raise StageError(f"seed-{seed}", exc) from exc
    mean, std = evaluation.summarize([r["mean"] for r in runs])
    report = {
        "config": cfg.to_dict(),
        "git": _git_describe(),
        "seeds": list(cfg.eval.seeds),
        "runs": runs,
        "mean": mean,
        "std": std,
    }
    if cfg.eval.baseline:
        bmean, bstd = evaluation.summarize([r["baseline_mean"] for r in runs])
        report["baseline_mean"] = bmean
        report["baseline_std"] = bstd
    results_path = out_dir / "results.json"
    results_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return str(results_path)


# -- command-line front end -------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", type=str, help="key=value config file")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config key (repeatable, last wins)")
    sub.add_argument("--ablation", choices=["full", "T", "W", "TW", "S", "P", "SP"])
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out", type=str)


def _build_cfg(args) -> ExperimentConfig:
    overrides = []
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        overrides.append(tuple(item.split("=", 1)))
    if args.ablation:
        overrides.append(("ablation", args.ablation))
    if args.seed is not None:
        overrides.append(("eval.seeds", str(args.seed)))
    if args.out:
        overrides.append(("out_dir", args.out))
    if args.config:
        return load_config(args.config, overrides)
    cfg = ExperimentConfig()
    for key, value in overrides:
        set_key(cfg, key, value)
    return apply_ablation(cfg)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="srgt")
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("ingest", "train", "eval", "run"):
        _add_common(subs.add_parser(name))
    gen = subs.add_parser("gen-synth")
    gen.add_argument("--kind", choices=["planted-persistent", "churn"],
                     default="planted-persistent")
    gen.add_argument("--nodes", type=int, default=50)
    gen.add_argument("--slices", type=int, default=20)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=str, required=True)
    gen.add_argument("--backbone", type=int)
    gen.add_argument("--noise", type=int)
    grad = subs.add_parser("gradcheck")
    grad.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if args.command == "gen-synth":
        path = gen_synthetic(args.kind, args.nodes, args.slices, args.seed,
                             args.out, backbone_size=args.backbone,
                             noise_per_slice=args.noise)
        print(path)
        return 0
    if args.command == "gradcheck":
        from .gradcheck import run_gradcheck
        worst = run_gradcheck(args.seed)
        print(f"max relative error: {worst:.3e}")
        return 0 if worst < 1e-4 else 1

    try:
        cfg = _build_cfg(args)
        if args.command == "ingest":
            try:
                seq = load_dataset(cfg)
            except Exception as exc:
                raise StageError("ingest", exc) from exc
            sizes = [len(s) for s in seq.snapshots]
            print(f"nodes={seq.n_nodes} slices={len(sizes)} "
                  f"edges/slice min={min(sizes)} max={max(sizes)}")
            return 0
        # eval reuses the checkpoints written by a prior train/run
        path = run_experiment(cfg, do_train=args.command != "eval")
        print(path)
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
