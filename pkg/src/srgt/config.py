"""Experiment configuration: plain key=value files with section prefixes,
command-line overrides (last writer wins), and ablation presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

from .model import SGTConfig
from .training import TrainConfig


@dataclass
class DatasetConfig:
    path: str = ""
    n_slices: int = 20
    n_train: int = 15


@dataclass
class GraphConfig:
    alpha: float = 1.0
    beta: float = 1.0
    cumulative_duration: bool = False


@dataclass
class EvalConfig:
    seeds: tuple = (0, 1, 2, 3, 4)
    pooled: bool = False
    baseline: bool = True


ABLATIONS = ("full", "T", "W", "TW", "S", "P", "SP")


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    model: SGTConfig = field(default_factory=SGTConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    ablation: str = "full"
    out_dir: str = "results"

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")

    def to_dict(self):
        d = asdict(self)
        d["eval"]["seeds"] = list(self.eval.seeds)
        return d


def apply_ablation(cfg: ExperimentConfig):
    """Map the ablation preset onto the model/graph flags (in place)."""
    if cfg.ablation not in ABLATIONS:
        raise ValueError(f"ablation must be one of {ABLATIONS}")
    m = cfg.model
    m.use_edge_types = cfg.ablation not in ("T", "TW")
    m.use_edge_weights = cfg.ablation not in ("W", "TW")
    m.use_diff_graph = cfg.ablation != "TW"
    m.use_topo_attr = cfg.ablation not in ("S", "SP")
    m.use_path_attr = cfg.ablation not in ("P", "SP")
    return cfg


def _coerce(current, raw: str):
    if isinstance(current, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    if isinstance(current, tuple):
        return tuple(int(x) for x in raw.split(",") if x)
    return raw


def set_key(cfg: ExperimentConfig, key: str, raw: str):
    """Assign a dotted config key like ``model.d`` or ``ablation``."""
    target = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        if not hasattr(target, part):
            raise ValueError(f"unknown config section {part!r} in {key!r}")
        target = getattr(target, part)
    name = parts[-1]
    if not hasattr(target, name):
        raise ValueError(f"unknown config key {key!r}")
    setattr(target, name, _coerce(getattr(target, name), raw))


def parse_config(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        set_key(cfg, key.strip(), value.strip())
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    with open(path) as fh:
        cfg = parse_config(fh.read())
    for key, value in overrides:
        set_key(cfg, key, value)
    return apply_ablation(cfg)
