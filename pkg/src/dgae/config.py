"""Training configuration and the flat key=value experiment file format.

Config files hold one ``key = value`` pair per line with '#' comments.
Unknown keys are errors (no silent typos), and validation reports every
problem at once. All keys and defaults are listed in DEFAULTS; the same
keys work as ``--set key=value`` overrides on the command line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

import numpy as np


class ConfigError(ValueError):
    """One or more configuration problems; ``problems`` lists them all."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class TrainConfig:
    # model
    mode: str = "dga"
    channels: int = 4
    channel_dim: int = 16
    layers: int = 2
    assign_iters: int = 3
    flow_steps: int = 0
    flow_split: int = 0              # 0 = channel_dim // 2
    indep_weight: float = 0.01
    # optimization
    learning_rate: float = 0.01
    dropout: float = 0.0
    epochs: int = 3000
    seed: int = 0
    # data: either file paths or an inline synthetic recipe
    edges: str = ""
    features: str = ""
    labels: str = ""
    val_frac: float = 0.05
    test_frac: float = 0.10
    synth_factors: int = 0           # > 0 switches to the synthetic recipe
    synth_nodes: int = 1000
    synth_classes: int = 16
    synth_q: float = 3e-5
    synth_target_degree: float = 40.0
    synth_seed: int = 0
    # bookkeeping
    eval_every: int = 25
    out_dir: str = "runs/run"
    dtype: str = "float64"
    finite_checks: bool = True

    def __post_init__(self):
        self.mode = self.mode.lower()  # accept DGA/DVGA spellings

    @property
    def embed_dim(self) -> int:
        return self.channels * self.channel_dim

    @property
    def resolved_flow_split(self) -> int:
        return self.flow_split if self.flow_split > 0 else self.channel_dim // 2

    def numpy_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    def validate(self) -> None:
        problems = []
        if self.mode not in ("dga", "dvga"):
            problems.append(f"mode must be 'dga' or 'dvga', got {self.mode!r}")
        for name in ("channels", "channel_dim", "layers", "assign_iters", "epochs"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        if self.flow_steps < 0:
            problems.append("flow_steps must be >= 0")
        if self.mode == "dga" and self.flow_steps > 0:
            problems.append("flow_steps > 0 requires mode=dvga")
        if self.flow_split and not 1 <= self.flow_split < self.channel_dim:
            problems.append(
                f"flow_split must be 0 (auto) or in [1, {self.channel_dim - 1}]"
            )
        if self.channel_dim == 1 and self.flow_steps > 0:
            problems.append("flows need channel_dim >= 2 to split coordinates")
        if not 0 <= self.dropout < 1:
            problems.append("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            problems.append("learning_rate must be positive")
        if self.indep_weight < 0:
            problems.append("indep_weight must be >= 0")
        if self.val_frac < 0 or self.test_frac < 0 or self.val_frac + self.test_frac >= 1:
            problems.append("val_frac + test_frac must be < 1, both >= 0")
        if self.eval_every < 1:
            problems.append("eval_every must be >= 1")
        if self.dtype not in ("float32", "float64"):
            problems.append("dtype must be float32 or float64")
        if self.synth_factors < 0:
            problems.append("synth_factors must be >= 0")
        if not self.edges and self.synth_factors == 0:
            problems.append("either edges=<path> or synth_factors>0 is required")
        if self.edges and self.synth_factors > 0:
            problems.append("edges and synth_factors are mutually exclusive")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        """Hash of the experiment definition, ignoring seed and out_dir.

        Runs that differ only by seed share a hash so a summarizer can
        aggregate them.
        """
        skip = {"seed", "out_dir"}
        text = "\n".join(
            f"{k}={v}" for k, v in sorted(self.to_dict().items()) if k not in skip
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_FIELD_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _parse_value(key: str, raw: str, problems: list[str]):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        problems.append(f"{key}: cannot parse {raw!r} as {kind}")
        return None


def config_from_pairs(pairs: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
    cfg = TrainConfig(**(base.to_dict() if base else {}))
    problems = []
    for key, raw in pairs.items():
        if key not in _FIELD_TYPES:
            problems.append(f"unknown config key {key!r}")
            continue
        value = _parse_value(key, raw, problems)
        if value is not None:
            setattr(cfg, key, value)
    if problems:
        raise ConfigError(problems)
    cfg.mode = cfg.mode.lower()
    return cfg


def load_config(path, overrides: dict[str, str] | None = None) -> TrainConfig:
    """Parse a config file plus overrides; validates before returning."""
    pairs: dict[str, str] = {}
    problems: list[str] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                problems.append(f"{path}:{lineno}: expected 'key = value'")
                continue
            key, raw = text.split("=", 1)
            pairs[key.strip()] = raw.strip()
    if problems:
        raise ConfigError(problems)
    cfg = config_from_pairs(pairs)
    if overrides:
        cfg = config_from_pairs(overrides, base=cfg)
    cfg.validate()
    return cfg


def save_config(cfg: TrainConfig, path) -> None:
    with open(path, "w") as fh:
        for key, value in cfg.to_dict().items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            fh.write(f"{key} = {value}\n")


def config_to_json(cfg: TrainConfig) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True)


def config_from_json(text: str) -> TrainConfig:
    return TrainConfig(**json.loads(text))
