"""Full-batch training loops for the two model variants.

One epoch is: encode (variationally for dvga) -> per-channel flows ->
factor-wise decode -> loss composition -> one Adam step over model and
discriminator parameters together. The reconstruction target is the train
adjacency only; held-out edges never enter a loss. The best checkpoint by
validation AUC is restored into the returned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .decoder import decode
from .evaluation import embed, rank_metrics, score_pairs
from .flows import apply_flows
from .graphs import (
    EdgeSplit,
    Graph,
    SyntheticSpec,
    load_graph,
    split_edges,
    synth_graph,
    tune_p_for_degree,
)
from .model import ModelParams, init_model, parameters, restore, snapshot
from .objectives import independence_loss, kl_with_flow, recon_loss, total_objective
from .optim import Adam
from .encoder import encode
from .tensor import Tape, Tensor, set_finite_checks


@dataclass
class RunHistory:
    """Per-epoch loss components plus periodic validation metrics."""

    records: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_auc: float = math.nan

    def to_jsonl_rows(self) -> list[dict]:
        return self.records


def dataset_from_config(cfg: TrainConfig) -> Graph:
    """Load the configured dataset files or build the synthetic recipe."""
    if cfg.synth_factors > 0:
        per_factor = cfg.synth_target_degree / cfg.synth_factors
        p = tune_p_for_degree(
            cfg.synth_nodes, cfg.synth_classes, cfg.synth_q, per_factor,
            seed=cfg.synth_seed,
        )
        return synth_graph(SyntheticSpec(
            factors=cfg.synth_factors,
            nodes=cfg.synth_nodes,
            classes=cfg.synth_classes,
            intra_p=p,
            inter_q=cfg.synth_q,
            seed=cfg.synth_seed,
        ))
    return load_graph(cfg.edges, cfg.features or None, cfg.labels or None)


def split_from_config(cfg: TrainConfig, graph: Graph | None = None) -> EdgeSplit:
    """Deterministic split for a config; the run seed also seeds the split."""
    if graph is None:
        graph = dataset_from_config(cfg)
    return split_edges(graph, cfg.val_frac, cfg.test_frac, seed=cfg.seed)


def train(split: EdgeSplit, cfg: TrainConfig) -> tuple[ModelParams, RunHistory]:
    """Dispatch to the configured mode's training loop."""
    cfg.validate()
    if cfg.mode == "dvga":
        return train_dvga(split, cfg)
    return train_dga(split, cfg)


def train_dga(split: EdgeSplit, cfg: TrainConfig) -> tuple[ModelParams, RunHistory]:
    if cfg.mode != "dga":
        raise ValueError(f"train_dga called with mode={cfg.mode!r}")
    return _run(split, cfg)


def train_dvga(split: EdgeSplit, cfg: TrainConfig) -> tuple[ModelParams, RunHistory]:
    if cfg.mode != "dvga":
        raise ValueError(f"train_dvga called with mode={cfg.mode!r}")
    return _run(split, cfg)


def _guarded(stage: str, epoch: int, fn):
    try:
        return fn()
    except (FloatingPointError, ValueError) as exc:
        raise RuntimeError(
            f"epoch {epoch}: non-finite or invalid value during {stage}: {exc}"
        ) from exc


def _run(split: EdgeSplit, cfg: TrainConfig) -> tuple[ModelParams, RunHistory]:
    rng = np.random.default_rng(cfg.seed)
    dtype = cfg.numpy_dtype()
    graph = split.train
    n = graph.num_nodes
    x = Tensor(graph.features.astype(dtype))
    adjacency = graph.adjacency(dtype=dtype)
    src, dst = graph.directed_edge_index()
    variational = cfg.mode == "dvga"

    model = init_model(cfg, graph.feature_dim, rng)
    params = parameters(model)
    optimizer = Adam(params, lr=cfg.learning_rate)
    history = RunHistory()
    best_arrays = None

    previous_checks = set_finite_checks(cfg.finite_checks)
    try:
        for epoch in range(1, cfg.epochs + 1):
            eps = rng.standard_normal((n, cfg.embed_dim)) if variational else None
            with Tape() as tape:
                result = _guarded("encode", epoch, lambda: encode(
                    x, src, dst, n, model.encoder,
                    variational=variational, eps=eps, dropout_rng=rng,
                ))
                z, logdet = _guarded("flows", epoch, lambda: apply_flows(
                    result.z, model.flows,
                ))
                probs = _guarded("decode", epoch, lambda: decode(z, cfg.channels))
                recon = _guarded("recon_loss", epoch, lambda: recon_loss(probs, adjacency))
                kl = None
                if variational:
                    if model.flows is None:
                        kl_raw = _guarded("kl", epoch, lambda: kl_with_flow(
                            result.mean, result.logvar,
                        ))
                    else:
                        kl_raw = _guarded("kl", epoch, lambda: kl_with_flow(
                            result.mean, result.logvar,
                            logdet=logdet, z_flowed=z, eps=eps,
                        ))
                    # Balanced against the per-pair averaged reconstruction.
                    kl = (1.0 / (n * n)) * kl_raw
                indep = _guarded("independence_loss", epoch, lambda: independence_loss(
                    result.first_projections, model.discriminator,
                ))
                total, report = _guarded("objective", epoch, lambda: total_objective(
                    cfg.mode, recon, indep, cfg.indep_weight, kl=kl,
                ))
            _check_report(report, epoch)
            grads = tape.gradients(total, params)
            optimizer.step(grads)

            record = {
                "epoch": epoch,
                "recon": report.recon,
                "kl": report.kl,
                "indep": report.indep,
                "total": report.total,
            }
            if split.val_pos and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                auc, ap = _validation_metrics(model, split, cfg)
                record["val_auc"] = auc
                record["val_ap"] = ap
                if math.isnan(history.best_val_auc) or auc > history.best_val_auc:
                    history.best_val_auc = auc
                    history.best_epoch = epoch
                    best_arrays = snapshot(model)
            history.records.append(record)
    finally:
        set_finite_checks(previous_checks)

    if best_arrays is not None:
        restore(model, best_arrays)
    else:
        history.best_epoch = cfg.epochs
    return model, history


def _check_report(report, epoch: int) -> None:
    for name in ("recon", "kl", "indep", "total"):
        value = getattr(report, name)
        if value is not None and not math.isfinite(value):
            raise RuntimeError(f"epoch {epoch}: {name} loss is not finite ({value})")


def _validation_metrics(model: ModelParams, split: EdgeSplit,
                        cfg: TrainConfig) -> tuple[float, float]:
    z = embed(model, split.train)
    pos = score_pairs(z, cfg.channels, split.val_pos)
    neg = score_pairs(z, cfg.channels, split.val_neg)
    return rank_metrics(pos, neg)
