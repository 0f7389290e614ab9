"""Command-line interface: synth, train, eval, sweep, summarize."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from .config import ConfigError, TrainConfig, config_from_pairs, load_config, save_config
from .evaluation import (
    evaluate_clustering,
    evaluate_correlation,
    evaluate_link_prediction,
)
from .graphs import SyntheticSpec, joint_labels, save_graph, synth_graph, tune_p_for_degree
from .model import load_checkpoint, save_checkpoint
from .reporting import (
    append_metrics_record,
    ensure_dir,
    read_metrics_records,
    render_correlation_heatmap,
    render_loss_curves,
    summarize_records,
    write_history_csv,
    write_history_jsonl,
    write_matrix_csv,
    write_summary_csv,
)
from .training import dataset_from_config, split_from_config, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dgae",
        description="Disentangled (variational) graph auto-encoder experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a latent-factor synthetic graph")
    synth.add_argument("--factors", type=int, required=True)
    synth.add_argument("--nodes", type=int, default=1000)
    synth.add_argument("--classes", type=int, default=16)
    synth.add_argument("--q", type=float, default=3e-5, help="inter-class edge probability")
    synth.add_argument("--target-degree", type=float, default=40.0,
                       help="target mean degree of the union graph")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="output directory")

    tr = sub.add_parser("train", help="train a model from a config file")
    tr.add_argument("--config", required=True)
    tr.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a config key (repeatable)")

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--tasks", default="linkpred",
                    help="comma list from {linkpred, cluster, correlation}")
    ev.add_argument("--k", type=int, default=0,
                    help="cluster count (default: inferred from labels)")
    ev.add_argument("--cluster-seed", type=int, default=0)
    ev.add_argument("--label-view", default="joint", choices=["joint", "factor"],
                    help="how to read multi-factor label matrices")
    ev.add_argument("--label-factor", type=int, default=0,
                    help="factor column when --label-view=factor")
    ev.add_argument("--out", default="", help="output directory (default: checkpoint dir)")

    sw = sub.add_parser("sweep", help="train every config in a grid")
    sw.add_argument("--config", required=True)
    sw.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                    help="values to sweep for one key (repeatable)")
    sw.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sw.add_argument("--jobs", type=int, default=1)

    sm = sub.add_parser("summarize", help="aggregate metrics records to CSV")
    sm.add_argument("records", nargs="+", help="metrics.jsonl files")
    sm.add_argument("--out", required=True, help="summary CSV path")

    return parser


def _parse_overrides(items: list[str]) -> dict[str, str]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ConfigError([f"--set expects KEY=VALUE, got {item!r}"])
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def cmd_synth(args) -> int:
    out = ensure_dir(args.out)
    if args.factors < 1:
        raise ConfigError(["--factors must be >= 1"])
    per_factor = args.target_degree / args.factors
    p = tune_p_for_degree(args.nodes, args.classes, args.q, per_factor, seed=args.seed)
    spec = SyntheticSpec(
        factors=args.factors, nodes=args.nodes, classes=args.classes,
        intra_p=p, inter_q=args.q, seed=args.seed,
    )
    graph = synth_graph(spec)
    save_graph(graph, out / "edges.txt", out / "features.txt", out / "labels.txt")
    realized = float(graph.degrees().mean())
    manifest = {
        "schema_version": 1,
        "factors": args.factors,
        "nodes": args.nodes,
        "classes": args.classes,
        "inter_q": args.q,
        "target_degree": args.target_degree,
        "per_factor_target_degree": per_factor,
        "resolved_p": p,
        "realized_mean_degree": realized,
        "seed": args.seed,
        "files": {"edges": "edges.txt", "features": "features.txt", "labels": "labels.txt"},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    print(f"synth: n={args.nodes} factors={args.factors} p={p:.6g} "
          f"mean_degree={realized:.2f} -> {out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, overrides=_parse_overrides(args.set))
    split = split_from_config(cfg)
    model, history = train(split, cfg)

    out = ensure_dir(cfg.out_dir)
    meta = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "best_epoch": history.best_epoch,
        "best_val_auc": history.best_val_auc,
    }
    save_checkpoint(out / "checkpoint.npz", model, cfg, meta)
    save_config(cfg, out / "resolved.cfg")
    write_history_jsonl(out / "history.jsonl", history)
    write_history_csv(out / "loss_curves.csv", history)
    render_loss_curves(out / "loss_curves.png", history)
    last = history.records[-1]
    print(f"train: mode={cfg.mode} epochs={cfg.epochs} total={last['total']:.4f} "
          f"best_val_auc={history.best_val_auc:.4f} -> {out}")
    return 0


def _cluster_labels(graph, view: str, factor: int) -> np.ndarray:
    if graph.labels is None:
        raise ValueError("clustering requires a labeled dataset")
    labels = graph.labels
    if labels.ndim == 1:
        return labels
    if view == "joint":
        return joint_labels(labels)
    if factor < 0 or factor >= labels.shape[1]:
        raise ValueError(f"label factor {factor} out of range")
    return labels[:, factor]


def cmd_eval(args) -> int:
    model, cfg, meta = load_checkpoint(args.checkpoint)
    graph = dataset_from_config(cfg)
    if graph.feature_dim != model.feature_dim:
        raise ValueError(
            f"checkpoint expects {model.feature_dim} features, dataset has {graph.feature_dim}"
        )
    split = split_from_config(cfg, graph=graph)
    out = ensure_dir(args.out or Path(args.checkpoint).parent)
    metrics_path = out / "metrics.jsonl"

    base = {
        "config_hash": meta.get("config_hash", cfg.hash()),
        "seed": cfg.seed,
        "mode": cfg.mode,
    }
    tasks = [t.strip() for t in args.tasks.split(",") if t.strip()]
    known = {"linkpred", "cluster", "correlation"}
    unknown = [t for t in tasks if t not in known]
    if unknown:
        raise ValueError(f"unknown tasks: {unknown} (choose from {sorted(known)})")

    for task in tasks:
        record = dict(base, task=task)
        if task == "linkpred":
            record.update(evaluate_link_prediction(model, split, cfg.channels))
        elif task == "cluster":
            labels = _cluster_labels(graph, args.label_view, args.label_factor)
            k = args.k or int(labels.max()) + 1
            record["k"] = k
            record.update(evaluate_clustering(
                model, split.train, k, args.cluster_seed, labels,
            ))
        elif task == "correlation":
            report = evaluate_correlation(model, split.train, cfg.channel_dim)
            record["within_block_mean"] = report.within_mean
            record["between_block_mean"] = report.between_mean
            record["block_ratio"] = report.block_ratio
            write_matrix_csv(out / "correlation.csv", report.matrix)
            render_correlation_heatmap(
                out / "correlation.png", report.matrix, cfg.channel_dim,
            )
        append_metrics_record(metrics_path, record)
        shown = {k: v for k, v in record.items() if k not in base or k == "task"}
        print(f"eval: {json.dumps(shown, sort_keys=True, default=str)}")
    return 0


def _sweep_worker(payload: str) -> str:
    cfg = TrainConfig(**json.loads(payload))
    split = split_from_config(cfg)
    model, history = train(split, cfg)
    out = ensure_dir(cfg.out_dir)
    meta = {
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "best_epoch": history.best_epoch,
        "best_val_auc": history.best_val_auc,
    }
    save_checkpoint(out / "checkpoint.npz", model, cfg, meta)
    save_config(cfg, out / "resolved.cfg")
    write_history_jsonl(out / "history.jsonl", history)
    write_history_csv(out / "loss_curves.csv", history)
    render_loss_curves(out / "loss_curves.png", history)
    return f"{cfg.out_dir}: best_val_auc={history.best_val_auc:.4f}"


def cmd_sweep(args) -> int:
    base = load_config(args.config, overrides=_parse_overrides(args.set))
    axes: list[tuple[str, list[str]]] = []
    for item in args.grid:
        if "=" not in item:
            raise ConfigError([f"--grid expects KEY=V1,V2, got {item!r}"])
        key, values = item.split("=", 1)
        axes.append((key.strip(), [v.strip() for v in values.split(",") if v.strip()]))
    if not axes:
        raise ConfigError(["sweep needs at least one --grid axis"])

    jobs = []
    for combo in product(*(values for _, values in axes)):
        overrides = {key: value for (key, _), value in zip(axes, combo)}
        slug = "_".join(f"{k}-{v}" for k, v in overrides.items())
        overrides["out_dir"] = str(Path(base.out_dir) / slug)
        cfg = config_from_pairs(overrides, base=base)
        cfg.validate()
        jobs.append(json.dumps(cfg.to_dict()))

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for line in pool.map(_sweep_worker, jobs):
                print(line)
    else:
        for payload in jobs:
            print(_sweep_worker(payload))
    return 0


def cmd_summarize(args) -> int:
    records = read_metrics_records(args.records)
    rows = summarize_records(records)
    write_summary_csv(args.out, rows)
    print(f"summarize: {len(records)} records -> {len(rows)} rows -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "train": cmd_train,
        "eval": cmd_eval,
        "sweep": cmd_sweep,
        "summarize": cmd_summarize,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ValueError, OSError, RuntimeError, KeyError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
