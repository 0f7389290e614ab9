"""Model parameter container and versioned checkpoints."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np
from numpy.lib import format as np_format

from .config import TrainConfig, config_from_json, config_to_json
from .encoder import EncoderParams, init_encoder
from .flows import FlowParams, init_flows
from .objectives import DiscriminatorParams, init_discriminator
from .tensor import Tensor

CHECKPOINT_VERSION = 1


@dataclass
class ModelParams:
    mode: str
    feature_dim: int
    encoder: EncoderParams
    flows: FlowParams | None
    discriminator: DiscriminatorParams


def init_model(cfg: TrainConfig, feature_dim: int,
               rng: np.random.Generator) -> ModelParams:
    dtype = cfg.numpy_dtype()
    variational = cfg.mode == "dvga"
    encoder = init_encoder(
        feature_dim=feature_dim,
        channels=cfg.channels,
        channel_dim=cfg.channel_dim,
        num_layers=cfg.layers,
        assign_iters=cfg.assign_iters,
        variational=variational,
        rng=rng,
        dropout=cfg.dropout,
        dtype=dtype,
    )
    flows = None
    if variational and cfg.flow_steps > 0:
        flows = init_flows(
            channels=cfg.channels,
            channel_dim=cfg.channel_dim,
            num_steps=cfg.flow_steps,
            rng=rng,
            split=cfg.resolved_flow_split,
            dtype=dtype,
        )
    discriminator = init_discriminator(cfg.channel_dim, cfg.channels, rng, dtype=dtype)
    return ModelParams(
        mode=cfg.mode,
        feature_dim=feature_dim,
        encoder=encoder,
        flows=flows,
        discriminator=discriminator,
    )


def named_parameters(model: ModelParams) -> list[tuple[str, Tensor]]:
    """Stable, ordered (name, tensor) listing of every trainable value."""
    out: list[tuple[str, Tensor]] = []
    enc = model.encoder
    for l, layer in enumerate(enc.layers):
        for k in range(enc.channels):
            out.append((f"enc.layer{l}.ch{k}.w", layer.weights[k]))
            out.append((f"enc.layer{l}.ch{k}.b", layer.biases[k]))
    out.append(("enc.alpha", enc.alpha_raw))
    out.append(("enc.beta", enc.beta_raw))
    for label, heads in (("mean", enc.mean_heads), ("logvar", enc.logvar_heads)):
        if heads is None:
            continue
        for k, (w, b) in enumerate(heads):
            out.append((f"enc.{label}.ch{k}.w", w))
            out.append((f"enc.{label}.ch{k}.b", b))
    if model.flows is not None:
        for k, steps in enumerate(model.flows.steps):
            for m, step in enumerate(steps):
                for part, net in (("scale", step.scale), ("shift", step.shift)):
                    prefix = f"flow.ch{k}.step{m}.{part}"
                    out.append((f"{prefix}.w1", net.w1))
                    out.append((f"{prefix}.b1", net.b1))
                    out.append((f"{prefix}.w2", net.w2))
                    out.append((f"{prefix}.b2", net.b2))
    disc = model.discriminator
    out.extend([
        ("disc.w1", disc.w1), ("disc.b1", disc.b1),
        ("disc.w2", disc.w2), ("disc.b2", disc.b2),
    ])
    return out


def parameters(model: ModelParams) -> list[Tensor]:
    return [tensor for _, tensor in named_parameters(model)]


def snapshot(model: ModelParams) -> dict[str, np.ndarray]:
    return {name: tensor.data.copy() for name, tensor in named_parameters(model)}


def restore(model: ModelParams, arrays: dict[str, np.ndarray]) -> None:
    for name, tensor in named_parameters(model):
        if name not in arrays:
            raise KeyError(f"missing parameter {name!r} in snapshot")
        if arrays[name].shape != tensor.data.shape:
            raise ValueError(
                f"{name}: shape {arrays[name].shape} != expected {tensor.data.shape}"
            )
        tensor.data = arrays[name].astype(tensor.data.dtype, copy=True)


def _write_npz_deterministic(path, arrays: dict[str, np.ndarray]) -> None:
    # np.savez stamps zip entries with the current time; fixing the entry
    # date keeps checkpoint bytes reproducible for identical runs
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as bundle:
        for name, array in arrays.items():
            buffer = io.BytesIO()
            np_format.write_array(buffer, np.asarray(array))
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            bundle.writestr(info, buffer.getvalue())


def save_checkpoint(path, model: ModelParams, cfg: TrainConfig,
                    meta: dict | None = None) -> None:
    """Write all parameters plus config and metadata into one .npz file."""
    payload = {name: tensor.data for name, tensor in named_parameters(model)}
    header = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "mode": model.mode,
        "feature_dim": model.feature_dim,
    }
    if meta:
        header.update(meta)
    payload["__meta__"] = np.array(json.dumps(header, sort_keys=True))
    payload["__config__"] = np.array(config_to_json(cfg))
    _write_npz_deterministic(path, payload)


def load_checkpoint(path) -> tuple[ModelParams, TrainConfig, dict]:
    """Rebuild a model (and its config) from a checkpoint file."""
    with np.load(path, allow_pickle=False) as bundle:
        meta = json.loads(str(bundle["__meta__"]))
        if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {meta.get('checkpoint_version')}"
            )
        cfg = config_from_json(str(bundle["__config__"]))
        arrays = {
            key: bundle[key] for key in bundle.files
            if key not in ("__meta__", "__config__")
        }
    model = init_model(cfg, int(meta["feature_dim"]), np.random.default_rng(0))
    restore(model, arrays)
    return model, cfg, meta
