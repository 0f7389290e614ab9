"""Multi-channel disentangling graph encoder.

Each disentangle layer projects its input features into K normalized
channel subspaces and then runs an iterative assignment over the edges:
every edge gets a soft attribution over channels (softmax across the K
per-channel similarity scores) and every neighborhood gets per-channel
importance weights (softmax across a node's incident edges). Both
aggregates feed back into the channel embedding, which is re-normalized
after every iteration. Layer outputs are the column-concatenation of the
channel blocks and become the next layer's input features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    Tensor,
    concat_cols,
    div,
    exp,
    mul,
    reduce_sum,
    row_normalize,
    segment_sum,
    sigmoid,
    take_rows,
)


@dataclass
class DisentangleLayer:
    weights: list[Tensor]  # per channel, (f_in, channel_dim)
    biases: list[Tensor]   # per channel, (1, channel_dim)


@dataclass
class EncoderParams:
    """Projection stacks, assignment trade-off scalars, and optional heads.

    ``alpha_raw`` and ``beta_raw`` are unconstrained; the assignment uses
    their logistic squash so the effective coefficients live in (0, 1).
    Variational heads are per-channel affine maps from the final channel
    blocks; deterministic parameter sets leave them as None.
    """

    layers: list[DisentangleLayer]
    alpha_raw: Tensor
    beta_raw: Tensor
    channels: int
    channel_dim: int
    assign_iters: int
    dropout: float = 0.0
    mean_heads: list[tuple[Tensor, Tensor]] | None = None
    logvar_heads: list[tuple[Tensor, Tensor]] | None = None


@dataclass
class EncodeResult:
    z: Tensor                       # (n, channels * channel_dim)
    mean: Tensor | None = None
    logvar: Tensor | None = None
    eps: np.ndarray | None = None
    first_projections: list[Tensor] = field(default_factory=list)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def init_encoder(feature_dim: int, channels: int, channel_dim: int,
                 num_layers: int, assign_iters: int, variational: bool,
                 rng: np.random.Generator, dropout: float = 0.0,
                 dtype=np.float64) -> EncoderParams:
    if min(channels, channel_dim, num_layers, assign_iters) < 1:
        raise ValueError("channels, channel_dim, layers, and iterations must be >= 1")
    width = channels * channel_dim
    layers = []
    fan_in = feature_dim
    for _ in range(num_layers):
        layers.append(DisentangleLayer(
            weights=[Tensor(glorot(rng, fan_in, channel_dim, dtype), requires_grad=True)
                     for _ in range(channels)],
            biases=[Tensor(np.zeros((1, channel_dim), dtype=dtype), requires_grad=True)
                    for _ in range(channels)],
        ))
        fan_in = width

    def head():
        return [
            (Tensor(glorot(rng, channel_dim, channel_dim, dtype), requires_grad=True),
             Tensor(np.zeros((1, channel_dim), dtype=dtype), requires_grad=True))
            for _ in range(channels)
        ]

    zero = np.zeros((1, 1), dtype=dtype)
    return EncoderParams(
        layers=layers,
        alpha_raw=Tensor(zero.copy(), requires_grad=True),   # squashes to 0.5
        beta_raw=Tensor(zero.copy(), requires_grad=True),
        channels=channels,
        channel_dim=channel_dim,
        assign_iters=assign_iters,
        dropout=dropout,
        mean_heads=head() if variational else None,
        logvar_heads=head() if variational else None,
    )


def channel_projection(x: Tensor, layer: DisentangleLayer) -> list[Tensor]:
    """Project input rows into each channel subspace and unit-normalize.

    All-zero projections stay zero thanks to the row-norm guard.
    """
    return [row_normalize(x @ w + b) for w, b in zip(layer.weights, layer.biases)]


def dynamic_assignment(channel_inputs: list[Tensor], src: np.ndarray,
                       dst: np.ndarray, num_nodes: int, alpha: Tensor,
                       beta: Tensor, iters: int,
                       record: list | None = None) -> list[Tensor]:
    """Iteratively attribute edges to channels and aggregate neighborhoods.

    ``src``/``dst`` list every undirected edge in both directions, so row u
    of a segment sum over ``src`` ranges over u's neighborhood. Isolated
    nodes take part in no edge and keep their projected embedding.

    When ``record`` is given, the per-iteration edge distributions are
    appended to it as ``{"iter": t, "p": (E, K), "q": (E, K)}`` with numpy
    values (p sums to one across channels, q across each neighborhood).
    """
    if iters < 1:
        raise ValueError("assignment needs at least one iteration")
    state = list(channel_inputs)
    neighbor_feats = [take_rows(c, dst) for c in channel_inputs]
    for t in range(iters):
        scores = [
            exp(reduce_sum(mul(take_rows(z, src), feats), axis=1))
            for z, feats in zip(state, neighbor_feats)
        ]
        channel_total = scores[0]
        for s in scores[1:]:
            channel_total = channel_total + s
        new_state = []
        p_cols, q_cols = [], []
        for c, feats, s in zip(channel_inputs, neighbor_feats, scores):
            p = div(s, channel_total)
            q = div(s, take_rows(segment_sum(s, src, num_nodes), src))
            factor_agg = segment_sum(mul(p, feats), src, num_nodes)
            neighbor_agg = segment_sum(mul(q, feats), src, num_nodes)
            z = c + alpha * factor_agg + beta * neighbor_agg
            new_state.append(row_normalize(z))
            if record is not None:
                p_cols.append(p.data)
                q_cols.append(q.data)
        if record is not None:
            record.append({
                "iter": t,
                "p": np.concatenate(p_cols, axis=1) if p_cols else None,
                "q": np.concatenate(q_cols, axis=1) if q_cols else None,
            })
        state = new_state
    return state


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    if rate <= 0.0 or rng is None:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
    return mul(x, Tensor(mask))


def encode(x: Tensor, src: np.ndarray, dst: np.ndarray, num_nodes: int,
           params: EncoderParams, *, variational: bool,
           eps: np.ndarray | None = None,
           dropout_rng: np.random.Generator | None = None,
           record: list | None = None) -> EncodeResult:
    """Run the disentangle stack and, optionally, the variational heads.

    Deterministic mode returns the final concatenation directly. In
    variational mode the shared stack feeds per-channel affine heads for
    the posterior mean and log-variance; with ``eps`` given the result is
    the reparameterized sample ``mean + eps * std``, otherwise the mean
    (the test-time embedding).
    """
    if variational and params.mean_heads is None:
        raise ValueError("variational encode requested but params carry no heads")

    alpha = sigmoid(params.alpha_raw)
    beta = sigmoid(params.beta_raw)
    state: list[Tensor] = []
    first_projections: list[Tensor] = []
    current = x
    for layer_idx, layer in enumerate(params.layers):
        current = _dropout(current, params.dropout, dropout_rng)
        projected = channel_projection(current, layer)
        if layer_idx == 0:
            first_projections = projected
        layer_record = record if record is not None else None
        before = len(layer_record) if layer_record is not None else 0
        state = dynamic_assignment(
            projected, src, dst, num_nodes, alpha, beta,
            params.assign_iters, record=layer_record,
        )
        if layer_record is not None:
            for entry in layer_record[before:]:
                entry["layer"] = layer_idx
        current = concat_cols(state)

    if not variational:
        return EncodeResult(z=current, first_projections=first_projections)

    mean = concat_cols([zk @ w + b for zk, (w, b) in zip(state, params.mean_heads)])
    logvar = concat_cols([zk @ w + b for zk, (w, b) in zip(state, params.logvar_heads)])
    if eps is None:
        z = mean
    else:
        if eps.shape != mean.shape:
            raise ValueError(f"eps shape {eps.shape} != embedding shape {mean.shape}")
        std = exp(0.5 * logvar)
        z = mean + mul(Tensor(eps.astype(mean.dtype)), std)
    return EncodeResult(
        z=z, mean=mean, logvar=logvar, eps=eps, first_projections=first_projections,
    )
