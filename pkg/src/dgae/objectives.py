"""Loss terms and their composition into the two training objectives."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor,
    clip,
    concat_rows,
    custom_op,
    exp,
    log,
    mul,
    reduce_sum,
    relu,
    softmax,
)
from .encoder import glorot

PROB_CLAMP = 1e-7  # link probabilities are clamped away from {0, 1}


@dataclass
class DiscriminatorParams:
    """Channel-index classifier over per-channel embeddings."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor
    channels: int


def init_discriminator(channel_dim: int, channels: int, rng: np.random.Generator,
                       dtype=np.float64) -> DiscriminatorParams:
    hidden = max(2 * channels, 2)
    return DiscriminatorParams(
        w1=Tensor(glorot(rng, channel_dim, hidden, dtype), requires_grad=True),
        b1=Tensor(np.zeros((1, hidden), dtype=dtype), requires_grad=True),
        w2=Tensor(glorot(rng, hidden, channels, dtype), requires_grad=True),
        b2=Tensor(np.zeros((1, channels), dtype=dtype), requires_grad=True),
        channels=channels,
    )


def discriminator_probs(disc: DiscriminatorParams, inputs: Tensor) -> Tensor:
    hidden = relu(inputs @ disc.w1 + disc.b1)
    return softmax(hidden @ disc.w2 + disc.b2, axis=1)


def independence_loss(first_projections: list[Tensor],
                      disc: DiscriminatorParams) -> Tensor:
    """Cross-entropy of predicting the channel index of channel embeddings.

    Mean over every (node, channel) pair. With a single channel the only
    label is always predicted at probability one, so the loss is constant
    zero and the regularizer is inert.
    """
    channels = len(first_projections)
    if channels != disc.channels:
        raise ValueError(
            f"discriminator expects {disc.channels} channels, got {channels}"
        )
    if channels == 1:
        warnings.warn("independence loss with one channel is constant zero")
    stacked = concat_rows(first_projections)
    probs = discriminator_probs(disc, stacked)
    n = first_projections[0].shape[0]
    one_hot = np.zeros((channels * n, channels), dtype=stacked.dtype)
    for k in range(channels):
        one_hot[k * n:(k + 1) * n, k] = 1.0
    picked = mul(log(clip(probs, PROB_CLAMP, 1.0)), Tensor(one_hot))
    return -(1.0 / (channels * n)) * reduce_sum(picked)


def recon_loss(probs: Tensor, adjacency: np.ndarray,
               pos_weight: float | None = None) -> Tensor:
    """Mean binary cross-entropy over all n^2 entries, edge terms weighted.

    The default positive-class weight is (n^2 - 2|E|) / (2|E|), the usual
    counter to edge sparsity; an empty target makes the weight vacuous and
    it falls back to one. Probabilities are clamped to
    [1e-7, 1 - 1e-7] before the logs.

    Fused primitive: the negative-class term is a full-matrix sum and the
    (sparse) edge entries are gathered, so the cost is one pass plus O(|E|)
    instead of a chain of dense mask multiplies.
    """
    n = adjacency.shape[0]
    if adjacency.shape != (n, n) or probs.shape != (n, n):
        raise ValueError("probs and adjacency must both be (n, n)")
    positives = float(adjacency.sum())
    if pos_weight is None:
        pos_weight = (n * n - positives) / positives if positives > 0 else 1.0
    w = float(pos_weight)

    edge_rows, edge_cols = np.nonzero(adjacency)
    clamped = np.clip(probs.data, PROB_CLAMP, 1.0 - PROB_CLAMP)
    neg_total = float(np.log1p(-clamped).sum())
    edge_p = clamped[edge_rows, edge_cols]
    edge_total = float((w * np.log(edge_p) - np.log1p(-edge_p)).sum())
    loss = -(neg_total + edge_total) / (n * n)

    def vjp(g):
        scale = -float(g[0, 0]) / (n * n)
        inside = (probs.data >= PROB_CLAMP) & (probs.data <= 1.0 - PROB_CLAMP)
        grad = np.divide(-scale, 1.0 - clamped, dtype=probs.dtype)
        grad[edge_rows, edge_cols] = scale * (w / edge_p)
        grad *= inside
        return (grad,)

    out = custom_op(np.array([[loss]], dtype=probs.dtype), "recon_loss", (probs,), vjp)
    return out


def kl_with_flow(mean: Tensor, logvar: Tensor, logdet: Tensor | None = None,
                 z_flowed: Tensor | None = None,
                 eps: np.ndarray | None = None) -> Tensor:
    """KL divergence from the posterior to the standard-normal prior.

    Without a flow correction this is the exact closed form
    ``0.5 * sum(mean^2 + var - 1 - logvar)``. With ``logdet`` given it is
    the single-sample estimate ``log q(z0) - logdet - log p(z_M)`` for the
    reparameterized sample ``z_M`` (the flowed draw built from ``eps``);
    the Gaussian normalizers cancel so no 2*pi terms appear.
    """
    if logdet is None:
        square = mul(mean, mean)
        var = exp(logvar)
        return 0.5 * reduce_sum(square + var - 1.0 - logvar)
    if z_flowed is None or eps is None:
        raise ValueError("flow-corrected KL needs the flowed sample and its eps")
    noise_sq = float((eps * eps).sum())
    return (
        0.5 * reduce_sum(mul(z_flowed, z_flowed))
        - 0.5 * reduce_sum(logvar)
        - reduce_sum(logdet)
        - 0.5 * noise_sq
    )


@dataclass
class LossReport:
    mode: str
    recon: float
    kl: float | None
    indep: float
    weight: float
    total: float


def total_objective(mode: str, recon: Tensor, indep: Tensor, weight: float,
                    kl: Tensor | None = None) -> tuple[Tensor, LossReport]:
    """Compose the per-mode objective; returns the scalar and its report.

    dga:  total = recon + weight * indep            (kl must be absent)
    dvga: total = recon + kl + weight * indep
    """
    mode = mode.lower()
    if mode == "dga":
        if kl is not None:
            raise ValueError("dga objective takes no KL term")
        total = recon + float(weight) * indep
        kl_value = None
    elif mode == "dvga":
        if kl is None:
            raise ValueError("dvga objective requires a KL term")
        total = recon + kl + float(weight) * indep
        kl_value = kl.item()
    else:
        raise ValueError(f"unknown mode {mode!r} (expected 'dga' or 'dvga')")
    return total, LossReport(
        mode=mode,
        recon=recon.item(),
        kl=kl_value,
        indep=indep.item(),
        weight=float(weight),
        total=total.item(),
    )
