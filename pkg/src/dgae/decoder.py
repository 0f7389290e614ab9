"""Factor-wise edge decoder.

Per-channel cosine similarity maps are max-pooled across channels and
added to the plain inner-product score as a residual; a sigmoid turns the
fused score into a link probability. With the factor block ablated this
is exactly the conventional inner-product decoder.
"""

from __future__ import annotations

import numpy as np

from .tensor import NORM_EPS, Tensor, matmul, maximum, row_normalize, sigmoid, slice_cols


def _channel_blocks(z: Tensor, channels: int) -> list[Tensor]:
    if z.shape[1] % channels != 0:
        raise ValueError(f"width {z.shape[1]} not divisible by {channels} channels")
    width = z.shape[1] // channels
    return [slice_cols(z, k * width, (k + 1) * width) for k in range(channels)]


def factor_similarities(z: Tensor, channels: int) -> list[Tensor]:
    """Per-channel cosine similarity matrices, one (n, n) map per channel.

    Rows that are exactly zero in a channel stay zero (norm guard), so
    their similarities, including the diagonal, are zero.
    """
    sims = []
    for block in _channel_blocks(z, channels):
        unit = row_normalize(block)
        sims.append(matmul(unit, unit.T))
    return sims


def decode(z: Tensor, channels: int, include_factor: bool = True) -> Tensor:
    """Link probability matrix sigmoid(maxpool(similarities) + z z^T)."""
    inner = matmul(z, z.T)
    if not include_factor:
        return sigmoid(inner)
    sims = factor_similarities(z, channels)
    pooled = sims[0]
    for sim in sims[1:]:
        pooled = maximum(pooled, sim)
    return sigmoid(pooled + inner)


def decode_pairs(z: np.ndarray, channels: int, pairs,
                 include_factor: bool = True) -> np.ndarray:
    """Scores for selected (u, v) pairs without forming the n x n matrix.

    Matches :func:`decode` entrywise (same norm guard and pooling).
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.size == 0:
        return np.zeros(0)
    u, v = pairs[:, 0], pairs[:, 1]
    logits = (z[u] * z[v]).sum(axis=1)
    if include_factor:
        width = z.shape[1] // channels
        if z.shape[1] % channels != 0:
            raise ValueError(f"width {z.shape[1]} not divisible by {channels} channels")
        pooled = np.full(len(pairs), -np.inf)
        for k in range(channels):
            block = z[:, k * width:(k + 1) * width]
            norms = np.sqrt((block * block).sum(axis=1) + NORM_EPS)
            unit = block / norms[:, None]
            pooled = np.maximum(pooled, (unit[u] * unit[v]).sum(axis=1))
        logits = pooled + logits
    return 1.0 / (1.0 + np.exp(-logits))
