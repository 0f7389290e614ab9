"""Per-channel affine-coupling flows with analytic log-det corrections.

Each channel block flows through its own stack of coupling steps. A step
keeps the first ``split`` coordinates fixed and maps the rest through an
elementwise affine transform whose scale/shift are produced by small MLPs
of the fixed part; the Jacobian is triangular, so the log-determinant is
just the sum of the (clamped) scale outputs. Coordinate order is reversed
between consecutive steps so both halves get transformed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import (
    Tensor,
    clip,
    concat_cols,
    exp,
    mul,
    reduce_sum,
    reverse_cols,
    slice_cols,
    tanh,
)
from .encoder import glorot

SCALE_CLAMP = 5.0  # scale outputs are clamped to +-5 before exponentiation


@dataclass
class CouplingNet:
    """Two-layer perceptron (tanh hidden) used for scales and shifts."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        return tanh(x @ self.w1 + self.b1) @ self.w2 + self.b2

    def apply_np(self, x: np.ndarray) -> np.ndarray:
        hidden = np.tanh(x @ self.w1.data + self.b1.data)
        return hidden @ self.w2.data + self.b2.data


@dataclass
class CouplingStep:
    scale: CouplingNet
    shift: CouplingNet


@dataclass
class FlowParams:
    channels: int
    channel_dim: int
    split: int
    steps: list[list[CouplingStep]]  # [channel][step]

    @property
    def num_steps(self) -> int:
        return len(self.steps[0]) if self.steps else 0


def _init_net(rng: np.random.Generator, split: int, out_dim: int, hidden: int,
              dtype) -> CouplingNet:
    # Zero-initialized output layer: the whole flow starts as the identity.
    return CouplingNet(
        w1=Tensor(glorot(rng, split, hidden, dtype), requires_grad=True),
        b1=Tensor(np.zeros((1, hidden), dtype=dtype), requires_grad=True),
        w2=Tensor(np.zeros((hidden, out_dim), dtype=dtype), requires_grad=True),
        b2=Tensor(np.zeros((1, out_dim), dtype=dtype), requires_grad=True),
    )


def init_flows(channels: int, channel_dim: int, num_steps: int,
               rng: np.random.Generator, split: int | None = None,
               dtype=np.float64) -> FlowParams:
    if split is None:
        split = channel_dim // 2
    if not 1 <= split < channel_dim:
        raise ValueError(f"split must satisfy 1 <= split < {channel_dim}, got {split}")
    if num_steps < 1:
        raise ValueError("flows need at least one step (use no FlowParams for none)")
    out_dim = channel_dim - split
    steps = [
        [
            CouplingStep(
                scale=_init_net(rng, split, out_dim, channel_dim, dtype),
                shift=_init_net(rng, split, out_dim, channel_dim, dtype),
            )
            for _ in range(num_steps)
        ]
        for _ in range(channels)
    ]
    return FlowParams(channels=channels, channel_dim=channel_dim, split=split, steps=steps)


def coupling_forward(z: Tensor, step: CouplingStep, split: int) -> tuple[Tensor, Tensor]:
    """One coupling step on rows of width channel_dim.

    Returns the transformed rows and the per-row log-det contribution
    (the sum of the clamped scale outputs, independent of the moving
    coordinates by the triangular structure).
    """
    dim = z.shape[1]
    if not 1 <= split < dim:
        raise ValueError(f"split {split} incompatible with width {dim}")
    fixed = slice_cols(z, 0, split)
    moving = slice_cols(z, split, dim)
    scales = clip(step.scale(fixed), -SCALE_CLAMP, SCALE_CLAMP)
    shifts = step.shift(fixed)
    moved = mul(moving, exp(scales)) + shifts
    return concat_cols([fixed, moved]), reduce_sum(scales, axis=1)


def coupling_inverse(z_out: np.ndarray, step: CouplingStep, split: int) -> np.ndarray:
    """Exact algebraic inverse of :func:`coupling_forward` (plain numpy)."""
    fixed = z_out[:, :split]
    moving = z_out[:, split:]
    scales = np.clip(step.scale.apply_np(fixed), -SCALE_CLAMP, SCALE_CLAMP)
    shifts = step.shift.apply_np(fixed)
    return np.concatenate([fixed, (moving - shifts) * np.exp(-scales)], axis=1)


def apply_flows(z: Tensor, params: FlowParams | None) -> tuple[Tensor, Tensor]:
    """Flow every channel block independently; returns (z_out, logdet).

    ``logdet`` is the per-row total correction summed over steps and
    channels, shape (n, 1). Passing ``params=None`` (no flow) returns the
    input unchanged with zero corrections.
    """
    if params is None:
        return z, Tensor(np.zeros((z.shape[0], 1), dtype=z.dtype))
    width = params.channel_dim
    if z.shape[1] != params.channels * width:
        raise ValueError(
            f"embedding width {z.shape[1]} != channels*channel_dim "
            f"({params.channels}*{width})"
        )
    blocks = []
    logdet: Tensor | None = None
    for k in range(params.channels):
        block = slice_cols(z, k * width, (k + 1) * width)
        for m, step in enumerate(params.steps[k]):
            # Odd steps see the reversed coordinate order so both halves get
            # transformed; the order is restored afterwards (reversals are
            # orthogonal and contribute nothing to the log-det).
            if m % 2 == 1:
                block = reverse_cols(block)
            block, ld = coupling_forward(block, step, params.split)
            if m % 2 == 1:
                block = reverse_cols(block)
            logdet = ld if logdet is None else logdet + ld
        blocks.append(block)
    out = concat_cols(blocks)
    if logdet is None:
        logdet = Tensor(np.zeros((z.shape[0], 1), dtype=z.dtype))
    return out, logdet


def invert_flows(z_out: np.ndarray, params: FlowParams | None) -> np.ndarray:
    """Numpy inverse of :func:`apply_flows` over all channels."""
    if params is None:
        return np.array(z_out, copy=True)
    width = params.channel_dim
    blocks = []
    for k in range(params.channels):
        block = np.array(z_out[:, k * width:(k + 1) * width])
        for m in range(len(params.steps[k]) - 1, -1, -1):
            if m % 2 == 1:
                block = block[:, ::-1]
            block = coupling_inverse(block, params.steps[k][m], params.split)
            if m % 2 == 1:
                block = block[:, ::-1]
        blocks.append(block)
    return np.concatenate(blocks, axis=1)


def flow_channel_map(params: FlowParams, channel: int):
    """The full forward map of one channel as a numpy function.

    Mainly useful for comparing the analytic log-det against a numerical
    Jacobian of the realized map.
    """
    steps = params.steps[channel]
    split = params.split

    def forward(rows: np.ndarray) -> np.ndarray:
        block = np.asarray(rows, dtype=float)
        squeeze = block.ndim == 1
        if squeeze:
            block = block[None, :]
        for m, step in enumerate(steps):
            if m % 2 == 1:
                block = block[:, ::-1]
            fixed = block[:, :split]
            moving = block[:, split:]
            scales = np.clip(step.scale.apply_np(fixed), -SCALE_CLAMP, SCALE_CLAMP)
            shifts = step.shift.apply_np(fixed)
            block = np.concatenate([fixed, moving * np.exp(scales) + shifts], axis=1)
            if m % 2 == 1:
                block = block[:, ::-1]
        return block[0] if squeeze else block

    return forward
