"""Drift decoder: a small ReLU MLP with hand-written forward/backward.

Each point's drift is decoded independently from the concatenation of its
coordinates and the group's latent vector. Hidden layers use ReLU; the
final layer is affine so drifts can take either sign. Gradients are
propagated to the weights, biases, and the latent vector, but not to the
input coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError
from .geometry import DriftField, GroupLatentDescriptor, PointSet

Layer = tuple[np.ndarray, np.ndarray]  # weight (out, in), bias (out,)


@dataclass(frozen=True, eq=False)
class DecoderParams:
    """Weights and biases, outermost first. Layer l maps width[l] -> width[l+1]."""

    layers: tuple[Layer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ShapeMismatchError("decoder needs at least one layer")
        frozen = []
        prev_out = None
        for i, (weight, bias) in enumerate(self.layers):
            w = np.array(weight, dtype=np.float64)
            b = np.array(bias, dtype=np.float64)
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeMismatchError(
                    f"layer {i}: weight {w.shape} and bias {b.shape} disagree"
                )
            if prev_out is not None and w.shape[1] != prev_out:
                raise ShapeMismatchError(
                    f"layer {i} expects {w.shape[1]} inputs, previous layer gives {prev_out}"
                )
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise NonFiniteError(f"layer {i} has non-finite parameters")
            prev_out = w.shape[0]
            w.setflags(write=False)
            b.setflags(write=False)
            frozen.append((w, b))
        object.__setattr__(self, "layers", tuple(frozen))

    @property
    def in_width(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def out_width(self) -> int:
        return self.layers[-1][0].shape[0]


@dataclass(frozen=True, eq=False)
class DecoderGradients:
    """Gradients matching DecoderParams.layers plus the latent gradient."""

    d_layers: tuple[Layer, ...]
    d_latent: np.ndarray


@dataclass(frozen=True, eq=False)
class ForwardCache:
    """Activations saved by a forward pass: acts[0] is the input block."""

    acts: tuple[np.ndarray, ...]
    coord_width: int


def init_params(
    dim: int, latent_dim: int, hidden: Sequence[int], seed: int
) -> DecoderParams:
    """He-style initialization: W ~ N(0, 2/fan_in), biases zero."""
    hidden = tuple(int(h) for h in hidden)
    if dim < 1 or latent_dim < 1:
        raise ValueError(f"dim and latent_dim must be >= 1, got {dim}, {latent_dim}")
    if not hidden or any(h < 1 for h in hidden):
        raise ValueError(f"hidden widths must be positive and non-empty, got {hidden}")
    widths = (dim + latent_dim,) + hidden + (dim,)
    rng = np.random.default_rng(int(seed))
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        scale = np.sqrt(2.0 / fan_in)
        layers.append((rng.normal(0.0, scale, (fan_out, fan_in)), np.zeros(fan_out)))
    return DecoderParams(tuple(layers))


def run_layers(
    layers: Sequence[Layer], inputs: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Array-level forward pass; returns (outputs, activation stack)."""
    acts = [inputs]
    h = inputs
    for weight, bias in layers[:-1]:
        h = np.maximum(h @ weight.T + bias, 0.0)
        acts.append(h)
    weight, bias = layers[-1]
    return h @ weight.T + bias, tuple(acts)


def run_layers_backward(
    layers: Sequence[Layer],
    acts: Sequence[np.ndarray],
    upstream: np.ndarray,
    coord_width: int,
    segments: Sequence[slice] | None = None,
) -> tuple[list[Layer], np.ndarray]:
    """Array-level backward pass for sum(upstream * outputs).

    Returns per-layer (dW, db) and the latent gradient: per-point latent
    contributions are summed over all rows, or per segment when row
    segments are given (one latent vector per segment).
    """
    grad = np.asarray(upstream, dtype=np.float64)
    d_layers: list[Layer] = []
    for i in range(len(layers) - 1, -1, -1):
        weight, _ = layers[i]
        h_prev = acts[i]
        d_layers.append((grad.T @ h_prev, grad.sum(axis=0)))
        if i > 0:
            # h_prev is a ReLU output, so (h_prev > 0) recovers its mask.
            grad = (grad @ weight) * (h_prev > 0.0)
        else:
            grad = grad @ weight
    d_layers.reverse()
    d_latent_rows = grad[:, coord_width:]
    if segments is None:
        d_latent = d_latent_rows.sum(axis=0)
    else:
        d_latent = np.stack([d_latent_rows[s].sum(axis=0) for s in segments])
    return d_layers, d_latent


def _stack_inputs(params: DecoderParams, z: GroupLatentDescriptor, ps: PointSet):
    if ps.dim + z.latent_dim != params.in_width:
        raise ShapeMismatchError(
            f"decoder expects {params.in_width} inputs per point, got "
            f"dim {ps.dim} + latent {z.latent_dim}"
        )
    if params.out_width != ps.dim:
        raise ShapeMismatchError(
            f"decoder produces {params.out_width}D drifts for a {ps.dim}D point set"
        )
    inputs = np.empty((len(ps), params.in_width))
    inputs[:, : ps.dim] = ps.points
    inputs[:, ps.dim :] = z.values
    return inputs


def forward(
    params: DecoderParams, z: GroupLatentDescriptor, ps: PointSet
) -> DriftField:
    """Decode one drift vector per point from [coords, latent]."""
    drifts, _ = run_layers(params.layers, _stack_inputs(params, z, ps))
    return DriftField(drifts)


def forward_cached(
    params: DecoderParams, z: GroupLatentDescriptor, ps: PointSet
) -> tuple[DriftField, ForwardCache]:
    """Forward pass that also returns activations for a later backward."""
    inputs = _stack_inputs(params, z, ps)
    drifts, acts = run_layers(params.layers, inputs)
    return DriftField(drifts), ForwardCache(acts, ps.dim)


def backward(
    params: DecoderParams,
    z: GroupLatentDescriptor,
    ps: PointSet,
    upstream: DriftField | np.ndarray,
    cache: ForwardCache | None = None,
) -> DecoderGradients:
    """Backpropagate drift-space gradients to weights, biases, and latent.

    Recomputes the forward activations when no cache is supplied.
    """
    up = upstream.drifts if isinstance(upstream, DriftField) else np.asarray(upstream)
    if up.shape != (len(ps), ps.dim):
        raise ShapeMismatchError(
            f"upstream gradient shape {up.shape} does not match ({len(ps)}, {ps.dim})"
        )
    if cache is None:
        inputs = _stack_inputs(params, z, ps)
        _, acts = run_layers(params.layers, inputs)
    else:
        acts = cache.acts
    d_layers, d_latent = run_layers_backward(params.layers, acts, up, ps.dim)
    return DecoderGradients(tuple(d_layers), d_latent)
