"""Feed-forward embedding network with hand-written forward and backward passes.

The map is a plain affine + ReLU stack with a linear (identity) output
layer and no normalization anywhere. Forward and backward are exact; the
backward pass is validated against central finite differences in the test
suite. ReLU's subgradient at exactly zero is taken as zero.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "CheckpointError",
    "EmbeddingNetwork",
    "ForwardCache",
    "NetworkGradients",
    "init_network",
    "embed_forward",
    "embed_backward",
    "apply_sgd_step",
    "parameter_count",
    "save_checkpoint",
    "load_checkpoint",
]

CHECKPOINT_MAGIC = "TFNET1"


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


@dataclass(frozen=True)
class EmbeddingNetwork:
    """Immutable parameter set for the affine+ReLU embedding map.

    ``weights[k]`` has shape (layer_dims[k+1], layer_dims[k]); hidden
    layers apply ReLU, the final layer is identity. Updates never mutate
    in place: :func:`apply_sgd_step` returns a fresh network.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError("layer_dims needs >= 2 positive entries")
        n_layers = len(dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError("one weight matrix and bias vector per layer required")
        for k in range(n_layers):
            if self.weights[k].shape != (dims[k + 1], dims[k]):
                raise ValueError(
                    f"layer {k}: weight shape {self.weights[k].shape} != "
                    f"({dims[k + 1]}, {dims[k]})"
                )
            if self.biases[k].shape != (dims[k + 1],):
                raise ValueError(f"layer {k}: bias shape mismatch")
            if not (np.isfinite(self.weights[k]).all() and np.isfinite(self.biases[k]).all()):
                raise ValueError(f"layer {k}: non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class ForwardCache:
    """Intermediates of one forward pass, kept for exact backprop."""

    x: np.ndarray
    pre_activations: tuple[np.ndarray, ...]
    post_activations: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class NetworkGradients:
    """Per-layer parameter gradients, same shapes as the network."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @staticmethod
    def zeros_like(net: EmbeddingNetwork) -> "NetworkGradients":
        return NetworkGradients(
            weights=tuple(np.zeros_like(w) for w in net.weights),
            biases=tuple(np.zeros_like(b) for b in net.biases),
        )

    def add(self, other: "NetworkGradients") -> "NetworkGradients":
        return NetworkGradients(
            weights=tuple(a + b for a, b in zip(self.weights, other.weights)),
            biases=tuple(a + b for a, b in zip(self.biases, other.biases)),
        )


def parameter_count(layer_dims: Sequence[int]) -> int:
    """Total number of scalar parameters for the given layer sizes."""
    return sum(
        layer_dims[k] * layer_dims[k + 1] + layer_dims[k + 1]
        for k in range(len(layer_dims) - 1)
    )


def init_network(
    layer_dims: Sequence[int], seed: int, init_scale: float = 1.0
) -> EmbeddingNetwork:
    """Fan-based uniform init: W ~ U(-a, a), a = sqrt(6/(fan_in+fan_out)).

    Biases start at zero. Deterministic in ``seed``. ``init_scale``
    multiplies the uniform bound; 1.0 is the standard scheme, smaller
    values start the embedding near zero, which puts the margin term of
    the triplet loss in charge early in training on widely spread inputs.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError("layer_dims needs >= 2 positive entries")
    if init_scale <= 0:
        raise ValueError("init_scale must be positive")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out)) * init_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return EmbeddingNetwork(layer_dims=dims, weights=tuple(weights), biases=tuple(biases))


def embed_forward(net: EmbeddingNetwork, x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Map one input vector to feature space, caching all intermediates.

    Pure function of (net, x); repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input shape {x.shape} != ({net.input_dim},)")
    if not np.isfinite(x).all():
        raise ValueError("input contains non-finite entries")
    n_layers = len(net.weights)
    pre = []
    post = []
    h = x
    for k in range(n_layers):
        z = net.weights[k] @ h + net.biases[k]
        pre.append(z)
        h = np.maximum(z, 0.0) if k < n_layers - 1 else z
        post.append(h)
    cache = ForwardCache(x=x, pre_activations=tuple(pre), post_activations=tuple(post))
    return post[-1].copy(), cache


def embed_backward(
    net: EmbeddingNetwork, cache: ForwardCache, dL_dF: np.ndarray
) -> NetworkGradients:
    """Backpropagate a feature-space gradient to all parameters.

    ``dL_dF`` is the gradient of a scalar loss with respect to the cached
    forward output; the return value holds d(loss)/dW and d(loss)/db for
    every layer. ReLU passes gradient only where the pre-activation was
    strictly positive.
    """
    dL_dF = np.asarray(dL_dF, dtype=np.float64)
    if dL_dF.shape != (net.output_dim,):
        raise ValueError(f"gradient shape {dL_dF.shape} != ({net.output_dim},)")
    n_layers = len(net.weights)
    grad_w: list[np.ndarray] = []
    grad_b: list[np.ndarray] = []
    delta = dL_dF
    for k in range(n_layers - 1, -1, -1):
        if k < n_layers - 1:
            delta = delta * (cache.pre_activations[k] > 0)
        layer_input = cache.x if k == 0 else cache.post_activations[k - 1]
        grad_w.append(np.outer(delta, layer_input))
        grad_b.append(delta.copy())
        delta = net.weights[k].T @ delta
    return NetworkGradients(weights=tuple(reversed(grad_w)), biases=tuple(reversed(grad_b)))


def apply_sgd_step(
    net: EmbeddingNetwork, grads: NetworkGradients, lr: float
) -> EmbeddingNetwork:
    """Plain SGD: every parameter p becomes p - lr * g. No momentum, no decay."""
    if lr < 0:
        raise ValueError("lr must be nonnegative")
    if len(grads.weights) != len(net.weights):
        raise ValueError("gradient/parameter layer count mismatch")
    for k, (w, gw, b, gb) in enumerate(
        zip(net.weights, grads.weights, net.biases, grads.biases)
    ):
        if w.shape != gw.shape or b.shape != gb.shape:
            raise ValueError(f"layer {k}: gradient shape mismatch")
    return EmbeddingNetwork(
        layer_dims=net.layer_dims,
        weights=tuple(w - lr * gw for w, gw in zip(net.weights, grads.weights)),
        biases=tuple(b - lr * gb for b, gb in zip(net.biases, grads.biases)),
    )


def save_checkpoint(
    net: EmbeddingNetwork, path: str | Path, comments: Sequence[str] = ()
) -> None:
    """Write the network as versioned text: magic, dims, then row-major params.

    Floats are written with ``repr`` and round-trip exactly. Provenance
    ``comments`` go after the parameters as ``#`` lines so the magic
    string stays first in the file; the loader ignores them.
    """
    path = Path(path)
    lines = [CHECKPOINT_MAGIC, " ".join(str(d) for d in net.layer_dims)]
    for w, b in zip(net.weights, net.biases):
        lines.append(" ".join(repr(float(v)) for v in w.ravel(order="C")))
        lines.append(" ".join(repr(float(v)) for v in b))
    lines.extend(f"# {c}" for c in comments)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> EmbeddingNetwork:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a {CHECKPOINT_MAGIC} checkpoint: {path}")
    if len(lines) < 2:
        raise CheckpointError("missing layer dimensions")
    try:
        dims = tuple(int(t) for t in lines[1].split())
    except ValueError as exc:
        raise CheckpointError(f"bad layer dimensions: {exc}") from exc
    n_layers = len(dims) - 1
    body = [ln for ln in lines if not ln.startswith("#")]
    if len(dims) < 2 or len(body) < 2 + 2 * n_layers:
        raise CheckpointError("truncated checkpoint")
    lines = body
    weights = []
    biases = []
    for k in range(n_layers):
        try:
            w_vals = np.array([float(t) for t in lines[2 + 2 * k].split()])
            b_vals = np.array([float(t) for t in lines[3 + 2 * k].split()])
        except ValueError as exc:
            raise CheckpointError(f"layer {k}: bad parameter value: {exc}") from exc
        if w_vals.size != dims[k] * dims[k + 1] or b_vals.size != dims[k + 1]:
            raise CheckpointError(f"layer {k}: parameter count mismatch")
        weights.append(w_vals.reshape(dims[k + 1], dims[k]))
        biases.append(b_vals)
    try:
        return EmbeddingNetwork(layer_dims=dims, weights=tuple(weights), biases=tuple(biases))
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
