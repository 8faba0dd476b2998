"""Small dense networks with hand-written backprop.

Every actor, critic, relay and autoencoder segment is a stack of affine
layers with tanh on hidden layers and an identity output. ``forward`` accepts
a single vector or a batch of row vectors and returns a cache that
``backward`` consumes; ``backward`` also returns the gradient w.r.t. the
input so segments can be chained through message boundaries.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

CHECKPOINT_FORMAT = "leorach-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class DenseNetworkParams:
    weights: list[np.ndarray]  # layer i: (out_i, in_i)
    biases: list[np.ndarray]   # layer i: (out_i,)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width does not chain")

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...]; views, not copies."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "DenseNetworkParams":
        return DenseNetworkParams([w.copy() for w in self.weights],
                                  [b.copy() for b in self.biases])

    def zeros_like(self) -> "DenseNetworkParams":
        return DenseNetworkParams([np.zeros_like(w) for w in self.weights],
                                  [np.zeros_like(b) for b in self.biases])

    def add_(self, other: "DenseNetworkParams") -> "DenseNetworkParams":
        for a, b in zip(self.arrays(), other.arrays()):
            a += b
        return self

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_params(layer_dims: Sequence[int], seed=None,
                output_scale: float = 1.0) -> DenseNetworkParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.

    ``output_scale`` shrinks the last layer (useful for near-uniform policy
    heads at initialization).
    """
    dims = list(layer_dims)
    if len(dims) < 2 or any(int(d) != d or d <= 0 for d in dims):
        raise ValueError(f"layer_dims must be >= 2 positive integers, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        if i == len(dims) - 2:
            w *= output_scale
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return DenseNetworkParams(weights, biases)


@dataclass
class ForwardCache:
    layer_inputs: list[np.ndarray]  # 2-D input to each layer
    vector_input: bool
    params_id: int
    layer_dims: tuple[int, ...]


def forward(params: DenseNetworkParams, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    vector_input = x.ndim == 1
    h = x[None, :] if vector_input else x
    if h.ndim != 2 or h.shape[1] != params.in_dim:
        raise ValueError(f"input width {x.shape[-1] if x.ndim else 0} != {params.in_dim}")
    inputs = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        h = h @ w.T + b
        if i < last:
            h = np.tanh(h)
    dims = (inputs[0].shape[1],) + tuple(w.shape[0] for w in params.weights)
    cache = ForwardCache(inputs, vector_input, id(params), dims)
    return (h[0] if vector_input else h), cache


def stack_params(group: Sequence[DenseNetworkParams]
                 ) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Move same-shaped networks into shared (J, ...) arrays.

    Each network keeps views into the stack, so in-place updates (Adam,
    checkpoint loads) stay visible to ``forward_stacked``.
    """
    if len({id(p) for p in group}) != len(group):
        raise ValueError("stacked networks must be distinct")
    if len({tuple(p.layer_dims) for p in group}) != 1:
        raise ValueError("stacked networks must share layer dims")
    ws = [np.stack([p.weights[i] for p in group]) for i in range(len(group[0].weights))]
    bs = [np.stack([p.biases[i] for p in group]) for i in range(len(group[0].biases))]
    for j, p in enumerate(group):
        p.weights[:] = [w[j] for w in ws]
        p.biases[:] = [b[j] for b in bs]
    return ws, bs


def forward_stacked(group: Sequence[DenseNetworkParams], stack, x, keep_cache: bool = True
                    ) -> tuple[np.ndarray, list[ForwardCache] | None]:
    """``forward`` of network j on x[j] for all j at once; x is (J, n, in).

    Returns outputs (J, n, out) and one cache per network, usable by ``backward``
    (None when ``keep_cache`` is false).
    """
    ws, bs = stack
    h = np.asarray(x, dtype=float)
    if h.ndim != 3 or h.shape[0] != len(group) or h.shape[2] != ws[0].shape[2]:
        raise ValueError(f"expected ({len(group)}, n, {ws[0].shape[2]}) input, got {h.shape}")
    inputs = []
    last = len(ws) - 1
    for i, (w, b) in enumerate(zip(ws, bs)):
        inputs.append(h)
        h = np.matmul(h, w.transpose(0, 2, 1)) + b[:, None, :]
        if i < last:
            h = np.tanh(h)
    if not keep_cache:
        return h, None
    dims = (ws[0].shape[2],) + tuple(w.shape[1] for w in ws)
    caches = [ForwardCache([a[j] for a in inputs], False, id(p), dims)
              for j, p in enumerate(group)]
    return h, caches


def backward(params: DenseNetworkParams, cache: ForwardCache,
             grad_output) -> tuple[DenseNetworkParams, np.ndarray]:
    """Gradients of a scalar loss given dLoss/dOutput.

    Returns (parameter gradients, input gradient); batch rows are summed into
    the parameter gradients.
    """
    if cache.params_id != id(params) or cache.layer_dims != tuple(params.layer_dims):
        raise ValueError("cache does not belong to these parameters")
    g = np.asarray(grad_output, dtype=float)
    if cache.vector_input:
        g = g[None, :]
    if g.shape != (cache.layer_inputs[0].shape[0], params.out_dim):
        raise ValueError(f"grad_output shape {g.shape} does not match forward output")
    n_layers = len(params.weights)
    dws: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    for i in range(n_layers - 1, -1, -1):
        h_in = cache.layer_inputs[i]
        dws[i] = g.T @ h_in
        dbs[i] = g.sum(axis=0)
        g = g @ params.weights[i]
        if i > 0:
            # h_in = tanh(pre-activation) of the previous layer
            g = g * (1.0 - h_in * h_in)
    grads = DenseNetworkParams(dws, dbs)
    return grads, (g[0] if cache.vector_input else g)


@dataclass
class OptimizerState:
    """Adam moments for one parameter set."""
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_params(cls, params: DenseNetworkParams, **kwargs) -> "OptimizerState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays],
                   [np.zeros_like(a) for a in arrays], **kwargs)


def adam_step(params: DenseNetworkParams, grads: DenseNetworkParams,
              state: OptimizerState) -> DenseNetworkParams:
    """One bias-corrected Adam update, applied in place."""
    p_arrays, g_arrays = params.arrays(), grads.arrays()
    if len(p_arrays) != len(g_arrays) or len(p_arrays) != len(state.m):
        raise ValueError("parameter, gradient and optimizer layouts differ")
    for p, g, m in zip(p_arrays, g_arrays, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch: {p.shape}, {g.shape}, {m.shape}")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(p_arrays, g_arrays, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


# -- policy head ------------------------------------------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    return -np.sum(np.exp(logp) * logp, axis=-1)


def softmax_sample(logits, rng: np.random.Generator) -> tuple[int, float, float]:
    """Draw an action from softmax(logits); returns (action, log-prob, entropy)."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1 or logits.size == 0:
        raise ValueError("logits must be a non-empty vector")
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    logp = log_softmax(logits)
    probs = np.exp(logp)
    a = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    a = min(a, logits.size - 1)
    return a, float(logp[a]), float(-np.sum(probs * logp))


def softmax_sample_rows(logits, rng: np.random.Generator
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise ``softmax_sample`` with one uniform draw per row, in row order."""
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ValueError("logits must be a non-empty (rows, actions) matrix")
    if not np.isfinite(logits).all():
        raise ValueError("logits must be finite")
    logp = log_softmax(logits)
    probs = np.exp(logp)
    cdf = probs.cumsum(axis=1)
    u = rng.random(len(logits)) * cdf[:, -1]
    a = np.minimum((cdf <= u[:, None]).sum(axis=1), logits.shape[1] - 1)
    rows = np.arange(len(logits))
    return a, logp[rows, a], -(probs * logp).sum(axis=1)


def policy_logit_grad(logits: np.ndarray, actions: np.ndarray,
                      advantages: np.ndarray, entropy_coef: float) -> np.ndarray:
    """d/dlogits of sum_n [-A_n log pi(a_n) - beta H_n] for a batch of rows."""
    logp = log_softmax(logits)
    probs = np.exp(logp)
    onehot = np.zeros_like(probs)
    onehot[np.arange(len(actions)), actions] = 1.0
    grad = -advantages[:, None] * (onehot - probs)
    if entropy_coef:
        h = -np.sum(probs * logp, axis=-1, keepdims=True)
        # dH/dlogits = -pi * (log pi + H)
        grad += entropy_coef * probs * (logp + h)
    return grad


# -- autoencoder ------------------------------------------------------------

@dataclass
class AutoencoderParams:
    encoder: DenseNetworkParams
    decoder: DenseNetworkParams

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise ValueError("encoder output width must equal decoder input width")
        if not self.encoder.out_dim < self.encoder.in_dim:
            raise ValueError("bottleneck must be narrower than the raw message")

    @property
    def code_dim(self) -> int:
        return self.encoder.out_dim


def init_autoencoder(raw_dim: int, code_dim: int, hidden: int = 16,
                     seed=None) -> AutoencoderParams:
    rng = np.random.default_rng(seed)
    return AutoencoderParams(init_params([raw_dim, hidden, code_dim], rng),
                             init_params([code_dim, hidden, raw_dim], rng))


def encode(ae: AutoencoderParams, message) -> np.ndarray:
    return forward(ae.encoder, message)[0]


def decode(ae: AutoencoderParams, code) -> np.ndarray:
    return forward(ae.decoder, code)[0]


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(path, segments: Mapping[str, DenseNetworkParams]) -> None:
    """Write named segments to a versioned .npz container."""
    arrays = {"__format__": np.array(CHECKPOINT_FORMAT),
              "__version__": np.array(CHECKPOINT_VERSION)}
    for name, params in segments.items():
        if "::" in name:
            raise ValueError(f"segment name {name!r} may not contain '::'")
        arrays[f"{name}::dims"] = np.array(params.layer_dims, dtype=np.int64)
        for i, (w, b) in enumerate(zip(params.weights, params.biases)):
            arrays[f"{name}::W{i}"] = np.ascontiguousarray(w)
            arrays[f"{name}::b{i}"] = np.ascontiguousarray(b)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> dict[str, DenseNetworkParams]:
    with np.load(Path(path), allow_pickle=False) as data:
        if "__format__" not in data or str(data["__format__"]) != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a checkpoint")
        version = int(data["__version__"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        names = sorted({k.split("::")[0] for k in data.files if "::" in k})
        segments = {}
        for name in names:
            n_layers = len(data[f"{name}::dims"]) - 1
            segments[name] = DenseNetworkParams(
                [data[f"{name}::W{i}"].copy() for i in range(n_layers)],
                [data[f"{name}::b{i}"].copy() for i in range(n_layers)])
    return segments
