"""Logistic feedforward classifier with RBM-stack initialization.

Dense logistic layers map a 1024-d observation to a score in (0, 1). The
hidden layers are seeded by greedy layer-wise contrastive-divergence
pretraining, then the whole stack is trained supervised on a squared-error
loss with weight decay and a KL sparsity penalty on hidden activations.

Sign convention: `backward` returns true gradients of

    0.5 * sum_k (f(s_k) - l_k)^2 + gamma * sum_m ||W^m||_F^2
            + eta * sum_(hidden m, i) KL(rho || rho_hat^m_i)

so that `sgd_step` descends it. `loss` reports the squared-error term
without the 0.5 (the conventional objective); gradient checks must halve
its euclidean term before differencing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

ARCHITECTURE = (1024, 256, 64, 16, 1)
INIT_SCALE = 0.01
WEIGHT_DECAY = 0.002

_MODEL_MAGIC = b"CDTM"
_MODEL_VERSION = 1
_KL_EPS = 1e-8


def logistic(x):
    """Numerically stable elementwise 1 / (1 + exp(-x))."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class RbmParams:
    """Weights and biases of one restricted Boltzmann machine."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    @classmethod
    def init(cls, n_visible, n_hidden, rng, scale=INIT_SCALE):
        return cls(
            weights=rng.uniform(-scale, scale, size=(n_visible, n_hidden)),
            visible_bias=np.zeros(n_visible),
            hidden_bias=np.zeros(n_hidden),
        )


@dataclass
class LayerParams:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class NetworkParams:
    """The dense layer stack; `dims` chains input through output sizes."""

    layers: list

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weights.shape[1] != b.weights.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        for layer in self.layers:
            if layer.bias.shape != (layer.weights.shape[1],):
                raise ValueError("bias length must match weight columns")

    @property
    def dims(self):
        return tuple([self.layers[0].weights.shape[0]] + [l.weights.shape[1] for l in self.layers])

    @classmethod
    def init(cls, dims, rng, scale=INIT_SCALE):
        layers = [
            LayerParams(
                weights=rng.uniform(-scale, scale, size=(dims[i], dims[i + 1])),
                bias=np.zeros(dims[i + 1]),
            )
            for i in range(len(dims) - 1)
        ]
        return cls(layers)

    def copy(self):
        return NetworkParams(
            [LayerParams(l.weights.copy(), l.bias.copy()) for l in self.layers]
        )


@dataclass
class OptimizerState:
    """Momentum buffers, one per weight/bias tensor."""

    weight_velocity: list
    bias_velocity: list
    iteration: int = 0

    @classmethod
    def zeros(cls, params: NetworkParams):
        return cls(
            weight_velocity=[np.zeros_like(l.weights) for l in params.layers],
            bias_velocity=[np.zeros_like(l.bias) for l in params.layers],
        )


@dataclass
class TrainBatch:
    """Inputs and binary labels for supervised training."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if len(self.inputs) != len(self.labels) or len(self.labels) < 1:
            raise ValueError("inputs and labels must have equal nonzero length")

    def __len__(self):
        return len(self.labels)


@dataclass
class ForwardTrace:
    """Per-layer activations, final predictions, batch-mean hidden activations."""

    activations: list
    prediction: np.ndarray
    mean_activations: list


@dataclass
class LossTerms:
    """The three objective contributions and their sum."""

    euclidean: float
    weight_decay: float
    sparsity: float
    total: float


def rbm_hidden_probs(rbm: RbmParams, visible) -> np.ndarray:
    """P(h=1 | v) for a batch of visible vectors."""
    v = np.atleast_2d(np.asarray(visible, dtype=np.float64))
    if v.shape[1] != rbm.weights.shape[0]:
        raise ValueError(
            f"visible dimension {v.shape[1]} != RBM visible size {rbm.weights.shape[0]}"
        )
    return logistic(v @ rbm.weights + rbm.hidden_bias)


def rbm_visible_probs(rbm: RbmParams, hidden) -> np.ndarray:
    """P(v=1 | h) for a batch of hidden vectors."""
    h = np.atleast_2d(np.asarray(hidden, dtype=np.float64))
    if h.shape[1] != rbm.weights.shape[1]:
        raise ValueError(
            f"hidden dimension {h.shape[1]} != RBM hidden size {rbm.weights.shape[1]}"
        )
    return logistic(h @ rbm.weights.T + rbm.visible_bias)


def rbm_reconstruction_error(rbm: RbmParams, batch) -> float:
    """Mean squared error of the deterministic one-step reconstruction."""
    v = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    recon = rbm_visible_probs(rbm, rbm_hidden_probs(rbm, v))
    return float(np.mean((v - recon) ** 2))


def rbm_cd1_step(
    rbm: RbmParams,
    batch,
    learning_rate,
    momentum,
    rng,
    velocity=None,
    weight_decay=WEIGHT_DECAY,
):
    """One contrastive-divergence-1 update on a batch; returns (rbm, velocity).

    The positive phase uses sampled binary hidden states; the reconstruction
    and negative phase use probabilities. Momentum and weight decay follow
    the same accumulation scheme as :func:`sgd_step`. Parameters update in
    place.
    """
    v = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    k = len(v)
    if velocity is None:
        velocity = (
            np.zeros_like(rbm.weights),
            np.zeros_like(rbm.visible_bias),
            np.zeros_like(rbm.hidden_bias),
        )
    h_prob = rbm_hidden_probs(rbm, v)
    h_state = (rng.random(h_prob.shape) < h_prob).astype(np.float64)
    v_recon = rbm_visible_probs(rbm, h_state)
    h_recon = rbm_hidden_probs(rbm, v_recon)

    grad_w = -(v.T @ h_state - v_recon.T @ h_recon) / k
    grad_vb = -(v - v_recon).mean(axis=0)
    grad_hb = -(h_state - h_recon).mean(axis=0)

    dw, dvb, dhb = velocity
    dw *= momentum
    dw -= weight_decay * learning_rate * rbm.weights
    dw -= learning_rate * grad_w
    dvb *= momentum
    dvb -= learning_rate * grad_vb
    dhb *= momentum
    dhb -= learning_rate * grad_hb
    rbm.weights += dw
    rbm.visible_bias += dvb
    rbm.hidden_bias += dhb
    return rbm, (dw, dvb, dhb)


def pretrain_stack(
    dataset,
    epochs_per_layer,
    learning_rate,
    momentum,
    rng,
    batch_size=100,
    dims=ARCHITECTURE,
) -> NetworkParams:
    """Greedy layer-wise RBM pretraining of the hidden layers.

    Layer m's RBM trains on layer m-1's hidden probabilities. The output
    layer does not pretrain; its weights stay at their uniform(-0.01, 0.01)
    initialization.
    """
    data = np.atleast_2d(np.asarray(dataset, dtype=np.float64))
    if len(data) < 1:
        raise ValueError("pretraining dataset is empty")
    dims = tuple(dims)
    inits = [
        rng.uniform(-INIT_SCALE, INIT_SCALE, size=(dims[i], dims[i + 1]))
        for i in range(len(dims) - 1)
    ]
    layers = []
    for i in range(len(dims) - 2):
        # start visible biases at the logit of the per-unit data mean so
        # early reconstructions match the marginals instead of chasing them
        marginals = np.clip(data.mean(axis=0), 0.01, 0.99)
        visible_bias = np.log(marginals / (1.0 - marginals))
        rbm = RbmParams(inits[i], visible_bias, np.zeros(dims[i + 1]))
        velocity = None
        for _ in range(epochs_per_layer):
            order = rng.permutation(len(data))
            for start in range(0, len(data), batch_size):
                rbm, velocity = rbm_cd1_step(
                    rbm,
                    data[order[start : start + batch_size]],
                    learning_rate,
                    momentum,
                    rng,
                    velocity,
                )
        layers.append(LayerParams(rbm.weights, rbm.hidden_bias.copy()))
        data = rbm_hidden_probs(rbm, data)
    layers.append(LayerParams(inits[-1], np.zeros(dims[-1])))
    return NetworkParams(layers)


def forward(params: NetworkParams, inputs) -> ForwardTrace:
    """Run the stack; records activations and their batch means."""
    h = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if h.shape[1] != params.dims[0]:
        raise ValueError(f"input dimension {h.shape[1]} != network input {params.dims[0]}")
    activations = []
    for layer in params.layers:
        h = logistic(h @ layer.weights + layer.bias)
        activations.append(h)
    return ForwardTrace(
        activations=activations,
        prediction=activations[-1][:, 0].copy(),
        mean_activations=[a.mean(axis=0) for a in activations[:-1]],
    )


def _kl_divergence(rho, rho_hat):
    r = np.clip(rho_hat, _KL_EPS, 1.0 - _KL_EPS)
    return rho * np.log(rho / r) + (1.0 - rho) * np.log((1.0 - rho) / (1.0 - r))


def loss(params: NetworkParams, batch: TrainBatch, gamma, eta, rho) -> LossTerms:
    """Objective contributions: squared error, gamma-scaled decay, eta-scaled KL."""
    trace = forward(params, batch.inputs)
    diff = trace.prediction - batch.labels
    euclid = float(diff @ diff)
    decay = gamma * float(sum(np.sum(l.weights**2) for l in params.layers))
    spars = eta * float(
        sum(_kl_divergence(rho, m).sum() for m in trace.mean_activations)
    )
    return LossTerms(euclid, decay, spars, euclid + decay + spars)


def backward(params: NetworkParams, batch: TrainBatch, trace: ForwardTrace, gamma, eta, rho):
    """Exact gradients, one (dW, db) pair per layer (see module docstring)."""
    k = len(batch)
    if len(trace.prediction) != k:
        raise ValueError("trace batch size does not match batch")
    grads = [None] * len(params.layers)
    delta = ((trace.prediction - batch.labels)[:, None]
             * trace.activations[-1] * (1.0 - trace.activations[-1]))
    for m in range(len(params.layers) - 1, -1, -1):
        h_prev = batch.inputs if m == 0 else trace.activations[m - 1]
        grads[m] = (
            h_prev.T @ delta + 2.0 * gamma * params.layers[m].weights,
            delta.sum(axis=0),
        )
        if m > 0:
            back = delta @ params.layers[m].weights.T
            rho_hat = np.clip(trace.mean_activations[m - 1], _KL_EPS, 1.0 - _KL_EPS)
            back += (eta / k) * (-rho / rho_hat + (1.0 - rho) / (1.0 - rho_hat))
            h = trace.activations[m - 1]
            delta = back * h * (1.0 - h)
    return grads


def sgd_step(
    params: NetworkParams,
    grads,
    opt: OptimizerState,
    learning_rate,
    momentum=0.9,
    weight_decay=WEIGHT_DECAY,
):
    """Momentum step: D <- momentum*D - decay*lr*W - lr*g; W <- W + D.

    Biases skip the decay term. Updates params and opt in place and returns
    them.
    """
    for m, layer in enumerate(params.layers):
        gw, gb = grads[m]
        dw = opt.weight_velocity[m]
        dw *= momentum
        dw -= weight_decay * learning_rate * layer.weights
        dw -= learning_rate * gw
        layer.weights += dw
        db = opt.bias_velocity[m]
        db *= momentum
        db -= learning_rate * gb
        layer.bias += db
    opt.iteration += 1
    return params, opt


def train(
    params: NetworkParams,
    batch: TrainBatch,
    epochs,
    batch_size,
    learning_rate,
    momentum,
    gamma,
    eta,
    rho,
    rng,
    weight_decay=WEIGHT_DECAY,
) -> NetworkParams:
    """Mini-batch SGD over shuffled epochs; the last short batch is kept.

    Starts from fresh momentum buffers, mutates `params` in place and
    returns it.
    """
    opt = OptimizerState.zeros(params)
    n = len(batch)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            sub = TrainBatch(batch.inputs[idx], batch.labels[idx])
            trace = forward(params, sub.inputs)
            grads = backward(params, sub, trace, gamma, eta, rho)
            sgd_step(params, grads, opt, learning_rate, momentum, weight_decay)
    return params


def score(params: NetworkParams, patches) -> np.ndarray:
    """Classifier scores in (0, 1), one per patch; no state change."""
    return forward(params, patches).prediction


def save_model(params: NetworkParams, path):
    """Serialize to the binary model format; round-trips bit-exactly."""
    buf = bytearray()
    buf += _MODEL_MAGIC
    buf += struct.pack("<I", _MODEL_VERSION)
    buf += struct.pack("<I", len(params.layers))
    for layer in params.layers:
        rows, cols = layer.weights.shape
        buf += struct.pack("<II", rows, cols)
        buf += np.ascontiguousarray(layer.weights, dtype="<f8").tobytes()
        buf += np.ascontiguousarray(layer.bias, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def load_model(path) -> NetworkParams:
    """Read a model file; raises FormatError on any structural problem."""
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: model file truncated")
    if data[:4] != _MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic bytes {data[:4]!r}")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != _MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    if not 1 <= n_layers <= 64:
        raise FormatError(f"{path}: implausible layer count {n_layers}")
    pos = 12
    layers = []
    for i in range(n_layers):
        if pos + 8 > len(data):
            raise FormatError(f"{path}: layer {i} header truncated")
        rows, cols = struct.unpack_from("<II", data, pos)
        pos += 8
        if rows < 1 or cols < 1:
            raise FormatError(f"{path}: layer {i} has empty shape {rows}x{cols}")
        need = 8 * (rows * cols + cols)
        if pos + need > len(data):
            raise FormatError(f"{path}: layer {i} data truncated")
        weights = (
            np.frombuffer(data, dtype="<f8", count=rows * cols, offset=pos)
            .reshape(rows, cols)
            .copy()
        )
        pos += 8 * rows * cols
        bias = np.frombuffer(data, dtype="<f8", count=cols, offset=pos).copy()
        pos += 8 * cols
        layers.append(LayerParams(weights, bias))
    if pos != len(data):
        raise FormatError(f"{path}: {len(data) - pos} trailing bytes after last layer")
    try:
        return NetworkParams(layers)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
