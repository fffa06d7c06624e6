"""Autoregressive density model with AdaCat conditionals.

Dimension ``t`` is modelled by its own MLP fed with Fourier features of the
already-observed prefix ``x^{<t}``. The first dimension has no inputs and is a
bare bias vector. Heads come in four flavours:

``adacat``
    the network emits both mass logits ``phi`` and width logits ``psi``;
``uniform``
    only ``phi``, widths fixed at ``1/k`` (``psi`` forced to zero);
``adaptive-quantile``
    only ``psi``, masses fixed at ``1/k`` (``phi`` forced to zero);
``fixed-quantile``
    only ``phi``, widths taken from precomputed marginal quantiles.
"""

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._validation import DEFAULT_EPS_WIDTH, check_samples, check_unit
from .distribution import SAMPLE_MODES, batch_log_pdf, batch_sample, floor_widths, prefix_sums
from .smoothing import LogitVector, head_terms, log_softmax, widths_backward, widths_from_logits

HEAD_MODES = ("adacat", "uniform", "adaptive-quantile", "fixed-quantile")
MAX_FOURIER_PAIRS = 32
SCHEMA_VERSION = 1


class NonFiniteLossError(FloatingPointError):
    """The objective became non-finite at sample ``d``, dimension ``t`` (zero-based)."""

    def __init__(self, d, t, value):
        self.d, self.t, self.value = int(d), int(t), float(value)
        super().__init__(f"non-finite objective {self.value} at sample {self.d}, dimension {self.t}")


@dataclass(frozen=True)
class FourierConfig:
    b: int = 0

    def __post_init__(self):
        if not 0 <= int(self.b) <= MAX_FOURIER_PAIRS:
            raise ValueError(f"Fourier pair count must be in [0, {MAX_FOURIER_PAIRS}], got {self.b}")


@dataclass
class HeadMode:
    kind: str = "adacat"
    fixed_w: Optional[np.ndarray] = None  # (m, k) widths, fixed-quantile only

    def __post_init__(self):
        if self.kind not in HEAD_MODES:
            raise ValueError(f"unknown head mode {self.kind!r}; expected one of {HEAD_MODES}")
        if (self.fixed_w is not None) != (self.kind == "fixed-quantile"):
            raise ValueError("fixed_w must be given exactly when kind='fixed-quantile'")
        if self.fixed_w is not None:
            self.fixed_w = np.atleast_2d(np.asarray(self.fixed_w, dtype=np.float64))


class HeadOutput(NamedTuple):
    h: np.ndarray
    log_h: np.ndarray
    w: np.ndarray
    log_w: np.ndarray
    s: Optional[np.ndarray]  # raw width softmax, None when widths are not learned


def fourier_features(x, b):
    """``(x, sin(2^0 x), cos(2^0 x), ..., sin(2^(b-1) x), cos(2^(b-1) x))`` along a new last axis."""
    x = np.asarray(x, dtype=np.float64)
    if b == 0:
        return x[..., None]
    freqs = 2.0 ** np.arange(b)
    arg = x[..., None] * freqs
    out = np.empty(x.shape + (1 + 2 * b,))
    out[..., 0] = x
    out[..., 1::2] = np.sin(arg)
    out[..., 2::2] = np.cos(arg)
    return out


class ArDensityModel:
    """Per-dimension MLPs mapping an observed prefix to AdaCat head logits.

    Parameters
    ----------
    m : int
        Data dimensionality.
    k : int
        Bins per conditional.
    head_mode : str or HeadMode
        One of ``HEAD_MODES``.
    hidden : sequence of int
        Hidden layer widths of each MLP (ReLU activations).
    fourier_b : int
        Number of sin/cos feature pairs per input coordinate.
    seed : int
        Seed for weight initialization. Output layers start at zero, so every
        conditional starts out as the uniform distribution.
    """

    def __init__(self, m, k, head_mode="adacat", hidden=(64, 64), fourier_b=0,
                 eps_width=DEFAULT_EPS_WIDTH, seed=0, fixed_w=None):
        if int(m) < 1:
            raise ValueError("m must be a positive integer")
        if int(k) < 1:
            raise ValueError("k must be a positive integer")
        if int(k) * eps_width >= 1.0:
            raise ValueError("k * eps_width must be below 1")
        hidden = tuple(int(h) for h in hidden)
        if not hidden or min(hidden) < 1:
            raise ValueError("at least one hidden layer of positive width is required")
        if not isinstance(head_mode, HeadMode):
            head_mode = HeadMode(head_mode, fixed_w)
        if head_mode.fixed_w is not None:
            if head_mode.fixed_w.shape != (int(m), int(k)):
                raise ValueError(f"fixed_w must have shape ({m}, {k}), got {head_mode.fixed_w.shape}")
            head_mode.fixed_w = floor_widths(head_mode.fixed_w / head_mode.fixed_w.sum(axis=1, keepdims=True),
                                             eps_width)
        self.m, self.k = int(m), int(k)
        self.head_mode = head_mode
        self.hidden = hidden
        self.fourier = FourierConfig(int(fourier_b))
        self.eps_width = float(eps_width)
        self.seed = seed
        self.scale_meta = None
        rng = np.random.default_rng(seed)
        self.layers = [self._init_net(t, rng) for t in range(self.m)]

    # ------------------------------------------------------------------
    @property
    def mode(self):
        return self.head_mode.kind

    @property
    def output_size(self):
        return 2 * self.k if self.mode == "adacat" else self.k

    def input_size(self, t):
        return t * (1 + 2 * self.fourier.b)

    def _init_net(self, t, rng):
        n_in = self.input_size(t)
        if n_in == 0:
            return [[np.zeros((0, self.output_size)), np.zeros(self.output_size)]]
        sizes = (n_in,) + self.hidden + (self.output_size,)
        layers = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append([rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)])
        layers[-1][0][:] = 0.0
        return layers

    def params(self):
        """Flat list of parameter arrays (views, not copies), in a fixed order."""
        return [arr for net in self.layers for layer in net for arr in layer]

    def n_params(self):
        return sum(p.size for p in self.params())

    # ------------------------------------------------------------------
    def features(self, X, t):
        """Network input for dimension ``t`` from the first ``t`` columns of ``X``."""
        prefix = X[:, :t]
        return fourier_features(prefix, self.fourier.b).reshape(X.shape[0], t * (1 + 2 * self.fourier.b))

    def _forward(self, t, feats):
        net = self.layers[t]
        acts = [feats]
        out = feats
        for i, (W, b) in enumerate(net):
            out = out @ W + b
            if i < len(net) - 1:
                out = np.maximum(out, 0.0)
            acts.append(out)
        return out, acts

    def _backward(self, t, acts, g_out):
        net = self.layers[t]
        grads = [None] * len(net)
        g = g_out
        for i in range(len(net) - 1, -1, -1):
            W, _ = net[i]
            grads[i] = [acts[i].T @ g, g.sum(axis=0)]
            if i > 0:
                g = (g @ W.T) * (acts[i] > 0)
        return grads

    def _head(self, t, out):
        n, k = out.shape[0], self.k
        mode = self.mode
        if mode == "adacat":
            phi, psi = out[:, :k], out[:, k:]
        elif mode == "adaptive-quantile":
            phi, psi = np.zeros((n, k)), out
        else:
            phi, psi = out, np.zeros((n, k))
        log_h = log_softmax(phi)
        h = np.exp(log_h)
        if mode == "fixed-quantile":
            w = np.broadcast_to(self.head_mode.fixed_w[t], (n, k))
            return HeadOutput(h, log_h, w, np.log(w), None)
        w, s = widths_from_logits(psi, self.eps_width)
        return HeadOutput(h, log_h, w, np.log(w), s)

    def _head_backward(self, head, g_phi, g_w):
        mode = self.mode
        if mode == "adacat":
            return np.concatenate([g_phi, widths_backward(g_w, head.s, self.eps_width)], axis=1)
        if mode == "adaptive-quantile":
            return widths_backward(g_w, head.s, self.eps_width)
        return g_phi

    def conditional_heads(self, X, t):
        """Head outputs of dimension ``t`` for every row of ``X`` (only ``X[:, :t]`` is read)."""
        out, _ = self._forward(t, self.features(X, t))
        return self._head(t, out)

    # ------------------------------------------------------------------
    def to_dict(self):
        return {
            "format": "adacat-checkpoint",
            "schema_version": SCHEMA_VERSION,
            "m": self.m,
            "k": self.k,
            "head_mode": self.mode,
            "fixed_w": None if self.head_mode.fixed_w is None else self.head_mode.fixed_w.tolist(),
            "fourier_b": self.fourier.b,
            "hidden": list(self.hidden),
            "eps_width": self.eps_width,
            "scale_meta": None if self.scale_meta is None else np.asarray(self.scale_meta).tolist(),
            "weights": [
                [{"shape": list(W.shape), "W": W.ravel().tolist(), "b": b.tolist()} for W, b in net]
                for net in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, doc):
        version = doc.get("schema_version")
        if version is None or int(version) > SCHEMA_VERSION:
            raise ValueError(f"unsupported checkpoint schema_version {version!r}")
        model = cls(doc["m"], doc["k"], doc["head_mode"], doc["hidden"], doc["fourier_b"],
                    doc.get("eps_width", DEFAULT_EPS_WIDTH), fixed_w=doc.get("fixed_w"))
        if len(doc["weights"]) != model.m:
            raise ValueError("checkpoint weight list does not match m")
        for t, net_doc in enumerate(doc["weights"]):
            net = model.layers[t]
            if len(net_doc) != len(net):
                raise ValueError(f"checkpoint layer count mismatch in dimension {t}")
            for layer, ldoc in zip(net, net_doc):
                W = np.asarray(ldoc["W"], dtype=np.float64).reshape(ldoc["shape"])
                b = np.asarray(ldoc["b"], dtype=np.float64)
                if W.shape != layer[0].shape or b.shape != layer[1].shape:
                    raise ValueError(f"checkpoint weight shape mismatch in dimension {t}")
                layer[0], layer[1] = W, b
        if doc.get("scale_meta") is not None:
            model.scale_meta = np.asarray(doc["scale_meta"], dtype=np.float64)
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ----------------------------------------------------------------------
# operations


def conditional_logits(model, x_prefix):
    """Head logits ``(phi, psi)`` of the conditional for the next dimension after ``x_prefix``.

    In fixed-quantile mode ``psi`` is ``log fixed_w``, so that its softmax
    recovers the fixed widths.
    """
    x_prefix = np.atleast_1d(np.asarray(x_prefix, dtype=np.float64))
    t = x_prefix.size
    if t >= model.m:
        raise ValueError(f"prefix of length {t} leaves no dimension to predict (m={model.m})")
    check_unit(x_prefix, "x_prefix")
    X = np.zeros((1, model.m))
    X[0, :t] = x_prefix
    out, _ = model._forward(t, model.features(X, t))
    k = model.k
    if model.mode == "adacat":
        return LogitVector(out[0, :k].copy(), out[0, k:].copy())
    if model.mode == "adaptive-quantile":
        return LogitVector(np.zeros(k), out[0].copy())
    if model.mode == "fixed-quantile":
        return LogitVector(out[0].copy(), np.log(model.head_mode.fixed_w[t]))
    return LogitVector(out[0].copy(), np.zeros(k))


def joint_log_likelihood(model, X):
    """``sum_t log p(x^t | x^{<t})`` in nats; a single point gives a float, a matrix a vector."""
    single = np.ndim(X) == 1
    X = check_samples(np.atleast_2d(X) if single else X, model.m)
    check_unit(X, "X")
    total = np.zeros(X.shape[0])
    for t in range(model.m):
        head = model.conditional_heads(X, t)
        total += batch_log_pdf(head.log_h, head.log_w, prefix_sums(head.w), X[:, t])
    return float(total[0]) if single else total


def smoothed_joint_objective(model, batch, kernel=None):
    """Mean over the batch of the summed per-dimension (smoothed) log-likelihood.

    With ``kernel=None`` the plain point log-likelihood is used. Returns
    ``(value, grads)`` where ``grads`` aligns with ``model.params()``.

    Raises :class:`NonFiniteLossError` naming the first offending sample and
    dimension.
    """
    X = check_samples(batch, model.m)
    n = X.shape[0]
    if n == 0:
        raise ValueError("batch must be non-empty")
    total = 0.0
    grads = []
    for t in range(model.m):
        out, acts = model._forward(t, model.features(X, t))
        head = model._head(t, out)
        value, mass, g_w = head_terms(head.log_h, head.w, head.log_w, X[:, t], kernel)
        bad = ~np.isfinite(value)
        if np.any(bad):
            d = int(np.argmax(bad))
            raise NonFiniteLossError(d, t, value[d])
        total += value.sum()
        g_phi = mass - head.h * mass.sum(axis=1, keepdims=True)
        g_out = model._head_backward(head, g_phi, g_w) / n
        for layer_grads in model._backward(t, acts, g_out):
            grads.extend(layer_grads)
    return total / n, grads


def ar_sample(model, n, rng=None, mode="uniform"):
    """Draw ``n`` joint samples dimension by dimension; ``mode`` is ``"uniform"`` or ``"midpoint"``."""
    if mode not in SAMPLE_MODES:
        raise ValueError(f"unknown sampling mode {mode!r}; expected one of {SAMPLE_MODES}")
    rng = np.random.default_rng(rng)
    X = np.zeros((int(n), model.m))
    for t in range(model.m):
        head = model.conditional_heads(X, t)
        u = rng.random(int(n))
        X[:, t] = batch_sample(head.h, head.w, prefix_sums(head.w), u, mode)
    return X


def min_bin_width(model, X):
    """Smallest bin width over the conditionals evaluated at each row of ``X``."""
    X = check_samples(X, model.m)
    return float(min(model.conditional_heads(X, t).w.min() for t in range(model.m)))
