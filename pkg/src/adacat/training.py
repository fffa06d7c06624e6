"""Adam-based maximum-likelihood training and evaluation."""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .armodel import NonFiniteLossError, joint_log_likelihood, min_bin_width, smoothed_joint_objective
from .smoothing import SmoothingKernel

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    lr: float = 3e-4
    lr_halving_period: int = 0  # epochs; 0 keeps the rate constant
    betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    smoothing: Optional[SmoothingKernel] = None  # None trains on the point likelihood
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        b1, b2 = self.betas
        if not (0 <= b1 < 1 and 0 <= b2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be at least 1")
        if int(self.epochs) < 0:
            raise ValueError("epochs must be non-negative")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        if isinstance(self.smoothing, dict):
            self.smoothing = SmoothingKernel(**self.smoothing)

    def lr_at(self, epoch):
        """Learning rate used during ``epoch`` (1-based)."""
        if not self.lr_halving_period:
            return self.lr
        return self.lr * 0.5 ** ((epoch - 1) // self.lr_halving_period)

    def to_dict(self):
        doc = asdict(self)
        doc["betas"] = list(self.betas)
        doc["smoothing"] = None if self.smoothing is None else self.smoothing.to_dict()
        return doc


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
    """One bias-corrected Adam descent step, applied in place.

    ``grads`` are gradients of the quantity being minimized. Weight decay is
    decoupled (applied directly to the parameters, scaled by ``lr``).
    """
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if weight_decay:
            p -= lr * weight_decay * p
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


class EvalResult(NamedTuple):
    nll_nats: float  # per sample, original data units
    nll_scaled_nats: float  # per sample, unit-cube units
    bits_per_dim: float  # from the unit-cube NLL
    worst_index: Optional[int] = None  # first sample with zero density, if any


def evaluate(model, dataset, samples=None):
    """Mean NLL of ``samples`` (default: all of ``dataset.samples``) under ``model``."""
    X = dataset.samples if samples is None else samples
    ll = joint_log_likelihood(model, X)
    worst = None
    if not np.all(np.isfinite(ll)):
        worst = int(np.argmax(~np.isfinite(ll)))
        logger.warning("sample %d has zero model density", worst)
        nll = float("inf")
    else:
        nll = float(-np.mean(ll))
    return EvalResult(nll + dataset.log_range_sum, nll, nll / (model.m * np.log(2.0)), worst)


@dataclass
class EpochRecord:
    epoch: int
    objective_nats: Optional[float]  # mean training objective; None for the initial record
    val_nll_nats: float  # unit-cube units
    val_bits_per_dim: float
    min_bin_width: float
    seconds: float


@dataclass
class TrainReport:
    records: list = field(default_factory=list)
    aborted: bool = False
    abort_reason: Optional[str] = None
    checkpoint_path: Optional[str] = None

    @property
    def final(self):
        return self.records[-1]

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(asdict(rec)) + "\n")


def _record(model, dataset, val_X, epoch, objective, seconds):
    res = evaluate(model, dataset, val_X)
    return EpochRecord(epoch, objective, res.nll_scaled_nats, res.bits_per_dim,
                       min_bin_width(model, val_X), seconds)


def training_split(dataset, config):
    """The ``(train, validation)`` sample matrices ``train`` will use for this config."""
    return dataset.split(config.val_fraction, seed=config.seed)


def train(model, dataset, config, callback=None):
    """Fit ``model`` to ``dataset`` with mini-batch Adam.

    The objective is the mean per-sample (smoothed) log-likelihood, ascended by
    descending its negation. Record 0 holds the untrained model; records
    ``1..epochs`` follow each pass over the training split. A non-finite loss
    stops training and the partial report is returned with ``aborted`` set.
    """
    rng = np.random.default_rng(config.seed)
    train_X, val_X = training_split(dataset, config)
    report = TrainReport()
    report.records.append(_record(model, dataset, val_X, 0, None, 0.0))
    params = model.params()
    state = AdamState.zeros_like(params)
    n = train_X.shape[0]
    bs = int(config.batch_size)
    for epoch in range(1, int(config.epochs) + 1):
        start = time.perf_counter()
        lr = config.lr_at(epoch)
        perm = rng.permutation(n)
        objective = 0.0
        try:
            for lo in range(0, n, bs):
                batch = train_X[perm[lo:lo + bs]]
                value, grads = smoothed_joint_objective(model, batch, config.smoothing)
                for g in grads:
                    np.negative(g, out=g)
                adam_step(params, grads, state, lr, config.betas, config.adam_eps, config.weight_decay)
                objective += value * batch.shape[0]
        except (NonFiniteLossError, FloatingPointError) as exc:
            report.aborted = True
            report.abort_reason = f"epoch {epoch}: {exc}"
            logger.error("training aborted at %s", report.abort_reason)
            break
        rec = _record(model, dataset, val_X, epoch, objective / n, time.perf_counter() - start)
        report.records.append(rec)
        logger.debug("epoch %d objective %.5f val nll %.5f min width %.3g", epoch, rec.objective_nats,
                     rec.val_nll_nats, rec.min_bin_width)
        if callback is not None:
            callback(rec)
    return report
