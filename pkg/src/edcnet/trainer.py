"""Mini-batch Adam training with validation-based model selection."""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import NonFiniteGradientError, ShapeMismatchError
from .loss import LossConfig, composite_loss
from .nn.model import Model, load_params, save_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    patience: int = 20
    checkpoint_dir: str = None
    lr_schedule: str = "constant"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "learning_rate", "adam_eps", "patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"lr_schedule must be 'constant' or 'cosine', got {self.lr_schedule!r}")

    def learning_rate_at(self, epoch):
        if self.lr_schedule == "constant":
            return self.learning_rate
        return 0.5 * self.learning_rate * (1.0 + math.cos(math.pi * epoch / self.epochs))


@dataclass
class TrainLog:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    seconds: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False

    @property
    def epochs_completed(self):
        return len(self.train_loss)

    @property
    def best_val_loss(self):
        return self.val_loss[self.best_epoch] if self.val_loss else float("inf")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()}, 0)


def adam_step(params, grads, state, lr, betas=(0.9, 0.999), eps=1e-8):
    """One in-place Adam update with bias correction; increments ``state.t``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {name}")
    b1, b2 = betas
    state.t += 1
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.dtype, copy=False)
    return params, state


class EarlyStopping:
    """Tracks the best validation loss; signals stop after ``patience`` stale epochs."""

    def __init__(self, patience, best=float("inf"), best_epoch=-1, stale=0):
        self.patience = patience
        self.best = best
        self.best_epoch = best_epoch
        self.stale = stale

    def update(self, epoch, val_loss):
        """Returns ``(improved, stop)``."""
        if val_loss < self.best:
            self.best, self.best_epoch, self.stale = val_loss, epoch, 0
            return True, False
        self.stale += 1
        return False, self.stale >= self.patience


@dataclass
class Batches:
    features: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return self.features.shape[0]


def epoch_order(n, seed, epoch):
    return np.random.default_rng([seed, epoch]).permutation(n)


def evaluate_loss(model, data, loss_cfg, batch_size):
    total = 0.0
    for start in range(0, len(data), batch_size):
        x = data.features[start:start + batch_size]
        y = data.targets[start:start + batch_size]
        loss, _ = composite_loss(model.forward(x), y, loss_cfg)
        total += loss * x.shape[0]
    return total / len(data)


def _state_arrays(state):
    arrays = {f"adam.m/{k}": v for k, v in state.m.items()}
    arrays.update({f"adam.v/{k}": v for k, v in state.v.items()})
    return arrays


def save_training_state(path, model, state, log_, stopper, extra=None):
    # wall-clock timings stay in log.json so checkpoints are bit-reproducible
    logged = log_.to_dict()
    del logged["seconds"]
    meta = {
        "adam_t": state.t,
        "log": logged,
        "early_stopping": {"best": stopper.best, "best_epoch": stopper.best_epoch, "stale": stopper.stale},
    }
    meta.update(extra or {})
    save_params(model, path, extra=meta, arrays=_state_arrays(state))


def load_training_state(path):
    model, meta, rest = load_params(path, with_extras=True)
    dtype = model.config.dtype
    m = {k: rest[f"adam.m/{k}"].astype(dtype) for k in model.params}
    v = {k: rest[f"adam.v/{k}"].astype(dtype) for k in model.params}
    state = AdamState(m, v, int(meta["adam_t"]))
    es = meta["early_stopping"]
    tlog = TrainLog.from_dict(meta["log"])
    tlog.seconds = _saved_seconds(Path(path).with_name("log.json"), tlog.epochs_completed)
    return model, state, tlog, es, meta


def _saved_seconds(log_path, n):
    try:
        seconds = json.loads(log_path.read_text(encoding="utf-8"))["seconds"][:n]
    except (OSError, ValueError, KeyError, TypeError):
        seconds = []
    return seconds + [math.nan] * (n - len(seconds))


def train(train_data, val_data, model_config, train_config, loss_config=LossConfig(),
          resume_from=None, extra_meta=None):
    """Train and return the best-validation model and the log.

    ``train_data``/``val_data`` hold scaled features (N, 16) and linear target
    EDCs (N, bands, L). With ``checkpoint_dir`` set, ``last.ckpt`` (full
    optimiser state), ``best.ckpt`` and ``log.json`` are written every epoch;
    ``resume_from`` continues from such a ``last.ckpt``.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ValueError("train and validation splits must be nonempty")
    expected = (model_config.n_bands, model_config.edc_length)
    if train_data.targets.shape[1:] != expected or val_data.targets.shape[1:] != expected:
        raise ShapeMismatchError(
            f"targets {train_data.targets.shape[1:]} do not match model output {expected}"
        )
    dtype = model_config.dtype
    train_data = Batches(train_data.features.astype(dtype), train_data.targets.astype(dtype))
    val_data = Batches(val_data.features.astype(dtype), val_data.targets.astype(dtype))

    if resume_from is not None:
        model, state, tlog, es, _ = load_training_state(resume_from)
        stopper = EarlyStopping(train_config.patience, es["best"], es["best_epoch"], es["stale"])
        best_path = Path(resume_from).with_name("best.ckpt")
        best_params = load_params(best_path).params if best_path.exists() else None
    else:
        model = Model(model_config)
        state = AdamState.zeros_like(model.params)
        tlog = TrainLog()
        stopper = EarlyStopping(train_config.patience)
        best_params = None

    ckdir = Path(train_config.checkpoint_dir) if train_config.checkpoint_dir else None
    if ckdir:
        ckdir.mkdir(parents=True, exist_ok=True)
    betas = (train_config.beta1, train_config.beta2)
    bs = train_config.batch_size

    for epoch in range(tlog.epochs_completed, train_config.epochs):
        if tlog.stopped_early:
            break
        t0 = time.perf_counter()
        order = epoch_order(len(train_data), train_config.seed, epoch)
        total = 0.0
        lr = train_config.learning_rate_at(epoch)
        for start in range(0, len(order), bs):
            idx = order[start:start + bs]
            pred = model.forward(train_data.features[idx])
            loss, grad = composite_loss(pred, train_data.targets[idx], loss_config)
            grads = model.backward(grad)
            adam_step(model.params, grads, state, lr, betas, train_config.adam_eps)
            total += loss * idx.size
        train_loss = total / len(order)
        val_loss = evaluate_loss(model, val_data, loss_config, bs)
        tlog.train_loss.append(float(train_loss))
        tlog.val_loss.append(float(val_loss))
        tlog.seconds.append(time.perf_counter() - t0)
        improved, stop = stopper.update(epoch, val_loss)
        if improved:
            best_params = {k: v.copy() for k, v in model.params.items()}
        tlog.best_epoch = stopper.best_epoch
        tlog.stopped_early = stop
        log.info("epoch %d train %.4f val %.4f%s", epoch, train_loss, val_loss, " *" if improved else "")
        if ckdir:
            if improved:
                save_params(Model(model_config, best_params), ckdir / "best.ckpt", extra=extra_meta)
            save_training_state(ckdir / "last.ckpt", model, state, tlog, stopper, extra_meta)
            record = tlog.to_dict()
            if extra_meta and "stamp" in extra_meta:
                record["stamp"] = extra_meta["stamp"]
            (ckdir / "log.json").write_text(json.dumps(record, indent=2), encoding="utf-8")
        if stop:
            log.info("early stop at epoch %d (best %d)", epoch, stopper.best_epoch)

    best = Model(model.config, best_params if best_params is not None else model.params)
    return best, tlog
