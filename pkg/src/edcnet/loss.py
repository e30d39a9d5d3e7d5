"""Decibel-domain level MSE plus stride-k slope MSE, with its exact gradient."""

from dataclasses import dataclass

import numpy as np

from .edc import DEFAULT_EPSILON
from .errors import DomainError, ShapeMismatchError

LN10 = np.log(10.0)


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.2
    k: int = 50
    epsilon: float = DEFAULT_EPSILON
    # epsilon == 0 is only meaningful for strictly positive curves; tests use it
    allow_zero_epsilon: bool = False

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.k < 1:
            raise ValueError(f"stride k must be >= 1, got {self.k}")
        if self.epsilon < 0 or (self.epsilon == 0 and not self.allow_zero_epsilon):
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


def slope(y_db, k):
    """``out[..., n] = y_db[..., n + k] - y_db[..., n]``."""
    y_db = np.asarray(y_db)
    if y_db.shape[-1] <= k:
        raise ValueError(f"curve length {y_db.shape[-1]} must exceed stride {k}")
    return y_db[..., k:] - y_db[..., :-k]


def _db(y, eps):
    return 10.0 * np.log10(y + eps)


def loss_terms(pred, target, cfg):
    """The level and slope terms separately (both in dB^2)."""
    p_db, t_db = _db(pred, cfg.epsilon), _db(target, cfg.epsilon)
    level = np.mean((p_db - t_db) ** 2)
    sl = np.mean((slope(p_db, cfg.k) - slope(t_db, cfg.k)) ** 2)
    return float(level), float(sl)


def composite_loss(pred, target, cfg=LossConfig()):
    """Total loss and its gradient with respect to ``pred``.

    ``loss = mean((p_dB - t_dB)^2) + alpha * mean((dp_dB - dt_dB)^2)`` where
    ``x_dB = 10 log10(x + eps)`` and ``d`` is the stride-``k`` difference
    along the last axis. Means run over every element.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs target {target.shape}")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(target))):
        raise DomainError("non-finite values in loss input")
    if np.any(pred < 0) or np.any(target < 0):
        raise DomainError("negative energy in loss input")
    eps = cfg.epsilon
    p_db, t_db = _db(pred, eps), _db(target, eps)
    diff = p_db - t_db
    level = np.mean(diff * diff)
    grad_db = (2.0 / diff.size) * diff
    loss = level
    if cfg.alpha > 0:
        s = slope(diff, cfg.k)
        loss = level + cfg.alpha * np.mean(s * s)
        gs = (2.0 * cfg.alpha / s.size) * s
        grad_db[..., cfg.k:] += gs
        grad_db[..., :-cfg.k] -= gs
    grad = grad_db * (10.0 / LN10) / (pred + eps)
    return float(loss), grad.astype(pred.dtype, copy=False)
