"""Training losses and the multi-task objective.

Two per-example losses over raw logits:

* in-domain: cross-entropy against the target label minus a sharpness
  term, -(lambda_in / K) sum_c sigmoid(z_c), which for positive
  lambda_in rewards large concentrations at training points;
* out-of-distribution: cross-entropy between the uniform distribution
  and the predicted posterior, with the same sigmoid term weighted by
  lambda_out (negative values flatten the Dirichlet below alpha_k = 1).

The batch objective mixes one in-domain batch with a gamma-weighted
batch from each out-of-distribution source and returns loss parts plus
accumulated parameter gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import FeedForwardModel, GradientSet, _backward_cached, _forward_cached

__all__ = [
    "loss_in",
    "loss_out",
    "OodTerm",
    "ObjectiveConfig",
    "ObjectiveResult",
    "objective_batch",
]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_softmax(Z: np.ndarray) -> np.ndarray:
    shifted = Z - Z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _check_logits(z, name: str = "z") -> np.ndarray:
    arr = np.asarray(z, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError(f"{name} must be a 1-D logit vector with K >= 2")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _in_batch(Z: np.ndarray, labels: np.ndarray, lambda_in: float):
    """Per-row in-domain loss and dL/dZ for an (n, K) logit batch."""
    n, k = Z.shape
    logp = _log_softmax(Z)
    p = np.exp(logp)
    sig = _sigmoid(Z)
    losses = -logp[np.arange(n), labels] - (lambda_in / k) * sig.sum(axis=1)
    dZ = p.copy()
    dZ[np.arange(n), labels] -= 1.0
    dZ -= (lambda_in / k) * sig * (1.0 - sig)
    return losses, dZ


def _out_batch(Z: np.ndarray, lambda_out: float):
    """Per-row uniform cross-entropy loss and dL/dZ."""
    _, k = Z.shape
    logp = _log_softmax(Z)
    p = np.exp(logp)
    sig = _sigmoid(Z)
    losses = -logp.mean(axis=1) - (lambda_out / k) * sig.sum(axis=1)
    dZ = p - 1.0 / k - (lambda_out / k) * sig * (1.0 - sig)
    return losses, dZ


def loss_in(z, label: int, lambda_in: float):
    """In-domain loss and its logit gradient for one example."""
    arr = _check_logits(z)
    y = int(label)
    if not 0 <= y < arr.size:
        raise ValueError(f"label {y} outside [0, {arr.size})")
    losses, dZ = _in_batch(arr[None, :], np.array([y]), float(lambda_in))
    return float(losses[0]), dZ[0]


def loss_out(z, lambda_out: float):
    """Out-of-distribution loss and its logit gradient for one example."""
    arr = _check_logits(z)
    losses, dZ = _out_batch(arr[None, :], float(lambda_out))
    return float(losses[0]), dZ[0]


@dataclass(frozen=True)
class OodTerm:
    """One out-of-distribution source: mixing weight gamma and its lambda."""

    gamma: float
    lambda_out: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.gamma) and self.gamma >= 0.0):
            raise ValueError("gamma must be finite and >= 0")
        if not math.isfinite(self.lambda_out):
            raise ValueError("lambda_out must be finite")


@dataclass(frozen=True)
class ObjectiveConfig:
    lambda_in: float
    ood_terms: tuple[OodTerm, ...] = ()

    def __post_init__(self) -> None:
        if not math.isfinite(self.lambda_in):
            raise ValueError("lambda_in must be finite")
        object.__setattr__(self, "ood_terms", tuple(self.ood_terms))


@dataclass
class ObjectiveResult:
    total: float
    in_loss: float
    ood_losses: tuple[float, ...]  # unweighted per-source means
    gradients: GradientSet


def objective_batch(
    model: FeedForwardModel,
    in_features: np.ndarray,
    in_labels: np.ndarray,
    ood_batches: list[np.ndarray],
    cfg: ObjectiveConfig,
) -> ObjectiveResult:
    """Mean in-domain loss plus gamma-weighted mean loss per OOD batch.

    Gradients for all parameters are accumulated in one backward pass
    per batch; rows enter each reduction in input order, so results are
    deterministic.
    """
    X = np.asarray(in_features, dtype=float)
    y = np.asarray(in_labels)
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(f"in_features must have shape (n, {model.input_dim})")
    if X.shape[0] == 0:
        raise ValueError("in-domain batch must not be empty")
    if y.shape != (X.shape[0],):
        raise ValueError("in_labels must match in_features rows")
    labels = y.astype(int)
    if np.any(labels < 0) or np.any(labels >= model.num_classes):
        raise ValueError(f"labels outside [0, {model.num_classes})")
    if len(ood_batches) != len(cfg.ood_terms):
        raise ValueError(
            f"got {len(ood_batches)} OOD batches for {len(cfg.ood_terms)} configured terms"
        )

    n = X.shape[0]
    Z, pre, acts = _forward_cached(model, X)
    in_losses, dZ = _in_batch(Z, labels, cfg.lambda_in)
    in_loss = float(in_losses.mean())
    grads = _backward_cached(model, pre, acts, dZ / n)

    total = in_loss
    ood_losses = []
    for term, batch in zip(cfg.ood_terms, ood_batches):
        B = np.asarray(batch, dtype=float)
        if B.ndim != 2 or B.shape[1] != model.input_dim:
            raise ValueError(f"OOD batch must have shape (m, {model.input_dim})")
        if B.shape[0] == 0:
            if term.gamma != 0.0:
                raise ValueError("empty OOD batch with nonzero gamma")
            ood_losses.append(0.0)
            continue
        Zb, pre_b, acts_b = _forward_cached(model, B)
        part_losses, dZb = _out_batch(Zb, term.lambda_out)
        part = float(part_losses.mean())
        ood_losses.append(part)
        total += term.gamma * part
        if term.gamma != 0.0:
            grads.add_(_backward_cached(model, pre_b, acts_b, dZb * (term.gamma / B.shape[0])))

    return ObjectiveResult(total, in_loss, tuple(ood_losses), grads)
