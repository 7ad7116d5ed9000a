"""Desk-scale training of ReLU MLPs with optional l1 sparsity.

Everything is plain numpy for bit-for-bit reproducibility given a seed:
mini-batch SGD with an inverse-time decaying step size on the mean binary
cross-entropy of the logits, followed by a proximal soft-threshold step of
magnitude l1_lambda * current step size on the weight matrices (never the
biases), so the penalty produces exact zeros and the region count can
actually collapse. Early stopping tracks validation AUC; ties favor the
later checkpoint, which lets the proximal step keep sparsifying while the
score plateaus.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import DivergenceError, InputError
from .metrics import auc, check_binary_labels
from .network import Layer, NetworkSpec, sigmoid
from .unwrap import nontrivial_mask, unwrap

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("lambda", "train_auc", "test_auc", "n_regions", "n_nontrivial_regions")


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (5, 5)
    l1_lambda: float = 0.0
    learning_rate: float = 0.25
    lr_decay: float = 0.002  # step size at step t is learning_rate / (1 + lr_decay * t)
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if any(h < 1 for h in self.hidden):
            raise InputError(f"hidden widths must be positive, got {self.hidden}")
        if self.l1_lambda < 0:
            raise InputError(f"l1_lambda must be >= 0, got {self.l1_lambda}")
        if self.learning_rate <= 0 or self.lr_decay < 0:
            raise InputError("learning_rate must be > 0 and lr_decay >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise InputError("batch_size, max_epochs and patience must be >= 1")


def init_params(input_dim: int, hidden: tuple[int, ...], rng: np.random.Generator):
    """He-normal hidden layers, Xavier-ish output layer, zero biases."""
    params = []
    fan_in = input_dim
    for width in hidden:
        params.append(
            (rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(width, fan_in)), np.zeros(width))
        )
        fan_in = width
    params.append((rng.normal(0.0, np.sqrt(1.0 / fan_in), size=(1, fan_in)), np.zeros(1)))
    return params


def params_to_network(params) -> NetworkSpec:
    return NetworkSpec(layers=tuple(Layer(weights=w, bias=b) for w, b in params))


def network_to_params(net: NetworkSpec):
    return [(layer.weights.copy(), layer.bias.copy()) for layer in net.layers]


def _forward_cached(params, X):
    """Logits plus the input seen by every layer (for backprop)."""
    inputs = [X]
    h = X
    for w, b in params[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
        inputs.append(h)
    w_out, b_out = params[-1]
    logits = (inputs[-1] @ w_out.T + b_out)[:, 0]
    return logits, inputs


def predict_logits(params, X) -> np.ndarray:
    return _forward_cached(params, np.asarray(X, dtype=np.float64))[0]


def loss_and_grad(params, X, y, l1_lambda: float = 0.0):
    """Mean BCE on logits plus l1 on weight matrices; analytic gradients.

    The l1 contribution to the gradient is the sign subgradient (0 at 0).
    Training itself handles l1 with a proximal step instead, but the full
    subgradient is what finite differences see away from zero.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    logits, inputs = _forward_cached(params, X)
    # stable softplus(z) - y*z, averaged
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    delta = (sigmoid(logits) - y)[:, None] / n  # dL/dlogits
    grads = [None] * len(params)
    for li in range(len(params) - 1, -1, -1):
        w, _ = params[li]
        grad_w = delta.T @ inputs[li]
        grad_b = delta.sum(axis=0)
        if li > 0:
            delta = (delta @ w) * (inputs[li] > 0.0)
        grads[li] = (grad_w, grad_b)
    if l1_lambda > 0:
        for li, (w, _) in enumerate(params):
            loss += l1_lambda * float(np.abs(w).sum())
            gw, gb = grads[li]
            grads[li] = (gw + l1_lambda * np.sign(w), gb)
    return loss, grads


def l1_penalty(params, l1_lambda: float) -> float:
    return l1_lambda * float(sum(np.abs(w).sum() for w, _ in params))


def train(config: TrainConfig, X, y, X_val=None, y_val=None) -> NetworkSpec:
    """Fit a ReLU MLP; returns the checkpoint with the best validation AUC.

    Without a validation set the final parameters are returned and no early
    stopping happens. Deterministic for a fixed config.seed.
    """
    X = np.asarray(X, dtype=np.float64)
    y = check_binary_labels(y).astype(np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputError(f"X shape {X.shape} inconsistent with {y.shape[0]} labels")
    has_val = X_val is not None
    if has_val:
        X_val = np.asarray(X_val, dtype=np.float64)
        y_val = check_binary_labels(y_val)
        if X_val.shape[1] != X.shape[1]:
            raise InputError("X_val feature dimension differs from X")

    rng = np.random.default_rng(config.seed)
    params = init_params(X.shape[1], config.hidden, rng)
    step = 0

    n = X.shape[0]
    best_auc = -np.inf
    best_params = None
    patience_left = config.patience

    for epoch in range(config.max_epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start : start + config.batch_size]
            batch_loss, grads = loss_and_grad(params, X[batch], y[batch])
            if not np.isfinite(batch_loss):
                raise DivergenceError(epoch)
            step += 1
            lr = config.learning_rate / (1.0 + config.lr_decay * step)
            shrink = config.l1_lambda * lr
            for li in range(len(params)):
                w, b = params[li]
                gw, gb = grads[li]
                w = w - lr * gw
                b = b - lr * gb
                if shrink > 0:
                    w = np.sign(w) * np.maximum(np.abs(w) - shrink, 0.0)
                params[li] = (w, b)

        objective = loss_and_grad(params, X, y)[0] + l1_penalty(params, config.l1_lambda)
        if not np.isfinite(objective):
            raise DivergenceError(epoch)
        log.debug("epoch %d: objective %.6f", epoch, objective)

        if has_val:
            try:
                val_auc = auc(predict_logits(params, X_val), y_val)
            except Exception:
                val_auc = 0.5
            # ties go to the later checkpoint: with an l1 penalty the proximal
            # step keeps zeroing weights while the score plateaus
            if val_auc >= best_auc:
                if val_auc > best_auc:
                    patience_left = config.patience
                best_auc = val_auc
                best_params = [(w.copy(), b.copy()) for w, b in params]
            else:
                patience_left -= 1
                if patience_left == 0:
                    log.debug("early stop at epoch %d (best val AUC %.4f)", epoch, best_auc)
                    break

    return params_to_network(best_params if best_params is not None else params)


@dataclass(frozen=True)
class SweepRow:
    l1_lambda: float
    train_auc: float
    test_auc: float
    n_regions: int
    n_nontrivial_regions: int


def derive_seed(seed: int, index: int) -> int:
    """Stable per-run child seed for sweeps and multi-seed experiments."""
    return int(np.random.SeedSequence(entropy=(seed, index)).generate_state(1)[0])


def l1_sweep(
    config: TrainConfig,
    lambdas,
    X_train,
    y_train,
    X_val,
    y_val,
    X_test,
    y_test,
) -> list[SweepRow]:
    """Train one model per lambda (fresh seed-derived init each) and unwrap it.

    Region counts are taken on the training data; rows come back sorted by
    lambda. Training errors are re-raised annotated with the lambda.
    """
    lambdas = sorted(float(v) for v in lambdas)
    if not lambdas:
        raise InputError("need at least one lambda")
    rows = []
    for i, lam in enumerate(lambdas):
        cfg = replace(config, l1_lambda=lam, seed=derive_seed(config.seed, i))
        try:
            net = train(cfg, X_train, y_train, X_val, y_val)
        except DivergenceError as exc:
            raise DivergenceError(exc.epoch, f"lambda={lam}: {exc}") from exc
        regionset = unwrap(net, X_train)
        params = network_to_params(net)
        rows.append(
            SweepRow(
                l1_lambda=lam,
                train_auc=auc(predict_logits(params, X_train), y_train),
                test_auc=auc(predict_logits(params, X_test), y_test),
                n_regions=len(regionset),
                n_nontrivial_regions=int(nontrivial_mask(regionset, y_train).sum()),
            )
        )
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow(
            [repr(r.l1_lambda), repr(r.train_auc), repr(r.test_auc), r.n_regions, r.n_nontrivial_regions]
        )
    return buf.getvalue()
