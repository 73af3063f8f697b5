"""Alternating two-network training loop with iteratively refined priors.

Each minibatch step runs through the same sequence: forward both networks,
turn their outputs into posterior means, refresh the frozen prior constants
from the prior cache, then update the auxiliary network with the main one
fixed and the main network with the (just-updated) auxiliary fixed.  Each
of the two sub-steps recomputes its forward passes so the frozen partner
contributes its current values as constants.

The prior cache implements the epoch-indexed mixing rules: per instance,

    lambda_hat_j = m * lambda_j^(r) + (1 - m) * lambda_j^(t)   j in S, t >= r
    lambda_hat_j = lambda_j^(t)                                 j in S, t < r
    lambda_hat_j = 1 + epsilon                                  j not in S

and analogously alpha_hat/beta_hat mix epoch-q snapshots with weight d
(identity before q, all labels).  Snapshots are taken from a full forward
pass at the end of epochs r and q and never change afterwards.  Within
epoch r itself the snapshot does not exist yet; mixing current values with
themselves would be the identity, which is exactly what the fallback does.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

import numpy as np

from .data import PLLDataset
from .distributions import (
    Z_EPS,
    beta_posterior_mean,
    clamp_z,
    dirichlet_posterior_mean,
    floor_params,
)
from .errors import NumericError
from .network import (
    DenseNet,
    SGDState,
    TransformConfig,
    lambda_transform,
    lambda_transform_grad,
    lambda_transform_pair,
    sgd_step,
    validate_transform_clamp,
)
from .objective import (
    chain_to_alpha_beta,
    chain_to_lambda,
    map_upper_bound_batch,
    ml_loss_batch,
    reg_loss_batch,
)
from .rng import substream

# Search grids named by the experimental protocol; selection is up to the
# caller (see select_learning_rate).
LR_GRID = (1e-4, 1e-3, 1e-2)
WEIGHT_DECAY_GRID = (1e-5, 1e-4, 1e-3, 1e-2)


@dataclass(frozen=True)
class TrainConfig:
    """Every knob the training procedure exposes."""

    epochs: int = 200
    batch_size: int = 256
    lr_f: float = 1e-2
    lr_g: float = 1e-2
    momentum_f: float = 0.9
    momentum_g: float = 0.9
    weight_decay: float = 0.0
    a: float = 1.0
    b: float = 0.0
    gamma: float = 1.0
    clamp: float = 20.0
    m: float = 0.5
    d: float = 0.5
    r: int = 5
    q: int = 5
    epsilon: float = 1e-3
    rho: float = 10.0
    hidden: int = 64
    activation: str = "relu"
    seed: int = 0
    ml_only: bool = False
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        for name in ("lr_f", "lr_g"):
            if not (getattr(self, name) > 0.0):
                raise ValueError(f"{name} must be strictly positive")
        for name in ("momentum_f", "momentum_g"):
            if not (0.0 <= getattr(self, name) < 1.0):
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be nonnegative")
        for name in ("m", "d"):
            if not (0.0 < getattr(self, name) < 1.0):
                raise ValueError(f"{name} must lie strictly inside (0, 1)")
        for name in ("r", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
            if self.epochs >= 1 and getattr(self, name) > self.epochs:
                raise ValueError(f"{name} must not exceed epochs")
        if not (self.epsilon > 0.0):
            raise ValueError("epsilon must be strictly positive")
        if not (self.rho > 0.0):
            raise ValueError("rho must be strictly positive")
        if self.hidden < 0:
            raise ValueError("hidden width must be nonnegative (0 means linear)")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ValueError("val_fraction must lie in [0, 1)")
        validate_transform_clamp(self.transform_config, self.clamp)

    @property
    def transform_config(self) -> TransformConfig:
        return TransformConfig(a=self.a, b=self.b, gamma=self.gamma)

    @classmethod
    def field_names(cls):
        return tuple(f.name for f in fields(cls))


@dataclass
class PriorCache:
    """Per-instance prior constants plus the epoch-r/q snapshots."""

    lambda_hat: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray
    mask: np.ndarray
    epsilon: float
    m: float
    d: float
    r: int
    q: int
    lambda_snapshot: Optional[np.ndarray] = None
    alpha_snapshot: Optional[np.ndarray] = None
    beta_snapshot: Optional[np.ndarray] = None

    @classmethod
    def initialize(cls, dataset: PLLDataset, config: TrainConfig) -> "PriorCache":
        n, c = dataset.n, dataset.c
        return cls(
            lambda_hat=np.full((n, c), 1.0 + config.epsilon),
            alpha_hat=np.ones((n, c)),
            beta_hat=np.ones((n, c)),
            mask=dataset.occurrence_matrix(),
            epsilon=config.epsilon,
            m=config.m,
            d=config.d,
            r=config.r,
            q=config.q,
        )

    def lambda_hat_values(self, idx: np.ndarray, live_lam: np.ndarray,
                          t: int) -> np.ndarray:
        """Frozen lambda constants for the given rows at epoch t."""
        if t >= self.r and self.lambda_snapshot is not None:
            mixed = self.m * self.lambda_snapshot[idx] + (1.0 - self.m) * live_lam
        else:
            mixed = live_lam
        return np.where(self.mask[idx] > 0.0, mixed, 1.0 + self.epsilon)

    def alpha_beta_hat_values(self, idx, live_alpha, live_beta, t: int):
        if t >= self.q and self.alpha_snapshot is not None:
            a_hat = self.d * self.alpha_snapshot[idx] + (1.0 - self.d) * live_alpha
            b_hat = self.d * self.beta_snapshot[idx] + (1.0 - self.d) * live_beta
            return a_hat, b_hat
        return live_alpha.copy(), live_beta.copy()

    def refresh(self, idx, live_lam, live_alpha, live_beta, t: int):
        """Compute, store and return the prior constants for a batch."""
        lam_hat = self.lambda_hat_values(idx, live_lam, t)
        a_hat, b_hat = self.alpha_beta_hat_values(idx, live_alpha, live_beta, t)
        self.lambda_hat[idx] = lam_hat
        self.alpha_hat[idx] = a_hat
        self.beta_hat[idx] = b_hat
        return lam_hat, a_hat, b_hat

    def take_lambda_snapshot(self, lam: np.ndarray) -> None:
        if self.lambda_snapshot is not None:
            raise RuntimeError("lambda snapshot already taken")
        self.lambda_snapshot = lam.copy()

    def take_alpha_beta_snapshot(self, alpha: np.ndarray, beta: np.ndarray) -> None:
        if self.alpha_snapshot is not None:
            raise RuntimeError("alpha/beta snapshot already taken")
        self.alpha_snapshot = alpha.copy()
        self.beta_snapshot = beta.copy()


def refine_lambda_hat(cache: PriorCache, i: int, live_lam: np.ndarray,
                      t: int) -> np.ndarray:
    """Frozen lambda constants for one instance (pure; no cache write)."""
    return cache.lambda_hat_values(np.array([i]), np.asarray(live_lam)[None], t)[0]


def refine_alpha_beta_hat(cache: PriorCache, i: int, live_alpha, live_beta, t: int):
    """Frozen (alpha, beta) constants for one instance (pure)."""
    a, b = cache.alpha_beta_hat_values(
        np.array([i]), np.asarray(live_alpha)[None], np.asarray(live_beta)[None], t)
    return a[0], b[0]


@dataclass
class TrainerState:
    config: TrainConfig
    f: DenseNet
    g: DenseNet
    opt_f: SGDState
    opt_g: SGDState
    cache: PriorCache
    dataset: PLLDataset


def init_state(config: TrainConfig, dataset: PLLDataset) -> TrainerState:
    sizes_f = ([dataset.q, dataset.c] if config.hidden == 0
               else [dataset.q, config.hidden, dataset.c])
    sizes_g = ([dataset.q, 2 * dataset.c] if config.hidden == 0
               else [dataset.q, config.hidden, 2 * dataset.c])
    f = DenseNet(sizes_f, activation=config.activation, clamp=config.clamp,
                 rng=substream(config.seed, "init", 0))
    g = DenseNet(sizes_g, activation=config.activation, clamp=config.clamp,
                 rng=substream(config.seed, "init", 1))
    return TrainerState(
        config=config,
        f=f,
        g=g,
        opt_f=SGDState(lr=config.lr_f, momentum=config.momentum_f),
        opt_g=SGDState(lr=config.lr_g, momentum=config.momentum_g),
        cache=PriorCache.initialize(dataset, config),
        dataset=dataset,
    )


def _live_lambda(net: DenseNet, X: np.ndarray, tc: TransformConfig):
    scores, cache = net.forward(X)
    return floor_params(lambda_transform(scores, tc)), scores, cache


def _live_alpha_beta(net: DenseNet, X: np.ndarray, tc: TransformConfig):
    scores, cache = net.forward(X)
    alpha, beta = lambda_transform_pair(scores, tc)
    return floor_params(alpha), floor_params(beta), scores, cache


def _batch_losses(theta, z, mask, lam_hat, a_hat, b_hat, ml_only: bool):
    ml_v, ml_dt, ml_dz = ml_loss_batch(theta, z, mask)
    if ml_only:
        return ml_v, ml_dt, ml_dz
    reg_v, reg_dt, reg_dz = reg_loss_batch(theta, z, lam_hat, a_hat, b_hat)
    return ml_v + reg_v, ml_dt + reg_dt, ml_dz + reg_dz


def train_epoch(state: TrainerState, t: int,
               batch_hook: Optional[Callable[[dict], None]] = None) -> dict:
    """One pass over the shuffled dataset; returns the epoch metrics record."""
    cfg = state.config
    tc = cfg.transform_config
    ds = state.dataset
    order = substream(cfg.seed, "shuffle", t).permutation(ds.n)
    losses = []
    gaps = []
    for k, start in enumerate(range(0, ds.n, cfg.batch_size)):
        idx = order[start:start + cfg.batch_size]
        X = ds.features[idx]
        O = state.cache.mask[idx]
        # Batch-start forwards feed the prior constants for both sub-steps.
        lam0, _, _ = _live_lambda(state.f, X, tc)
        alpha0, beta0, _, _ = _live_alpha_beta(state.g, X, tc)
        lam_hat, a_hat, b_hat = state.cache.refresh(idx, lam0, alpha0, beta0, t)

        # Sub-step 1: main branch fixed, auxiliary branch updated.
        lam, _, _ = _live_lambda(state.f, X, tc)
        theta = dirichlet_posterior_mean(lam, O)
        alpha, beta, sg, cache_g = _live_alpha_beta(state.g, X, tc)
        z_raw = beta_posterior_mean(alpha, beta, O)
        z = clamp_z(z_raw)
        try:
            _, _, d_z = _batch_losses(theta, z, O, lam_hat, a_hat, b_hat, cfg.ml_only)
        except NumericError as exc:
            raise NumericError(f"epoch {t}, batch {k}: {exc}") from exc
        d_z = np.where((z_raw > Z_EPS) & (z_raw < 1.0 - Z_EPS), d_z, 0.0) / idx.size
        d_alpha, d_beta = chain_to_alpha_beta(d_z, alpha, beta, O)
        d_scores_g = np.concatenate([d_alpha, d_beta], axis=1)
        d_scores_g *= lambda_transform_grad(sg, tc)
        sgd_step(state.opt_g, state.g, state.g.backward(cache_g, d_scores_g),
                 cfg.weight_decay)

        # Sub-step 2: auxiliary branch (just updated) fixed, main branch updated.
        alpha2, beta2, _, _ = _live_alpha_beta(state.g, X, tc)
        z2 = clamp_z(beta_posterior_mean(alpha2, beta2, O))
        lam2, sf, cache_f = _live_lambda(state.f, X, tc)
        theta2 = dirichlet_posterior_mean(lam2, O)
        try:
            values, d_theta, _ = _batch_losses(theta2, z2, O, lam_hat, a_hat, b_hat,
                                               cfg.ml_only)
        except NumericError as exc:
            raise NumericError(f"epoch {t}, batch {k}: {exc}") from exc
        if not np.all(np.isfinite(values)):
            bad = int(idx[int(np.flatnonzero(~np.isfinite(values))[0])])
            raise NumericError(
                f"non-finite loss at epoch {t}, batch {k}, instance {bad}"
            )
        d_lam = chain_to_lambda(d_theta / idx.size, lam2, O)
        d_scores_f = d_lam * lambda_transform_grad(sf, tc)
        sgd_step(state.opt_f, state.f, state.f.backward(cache_f, d_scores_f),
                 cfg.weight_decay)

        batch_loss = float(values.mean())
        bounds = map_upper_bound_batch(theta2, z2, lam2, alpha2, beta2, O, cfg.rho)
        gaps.append(float(bounds.mean()) - batch_loss)
        losses.append(batch_loss)
        if batch_hook is not None:
            batch_hook({
                "epoch": t, "batch": k, "indices": idx.copy(),
                "live_lambda": lam0, "live_alpha": alpha0, "live_beta": beta0,
                "lambda_hat": lam_hat, "alpha_hat": a_hat, "beta_hat": b_hat,
            })

    if t == cfg.r:
        lam_all, _, _ = _live_lambda(state.f, ds.features, tc)
        state.cache.take_lambda_snapshot(lam_all)
    if t == cfg.q:
        alpha_all, beta_all, _, _ = _live_alpha_beta(state.g, ds.features, tc)
        state.cache.take_alpha_beta_snapshot(alpha_all, beta_all)
    return {
        "epoch": t,
        "train_loss": float(np.mean(losses)),
        "bound_gap": float(np.mean(gaps)),
    }


def fit(config: TrainConfig, dataset: PLLDataset,
        val_dataset: Optional[PLLDataset] = None,
        batch_hook: Optional[Callable[[dict], None]] = None):
    """Run the full training schedule; returns (f, g, history).

    When ``val_dataset`` is omitted and ``val_fraction`` is positive, that
    fraction of instances is held out (seed-deterministically) before
    training and only ever used to compute the reported validation
    accuracy.  Accuracy entries are None when true labels are unavailable.
    """
    train_ds = dataset
    if val_dataset is None and config.val_fraction > 0.0 and dataset.n >= 2:
        perm = substream(config.seed, "split").permutation(dataset.n)
        n_val = max(1, int(round(dataset.n * config.val_fraction)))
        if n_val >= dataset.n:
            n_val = dataset.n - 1
        val_dataset = dataset.subset(perm[:n_val])
        train_ds = dataset.subset(perm[n_val:])
    state = init_state(config, train_ds)
    history = []
    for t in range(1, config.epochs + 1):
        record = train_epoch(state, t, batch_hook)
        record["val_acc"] = _maybe_accuracy(state.f, val_dataset, config.transform_config)
        history.append(record)
    return state.f, state.g, history


def _maybe_accuracy(net_f, dataset, tc) -> Optional[float]:
    if dataset is None or dataset.true_labels is None:
        return None
    labels, _ = predict_batch(net_f, dataset.features, tc)
    return float(np.mean(labels == dataset.true_labels))


def predict_batch(net_f: DenseNet, X: np.ndarray, tc: TransformConfig):
    """Labels and label-confidence rows for a feature matrix."""
    scores, _ = net_f.forward(np.atleast_2d(X))
    lam = lambda_transform(scores, tc)
    theta = lam / lam.sum(axis=1, keepdims=True)
    return np.argmax(theta, axis=1), theta


def predict(net_f: DenseNet, x: np.ndarray, tc: TransformConfig):
    """Predicted label (ties go to the lowest index) and its confidence vector.

    At test time there is no candidate set, so the occurrence vector is
    zero and the posterior mean reduces to lam / sum(lam); its argmax
    coincides with the raw score argmax because the transform is strictly
    increasing coordinate-wise.
    """
    labels, theta = predict_batch(net_f, np.asarray(x, dtype=np.float64)[None], tc)
    return int(labels[0]), theta[0]


def select_learning_rate(config: TrainConfig, dataset: PLLDataset,
                         grid=LR_GRID):
    """Pick the grid learning rate with the best final validation accuracy.

    Returns (best_config, {lr: final_val_acc}).  Requires true labels.
    """
    if dataset.true_labels is None:
        raise ValueError("learning-rate selection needs validation labels")
    results = {}
    for lr in grid:
        cand = replace(config, lr_f=lr, lr_g=lr)
        _, _, history = fit(cand, dataset)
        results[lr] = history[-1]["val_acc"] if history else 0.0
    best = max(results, key=lambda lr: results[lr])
    return replace(config, lr_f=best, lr_g=best), results
