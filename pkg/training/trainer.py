"""Joint training of the reward scorer and the ordinal thresholds."""
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from config import (
    ADAM_BETA1,
    ADAM_BETA2,
    ADAM_EPS,
    ASYNC_INTERVAL,
    BATCH_SIZE,
    DEFAULT_K,
    DEFAULT_THRESHOLD_MODE,
    EPOCHS,
    LR_ALPHA,
    LR_PHI_ADAM,
    LR_PHI_SGD,
    OPTIMIZER,
    PROJECTION_EPS,
    REG_LAMBDA,
    SCHED_PHI,
    SCORER_HIDDEN,
    SCORER_KIND,
    SHUFFLE_STREAM,
    THRESHOLD_OPT,
    TRAJECTORY_INTERVAL,
    TRANSITION_TOLERANCE,
    TRANSITION_WINDOW_FRAC,
    VAL_LOSS_PERCENTILE,
    WARMUP_FRAC,
)
from errors import DimensionError, NumericError, SchemaError, UndefinedMetricError
from ordinal import (
    LossKind,
    LossSpec,
    ThresholdMode,
    ThresholdParams,
    Thresholds,
    backprop_thresholds,
    batch_objective,
    build_thresholds,
    default_threshold_params,
    example_losses,
    project_symmetric,
    project_thresholds,
    reg_penalty,
)
from prefdata import PreferenceDataset, canonicalize_dataset
from scoring import RewardScorer, ScorerKind, init_scorer
from utils.rng import make_rng
from .optim import OptimizerKind, ParamOptimizer, Schedule, scheduled_lr

logger = logging.getLogger(__name__)


class ThresholdOpt(Enum):
    """How thresholds stay ordered during optimization."""
    REPARAM = "reparam"      # unconstrained alpha through the exp map
    PROJECTED = "projected"  # raw zeta steps followed by projection


class TrainConfig(BaseModel):
    """Flat run configuration (JSON keys match field names; ``lambda`` for reg_lambda)."""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    loss: LossKind = LossKind.ORDINAL_NLL
    margin_table: Optional[list[float]] = None
    weight_table: Optional[list[float]] = None
    prob_table: Optional[list[float]] = None
    mode: ThresholdMode = ThresholdMode(DEFAULT_THRESHOLD_MODE)
    K: int = Field(DEFAULT_K, ge=1)
    epochs: int = Field(EPOCHS, ge=1)
    batch_size: int = Field(BATCH_SIZE, ge=1)
    optimizer: OptimizerKind = OptimizerKind(OPTIMIZER)
    lr_phi: Optional[float] = Field(None, gt=0, description="Defaults by optimizer")
    lr_alpha: float = Field(LR_ALPHA, gt=0)
    sched_phi: Schedule = Schedule(SCHED_PHI)
    warmup_frac: float = Field(WARMUP_FRAC, ge=0, lt=1)
    sched_alpha: Literal["constant"] = "constant"
    reg_lambda: float = Field(REG_LAMBDA, ge=0, alias="lambda")
    adam_beta1: float = Field(ADAM_BETA1, ge=0, lt=1)
    adam_beta2: float = Field(ADAM_BETA2, ge=0, lt=1)
    adam_eps: float = Field(ADAM_EPS, gt=0)
    async_interval: int = Field(ASYNC_INTERVAL, ge=1)
    threshold_opt: ThresholdOpt = ThresholdOpt(THRESHOLD_OPT)
    projection_eps: float = Field(PROJECTION_EPS, gt=0)
    seed: int = Field(0, ge=0)
    init_alpha: Union[list[float], Literal["default"]] = "default"
    scorer_kind: ScorerKind = ScorerKind(SCORER_KIND)
    hidden: int = Field(SCORER_HIDDEN, ge=1)
    train_scorer: bool = True
    trajectory_interval: int = Field(TRAJECTORY_INTERVAL, ge=1)
    transition_window_frac: float = Field(TRANSITION_WINDOW_FRAC, gt=0, le=1)
    transition_tolerance: float = Field(TRANSITION_TOLERANCE, ge=0)
    val_loss_percentile: Optional[float] = Field(VAL_LOSS_PERCENTILE, gt=0, le=100)

    @field_validator("prob_table")
    @classmethod
    def _check_probs(cls, value: Optional[list[float]]) -> Optional[list[float]]:
        if value is not None and any(not 0.0 < p <= 1.0 for p in value):
            raise ValueError("prob_table entries must lie in (0, 1]")
        return value

    @field_validator("weight_table")
    @classmethod
    def _check_weights(cls, value: Optional[list[float]]) -> Optional[list[float]]:
        if value is not None and any(w < 0 for w in value):
            raise ValueError("weight_table entries must be non-negative")
        return value

    @property
    def phi_lr(self) -> float:
        if self.lr_phi is not None:
            return self.lr_phi
        return LR_PHI_ADAM if self.optimizer is OptimizerKind.ADAM else LR_PHI_SGD

    def loss_spec(self) -> LossSpec:
        return LossSpec(
            self.loss,
            margin_table=None if self.margin_table is None else tuple(self.margin_table),
            weight_table=None if self.weight_table is None else tuple(self.weight_table),
            prob_table=None if self.prob_table is None else tuple(self.prob_table),
        )

    def echo(self) -> dict:
        """JSON-ready config with every default filled in."""
        return self.model_dump(mode="json", by_alias=True)


@dataclass
class TrainState:
    """Mutable training state owned by one trainer.

    Exactly one threshold representation is set for ordinal losses:
    ``th_params`` (reparameterized) or ``zeta`` (projected). In symmetric
    projected mode ``zeta`` holds the K positive thresholds.
    """
    scorer: RewardScorer
    K: int
    mode: ThresholdMode
    phi_opt: ParamOptimizer
    th_params: Optional[ThresholdParams] = None
    zeta: Optional[np.ndarray] = None
    zeta_opt: Optional[ParamOptimizer] = None
    step: int = 0
    loss_history: list[tuple[int, float]] = field(default_factory=list)
    trajectory: list[tuple[int, np.ndarray]] = field(default_factory=list)
    pending_grad: Optional[np.ndarray] = None
    pending_count: int = 0

    @property
    def thresholds(self) -> Optional[Thresholds]:
        if self.th_params is not None:
            return build_thresholds(self.th_params)
        if self.zeta is None:
            return None
        if self.mode is ThresholdMode.SYMMETRIC:
            return Thresholds(self.K, self.mode, np.concatenate((-self.zeta[::-1], self.zeta)))
        return Thresholds(self.K, self.mode, self.zeta)

    def snapshot(self) -> None:
        th = self.thresholds
        if th is not None:
            self.trajectory.append((self.step, th.zeta.copy()))


@dataclass
class Checkpoint:
    """Validation snapshot taken at the end of an epoch."""
    epoch: int
    step: int
    scorer: RewardScorer
    thresholds: Optional[Thresholds]
    val_accuracy: Optional[float]
    val_loss: float
    mae: Optional[float] = None
    acc_within: Optional[dict] = None
    mean_chosen_reward: Optional[float] = None
    mean_rejected_reward: Optional[float] = None
    in_transition: bool = False
    excluded: bool = False

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "step": self.step,
            "val_accuracy": self.val_accuracy,
            "val_loss": self.val_loss,
            "mae": self.mae,
            "acc_within": None if self.acc_within is None else {str(k): v for k, v in self.acc_within.items()},
            "mean_chosen_reward": self.mean_chosen_reward,
            "mean_rejected_reward": self.mean_rejected_reward,
            "in_transition": self.in_transition,
            "excluded": self.excluded,
            "zeta": None if self.thresholds is None else [float(v) for v in self.thresholds.zeta],
        }


@dataclass
class TrainReport:
    """Summary of a training run."""
    steps: int
    epochs: int
    n_examples: int
    skipped_per_epoch: int
    final_objective: float
    loss_curve: list[tuple[int, float]]
    trajectory: list[tuple[int, np.ndarray]]
    checkpoints: list[Checkpoint] = field(default_factory=list)
    best_checkpoint: Optional[int] = None
    elapsed_s: float = 0.0

    @property
    def best(self) -> Optional[Checkpoint]:
        return None if self.best_checkpoint is None else self.checkpoints[self.best_checkpoint]

    def to_dict(self) -> dict:
        """Deterministic summary (timing excluded)."""
        return {
            "steps": self.steps,
            "epochs": self.epochs,
            "n_examples": self.n_examples,
            "skipped_per_epoch": self.skipped_per_epoch,
            "skipped_total": self.skipped_per_epoch * self.epochs,
            "final_objective": self.final_objective,
            "checkpoints": [c.to_dict() for c in self.checkpoints],
            "best_checkpoint": self.best_checkpoint,
        }


def full_objective(
    scorer: RewardScorer,
    th: Optional[Thresholds],
    ds: PreferenceDataset,
    spec: LossSpec,
    lam: float,
) -> float:
    """Mean loss over the kept examples of ``ds`` plus the threshold penalty."""
    s = scorer.diff_batch(ds.a, ds.b)
    value, _, _ = batch_objective(example_losses(spec, s, ds.z, th, ds.K))
    if spec.kind.is_ordinal:
        value += reg_penalty(th, lam)[0]
    return value


def init_state(ds: PreferenceDataset, cfg: TrainConfig, scorer: Optional[RewardScorer] = None) -> TrainState:
    """Initial scorer, thresholds and optimizer state."""
    if scorer is None:
        scorer = init_scorer(cfg.scorer_kind, ds.d, cfg.hidden, cfg.seed)
    elif scorer.d != ds.d:
        raise DimensionError(f"Scorer expects d={scorer.d}, dataset has d={ds.d}")

    def make_opt(size: int) -> ParamOptimizer:
        return ParamOptimizer(cfg.optimizer, size, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    state = TrainState(scorer=scorer, K=cfg.K, mode=cfg.mode, phi_opt=make_opt(scorer.params.size))
    if not cfg.loss.is_ordinal:
        return state

    if cfg.init_alpha == "default":
        params = default_threshold_params(cfg.K, cfg.mode)
    else:
        params = ThresholdParams(cfg.K, cfg.mode, np.asarray(cfg.init_alpha, dtype=np.float64))
    th = build_thresholds(params)
    if cfg.threshold_opt is ThresholdOpt.REPARAM:
        state.th_params = params
        state.zeta_opt = make_opt(params.alpha.size)
    else:
        state.zeta = th.zeta[cfg.K:].copy() if cfg.mode is ThresholdMode.SYMMETRIC else th.zeta.copy()
        state.zeta_opt = make_opt(state.zeta.size)
    return state


def _update_thresholds(state: TrainState, grad_zeta: np.ndarray, cfg: TrainConfig) -> None:
    if state.th_params is not None:
        grad_alpha = backprop_thresholds(state.th_params, grad_zeta)
        alpha = state.th_params.alpha + state.zeta_opt.delta(grad_alpha, cfg.lr_alpha)
        state.th_params = state.th_params.with_alpha(alpha)
        return
    K = state.K
    if state.mode is ThresholdMode.SYMMETRIC:
        grad = grad_zeta[K:] - grad_zeta[:K][::-1]
        raw = state.zeta + state.zeta_opt.delta(grad, cfg.lr_alpha)
        state.zeta = project_symmetric(raw, cfg.projection_eps).zeta[K:].copy()
    else:
        raw = state.zeta + state.zeta_opt.delta(grad_zeta, cfg.lr_alpha)
        state.zeta = project_thresholds(raw, cfg.projection_eps).zeta.copy()


def projected_step(
    state: TrainState,
    grads: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    lr_phi: Optional[float] = None,
) -> TrainState:
    """One projected-gradient update of (phi, zeta).

    Thresholds take a raw gradient step and are projected back onto the
    eps-separated set; the scorer takes an ordinary step.
    """
    if cfg.threshold_opt is not ThresholdOpt.PROJECTED or state.zeta is None:
        raise SchemaError("projected_step needs threshold_opt='projected'")
    grad_phi, grad_zeta = grads
    if cfg.train_scorer:
        lr = cfg.phi_lr if lr_phi is None else lr_phi
        state.scorer = state.scorer.with_params(state.scorer.params + state.phi_opt.delta(grad_phi, lr))
    _update_thresholds(state, np.asarray(grad_zeta, dtype=np.float64), cfg)
    state.step += 1
    return state


def _first_bad(idx: np.ndarray, *arrays: np.ndarray) -> int:
    bad = np.zeros(idx.size, dtype=bool)
    for arr in arrays:
        bad |= ~np.isfinite(arr.reshape(idx.size, -1)).all(axis=1)
    return int(idx[np.argmax(bad)]) if bad.any() else int(idx[0])


def _movement(trajectory: list[tuple[int, np.ndarray]], step: int, window: int) -> float:
    """Sup-norm threshold change over the trailing ``window`` steps."""
    if not trajectory:
        return 0.0
    target = step - window
    past = trajectory[0][1]
    for s, zeta in trajectory:
        if s > target:
            break
        past = zeta
    return float(np.max(np.abs(trajectory[-1][1] - past)))


def _checkpoint(state: TrainState, epoch: int, val: PreferenceDataset, spec: LossSpec) -> Checkpoint:
    from evaluation.metrics import binary_from_diffs, ordinal_metrics_from_predictions
    from ordinal import predict_level

    scorer = state.scorer
    th = state.thresholds
    s = scorer.diff_batch(val.a, val.b)
    val_loss, _, _ = batch_objective(example_losses(spec, s, val.z, th, val.K))
    try:
        accuracy = binary_from_diffs(s, val.z).accuracy
    except UndefinedMetricError:
        accuracy = None

    canon, _ = canonicalize_dataset(val.subset(np.flatnonzero(val.z != 0)))
    chosen = scorer.score_batch(canon.a).mean() if canon.n else None
    rejected = scorer.score_batch(canon.b).mean() if canon.n else None
    ckpt = Checkpoint(
        epoch=epoch,
        step=state.step,
        scorer=scorer,
        thresholds=th,
        val_accuracy=accuracy,
        val_loss=val_loss,
        mean_chosen_reward=None if chosen is None else float(chosen),
        mean_rejected_reward=None if rejected is None else float(rejected),
    )
    if th is not None:
        metrics = ordinal_metrics_from_predictions(predict_level(s, th), val.z, val.K)
        ckpt.mae = metrics.mae
        ckpt.acc_within = metrics.acc_within
    return ckpt


def select_checkpoint(checkpoints: list[Checkpoint], percentile: Optional[float]) -> Optional[int]:
    """Index of the best eligible checkpoint by validation accuracy.

    Transition-phase checkpoints are excluded, and with ``percentile`` set so
    are checkpoints whose validation loss lies above that percentile. When
    nothing is eligible every checkpoint is considered.
    """
    if not checkpoints:
        return None
    if percentile is not None:
        cutoff = np.percentile([c.val_loss for c in checkpoints], percentile)
        for c in checkpoints:
            if c.val_loss > cutoff:
                c.excluded = True
    eligible = [i for i, c in enumerate(checkpoints) if not (c.in_transition or c.excluded)]
    if not eligible:
        logger.warning("Every checkpoint was excluded; selecting among all of them")
        eligible = list(range(len(checkpoints)))

    def key(i: int) -> tuple[float, float]:
        c = checkpoints[i]
        accuracy = -np.inf if c.val_accuracy is None else c.val_accuracy
        return accuracy, -c.val_loss

    return max(eligible, key=key)


def train(
    ds: PreferenceDataset,
    cfg: TrainConfig,
    scorer: Optional[RewardScorer] = None,
    val: Optional[PreferenceDataset] = None,
) -> tuple[TrainState, TrainReport]:
    """Minimize mean loss + lambda * ||zeta||^2 jointly over scorer and thresholds.

    Each epoch visits the data in an order fixed by (seed, epoch). Every step
    updates the scorer; thresholds are updated every ``async_interval`` steps
    with the gradient averaged since their last update.

    Args:
        ds: Training data
        cfg: Run configuration
        scorer: Starting scorer (defaults to a seeded initialization)
        val: Optional validation set for epoch-end checkpoints

    Returns:
        (final state, report)
    """
    if ds.n == 0:
        raise SchemaError("Training set is empty")
    if ds.K != cfg.K:
        raise SchemaError(f"Dataset has K={ds.K}, config has K={cfg.K}")
    if val is not None and (val.K != cfg.K or (val.n and val.d != ds.d)):
        raise SchemaError("Validation set must match the training set's K and d")

    started = time.time()
    spec = cfg.loss_spec()
    ordinal = cfg.loss.is_ordinal
    state = init_state(ds, cfg, scorer)
    steps_per_epoch = math.ceil(ds.n / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    window = max(1, math.ceil(cfg.transition_window_frac * total))
    skipped = int((ds.z == 0).sum()) if cfg.loss.skips_ties else 0
    if skipped:
        logger.warning(f"{cfg.loss.value} skips {skipped} tied pairs (z=0) per epoch")

    frozen_diffs = None if cfg.train_scorer else state.scorer.diff_batch(ds.a, ds.b)
    logger.info(
        f"Training {cfg.loss.value} on {ds.n} pairs: {cfg.epochs} epochs x {steps_per_epoch} steps, "
        f"optimizer={cfg.optimizer.value}, lambda={cfg.reg_lambda}, async={cfg.async_interval}"
    )

    state.snapshot()
    checkpoints: list[Checkpoint] = []
    for epoch in range(cfg.epochs):
        order = make_rng(cfg.seed, SHUFFLE_STREAM, epoch).permutation(ds.n)
        for start in range(0, ds.n, cfg.batch_size):
            idx = order[start: start + cfg.batch_size]
            lr_phi = scheduled_lr(cfg.sched_phi, state.step, total, cfg.warmup_frac, cfg.phi_lr)

            if frozen_diffs is None:
                s = state.scorer.diff_batch(ds.a[idx], ds.b[idx])
            else:
                s = frozen_diffs[idx]
            th = state.thresholds
            batch = example_losses(spec, s, ds.z[idx], th, ds.K)
            objective, w_s, g_zeta = batch_objective(batch)
            if ordinal:
                reg_value, reg_grad = reg_penalty(th, cfg.reg_lambda)
                objective += reg_value
                g_zeta = g_zeta + reg_grad

            if not (np.isfinite(objective) and np.all(np.isfinite(w_s)) and np.all(np.isfinite(g_zeta))):
                example = _first_bad(idx, batch.value, batch.d_s, batch.d_zeta)
                raise NumericError(
                    f"Non-finite loss or gradient at step {state.step} (example {example})",
                    step=state.step,
                    example=example,
                )
            state.loss_history.append((state.step, objective))

            if cfg.train_scorer:
                grad_phi = state.scorer.backprop_batch(ds.a[idx], ds.b[idx], w_s)
                if not np.all(np.isfinite(grad_phi)):
                    raise NumericError(f"Non-finite scorer gradient at step {state.step}", step=state.step)
                delta = state.phi_opt.delta(grad_phi, lr_phi)
                state.scorer = state.scorer.with_params(state.scorer.params + delta)

            if ordinal:
                state.pending_grad = g_zeta if state.pending_grad is None else state.pending_grad + g_zeta
                state.pending_count += 1
                if state.pending_count == cfg.async_interval:
                    _update_thresholds(state, state.pending_grad / state.pending_count, cfg)
                    state.pending_grad = None
                    state.pending_count = 0

            state.step += 1
            if ordinal and (state.step % cfg.trajectory_interval == 0 or state.step == total):
                state.snapshot()
            if state.step % max(1, steps_per_epoch // 4) == 0:
                logger.debug(f"step {state.step}/{total} loss={objective:.6f} lr_phi={lr_phi:.3g}")

        if val is not None and val.n:
            ckpt = _checkpoint(state, epoch, val, spec)
            ckpt.in_transition = ordinal and _movement(state.trajectory, state.step, window) > cfg.transition_tolerance
            if ckpt.in_transition:
                logger.warning(f"Epoch {epoch} checkpoint falls in a threshold transition phase; excluded")
            checkpoints.append(ckpt)
            logger.info(f"Epoch {epoch}: val_loss={ckpt.val_loss:.5f} val_acc={ckpt.val_accuracy}")

    if state.pending_count:
        logger.debug(f"Dropping {state.pending_count} threshold gradients accumulated after the last update")

    best = select_checkpoint(checkpoints, cfg.val_loss_percentile)
    if best is not None:
        logger.info(f"Selected checkpoint from epoch {checkpoints[best].epoch}")
    final = full_objective(state.scorer, state.thresholds, ds, spec, cfg.reg_lambda)
    report = TrainReport(
        steps=state.step,
        epochs=cfg.epochs,
        n_examples=ds.n,
        skipped_per_epoch=skipped,
        final_objective=final,
        loss_curve=list(state.loss_history),
        trajectory=list(state.trajectory),
        checkpoints=checkpoints,
        best_checkpoint=best,
        elapsed_s=time.time() - started,
    )
    logger.info(f"Training finished after {state.step} steps; full-data objective {final:.6f}")
    return state, report
