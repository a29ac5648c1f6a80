"""Topological dissimilarity, joint loss, and the adaptive weighting scheduler.

The dissimilarity between two maps is the mean absolute difference of their
normalized persistence images. It joins an externally supplied cross-entropy
in a weighted sum, and the per-step totals of both terms drive a
multiplicative decay of the weighting exponent gamma, shifting emphasis from
long-lived topology outline to short-lived detail as training progresses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ContractError
from .filtration import DEFAULT_BANDWIDTH, DEFAULT_CAP
from .pimage import (
    PersistenceImage,
    PersistenceImageConfig,
    compute_diagram,
    pi_from_diagram,
)
from .persistence import PersistenceDiagram
from .segmap import SegMap

DEFAULT_BETA = 0.05
DEFAULT_LAMBDA = 0.0005
DEFAULT_GAMMA0 = 2.0
DEFAULT_WARMUP = 10


@dataclass(frozen=True)
class LossConfig:
    beta: float = DEFAULT_BETA
    lambda_: float = DEFAULT_LAMBDA
    gamma0: float = DEFAULT_GAMMA0
    warmup_steps: int = DEFAULT_WARMUP
    gamma_min: float = 0.0
    # "sum" feeds the raw CE/TD totals to the scheduler, so lambda's effective
    # rate scales with the training-set size; "mean" normalizes by batch size.
    total_mode: str = "sum"

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise ContractError(f"beta must be finite and >= 0, got {self.beta}")
        if not (math.isfinite(self.lambda_) and self.lambda_ >= 0):
            raise ContractError(f"lambda_ must be finite and >= 0, got {self.lambda_}")
        if self.gamma0 < 1.0:
            raise ContractError(f"gamma0 must be >= 1, got {self.gamma0}")
        if self.gamma_min < 0 or self.gamma0 < self.gamma_min:
            raise ContractError("gamma_min must satisfy 0 <= gamma_min <= gamma0")
        if self.warmup_steps < 0:
            raise ContractError(f"warmup_steps must be >= 0, got {self.warmup_steps}")
        if self.total_mode not in ("sum", "mean"):
            raise ContractError(f"total_mode must be 'sum' or 'mean', got {self.total_mode!r}")


class StepRecord(NamedTuple):
    step: int       # completed step index, 1-based
    gamma: float    # gamma in effect after this step's update
    ce_total: float
    td_total: float


@dataclass(frozen=True)
class SchedulerState:
    step: int
    gamma: float
    history: tuple[StepRecord, ...] = ()

    @classmethod
    def initial(cls, config: LossConfig) -> "SchedulerState":
        return cls(step=0, gamma=config.gamma0)


def topological_dissimilarity(pi_gt: PersistenceImage, pi_pred: PersistenceImage) -> float:
    """Mean absolute per-cell difference of two normalized persistence images."""
    if not (pi_gt.normalized and pi_pred.normalized):
        raise ContractError("topological dissimilarity requires normalized images")
    if pi_gt.config != pi_pred.config:
        raise ContractError(
            f"persistence-image config mismatch: {pi_gt.config} vs {pi_pred.config}"
        )
    return float(np.abs(pi_gt.values - pi_pred.values).mean())


def joint_loss(ce: float, td: float, beta: float = DEFAULT_BETA) -> float:
    if not (math.isfinite(ce) and math.isfinite(td) and math.isfinite(beta)):
        raise ContractError("joint loss requires finite inputs")
    return ce + beta * td


def scheduler_update(
    state: SchedulerState, ce_total: float, td_total: float, config: LossConfig
) -> SchedulerState:
    """One multiplicative decay step: gamma *= (1 - lambda * CE * TD), clamped.

    The clamp at ``gamma_min`` guards the pathological case where the decay
    factor goes non-positive.
    """
    if ce_total < 0 or td_total < 0:
        raise ContractError("ce_total and td_total must be >= 0")
    factor = 1.0 - config.lambda_ * ce_total * td_total
    gamma = max(config.gamma_min, state.gamma * factor)
    step = state.step + 1
    record = StepRecord(step=step, gamma=gamma, ce_total=float(ce_total),
                        td_total=float(td_total))
    return SchedulerState(step=step, gamma=gamma, history=state.history + (record,))


def warmup_step(
    state: SchedulerState, ce_total: float, td_total: float
) -> SchedulerState:
    """Advance the step counter without touching gamma (warm-up phase)."""
    if ce_total < 0 or td_total < 0:
        raise ContractError("ce_total and td_total must be >= 0")
    step = state.step + 1
    record = StepRecord(step=step, gamma=state.gamma, ce_total=float(ce_total),
                        td_total=float(td_total))
    return SchedulerState(step=step, gamma=state.gamma, history=state.history + (record,))


class EpochResult(NamedTuple):
    losses: tuple[float, ...]
    tds: tuple[float, ...]
    state: SchedulerState


def epoch_loss(
    batch: Sequence[tuple[SegMap, SegMap, float]],
    state: SchedulerState,
    config: LossConfig,
    pi_config: PersistenceImageConfig,
    *,
    bandwidth: float = DEFAULT_BANDWIDTH,
    cap: float = DEFAULT_CAP,
    gt_diagram_cache: dict[str, tuple[PersistenceDiagram, bool]] | None = None,
    dims: tuple[int, ...] = (1,),
) -> EpochResult:
    """Per-image joint losses for one step, then a single scheduler update.

    ``batch`` holds (ground truth, prediction, cross entropy) triples; CE
    comes from the caller because training is out of scope here. Ground-truth
    diagrams are cached by ``source_id`` and only re-rasterized under the
    current gamma; predictions are recomputed every call. During warm-up the
    step counter advances but gamma stays at its initial value.
    """
    for gt, pred, ce in batch:
        if (gt.width, gt.height) != (pred.width, pred.height):
            raise ContractError(
                f"dimension mismatch for {gt.source_id!r}: "
                f"{gt.width}x{gt.height} vs {pred.width}x{pred.height}"
            )
        if ce < 0:
            raise ContractError(f"cross entropy must be >= 0, got {ce}")

    cfg = replace(pi_config, gamma=state.gamma)
    losses: list[float] = []
    tds: list[float] = []
    ce_sum = 0.0
    td_sum = 0.0
    for gt, pred, ce in batch:  # fixed batch order keeps the reductions deterministic
        cached = None if gt_diagram_cache is None else gt_diagram_cache.get(gt.source_id)
        if cached is None:
            cached = compute_diagram(gt, bandwidth, cap)
            if gt_diagram_cache is not None:
                gt_diagram_cache[gt.source_id] = cached
        gt_diagram, gt_degenerate = cached
        pred_diagram, pred_degenerate = compute_diagram(pred, bandwidth, cap)
        pi_gt = pi_from_diagram(gt_diagram, cfg, dims, degenerate=gt_degenerate)
        pi_pred = pi_from_diagram(pred_diagram, cfg, dims, degenerate=pred_degenerate)
        td = topological_dissimilarity(pi_gt, pi_pred)
        losses.append(joint_loss(ce, td, config.beta))
        tds.append(td)
        ce_sum += ce
        td_sum += td

    if config.total_mode == "mean" and batch:
        ce_sum /= len(batch)
        td_sum /= len(batch)
    if state.step < config.warmup_steps:
        new_state = warmup_step(state, ce_sum, td_sum)
    else:
        new_state = scheduler_update(state, ce_sum, td_sum, config)
    return EpochResult(losses=tuple(losses), tds=tuple(tds), state=new_state)


def cross_entropy_reference(m: SegMap, probs: np.ndarray) -> float:
    """Binary cross entropy of foreground probabilities against a label map.

    Demo-harness plumbing only; real training supplies its own CE.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (m.height, m.width):
        raise ContractError(f"probability raster shape {probs.shape} != map shape")
    p = np.clip(probs, 1e-12, 1.0 - 1e-12)
    y = m.foreground.astype(np.float64)
    return float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean())


# ---------------------------------------------------------------------------
# Scheduler trajectory log (JSON lines)
# ---------------------------------------------------------------------------

def schedule_log_lines(history: Iterable[StepRecord]) -> list[str]:
    return [
        json.dumps(
            {"step": r.step, "gamma": r.gamma, "ce_total": r.ce_total, "td_total": r.td_total}
        )
        for r in history
    ]


def write_schedule_log(history: Iterable[StepRecord], path: str | Path) -> None:
    Path(path).write_text("\n".join(schedule_log_lines(history)) + "\n", encoding="ascii")
