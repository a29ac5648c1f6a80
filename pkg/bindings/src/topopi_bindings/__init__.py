"""Session-based embedding layer over the topopi engine.

Training loops hand in segmentation maps as contiguous 2D unsigned-byte
buffers and get persistence images back as contiguous 2D float buffers; a
session handle owns the loss configuration, the scheduler state, and the
ground-truth diagram cache. All math lives in the engine — this layer only
adapts buffers and bookkeeps the session.

Buffers are wrapped zero-copy when they are already C-contiguous uint8;
anything else takes exactly one defensive copy. Caller arrays are never
mutated. A handle must be used from one thread at a time; distinct handles
are fully independent. No locks are held during computation.
"""

from __future__ import annotations

import hashlib

import numpy as np

import topopi
from topopi import (
    LossConfig,
    PersistenceImageConfig,
    SchedulerState,
    epoch_loss,
    pi_from_diagram,
)

__version__ = "0.1.0"

__all__ = ["SessionHandle", "session_new", "session_epoch", "persistence_image", "td"]

if topopi.__version__ != __version__:  # versioned lockstep with the core
    raise ImportError(
        f"topopi-bindings {__version__} requires topopi {__version__}, "
        f"found {topopi.__version__}"
    )


def _as_segmap(buffer, name: str) -> topopi.SegMap:
    """Wrap a 2D uint8 buffer as a read-only map, copying only if needed."""
    arr = np.asarray(buffer)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2D buffer, got ndim={arr.ndim}")
    if arr.dtype != np.uint8:
        raise ValueError(f"{name} must have unsigned-byte (uint8) elements, got {arr.dtype}")
    if not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr)  # the one defensive copy
    view = arr.view()
    view.flags.writeable = False  # read-only view; the caller's array is untouched
    digest = hashlib.sha1(view.tobytes()).hexdigest()[:16]
    h, w = view.shape
    return topopi.SegMap(width=w, height=h, labels=view, source_id=f"buf:{digest}:{h}x{w}")


class SessionHandle:
    """Opaque session state: configs, scheduler, and ground-truth diagram cache."""

    def __init__(self, loss_config: LossConfig, pi_config: PersistenceImageConfig,
                 bandwidth: float, cap: float):
        self._loss_config = loss_config
        self._pi_config = pi_config
        self._bandwidth = bandwidth
        self._cap = cap
        self._state = SchedulerState.initial(loss_config)
        self._gt_cache: dict = {}

    @property
    def gamma(self) -> float:
        return self._state.gamma

    @property
    def step(self) -> int:
        return self._state.step

    @property
    def history(self):
        return self._state.history


def session_new(
    *,
    pi_rows: int = 64,
    pi_cols: int = 64,
    extent_birth: float | None = None,
    extent_life: float | None = None,
    sigma2: float = 1.0,
    gamma0: float = 2.0,
    beta: float = 0.05,
    lambda_: float = 0.0005,
    warmup_steps: int = 10,
    gamma_min: float = 0.0,
    bandwidth: float = 1.0,
    cap: float = 20.0,
) -> SessionHandle:
    """New session with gamma at its initial value and step 0.

    Raises ``ValueError`` naming the offending parameter when a value is out
    of range.
    """
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    if cap <= 0:
        raise ValueError(f"cap must be > 0, got {cap}")
    try:
        loss_config = LossConfig(
            beta=beta, lambda_=lambda_, gamma0=gamma0,
            warmup_steps=warmup_steps, gamma_min=gamma_min,
        )
        pi_config = PersistenceImageConfig(
            resolution=(pi_rows, pi_cols),
            extent=(
                extent_birth if extent_birth is not None else cap,
                extent_life if extent_life is not None else cap,
            ),
            sigma2=sigma2,
            gamma=gamma0,
        )
    except topopi.ContractError as exc:
        raise ValueError(str(exc)) from None
    return SessionHandle(loss_config, pi_config, bandwidth, cap)


def session_epoch(handle: SessionHandle, gt_buffers, pred_buffers, ce_values):
    """One training step: per-image losses and TDs, then the gamma update.

    Returns ``(losses, tds, gamma)`` with the gamma in effect after the
    update. Results are identical to driving the engine directly.
    """
    gt_buffers = list(gt_buffers)
    pred_buffers = list(pred_buffers)
    ce_values = [float(c) for c in ce_values]
    if not (len(gt_buffers) == len(pred_buffers) == len(ce_values)):
        raise ValueError(
            f"batch length mismatch: {len(gt_buffers)} ground truths, "
            f"{len(pred_buffers)} predictions, {len(ce_values)} CE values"
        )
    batch = []
    for i, (gt_buf, pred_buf, ce) in enumerate(zip(gt_buffers, pred_buffers, ce_values)):
        gt = _as_segmap(gt_buf, f"gt_buffers[{i}]")
        pred = _as_segmap(pred_buf, f"pred_buffers[{i}]")
        if (gt.height, gt.width) != (pred.height, pred.width):
            raise ValueError(
                f"shape mismatch at index {i}: gt {(gt.height, gt.width)} "
                f"vs pred {(pred.height, pred.width)}"
            )
        batch.append((gt, pred, ce))
    try:
        result = epoch_loss(
            batch,
            handle._state,
            handle._loss_config,
            handle._pi_config,
            bandwidth=handle._bandwidth,
            cap=handle._cap,
            gt_diagram_cache=handle._gt_cache,
        )
    except topopi.ContractError as exc:
        raise ValueError(str(exc)) from None
    handle._state = result.state
    return list(result.losses), list(result.tds), handle.gamma


def persistence_image(
    buffer,
    *,
    bandwidth: float = 1.0,
    sigma2: float = 1.0,
    gamma: float = 2.0,
    pi_rows: int = 64,
    pi_cols: int = 64,
    extent_birth: float | None = None,
    extent_life: float | None = None,
    cap: float = 20.0,
) -> np.ndarray:
    """Normalized persistence image of one map buffer, as a C-contiguous float array."""
    m = _as_segmap(buffer, "buffer")
    try:
        config = PersistenceImageConfig(
            resolution=(pi_rows, pi_cols),
            extent=(
                extent_birth if extent_birth is not None else cap,
                extent_life if extent_life is not None else cap,
            ),
            sigma2=sigma2,
            gamma=gamma,
        )
        image = topopi.persistence_image(m, bandwidth, sigma2, gamma, config, cap=cap)
    except topopi.ContractError as exc:
        raise ValueError(str(exc)) from None
    return np.ascontiguousarray(image.values, dtype=np.float64)


def td(handle: SessionHandle, gt_buffer, pred_buffer) -> float:
    """Topological dissimilarity of two map buffers at the session's current gamma.

    Uses and fills the session's ground-truth diagram cache; leaves the
    scheduler untouched.
    """
    from dataclasses import replace

    gt = _as_segmap(gt_buffer, "gt_buffer")
    pred = _as_segmap(pred_buffer, "pred_buffer")
    if (gt.height, gt.width) != (pred.height, pred.width):
        raise ValueError(
            f"shape mismatch: gt {(gt.height, gt.width)} vs pred {(pred.height, pred.width)}"
        )
    cfg = replace(handle._pi_config, gamma=handle.gamma)
    cached = handle._gt_cache.get(gt.source_id)
    if cached is None:
        cached = topopi.compute_diagram(gt, handle._bandwidth, handle._cap)
        handle._gt_cache[gt.source_id] = cached
    gt_diagram, gt_degenerate = cached
    pred_diagram, pred_degenerate = topopi.compute_diagram(pred, handle._bandwidth, handle._cap)
    pi_gt = pi_from_diagram(gt_diagram, cfg, degenerate=gt_degenerate)
    pi_pred = pi_from_diagram(pred_diagram, cfg, degenerate=pred_degenerate)
    return topopi.topological_dissimilarity(pi_gt, pi_pred)
