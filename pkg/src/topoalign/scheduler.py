"""EMA-based dynamic weighting between preference and topology losses.

lambda_dyn = alpha * tanh((|ema_dpo| + eps) / (|ema_tpo| + eps)), computed
after a short warmup.  State is a value threaded through updates; the host
serializes the logical training steps.
"""

import math
from dataclasses import dataclass

from .errors import NonFiniteLossError, ValidationError


@dataclass
class SchedulerConfig:
    gamma: float = 0.95
    alpha: float = 0.5
    eps: float = 1e-6
    warmup_steps: int = 10

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must be in [0, 1)")
        if self.alpha <= 0:
            raise ValidationError("alpha must be > 0")
        if self.eps <= 0:
            raise ValidationError("eps must be > 0")
        if self.warmup_steps < 0:
            raise ValidationError("warmup_steps must be >= 0")


@dataclass
class SchedulerState:
    """EMA accumulators plus the weight emitted at the last update."""

    ema_dpo: float = 0.0
    ema_tpo: float = 0.0
    step: int = 0
    lambda_dyn: float = 0.0


def scheduler_update(
    state: SchedulerState, cfg: SchedulerConfig, loss_dpo: float, loss_tpo: float
) -> SchedulerState:
    """Fold one (dpo, tpo) loss pair into the EMAs and recompute lambda_dyn.

    At step 0 the EMAs are initialized to the first observed losses, which
    avoids a cold-start transient.  During warmup lambda_dyn stays 0.
    """
    if not (math.isfinite(loss_dpo) and math.isfinite(loss_tpo)):
        raise NonFiniteLossError(
            f"losses must be finite, got dpo={loss_dpo!r} tpo={loss_tpo!r}"
        )
    if state.step == 0:
        ema_dpo, ema_tpo = float(loss_dpo), float(loss_tpo)
    else:
        ema_dpo = cfg.gamma * state.ema_dpo + (1.0 - cfg.gamma) * loss_dpo
        ema_tpo = cfg.gamma * state.ema_tpo + (1.0 - cfg.gamma) * loss_tpo
    if state.step >= cfg.warmup_steps:
        ratio = (abs(ema_dpo) + cfg.eps) / (abs(ema_tpo) + cfg.eps)
        lam = cfg.alpha * math.tanh(ratio)
        if lam >= cfg.alpha:  # tanh saturates to 1.0 at f64; keep lam < alpha
            lam = math.nextafter(cfg.alpha, 0.0)
    else:
        lam = 0.0
    return SchedulerState(
        ema_dpo=ema_dpo, ema_tpo=ema_tpo, step=state.step + 1, lambda_dyn=lam
    )


def simulate(losses, cfg: SchedulerConfig) -> list:
    """Replay a sequence of (dpo, tpo) pairs; returns the state after each step."""
    state = SchedulerState()
    trace = []
    for dpo, tpo in losses:
        state = scheduler_update(state, cfg, float(dpo), float(tpo))
        trace.append(state)
    return trace
