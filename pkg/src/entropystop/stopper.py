"""Patience-based stopping on the loss-entropy curve.

The stopper tracks the lowest entropy seen so far and only accepts a new
point as the best one when the drop from the current minimum is a large
enough fraction of the total curve variation accumulated since that minimum
(the downtrend ratio). On a monotone decrease the ratio is exactly 1; noise
wiggles inflate the denominator and push the ratio toward 0, so small
fluctuations neither reset patience nor move the best point. Training stops
after ``k`` consecutive non-accepting steps.

The state machine consumes one entropy value per training iteration and is
pure: replaying a recorded curve reproduces the same decisions, and any
affine map e -> a*e + b with a > 0 leaves the decisions unchanged (both
sides of the ratio test scale by a).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ContractViolationError, InvalidInputError, NumericalError
from .nn import ParamSnapshot


@dataclass(frozen=True)
class StopperConfig:
    """Patience k and downtrend-significance threshold.

    ``r_down`` in (0, 1); 0.01-0.1 is the working range and 0.1 the default.
    Larger ``k`` tolerates wider fluctuations in the downtrend at the cost
    of more iterations after the final best point.
    """

    k: int = 100
    r_down: float = 0.1
    max_iters: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("patience k must be >= 1")
        if not 0.0 < self.r_down < 1.0:
            raise InvalidInputError("r_down must be in (0, 1)")
        if self.max_iters is not None and self.max_iters < 0:
            raise InvalidInputError("max_iters must be >= 0")


class StepDecision(enum.Enum):
    CONTINUE = "continue"
    NEW_BEST = "new_best"
    STOP = "stop"


class EntropyStopper:
    """One stopping run: feed ``step`` exactly once per training iteration.

    ``snapshot_provider`` is called only when a step is accepted as the new
    best, so parameter copies happen once per accepted point rather than
    every iteration.
    """

    def __init__(self, e0: float, snapshot: ParamSnapshot, cfg: StopperConfig):
        if not math.isfinite(e0):
            raise NumericalError("initial entropy must be finite")
        self.cfg = cfg
        self.e_min = float(e0)
        self.g = 0.0
        self.patience = 0
        self.best_iter = 0
        self.best_snapshot = snapshot
        self.last_e = float(e0)
        self.iteration = 0
        self.stopped = False

    def step(self, e_j: float, snapshot_provider) -> StepDecision:
        if self.stopped:
            raise ContractViolationError("stopper already stopped")
        if not math.isfinite(e_j):
            raise NumericalError("entropy value must be finite")
        e_j = float(e_j)
        self.iteration += 1
        self.g += abs(e_j - self.last_e)
        self.last_e = e_j
        if e_j < self.e_min and (self.e_min - e_j) / self.g > self.cfg.r_down:
            self.e_min = e_j
            self.g = 0.0
            self.patience = 0
            self.best_iter = self.iteration
            self.best_snapshot = snapshot_provider()
            return StepDecision.NEW_BEST
        self.patience += 1
        if self.patience >= self.cfg.k:
            self.stopped = True
            return StepDecision.STOP
        return StepDecision.CONTINUE


def replay(curve, cfg: StopperConfig) -> tuple[int, int, list[StepDecision]]:
    """Drive a stopper over a recorded entropy curve (curve[0] is e_0).

    Returns (best_iter, steps_consumed, decisions). Useful for golden-trace
    tests and for inspecting where a live run would have stopped.
    """
    if len(curve) == 0:
        raise InvalidInputError("empty curve")
    stopper = EntropyStopper(curve[0], snapshot=None, cfg=cfg)
    decisions = []
    for e in curve[1:]:
        decision = stopper.step(e, lambda: None)
        decisions.append(decision)
        if decision is StepDecision.STOP:
            break
    return stopper.best_iter, stopper.iteration, decisions
