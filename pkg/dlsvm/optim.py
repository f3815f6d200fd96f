"""
SGD with classical (heavy-ball) momentum and linear annealing schedules.
Schedules are stepped per weight update.
"""

from dataclasses import dataclass

import numpy as np

from dlsvm.errors import DomainError, ShapeError

DEFAULT_MOMENTUM = 0.9


@dataclass(frozen=True)
class Schedule:
    start: float
    end: float
    total_steps: int

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise DomainError(f"a schedule needs total_steps >= 1, got {self.total_steps}")

    def __call__(self, step: int) -> float:
        return linear_decay(self, step)


def linear_decay(schedule: Schedule, step: int) -> float:
    if step < 0:
        raise DomainError(f"schedule step must be non-negative, got {step}")
    fraction = min(step / schedule.total_steps, 1.0)
    return schedule.start + (schedule.end - schedule.start) * fraction


@dataclass
class SgdState:
    velocity: list[np.ndarray]
    momentum: float = DEFAULT_MOMENTUM
    step: int = 0

    @classmethod
    def zeros_like(cls, params: list[np.ndarray], momentum: float = DEFAULT_MOMENTUM) -> "SgdState":
        if not 0 <= momentum < 1:
            raise DomainError(f"momentum must be in [0, 1), got {momentum}")
        return cls(velocity=[np.zeros_like(p) for p in params], momentum=momentum)


def sgd_momentum_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: SgdState, lr: float
) -> tuple[list[np.ndarray], SgdState]:
    """
    v <- mu * v - lr * g;  theta <- theta + v.

    Parameters are updated in place (the model owns them) and returned.
    """
    if lr < 0:
        raise DomainError(f"learning rate must be non-negative, got {lr}")
    if not (len(params) == len(grads) == len(state.velocity)):
        raise ShapeError(
            f"{len(params)} params, {len(grads)} grads, {len(state.velocity)} velocity buffers"
        )
    for param, grad, velocity in zip(params, grads, state.velocity):
        if not (param.shape == grad.shape == velocity.shape):
            raise ShapeError(
                f"param {param.shape}, grad {grad.shape}, velocity {velocity.shape} disagree"
            )
        velocity *= state.momentum
        velocity -= lr * grad
        param += velocity
    state.step += 1
    return params, state
