"""Surrogate losses and norm-ball-constrained empirical risk minimization.

Losses are convex, non-increasing functions f with |f'| <= 1 applied to
the functional margin, ``loss(w; x, y) = f(y * <x, w>)``.  Training runs
full-batch projected subgradient descent inside the ball of radius
1/gamma.  What matters downstream is not the loss value but first-order
optimality, so results carry a stationarity gap: the norm of the
projected-gradient displacement, zero exactly at constrained optima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, LabeledPoint, project_to_ball
from .errors import DivergenceError, InvalidInputError
from .seeds import derive_seed, make_rng

HINGE_KIND = "hinge"
LOGISTIC_KIND = "logistic"

CONSTANT = "constant"
INVERSE_SQRT = "inverse_sqrt"
SCHEDULES = (CONSTANT, INVERSE_SQRT)

FEASIBILITY_TOL = 1e-12


@dataclass(frozen=True)
class SurrogateLoss:
    """Hinge ``max(0, 1 - t)`` or logistic ``ln(1 + e^-t)``, both 1-Lipschitz.

    The hinge subgradient at the kink t = 1 is taken as 0, the
    minimal-norm choice, so the stationarity gap vanishes at exact
    optima.
    """

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in (HINGE_KIND, LOGISTIC_KIND):
            raise InvalidInputError(f"unknown loss kind {self.kind!r}")

    @property
    def lipschitz(self) -> float:
        return 1.0

    def value(self, margins):
        t = np.asarray(margins, dtype=np.float64)
        if self.kind == HINGE_KIND:
            return np.maximum(0.0, 1.0 - t)
        return np.logaddexp(0.0, -t)

    def derivative(self, margins):
        t = np.asarray(margins, dtype=np.float64)
        if self.kind == HINGE_KIND:
            return np.where(t < 1.0, -1.0, 0.0)
        # f'(t) = -1 / (1 + e^t), written with tanh for stability at |t| >> 1
        return -0.5 * (1.0 - np.tanh(t / 2.0))


HINGE = SurrogateLoss(HINGE_KIND)
LOGISTIC = SurrogateLoss(LOGISTIC_KIND)


def loss_by_name(name: str) -> SurrogateLoss:
    if name == HINGE_KIND:
        return HINGE
    if name == LOGISTIC_KIND:
        return LOGISTIC
    raise InvalidInputError(f"unknown loss {name!r}")


def loss_value(loss: SurrogateLoss, w, point: LabeledPoint) -> float:
    """f(y * <x, w>) for a single point."""
    w = np.asarray(w, dtype=np.float64)
    return float(loss.value(point.y * float(point.x @ w)))


def loss_grad(loss: SurrogateLoss, w, point: LabeledPoint) -> np.ndarray:
    """f'(y * <x, w>) * y * x; norm at most ||x||."""
    w = np.asarray(w, dtype=np.float64)
    slope = float(loss.derivative(point.y * float(point.x @ w)))
    return slope * point.y * point.x


def dataset_objective(loss: SurrogateLoss, w, dataset: Dataset) -> float:
    """Mean surrogate loss over the dataset."""
    margins = dataset.y * (dataset.X @ np.asarray(w, dtype=np.float64))
    return float(loss.value(margins).mean())


def mean_gradient(loss: SurrogateLoss, w, dataset: Dataset) -> np.ndarray:
    """Mean subgradient ``(1/n) sum_i f'(t_i) y_i x_i`` over the dataset."""
    w = np.asarray(w, dtype=np.float64)
    margins = dataset.y * (dataset.X @ w)
    coeff = loss.derivative(margins) * dataset.y / dataset.n
    return dataset.X.T @ coeff


@dataclass(frozen=True)
class TrainConfig:
    """Constrained training knobs.

    The feasible set is the ball of radius 1/gamma.  The default step
    scale is ``(1/gamma) / sqrt(iterations)``; the inverse_sqrt schedule
    divides it by ``sqrt(t + 1)``.  Restarts beyond the first start from
    seeded offsets of norm 1e-6 to escape ties.
    """

    gamma: float
    iterations: int
    schedule: str = INVERSE_SQRT
    step_scale: float | None = None
    restarts: int = 1
    seed: int = 0
    averaging: bool = True

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma <= 1.0):
            raise InvalidInputError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.iterations < 1:
            raise InvalidInputError("need at least one iteration")
        if self.schedule not in SCHEDULES:
            raise InvalidInputError(f"unknown schedule {self.schedule!r}")
        if self.restarts < 1:
            raise InvalidInputError("need at least one restart")
        if self.step_scale is not None and not self.step_scale > 0:
            raise InvalidInputError("step_scale must be positive")

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "iterations": self.iterations,
            "schedule": self.schedule,
            "step_scale": self.step_scale,
            "restarts": self.restarts,
            "seed": self.seed,
            "averaging": self.averaging,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(
            gamma=float(data["gamma"]),
            iterations=int(data["iterations"]),
            schedule=data.get("schedule", INVERSE_SQRT),
            step_scale=data.get("step_scale"),
            restarts=int(data.get("restarts", 1)),
            seed=int(data.get("seed", 0)),
            averaging=bool(data.get("averaging", True)),
        )


@dataclass(frozen=True)
class TrajectorySummary:
    iterations: int
    restarts: int
    first_objective: float
    best_objective: float
    final_objective: float
    max_iterate_norm: float
    restart_objectives: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "restarts": self.restarts,
            "first_objective": self.first_objective,
            "best_objective": self.best_objective,
            "final_objective": self.final_objective,
            "max_iterate_norm": self.max_iterate_norm,
            "restart_objectives": list(self.restart_objectives),
        }


@dataclass(frozen=True, eq=False)
class TrainResult:
    w: np.ndarray
    objective: float
    stationarity_gap: float
    trajectory: TrajectorySummary

    def to_dict(self) -> dict:
        return {
            "w": self.w.tolist(),
            "objective": self.objective,
            "stationarity_gap": self.stationarity_gap,
            "trajectory": self.trajectory.to_dict(),
        }


def _steps(cfg: TrainConfig) -> np.ndarray:
    scale = cfg.step_scale
    if scale is None:
        scale = (1.0 / cfg.gamma) / math.sqrt(cfg.iterations)
    if cfg.schedule == CONSTANT:
        return np.full(cfg.iterations, scale)
    return scale / np.sqrt(np.arange(cfg.iterations) + 1.0)


def train(dataset: Dataset, loss: SurrogateLoss, cfg: TrainConfig) -> TrainResult:
    """Projected subgradient descent from w = 0 inside the 1/gamma ball.

    Returns the uniformly averaged iterate (or, with averaging off, the
    best-objective iterate) of the best restart.  Every iterate is
    projected, so feasibility ``||w|| <= 1/gamma`` holds throughout; the
    maximum iterate norm seen is recorded in the trajectory summary.
    """
    X, y = dataset.X, dataset.y
    radius = 1.0 / cfg.gamma
    steps = _steps(cfg)

    best_candidate: np.ndarray | None = None
    best_objective = math.inf
    first_objective = math.nan
    max_norm = 0.0
    restart_objectives: list[float] = []

    for restart in range(cfg.restarts):
        if restart == 0:
            w = np.zeros(dataset.d)
        else:
            rng = make_rng(derive_seed(cfg.seed, f"restart-{restart}"))
            offset = rng.standard_normal(dataset.d)
            norm = float(np.linalg.norm(offset))
            w = offset * (1e-6 / norm) if norm > 0 else np.zeros(dataset.d)
        w_sum = np.zeros(dataset.d)
        best_iterate = w
        best_iterate_obj = math.inf
        for t in range(cfg.iterations):
            margins = y * (X @ w)
            objective = float(loss.value(margins).mean())
            if restart == 0 and t == 0:
                first_objective = objective
            if objective < best_iterate_obj:
                best_iterate_obj = objective
                best_iterate = w
            coeff = loss.derivative(margins) * y / dataset.n
            grad = X.T @ coeff
            if not np.all(np.isfinite(grad)):
                raise DivergenceError(f"non-finite gradient at iteration {t}")
            w = project_to_ball(w - steps[t] * grad, radius)
            max_norm = max(max_norm, float(np.linalg.norm(w)))
            w_sum += w
        final_obj = dataset_objective(loss, w, dataset)
        if final_obj < best_iterate_obj:
            best_iterate_obj = final_obj
            best_iterate = w
        if cfg.averaging:
            candidate = w_sum / cfg.iterations
        else:
            candidate = best_iterate
        candidate_obj = dataset_objective(loss, candidate, dataset)
        restart_objectives.append(candidate_obj)
        if candidate_obj < best_objective:
            best_objective = candidate_obj
            best_candidate = candidate

    assert best_candidate is not None
    max_norm = max(max_norm, float(np.linalg.norm(best_candidate)))
    gap = stationarity_gap(dataset, loss, best_candidate, cfg.gamma)
    return TrainResult(
        w=best_candidate,
        objective=best_objective,
        stationarity_gap=gap,
        trajectory=TrajectorySummary(
            iterations=cfg.iterations,
            restarts=cfg.restarts,
            first_objective=first_objective,
            best_objective=best_objective,
            final_objective=best_objective,
            max_iterate_norm=max_norm,
            restart_objectives=tuple(restart_objectives),
        ),
    )


def stationarity_gap(
    dataset: Dataset,
    loss: SurrogateLoss,
    w,
    gamma: float,
    probe_step: float = 1e-6,
) -> float:
    """Projected-gradient displacement ``||w - P(w - s g)|| / s``.

    Zero iff w is first-order stationary for the ball-constrained
    problem, up to the subgradient selection at hinge kinks.  In the
    interior this equals the gradient norm.
    """
    if probe_step <= 0:
        raise InvalidInputError(f"probe_step must be positive, got {probe_step}")
    w = np.asarray(w, dtype=np.float64)
    grad = mean_gradient(loss, w, dataset)
    moved = project_to_ball(w - probe_step * grad, 1.0 / gamma)
    return float(np.linalg.norm(w - moved) / probe_step)


def grad_fd_check(loss: SurrogateLoss, w, point: LabeledPoint, h: float = 1e-5) -> float:
    """Max deviation of the analytic gradient from central finite differences.

    Intended for the smooth logistic loss; the hinge is non-smooth at
    margin 1 and differences straddling the kink are meaningless there.
    """
    if not (1e-7 <= h <= 1e-3):
        raise InvalidInputError(f"h must lie in [1e-7, 1e-3], got {h}")
    w = np.asarray(w, dtype=np.float64)
    analytic = loss_grad(loss, w, point)
    worst = 0.0
    for j in range(w.shape[0]):
        bump = np.zeros_like(w)
        bump[j] = h
        numeric = (
            loss_value(loss, w + bump, point) - loss_value(loss, w - bump, point)
        ) / (2.0 * h)
        worst = max(worst, abs(numeric - analytic[j]))
    return worst
