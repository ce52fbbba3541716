"""l1-regularized adaptive SVM with squared hinge loss.

Minimizes ||w - w_hat||_1 + C * sum_i max(0, 1 - y_i w.x_i)^2 by cyclic coordinate
descent: each coordinate takes a one-dimensional Newton direction on a second order
model of the loss, followed by a backtracking line search with a sufficient decrease test.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .bing import LinearModel
from .imaging import FEATURE_DIM

# byte features are divided by 255 before entering the solver
FEATURE_SCALE = 1.0 / 255.0
# directions this many ulps of the coordinate or smaller are rounding noise, not progress
_NULL_STEP_ULPS = 4.0


@dataclass(frozen=True)
class TrainingSet:
    X: np.ndarray  # (N, d) float
    y: np.ndarray  # (N,) in {-1, +1}

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64)
        y = np.array(self.y, dtype=np.float64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X {X.shape} and y {y.shape} do not align")
        if X.shape[0] < 1:
            raise ValueError("training set is empty")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        if not (np.any(y > 0) and np.any(y < 0)):
            warnings.warn("training set contains a single class", stacklevel=3)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.X.shape[0]

    @classmethod
    def from_features(cls, feats, labels, scale: float = FEATURE_SCALE) -> "TrainingSet":
        return cls(np.asarray(feats, dtype=np.float64) * scale, labels)


@dataclass(frozen=True)
class AdaSvmConfig:
    C: float = 0.01
    beta: float = 0.5
    sigma: float = 0.01
    max_outer_iters: int = 1000
    tol: float = 1e-4
    max_backtracks: int = 40

    def __post_init__(self):
        if not self.C >= 0:
            raise ValueError(f"C must be >= 0, got {self.C}")
        if not 0 < self.beta < 1:
            raise ValueError(f"beta must be in (0, 1), got {self.beta}")
        if not 0 < self.sigma < 1:
            raise ValueError(f"sigma must be in (0, 1), got {self.sigma}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_outer_iters < 1 or self.max_backtracks < 0:
            raise ValueError("iteration limits must be positive")


@dataclass
class SolverState:
    """Current iterate with incrementally maintained margins b_i = 1 - y_i w.x_i."""

    w: np.ndarray
    w_hat: np.ndarray
    data: TrainingSet
    residuals: np.ndarray = field(init=False)

    def __post_init__(self):
        self.w = np.array(self.w, dtype=np.float64)
        self.w_hat = np.asarray(self.w_hat, dtype=np.float64)
        self.residuals = self.fresh_residuals()

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.residuals > 0)

    def fresh_residuals(self) -> np.ndarray:
        return 1.0 - self.data.y * (self.data.X @ self.w)

    def update(self, j: int, z: float, exact_value: Optional[float] = None) -> None:
        if z == 0.0:
            return
        self.w[j] = self.w[j] + z if exact_value is None else exact_value
        self.residuals -= z * self.data.y * self.data.X[:, j]


@dataclass
class NewtonStep:
    coord_index: int
    grad: float
    curv: float
    s_value: float
    direction: float
    step: float = 0.0
    backtracks: int = 0
    failed: bool = False


@dataclass
class FitResult:
    model: LinearModel
    objective: float
    n_iter: int
    converged: bool
    trace: list = field(default_factory=list)  # (outer_iter, objective, max_coord_delta)
    skipped_steps: int = 0


def objective(w, w_hat, data: TrainingSet, C: float) -> float:
    w = np.asarray(w, dtype=np.float64)
    margins = np.maximum(0.0, 1.0 - data.y * (data.X @ w))
    return float(np.abs(w - np.asarray(w_hat)).sum() + C * np.dot(margins, margins))


def loss_derivatives(state: SolverState, j: int, C: float) -> tuple[float, float]:
    """First derivative and generalized second derivative of the loss along coordinate j."""
    act = state.residuals > 0
    if not act.any():
        return 0.0, 0.0
    xj = state.data.X[act, j]
    grad = -2.0 * C * float(np.dot(state.data.y[act] * xj, state.residuals[act]))
    curv = 2.0 * C * float(np.dot(xj, xj))
    return grad, curv


def newton_direction(state: SolverState, j: int, C: float) -> NewtonStep:
    grad, curv = loss_derivatives(state, j, C)
    offset = state.w[j] - state.w_hat[j]
    s = grad - curv * offset
    if curv <= 0.0:
        # flat loss along j: the regularizer alone is minimized at w_hat_j
        d = -offset
    elif s <= -1.0:
        d = -(grad + 1.0) / curv
    elif s >= 1.0:
        d = -(grad - 1.0) / curv
    else:
        d = -offset
    return NewtonStep(j, grad, curv, s, d)


def subproblem_value(state: SolverState, j: int, z: float, C: float) -> float:
    """g_j(z): change in the objective from moving coordinate j by z."""
    offset = state.w[j] - state.w_hat[j]
    b = state.residuals
    moved = np.maximum(0.0, b - z * state.data.y * state.data.X[:, j])
    base = np.maximum(0.0, b)
    loss_delta = C * (np.dot(moved, moved) - np.dot(base, base))
    return abs(offset + z) - abs(offset) + float(loss_delta)


def line_search(state: SolverState, step: NewtonStep, cfg: AdaSvmConfig) -> float:
    """Backtrack z = beta^t d until the sufficient decrease condition holds.

    Sets step.step / step.backtracks; on exhaustion returns 0 and flags step.failed.
    """
    d = step.direction
    wj = state.w[step.coord_index]
    if abs(d) <= _NULL_STEP_ULPS * np.spacing(max(1.0, abs(wj))):
        step.step, step.backtracks = 0.0, 0
        return 0.0
    offset = wj - state.w_hat[step.coord_index]
    model_decrease = step.grad * d + abs(offset + d) - abs(offset)
    scale = 1.0
    for t in range(cfg.max_backtracks + 1):
        z = scale * d
        if subproblem_value(state, step.coord_index, z, cfg.C) <= cfg.sigma * scale * model_decrease:
            step.step, step.backtracks = z, t
            return z
        scale *= cfg.beta
    step.step, step.backtracks, step.failed = 0.0, cfg.max_backtracks, True
    return 0.0


StepCallback = Callable[[SolverState, NewtonStep], None]


def fit_detailed(data: TrainingSet, w_hat: LinearModel, cfg: AdaSvmConfig = AdaSvmConfig(),
                 on_step: Optional[StepCallback] = None, trace: bool = False) -> FitResult:
    w_hat_vec = np.asarray(w_hat.w, dtype=np.float64)
    if data.X.shape[1] != w_hat_vec.size:
        raise ValueError(f"features have {data.X.shape[1]} dims, model has {w_hat_vec.size}")
    state = SolverState(w_hat_vec.copy(), w_hat_vec, data)
    rows = []
    skipped = 0
    converged = False
    k = 0
    for k in range(1, cfg.max_outer_iters + 1):
        max_delta = 0.0
        for j in range(w_hat_vec.size):
            step = newton_direction(state, j, cfg.C)
            z = line_search(state, step, cfg)
            skipped += step.failed
            if z == 0.0:
                continue
            # the full pull-back step lands exactly on w_hat_j
            pull_back = step.curv <= 0.0 or -1.0 < step.s_value < 1.0
            snap = w_hat_vec[j] if (pull_back and step.backtracks == 0) else None
            state.update(j, z, snap)
            max_delta = max(max_delta, abs(z))
            if on_step is not None:
                on_step(state, step)
        if trace:
            rows.append((k, objective(state.w, w_hat_vec, data, cfg.C), max_delta))
        if max_delta < cfg.tol:
            converged = True
            break
    return FitResult(LinearModel(state.w), objective(state.w, w_hat_vec, data, cfg.C),
                     k, converged, rows, skipped)


def fit(data: TrainingSet, w_hat: LinearModel, cfg: AdaSvmConfig = AdaSvmConfig()) -> LinearModel:
    return fit_detailed(data, w_hat, cfg).model


def optimality_violation(w, w_hat, data: TrainingSet, C: float) -> np.ndarray:
    """Per-coordinate distance from the subgradient optimality conditions (0 at an optimum)."""
    w = np.asarray(w, dtype=np.float64)
    w_hat = np.asarray(w_hat, dtype=np.float64)
    b = 1.0 - data.y * (data.X @ w)
    act = b > 0
    grad = -2.0 * C * ((data.y[act] * b[act]) @ data.X[act])
    diff = w - w_hat
    return np.where(diff != 0, np.abs(grad + np.sign(diff)), np.maximum(np.abs(grad) - 1.0, 0.0))


def write_trace(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("outer_iter,objective,max_coord_delta\n")
        for k, obj, delta in rows:
            fh.write(f"{k},{float(obj)!r},{float(delta)!r}\n")


__all__ = [
    "AdaSvmConfig", "FitResult", "NewtonStep", "SolverState", "TrainingSet", "FEATURE_DIM",
    "fit", "fit_detailed", "line_search", "loss_derivatives", "newton_direction", "objective",
    "optimality_violation", "subproblem_value", "write_trace",
]
