"""Gauss-Newton iteration on encoded linear problems, with baselines.

The iteration solves ``F(psi(p)) = y`` for the network coefficients by

    p_{k+1} = p_k - pinv(J_k) (F(psi(p_k)) - y),

where ``J_k`` stacks the forward-mapped derivative columns and ``pinv`` is
applied through the weighted QR factors.  The loop is undamped on purpose:
divergence outside the convergence radius is an expected, reportable
outcome, and rank deficiency halts the run with a status instead of
silently switching to minimum-norm steps.

A fixed-step gradient descent on the squared misfit serves as the baseline,
and the two Tikhonov objectives (state-space prior and parameter-space
penalty) are provided as value/gradient pairs.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .activations import Activation, SMOOTH_C2
from .exceptions import (
    ConfigError,
    InsufficientDataError,
    NumericError,
    RankDeficiencyError,
    ShapeError,
)
from .grids import Grid, GridFunction, norm
from .network import DEFAULT_PARAM_BOX, Params, eval_psi, jacobian
from .operators import LinearOperator
from .pseudoinverse import ConvergenceConstants, pinv_apply, weighted_qr

MODE_GAUSS_NEWTON = "gauss_newton"
MODE_GRADIENT_DESCENT = "gradient_descent"

STATUS_CONVERGED_RESIDUAL = "converged_residual"
STATUS_CONVERGED_STEP = "converged_step"
STATUS_MAX_ITERS = "max_iters"
STATUS_RANK_DEFICIENT = "rank_deficient"

VARIANT_STATE_SPACE = "state_space"
VARIANT_PARAMETER_SPACE = "parameter_space"

TRACE_CSV_COLUMNS = ("iter", "residual", "step_norm", "param_error", "rank", "status")


@dataclass(frozen=True)
class SolveConfig:
    """Everything one solve run needs; deterministic given the seed."""

    activation: Activation
    grid: Grid
    forward: LinearOperator
    initial: Params
    data: GridFunction
    max_iters: int = 25
    tol_residual: float = 1e-12
    tol_step: float = 1e-13
    rank_tol: float = 1e-10
    mode: str = MODE_GAUSS_NEWTON
    step_size: float = 1e-2
    seed: int = 0
    param_box: tuple = DEFAULT_PARAM_BOX

    def __post_init__(self):
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("tol_residual", "tol_step", "rank_tol", "step_size"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.mode not in (MODE_GAUSS_NEWTON, MODE_GRADIENT_DESCENT):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.activation.smoothness != SMOOTH_C2:
            raise ConfigError(
                f"solver requires a twice-differentiable activation, got "
                f"{self.activation.descriptor!r}"
            )
        if self.initial.input_dim != self.grid.dim:
            raise ConfigError("initial params and grid disagree on dimension")
        if self.data.grid != self.forward.out_grid:
            raise ConfigError("data does not live on the operator's range grid")


@dataclass
class IterationTrace:
    """Per-iteration record of one solve run.

    ``residuals`` and ``param_errors`` have one entry per visited iterate
    (``iterations + 1`` of them); ``step_norms`` one per completed step;
    ``ranks`` one per Gauss-Newton step attempt.  ``timestamps`` are
    wall-clock seconds since the start of the run and are deliberately not
    serialized, so output files are bitwise reproducible.
    """

    residuals: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    param_errors: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    timestamps: list = field(default_factory=list)
    boundary_events: list = field(default_factory=list)
    status: str = ""
    rank_deficit: int = 0
    final_params: Params | None = None

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    def rows(self):
        """Rows matching ``TRACE_CSV_COLUMNS``; missing fields are empty."""
        last = len(self.residuals) - 1
        for k, res in enumerate(self.residuals):
            err = self.param_errors[k]
            yield (
                str(k),
                repr(res),
                repr(self.step_norms[k]) if k < len(self.step_norms) else "",
                "" if math.isnan(err) else repr(err),
                str(self.ranks[k]) if k < len(self.ranks) else "",
                self.status if k == last else "",
            )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_CSV_COLUMNS)
            writer.writerows(self.rows())


@dataclass
class StepDiagnostics:
    residual_norm: float
    step_norm: float
    rank: int
    clamped: bool


def _forward_map(p: Params, cfg: SolveConfig) -> GridFunction:
    return cfg.forward.apply(eval_psi(p, cfg.activation, cfg.grid))


def _forward_jacobian_columns(p: Params, cfg: SolveConfig) -> list:
    jac = jacobian(p, cfg.activation, cfg.grid)
    return [cfg.forward.apply(col) for col in jac.columns]


def _clamp_to_box(flat: np.ndarray, box) -> tuple[np.ndarray, bool]:
    lo, hi = box
    clipped = np.clip(flat, lo, hi)
    return clipped, bool(np.any(clipped != flat))


def gauss_newton_step(p: Params, cfg: SolveConfig) -> tuple[Params, StepDiagnostics]:
    """One undamped Gauss-Newton update.

    Raises :class:`RankDeficiencyError` when the forward-mapped Jacobian
    loses full column rank under ``cfg.rank_tol`` and :class:`NumericError`
    if the update produces non-finite values.
    """
    residual = _forward_map(p, cfg) - cfg.data
    res_norm = norm(residual)
    factors = weighted_qr(_forward_jacobian_columns(p, cfg), cfg.rank_tol)
    if factors.rank < p.n_star:
        raise RankDeficiencyError(
            f"Jacobian rank {factors.rank} < {p.n_star}",
            deficit=p.n_star - factors.rank,
        )
    delta = pinv_apply(factors, residual)
    new_flat = p.flatten() - delta
    if not np.all(np.isfinite(new_flat)):
        raise NumericError("Gauss-Newton update produced non-finite parameters")
    new_flat, clamped = _clamp_to_box(new_flat, cfg.param_box)
    step_norm = float(np.linalg.norm(new_flat - p.flatten()))
    p_next = Params.from_flat(new_flat, p.units, p.input_dim)
    return p_next, StepDiagnostics(res_norm, step_norm, factors.rank, clamped)


def misfit_value_grad(p: Params, cfg: SolveConfig) -> tuple[float, np.ndarray]:
    """Value and gradient of ``0.5 * ||F psi(p) - y||^2``.

    The gradient is assembled through the weighted inner products: the
    Jacobian columns of the synthesis operator paired with the adjoint image
    of the residual.
    """
    residual = _forward_map(p, cfg) - cfg.data
    value = 0.5 * norm(residual) ** 2
    back = cfg.forward.adjoint(residual)
    jac = jacobian(p, cfg.activation, cfg.grid)
    grad = jac.matrix.T @ (cfg.grid.weights * back.values)
    return value, grad


def _gradient_update(p: Params, cfg: SolveConfig) -> tuple[Params, bool]:
    _, grad = misfit_value_grad(p, cfg)
    new_flat = p.flatten() - cfg.step_size * grad
    if not np.all(np.isfinite(new_flat)):
        raise NumericError("gradient update produced non-finite parameters")
    new_flat, clamped = _clamp_to_box(new_flat, cfg.param_box)
    return Params.from_flat(new_flat, p.units, p.input_dim), clamped


def gradient_step(p: Params, cfg: SolveConfig) -> Params:
    """One fixed-step descent update on the squared misfit."""
    return _gradient_update(p, cfg)[0]


def solve(cfg: SolveConfig, true_params: Params | None = None) -> IterationTrace:
    """Iterate until a residual, step, or iteration-count stopping rule fires.

    When ``true_params`` is given, the per-iterate parameter error is
    recorded (otherwise NaN).  Iterates leaving the parameter box are
    clamped to it and the iteration index is recorded as a boundary event;
    such runs are outside the convergence theory and the flag makes them
    auditable.
    """
    trace = IterationTrace()
    start = time.perf_counter()
    p = cfg.initial
    true_flat = true_params.flatten() if true_params is not None else None
    pending_step_stop = False
    k = 0
    while True:
        res_norm = norm(_forward_map(p, cfg) - cfg.data)
        trace.residuals.append(res_norm)
        trace.param_errors.append(
            float(np.linalg.norm(p.flatten() - true_flat))
            if true_flat is not None
            else math.nan
        )
        trace.timestamps.append(time.perf_counter() - start)
        if res_norm <= cfg.tol_residual:
            trace.status = STATUS_CONVERGED_RESIDUAL
            break
        if pending_step_stop:
            trace.status = STATUS_CONVERGED_STEP
            break
        if k >= cfg.max_iters:
            trace.status = STATUS_MAX_ITERS
            break

        if cfg.mode == MODE_GAUSS_NEWTON:
            try:
                p_next, diag = gauss_newton_step(p, cfg)
            except RankDeficiencyError as exc:
                trace.status = STATUS_RANK_DEFICIENT
                trace.rank_deficit = exc.deficit
                break
            trace.ranks.append(diag.rank)
            step_norm = diag.step_norm
            clamped = diag.clamped
        else:
            p_next, clamped = _gradient_update(p, cfg)
            step_norm = float(np.linalg.norm(p_next.flatten() - p.flatten()))
        if clamped:
            trace.boundary_events.append(k)
        trace.step_norms.append(step_norm)
        p = p_next
        k += 1
        if step_norm <= cfg.tol_step:
            pending_step_stop = True

    trace.final_params = p
    return trace


@dataclass(frozen=True)
class TikhonovObjective:
    """One of the two penalized least-squares functionals.

    ``state_space`` penalizes the synthesized image against a prior:
    ``||F psi(p) - y||^2 + lam * ||psi(p) - prior||^2``.  ``parameter_space``
    penalizes the coefficients directly with a weighted squared norm:
    ``||F psi(p) - y||^2 + lam * sum_i penalty_weights_i * p_i^2``.
    """

    lam: float
    variant: str
    prior: GridFunction | None = None
    penalty_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.variant not in (VARIANT_STATE_SPACE, VARIANT_PARAMETER_SPACE):
            raise ConfigError(f"unknown Tikhonov variant {self.variant!r}")
        if self.variant == VARIANT_STATE_SPACE and self.prior is None:
            raise ConfigError("state_space variant needs a prior grid function")
        if self.variant == VARIANT_PARAMETER_SPACE and self.penalty_weights is None:
            raise ConfigError("parameter_space variant needs penalty weights")


def tikhonov_value_grad(
    obj: TikhonovObjective, p: Params, cfg: SolveConfig
) -> tuple[float, np.ndarray]:
    """Value and flattened gradient of the chosen Tikhonov functional."""
    image = eval_psi(p, cfg.activation, cfg.grid)
    residual = cfg.forward.apply(image) - cfg.data
    misfit = norm(residual) ** 2
    back = cfg.forward.adjoint(residual)
    jac = jacobian(p, cfg.activation, cfg.grid)
    w = cfg.grid.weights
    if obj.variant == VARIANT_STATE_SPACE:
        if obj.prior.grid != cfg.grid:
            raise ShapeError("prior lives on a different grid")
        deviation = image - obj.prior
        value = misfit + obj.lam * norm(deviation) ** 2
        grad = 2.0 * (
            jac.matrix.T @ (w * (back.values + obj.lam * deviation.values))
        )
        return value, grad
    weights = np.asarray(obj.penalty_weights, dtype=float)
    flat = p.flatten()
    if weights.shape != flat.shape:
        raise ShapeError(
            f"penalty weights have shape {weights.shape}, expected {flat.shape}"
        )
    value = misfit + obj.lam * float(np.sum(weights * flat * flat))
    grad = 2.0 * (jac.matrix.T @ (w * back.values)) + 2.0 * obj.lam * weights * flat
    return value, grad


def radius_check(constants: ConvergenceConstants) -> tuple[float, bool]:
    """Contraction factor ``radius * bounds / 2`` and whether it is below one."""
    h = constants.contraction_factor
    return h, h < 1.0


def convergence_order(trace_or_errors) -> float:
    """Least-squares convergence order from consecutive parameter errors.

    Uses the longest run of consecutive errors strictly between 1e-14 and
    1e-1 (at least three of them) and fits the slope of ``log e_{k+1}``
    against ``log e_k``.

    Raises
    ------
    InsufficientDataError
        If no qualifying window of three or more errors exists.
    """
    if isinstance(trace_or_errors, IterationTrace):
        errors = np.asarray(trace_or_errors.param_errors, dtype=float)
    else:
        errors = np.asarray(list(trace_or_errors), dtype=float)
    qualifying = (errors > 1e-14) & (errors < 1e-1)
    best_start, best_len = 0, 0
    run_start = None
    for i, ok in enumerate(np.append(qualifying, False)):
        if ok and run_start is None:
            run_start = i
        elif not ok and run_start is not None:
            if i - run_start > best_len:
                best_start, best_len = run_start, i - run_start
            run_start = None
    if best_len < 3:
        raise InsufficientDataError(
            f"need >= 3 consecutive errors in (1e-14, 1e-1), found {best_len}"
        )
    window = errors[best_start : best_start + best_len]
    x = np.log(window[:-1])
    y = np.log(window[1:])
    return float(np.polyfit(x, y, 1)[0])
