"""Two-precision iterative refinement strategies and the common driver.

Four ways to compute the correction: a least-squares solve on the residual
(ls), the semi-normal equations R^T R dx = A^T r (semi_normal), the
saddle-point system refining r and x jointly (augmented), and the
decomposition of the saddle-point correction into three independent
least-squares solves plus a null-space projection (combined).  Each is
parametric over the precision pair and, where meaningful, over a direct QR
or Krylov correction solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .densela import (NoConvergenceError, QrFactors, RankDeficientError,
                      SingularTriangularError, apply_q, apply_qt, qr_factor,
                      solve_augmented_qr, tri_solve)
from .krylov import (KrylovConfig, Side, SketchPreconditioner,
                     build_sketch_preconditioner, default_gmres_config,
                     default_lsqr_config, gmres_augmented, lsqr)
from .precision import (PrecisionPair, residual_matvec, round_to_working,
                        saddle_residuals, transpose_residual_matvec)
from .probgen import STREAM_SKETCH, LsProblem, derive_seed

STRATEGIES = ("ls", "semi_normal", "augmented", "combined")

_SOLVER_ERRORS = (RankDeficientError, SingularTriangularError, NoConvergenceError)


class Status(Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    DIVERGED = "diverged"
    SOLVER_FAILURE = "solver_failure"


@dataclass(frozen=True)
class DirectQr:
    pass


@dataclass(frozen=True)
class Krylov:
    config: KrylovConfig | None = None


@dataclass(frozen=True)
class RefinerConfig:
    max_iters: int = 30
    tau_multiplier: float = 8.0
    alpha: float | str = "unit"
    solver: DirectQr | Krylov = field(default_factory=DirectQr)
    stop_rule: str = "true_error"  # or "update_norm"
    divergence_factor: float | None = None
    post_converge_iters: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tau_multiplier <= 0:
            raise ValueError("tau_multiplier must be positive")
        if isinstance(self.alpha, str):
            if self.alpha not in ("unit", "optimal"):
                raise ValueError("alpha must be 'unit', 'optimal', or a positive number")
        elif self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.stop_rule not in ("true_error", "update_norm"):
            raise ValueError("stop_rule must be 'true_error' or 'update_norm'")


@dataclass(frozen=True)
class IterationEntry:
    index: int
    x_relerr: float
    r_relerr: float
    dx_norm: float
    dr_norm: float | None = None
    inner_iters: int | None = None


@dataclass
class RefinementTrace:
    strategy: str
    precisions: PrecisionPair
    iterations: list[IterationEntry]
    status: Status

    @property
    def iters(self) -> int:
        return self.iterations[-1].index if self.iterations else 0

    @property
    def final_x_relerr(self) -> float:
        return self.iterations[-1].x_relerr if self.iterations else math.nan

    @property
    def final_r_relerr(self) -> float:
        return self.iterations[-1].r_relerr if self.iterations else math.nan

    @property
    def cumulative_inner_iters(self) -> int:
        return sum(e.inner_iters or 0 for e in self.iterations)


def tolerance(config: RefinerConfig, p: PrecisionPair) -> float:
    """Convergence threshold tau = tau_multiplier * u."""
    return config.tau_multiplier * p.u


def scale_alpha(sigma_min: float, mode) -> float:
    """Scaling factor for the saddle-point system: optimal 2^-1/2 sigma_min,
    unit 1, or a given positive value."""
    if isinstance(mode, str):
        if mode == "unit":
            return 1.0
        if mode == "optimal":
            if sigma_min <= 0:
                raise ValueError("sigma_min must be positive for optimal scaling")
            return float(2.0 ** -0.5 * sigma_min)
        raise ValueError(f"unknown scaling mode {mode!r}")
    alpha = float(mode)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return alpha


def _require_squared_gap(p: PrecisionPair, strategy: str):
    if not p.supports_squared_gap():
        raise ValueError(f"{strategy} requires u_r <= u^2 "
                         f"(got u_r={p.u_r:.3e}, u={p.u:.3e})")


@dataclass
class _StepInfo:
    dx_norm: float
    dr_norm: float | None = None
    inner_iters: int | None = None


class _LsStepper:
    """Correction from min ||r_i - A dx||, solved at working precision."""

    reports_dr = False

    def __init__(self, problem, config, p, qr=None, precond=None):
        self.problem = problem
        self.p = p
        self.qr = qr
        self.a_w = round_to_working(problem.a, p)
        self.direct = isinstance(config.solver, DirectQr)
        self.reports_inner = not self.direct
        if self.direct:
            if qr is None:
                raise ValueError("direct ls refinement needs QR factors")
            self.lsqr_cfg = None
            self.precond = None
        else:
            self.lsqr_cfg = config.solver.config or default_lsqr_config(p, problem.n)
            self.precond = precond

    def set_x0(self, x0):
        self.x = np.array(x0, dtype=self.p.working_dtype)
        self.r = residual_matvec(self.problem.a, self.x, self.problem.b, self.p)

    def current(self):
        return self.x, self.r

    def step(self) -> _StepInfo:
        r_w = round_to_working(self.r, self.p)
        inner = None
        if self.direct:
            k = apply_qt(self.qr, r_w)
            dx = tri_solve(self.qr.r, k[: self.qr.n])
        else:
            res = lsqr(self.a_w, r_w, self.lsqr_cfg, self.precond, Side.RIGHT, self.p)
            dx, inner = res.x, res.iters
        self.x = self.x + dx
        self.r = residual_matvec(self.problem.a, self.x, self.problem.b, self.p)
        return _StepInfo(dx_norm=float(np.linalg.norm(dx)), inner_iters=inner)


class _SemiNormalStepper:
    """Correction from R^T R dx = A^T r_i; A^T r_i at residual precision."""

    reports_dr = False
    reports_inner = False

    def __init__(self, problem, config, p, r_tri):
        if not isinstance(config.solver, DirectQr):
            raise ValueError("semi-normal refinement uses the triangular factor "
                             "directly; no iterative variant is defined")
        self.problem = problem
        self.p = p
        self.r_tri = np.asarray(r_tri, dtype=p.working_dtype)

    def set_x0(self, x0):
        self.x = np.array(x0, dtype=self.p.working_dtype)
        self.r = residual_matvec(self.problem.a, self.x, self.problem.b, self.p)

    def current(self):
        return self.x, self.r

    def step(self) -> _StepInfo:
        t = transpose_residual_matvec(self.problem.a, self.r, self.p)
        t_w = round_to_working(t, self.p)
        y = tri_solve(self.r_tri, t_w, transposed=True)
        dx = tri_solve(self.r_tri, y)
        self.x = self.x + dx
        self.r = residual_matvec(self.problem.a, self.x, self.problem.b, self.p)
        return _StepInfo(dx_norm=float(np.linalg.norm(dx)))


class _AugmentedStepper:
    """Joint correction of (r, x) through the saddle-point system."""

    reports_dr = True

    def __init__(self, problem, config, p, qr=None, precond=None, alpha=1.0):
        self.problem = problem
        self.p = p
        self.qr = qr
        self.alpha = alpha
        self.a_w = round_to_working(problem.a, p)
        self.b_w = round_to_working(problem.b, p)
        self.direct = isinstance(config.solver, DirectQr)
        self.reports_inner = not self.direct
        if self.direct:
            if qr is None:
                raise ValueError("direct augmented refinement needs QR factors")
            self.gmres_cfg = None
            self.precond = None
        else:
            if precond is None:
                raise ValueError("iterative augmented refinement needs a sketch preconditioner")
            self.gmres_cfg = config.solver.config or default_gmres_config(p)
            self.precond = precond

    def set_x0(self, x0):
        dtype = self.p.working_dtype
        self.x = np.array(x0, dtype=dtype)
        self.r = self.b_w - self.a_w @ self.x

    def current(self):
        return self.x, self.r

    def _solve_direct(self, f_w, g_w):
        if self.alpha == 1.0:
            sol = solve_augmented_qr(f_w, g_w, self.qr)
            return sol.delta_r, sol.delta_x
        # scaled system: h picks up the alpha round trip on the g channel
        dtype = self.p.working_dtype
        alpha = dtype(self.alpha)
        n = self.qr.n
        h = alpha * tri_solve(self.qr.r, g_w / alpha, transposed=True)
        k = apply_qt(self.qr, f_w)
        delta_r = apply_q(self.qr, np.concatenate([h, k[n:]]))
        delta_x = tri_solve(self.qr.r, k[:n] - h)
        return delta_r, delta_x

    def step(self) -> _StepInfo:
        f, g = saddle_residuals(self.problem.a, self.problem.b, self.r, self.x, self.p)
        f_w = round_to_working(f, self.p)
        g_w = round_to_working(g, self.p)
        inner = None
        if self.direct:
            dr, dx = self._solve_direct(f_w, g_w)
        else:
            res = gmres_augmented(self.a_w, f_w, g_w, self.alpha,
                                  self.gmres_cfg, self.p, self.precond)
            dr, dx, inner = res.delta_r, res.delta_x, res.iters
        self.r = self.r + dr
        self.x = self.x + dx
        return _StepInfo(dx_norm=float(np.linalg.norm(dx)),
                         dr_norm=float(np.linalg.norm(dr)),
                         inner_iters=inner)


class _CombinedStepper:
    """Saddle-point correction assembled from three least-squares solves."""

    reports_dr = True
    reports_inner = True

    def __init__(self, problem, config, p, krylov_cfg=None, precond=None):
        self.problem = problem
        self.p = p
        self.a_w = round_to_working(problem.a, p)
        self.at_w = self.a_w.T.copy()
        self.b_w = round_to_working(problem.b, p)
        self.cfg = krylov_cfg or default_lsqr_config(p, problem.n)
        self.precond = precond

    def set_x0(self, x0):
        dtype = self.p.working_dtype
        self.x = np.array(x0, dtype=dtype)
        self.r = self.b_w - self.a_w @ self.x

    def current(self):
        return self.x, self.r

    def step(self) -> _StepInfo:
        f, g = saddle_residuals(self.problem.a, self.problem.b, self.r, self.x, self.p)
        f_w = round_to_working(f, self.p)
        g_w = round_to_working(g, self.p)
        s1 = lsqr(self.a_w, f_w, self.cfg, self.precond, Side.RIGHT, self.p)
        s2 = lsqr(self.a_w, self.r, self.cfg, self.precond, Side.RIGHT, self.p)
        s3 = lsqr(self.at_w, g_w, self.cfg, self.precond, Side.LEFT, self.p)
        dx1, dx2, dr1 = s1.x, s2.x, s3.x
        dr2 = f_w - self.a_w @ dx1
        dr = dr1 + dr2
        dx = dx1 + dx2
        self.r = self.r + dr
        self.x = self.x + dx
        return _StepInfo(dx_norm=float(np.linalg.norm(dx)),
                         dr_norm=float(np.linalg.norm(dr)),
                         inner_iters=s1.iters + s2.iters + s3.iters)


def _drive(problem: LsProblem, stepper, strategy: str, config: RefinerConfig,
           p: PrecisionPair, x0) -> RefinementTrace:
    tau = tolerance(config, p)
    entries: list[IterationEntry] = []
    status = None
    try:
        stepper.set_x0(x0)
    except _SOLVER_ERRORS:
        return RefinementTrace(strategy, p, entries, Status.SOLVER_FAILURE)
    x, r_rep = stepper.current()
    xerr0 = problem.x_relerr(x)
    entries.append(IterationEntry(
        0, xerr0, problem.r_relerr(r_rep), 0.0,
        dr_norm=0.0 if stepper.reports_dr else None,
        inner_iters=0 if stepper.reports_inner else None))
    if config.stop_rule == "true_error" and xerr0 <= tau:
        status = Status.CONVERGED
    else:
        for i in range(1, config.max_iters + 1):
            try:
                info = stepper.step()
            except _SOLVER_ERRORS:
                status = Status.SOLVER_FAILURE
                break
            x, r_rep = stepper.current()
            xerr = problem.x_relerr(x)
            entries.append(IterationEntry(
                i, xerr, problem.r_relerr(r_rep), info.dx_norm,
                dr_norm=info.dr_norm, inner_iters=info.inner_iters))
            if config.stop_rule == "true_error":
                if xerr <= tau:
                    status = Status.CONVERGED
                    break
            else:
                xnorm = float(np.linalg.norm(x))
                if xnorm > 0 and info.dx_norm / xnorm <= tau:
                    status = Status.CONVERGED
                    break
            if config.divergence_factor is not None and xerr0 > 0 \
                    and xerr > config.divergence_factor * xerr0:
                status = Status.DIVERGED
                break
        if status is None:
            status = Status.MAX_ITERATIONS
    if status is Status.CONVERGED and config.post_converge_iters > 0:
        base = entries[-1].index
        for k in range(1, config.post_converge_iters + 1):
            try:
                info = stepper.step()
            except _SOLVER_ERRORS:
                break
            x, r_rep = stepper.current()
            entries.append(IterationEntry(
                base + k, problem.x_relerr(x), problem.r_relerr(r_rep),
                info.dx_norm, dr_norm=info.dr_norm, inner_iters=info.inner_iters))
    return RefinementTrace(strategy, p, entries, status)


def _default_precond(problem: LsProblem, p: PrecisionPair) -> SketchPreconditioner:
    a_w = round_to_working(problem.a, p)
    return build_sketch_preconditioner(a_w, derive_seed(problem.seed, STREAM_SKETCH), p)


def refine_ls(problem: LsProblem, qr: QrFactors | None, config: RefinerConfig,
              p: PrecisionPair, x0, precond: SketchPreconditioner | None = None
              ) -> RefinementTrace:
    _require_squared_gap(p, "ls refinement")
    if not isinstance(config.solver, DirectQr) and precond is None:
        precond = _default_precond(problem, p)
    stepper = _LsStepper(problem, config, p, qr=qr, precond=precond)
    return _drive(problem, stepper, "ls", config, p, x0)


def refine_semi_normal(problem: LsProblem, r_tri, config: RefinerConfig,
                       p: PrecisionPair, x0) -> RefinementTrace:
    _require_squared_gap(p, "semi-normal refinement")
    stepper = _SemiNormalStepper(problem, config, p, r_tri)
    return _drive(problem, stepper, "semi_normal", config, p, x0)


def refine_augmented(problem: LsProblem, qr: QrFactors | None, config: RefinerConfig,
                     p: PrecisionPair, x0,
                     precond: SketchPreconditioner | None = None) -> RefinementTrace:
    _require_squared_gap(p, "augmented refinement")
    alpha = scale_alpha(float(problem.sigma[-1]), config.alpha)
    if not isinstance(config.solver, DirectQr) and precond is None:
        precond = _default_precond(problem, p)
    stepper = _AugmentedStepper(problem, config, p, qr=qr, precond=precond, alpha=alpha)
    return _drive(problem, stepper, "augmented", config, p, x0)


def refine_combined(problem: LsProblem, solver: KrylovConfig | None,
                    config: RefinerConfig, p: PrecisionPair, x0,
                    precond: SketchPreconditioner | None = None) -> RefinementTrace:
    # weaker precondition than the other strategies: u_r <= u, which the
    # PrecisionPair type already guarantees
    if precond is None:
        precond = _default_precond(problem, p)
    stepper = _CombinedStepper(problem, config, p, krylov_cfg=solver, precond=precond)
    return _drive(problem, stepper, "combined", config, p, x0)


def initial_solution_direct(problem: LsProblem, qr: QrFactors) -> np.ndarray:
    """x0 = R^-1 (Q1^T b) at the factor precision."""
    p_dtype = qr.r.dtype
    b_w = np.asarray(problem.b, dtype=p_dtype)
    return tri_solve(qr.r, apply_qt(qr, b_w)[: qr.n])


def initial_solution_iterative(problem: LsProblem, p: PrecisionPair,
                               precond: SketchPreconditioner,
                               cfg: KrylovConfig | None = None) -> np.ndarray:
    """x0 by preconditioned least-squares solve of min ||b - A x||."""
    a_w = round_to_working(problem.a, p)
    b_w = round_to_working(problem.b, p)
    cfg = cfg or default_lsqr_config(p, problem.n)
    return lsqr(a_w, b_w, cfg, precond, Side.RIGHT, p).x


def run_driver(problem: LsProblem, strategy: str, config: RefinerConfig,
               p: PrecisionPair, x0=None,
               precond: SketchPreconditioner | None = None) -> RefinementTrace:
    """Dispatch one refinement run, computing default factors and x0."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    direct = isinstance(config.solver, DirectQr)
    if strategy == "combined" and direct:
        raise ValueError("combined refinement requires a Krylov solver")
    if strategy == "semi_normal" and not direct:
        raise ValueError("semi-normal refinement is direct only")
    if strategy != "combined":
        _require_squared_gap(p, strategy)
    a_w = round_to_working(problem.a, p)
    qr = None
    if direct:
        try:
            qr = qr_factor(a_w, p.working)
        except RankDeficientError:
            return RefinementTrace(strategy, p, [], Status.SOLVER_FAILURE)
    if not direct and precond is None:
        precond = _default_precond(problem, p)
    if x0 is None:
        x0 = initial_solution_direct(problem, qr) if direct \
            else initial_solution_iterative(problem, p, precond)
    if strategy == "ls":
        return refine_ls(problem, qr, config, p, x0, precond=precond)
    if strategy == "semi_normal":
        return refine_semi_normal(problem, qr.r, config, p, x0)
    if strategy == "augmented":
        return refine_augmented(problem, qr, config, p, x0, precond=precond)
    krylov_cfg = config.solver.config if isinstance(config.solver, Krylov) else None
    return refine_combined(problem, krylov_cfg, config, p, x0, precond=precond)
