"""Experiment harness: parameter-sweep grids and machine-readable results.

run_grid generates one problem per (kappa, rnorm) cell, runs every requested
strategy at every precision pair, evaluates the condition predicates, and
returns records that emit_csv serializes one file per precision pair with a
pinned header.  Everything is a pure function of the spec (base seed
included), so reruns are byte-identical.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import probgen
from .densela import RankDeficientError, qr_factor
from .krylov import build_sketch_preconditioner
from .precision import DOUBLE_SINGLE, EXTENDED_DOUBLE, PrecisionPair, round_to_working
from .predict import ConditionReport, evaluate_conditions
from .probgen import LsProblem, OracleDivergenceError, derive_seed
from .refine import (DirectQr, Krylov, RefinementTrace, RefinerConfig, Status,
                     initial_solution_direct, initial_solution_iterative,
                     refine_augmented, refine_combined, refine_ls,
                     refine_semi_normal, run_driver)

CSV_HEADER = ("kappa,rnorm,strategy,solver,u,ur,status,iters,"
              "x_relerr,r_relerr,inner_iters,"
              "pred_ls,pred_sn_conv,pred_sn_lim,pred_aug_x,pred_aug_r")

TRACE_HEADER = "iter,x_relerr,r_relerr,dx_norm,inner_iters"

DIRECT_STRATEGIES = ("ls", "semi_normal", "augmented")
ITERATIVE_STRATEGIES = ("ls", "augmented", "combined")

DEFAULT_KAPPAS = tuple(10.0 ** k for k in range(1, 9))
DEFAULT_RNORMS = tuple(10.0 ** (-k) for k in range(0, 8))

WORKERS_ENV = "LSREFINE_WORKERS"


@dataclass(frozen=True)
class ExperimentSpec:
    m: int = 1000
    n: int = 10
    kappa_list: tuple = DEFAULT_KAPPAS
    rnorm_list: tuple = DEFAULT_RNORMS
    precision_pairs: tuple = (DOUBLE_SINGLE, EXTENDED_DOUBLE)
    strategies: tuple | None = None
    solver: str = "direct"  # or "iterative"
    alpha: float | str = "unit"
    base_seed: int = 0
    output_dir: str = "."

    def __post_init__(self):
        if self.m < self.n:
            raise ValueError("need m >= n")
        if not self.kappa_list or not self.rnorm_list or not self.precision_pairs:
            raise ValueError("kappa_list, rnorm_list and precision_pairs must be nonempty")
        if self.solver not in ("direct", "iterative"):
            raise ValueError("solver must be 'direct' or 'iterative'")

    def effective_strategies(self) -> tuple:
        if self.strategies:
            return tuple(self.strategies)
        return DIRECT_STRATEGIES if self.solver == "direct" else ITERATIVE_STRATEGIES


@dataclass(frozen=True)
class CellRecord:
    kappa: float
    rnorm: float
    strategy: str
    solver: str
    precisions: PrecisionPair
    status: str
    iters: int
    final_x_relerr: float
    final_r_relerr: float
    cumulative_inner_iters: int
    condition_report: ConditionReport | None


@dataclass
class GridResult:
    spec: ExperimentSpec
    records: list[CellRecord] = field(default_factory=list)


def _refiner_config(spec: ExperimentSpec) -> RefinerConfig:
    solver = DirectQr() if spec.solver == "direct" else Krylov()
    return RefinerConfig(alpha=spec.alpha, solver=solver)


def _failure_records(spec: ExperimentSpec, kappa: float, rnorm: float) -> list[CellRecord]:
    records = []
    for pair in spec.precision_pairs:
        for strategy in spec.effective_strategies():
            records.append(CellRecord(
                kappa=kappa, rnorm=rnorm, strategy=strategy, solver=spec.solver,
                precisions=pair, status=Status.SOLVER_FAILURE.value, iters=0,
                final_x_relerr=float("nan"), final_r_relerr=float("nan"),
                cumulative_inner_iters=0, condition_report=None))
    return records


def run_cell(spec: ExperimentSpec, ki: int, ri: int) -> list[CellRecord]:
    """All records for one grid cell; deterministic given the spec."""
    kappa = spec.kappa_list[ki]
    rnorm = spec.rnorm_list[ri]
    seed = derive_seed(spec.base_seed, ki, ri)
    try:
        problem = probgen.generate(spec.m, spec.n, kappa, rnorm, seed)
    except OracleDivergenceError:
        return _failure_records(spec, kappa, rnorm)
    config = _refiner_config(spec)
    records = []
    for pair in spec.precision_pairs:
        report = evaluate_conditions(problem.kappa, problem.r_norm,
                                     problem.x_norm, problem.a_norm, pair)
        records.extend(_run_strategies(problem, spec, config, pair, report))
    return records


def _run_strategies(problem: LsProblem, spec: ExperimentSpec,
                    config: RefinerConfig, pair: PrecisionPair,
                    report: ConditionReport) -> list[CellRecord]:
    records = []
    direct = spec.solver == "direct"
    a_w = round_to_working(problem.a, pair)
    qr = None
    precond = None
    x0 = None
    failure = None
    try:
        if direct:
            qr = qr_factor(a_w, pair.working)
            x0 = initial_solution_direct(problem, qr)
        else:
            precond = build_sketch_preconditioner(
                a_w, derive_seed(problem.seed, probgen.STREAM_SKETCH), pair)
            x0 = initial_solution_iterative(problem, pair, precond)
    except RankDeficientError:
        failure = Status.SOLVER_FAILURE.value
    for strategy in spec.effective_strategies():
        if failure is not None:
            records.append(CellRecord(
                kappa=problem.kappa_target, rnorm=problem.rnorm_target,
                strategy=strategy, solver=spec.solver, precisions=pair,
                status=failure, iters=0, final_x_relerr=float("nan"),
                final_r_relerr=float("nan"), cumulative_inner_iters=0,
                condition_report=report))
            continue
        trace = _run_one(problem, strategy, config, pair, qr, precond, x0)
        records.append(CellRecord(
            kappa=problem.kappa_target, rnorm=problem.rnorm_target,
            strategy=strategy, solver=spec.solver, precisions=pair,
            status=trace.status.value, iters=trace.iters,
            final_x_relerr=trace.final_x_relerr,
            final_r_relerr=trace.final_r_relerr,
            cumulative_inner_iters=trace.cumulative_inner_iters,
            condition_report=report))
    return records


def _run_one(problem, strategy, config, pair, qr, precond, x0) -> RefinementTrace:
    if strategy == "ls":
        return refine_ls(problem, qr, config, pair, x0, precond=precond)
    if strategy == "semi_normal":
        return refine_semi_normal(problem, qr.r, config, pair, x0)
    if strategy == "augmented":
        return refine_augmented(problem, qr, config, pair, x0, precond=precond)
    if strategy == "combined":
        krylov_cfg = config.solver.config if isinstance(config.solver, Krylov) else None
        return refine_combined(problem, krylov_cfg, config, pair, x0, precond=precond)
    raise ValueError(f"unknown strategy {strategy!r}")


def _cell_worker(args):
    spec, ki, ri = args
    return (ki, ri), run_cell(spec, ki, ri)


def run_grid(spec: ExperimentSpec) -> GridResult:
    """Run every cell of the grid; per-cell failures never abort the sweep."""
    cells = [(spec, ki, ri)
             for ki in range(len(spec.kappa_list))
             for ri in range(len(spec.rnorm_list))]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    results = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for key, records in pool.map(_cell_worker, cells):
                results[key] = records
    else:
        for args in cells:
            key, records = _cell_worker(args)
            results[key] = records
    records = [rec for key in sorted(results) for rec in results[key]]
    records.sort(key=lambda r: (r.precisions.tag(), r.kappa, r.rnorm, r.strategy))
    return GridResult(spec=spec, records=records)


def _fmt(v) -> str:
    return repr(float(v))


def _bool(v) -> str:
    return "true" if v else "false"


def _record_row(rec: CellRecord) -> str:
    rep = rec.condition_report
    if rep is None:
        preds = ["false"] * 5
    else:
        preds = [_bool(rep.holds(name)) for name in
                 ("ls_recognition", "sn_convergence", "sn_limiting",
                  "aug_x_convergence", "aug_r_convergence")]
    fields = [
        _fmt(rec.kappa), _fmt(rec.rnorm), rec.strategy, rec.solver,
        _fmt(rec.precisions.u), _fmt(rec.precisions.u_r), rec.status,
        str(rec.iters), _fmt(rec.final_x_relerr), _fmt(rec.final_r_relerr),
        str(rec.cumulative_inner_iters),
    ] + preds
    return ",".join(fields)


def emit_csv(result: GridResult, path) -> list[Path]:
    """Write one CSV per precision pair present; header-only when empty.

    With a single pair (or no records) the file lands exactly at ``path``;
    with several, each file gets the pair tag appended to the stem.
    """
    path = Path(path)
    pairs = []
    for rec in result.records:
        if rec.precisions not in pairs:
            pairs.append(rec.precisions)
    written = []
    if len(pairs) <= 1:
        targets = {pairs[0] if pairs else None: path}
    else:
        targets = {pair: path.with_name(f"{path.stem}_{pair.tag()}{path.suffix}")
                   for pair in pairs}
    try:
        for pair, target in targets.items():
            lines = [CSV_HEADER]
            for rec in result.records:
                if pair is None or rec.precisions == pair:
                    lines.append(_record_row(rec))
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text("\n".join(lines) + "\n", encoding="utf-8")
            written.append(target)
    except OSError as err:
        raise OSError(f"failed writing grid CSV to {path}: {err}") from err
    return written


def emit_trace(trace: RefinementTrace, path) -> Path:
    """Per-iteration CSV for convergence-curve plots."""
    path = Path(path)
    lines = [TRACE_HEADER]
    for entry in trace.iterations:
        lines.append(",".join([
            str(entry.index), _fmt(entry.x_relerr), _fmt(entry.r_relerr),
            _fmt(entry.dx_norm), str(entry.inner_iters or 0)]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as err:
        raise OSError(f"failed writing trace CSV to {path}: {err}") from err
    return path


def emit_plot_script(csv_paths: list[Path], path) -> Path:
    """Companion gnuplot script rendering iteration-count heatmaps."""
    path = Path(path)
    lines = [
        "# gnuplot script consuming the grid CSVs written next to it",
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'kappa(A)'",
        "set ylabel '||r*||'",
        "set cblabel 'refinement iterations'",
        "set view map",
    ]
    for csv_path in csv_paths:
        for strategy in ("ls", "semi_normal", "augmented", "combined"):
            lines.append(
                f"# strategy {strategy} from {csv_path.name}")
            lines.append(
                f"plot '{csv_path.name}' using 1:2:(strcol(3) eq '{strategy}' ? $8 : NaN) "
                f"with points pt 5 ps 3 palette title '{strategy}'")
            lines.append("pause -1")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def singleton_spec(kappa: float, rnorm: float, **kwargs) -> ExperimentSpec:
    """One-cell spec, handy for traces and tests."""
    return ExperimentSpec(kappa_list=(kappa,), rnorm_list=(rnorm,), **kwargs)


def trace_cell(spec: ExperimentSpec, strategy: str,
               pair: PrecisionPair) -> RefinementTrace:
    """Run a single (cell, strategy) combination and return the full trace."""
    seed = derive_seed(spec.base_seed, 0, 0)
    problem = probgen.generate(spec.m, spec.n, spec.kappa_list[0],
                               spec.rnorm_list[0], seed)
    config = _refiner_config(spec)
    return run_driver(problem, strategy, config, pair)
