"""Command-line interface.

Subcommands mirror the experiment families: ``grid`` sweeps a kappa x rnorm
grid and writes one CSV per precision pair, ``trace`` records per-iteration
convergence for one cell, ``predict`` evaluates the closed-form conditions
over a grid, and ``problem gen/dump`` manage the binary problem containers.
Flags can also be given in a plain ``key = value`` config file; explicit
flags override the file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import probgen
from .harness import (ExperimentSpec, emit_csv, emit_plot_script, emit_trace,
                      run_grid, trace_cell)
from .precision import PAIR_NAMES
from .predict import evaluate_conditions
from .problem_io import dump_problem_text, write_problem


def _parse_floats(text: str) -> tuple:
    return tuple(float(tok) for tok in text.split(",") if tok)


def _parse_pairs(text: str) -> tuple:
    pairs = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok not in PAIR_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown precision pair {tok!r}; choose from {sorted(PAIR_NAMES)}")
        pairs.append(PAIR_NAMES[tok])
    return tuple(pairs)


def _parse_alpha(text: str):
    if text in ("unit", "optimal"):
        return text
    return float(text)


def _read_config(path) -> dict:
    values = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


_CONFIG_PARSERS = {
    "m": int, "n": int, "seed": int,
    "kappa": _parse_floats, "rnorm": _parse_floats,
    "precisions": _parse_pairs, "alpha": _parse_alpha,
    "strategy": lambda s: tuple(tok for tok in s.split(",") if tok),
    "solver": str, "out": str, "plots": lambda s: s.lower() in ("1", "true", "yes"),
}


def _apply_config(parser: argparse.ArgumentParser, subparsers: list,
                  argv: list[str]) -> argparse.Namespace:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if known.config:
        raw = _read_config(known.config)
        defaults = {}
        for key, val in raw.items():
            if key not in _CONFIG_PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            defaults[key] = _CONFIG_PARSERS[key](val)
        # subparsers parse into a fresh namespace, so each needs the defaults
        for sub in subparsers:
            sub.set_defaults(**{k: v for k, v in defaults.items()
                                if any(a.dest == k for a in sub._actions)})
    return parser.parse_args(argv)


def _add_common(parser):
    parser.add_argument("--config", help="key = value file mirroring the flags")
    parser.add_argument("--m", type=int, default=1000)
    parser.add_argument("--n", type=int, default=10)
    parser.add_argument("--kappa", type=_parse_floats,
                        default=tuple(10.0 ** k for k in range(1, 9)))
    parser.add_argument("--rnorm", type=_parse_floats,
                        default=tuple(10.0 ** (-k) for k in range(0, 8)))
    parser.add_argument("--precisions", type=_parse_pairs,
                        default=_parse_pairs("binary64:binary32,extended:binary64"),
                        help="comma-separated residual:working pairs")
    parser.add_argument("--solver", choices=("direct", "iterative"), default="direct")
    parser.add_argument("--alpha", type=_parse_alpha, default="unit")
    parser.add_argument("--seed", type=int, default=0)


def _cmd_grid(args) -> int:
    spec = ExperimentSpec(m=args.m, n=args.n, kappa_list=args.kappa,
                          rnorm_list=args.rnorm, precision_pairs=args.precisions,
                          strategies=args.strategy, solver=args.solver,
                          alpha=args.alpha, base_seed=args.seed,
                          output_dir=args.out)
    result = run_grid(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = emit_csv(result, out / "grid.csv")
    for path in written:
        print(path)
    if args.plots:
        print(emit_plot_script(written, out / "grid.gp"))
    return 0


def _cmd_trace(args) -> int:
    spec = ExperimentSpec(m=args.m, n=args.n, kappa_list=(args.kappa[0],),
                          rnorm_list=(args.rnorm[0],),
                          precision_pairs=args.precisions,
                          solver=args.solver, alpha=args.alpha,
                          base_seed=args.seed)
    for pair in args.precisions:
        trace = trace_cell(spec, args.strategy, pair)
        target = Path(args.out)
        if len(args.precisions) > 1:
            target = target.with_name(f"{target.stem}_{pair.tag()}{target.suffix}")
        print(emit_trace(trace, target), trace.status.value)
    return 0


def _cmd_predict(args) -> int:
    lines = ["kappa,rnorm,rho,u,ur,ls_recognition,sn_recognition,sn_convergence,"
             "sn_limiting,csne_one_step,aug_x_convergence,aug_r_convergence"]
    for pair in args.precisions:
        for kappa in args.kappa:
            for rnorm in args.rnorm:
                rep = evaluate_conditions(kappa, rnorm, args.xnorm, args.anorm, pair)
                bools = ",".join("true" if rep.holds(name) else "false" for name in (
                    "ls_recognition", "sn_recognition", "sn_convergence",
                    "sn_limiting", "csne_one_step", "aug_x_convergence",
                    "aug_r_convergence"))
                lines.append(f"{kappa!r},{rnorm!r},{rep.rho!r},{rep.u!r},{rep.u_r!r},{bools}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_problem(args) -> int:
    if args.action == "gen":
        problem = probgen.generate(args.m, args.n, args.kappa[0], args.rnorm[0],
                                   args.seed)
        write_problem(problem, args.out)
        print(args.out)
        return 0
    dump_problem_text(args.file, sys.stdout, limit=args.limit)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = argparse.ArgumentParser(
        prog="lsrefine",
        description="two-precision iterative refinement for least squares")
    sub = parser.add_subparsers(dest="command", required=True)

    p_grid = sub.add_parser("grid", help="run a kappa x rnorm sweep")
    _add_common(p_grid)
    p_grid.add_argument("--strategy", type=lambda s: tuple(s.split(",")), default=None)
    p_grid.add_argument("--out", default="results")
    p_grid.add_argument("--plots", action="store_true",
                        help="also write a gnuplot companion script")
    p_grid.set_defaults(func=_cmd_grid)

    p_trace = sub.add_parser("trace", help="per-iteration trace for one cell")
    _add_common(p_trace)
    p_trace.add_argument("--strategy", required=True)
    p_trace.add_argument("--out", default="trace.csv")
    p_trace.set_defaults(func=_cmd_trace)

    p_pred = sub.add_parser("predict", help="evaluate the closed-form conditions")
    _add_common(p_pred)
    p_pred.add_argument("--xnorm", type=float, default=1.0)
    p_pred.add_argument("--anorm", type=float, default=1.0)
    p_pred.add_argument("--out", default=None)
    p_pred.set_defaults(func=_cmd_predict)

    p_prob = sub.add_parser("problem", help="problem container tools")
    prob_sub = p_prob.add_subparsers(dest="action", required=True)
    p_gen = prob_sub.add_parser("gen")
    _add_common(p_gen)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=_cmd_problem, action="gen")
    p_dump = prob_sub.add_parser("dump")
    p_dump.add_argument("file")
    p_dump.add_argument("--limit", type=int, default=None)
    p_dump.set_defaults(func=_cmd_problem, action="dump")

    try:
        args = _apply_config(parser, [p_grid, p_trace, p_pred, p_gen, p_dump], argv)
    except (ValueError, OSError) as err:
        parser.error(str(err))
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
