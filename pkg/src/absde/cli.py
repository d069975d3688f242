"""Command-line entry point.

Exit codes: 0 success, 1 comparison violation or refuted condition,
2 usage, configuration or solver error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .conditions import (DomainBox, SamplerConfig, check_lipschitz_sampled,
                         check_order_conditions_sampled, check_square_integrability,
                         check_sufficient_conditions)
from .config import ExperimentConfig
from .errors import AbsdeError, ConfigError, PreconditionFailed
from .harness import convergence_csv, run_comparison, run_convergence_study, run_equality_check
from .montecarlo import RegressionBasis, simulate_paths, solve_absde_mc
from .partition import compute_partition, validate_delay_assumptions
from .solver import solve_absde
from .surface import write_surface_csv

EXIT_OK, EXIT_VIOLATION, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"absde: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def thread_cap() -> int:
    """Value of ``ABSDE_THREADS`` (0 = auto).

    Steps are evaluated as whole numpy slices, so the cap is only
    validated; there is no worker pool to size.
    """
    raw = os.environ.get("ABSDE_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"ABSDE_THREADS must be a nonnegative integer, got {raw!r}") from None
    if value < 0:
        raise ConfigError(f"ABSDE_THREADS must be a nonnegative integer, got {raw!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value experiment file")
    common.add_argument("--engine", choices=("lattice", "mc"))
    common.add_argument("--steps", type=int, help="grid steps on [0, T]")
    common.add_argument("--paths", type=int, help="Monte Carlo path count")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="comparison tolerance")
    common.add_argument("--out", help="write the CSV output here instead of stdout")

    parser = _Parser(prog="absde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("partition", parents=[common], help="print the anticipation partition knots")
    sub.add_parser("solve", parents=[common], help="solve equation 1 and emit its surface")
    sub.add_parser("compare", parents=[common], help="compare the solutions of equations 1 and 2")
    sub.add_parser("equality", parents=[common],
                   help="check both sides of the Y1(0) = Y2(0) characterisation")
    conv = sub.add_parser("converge", parents=[common], help="convergence study on a fixture")
    conv.add_argument("--fixture", help="fixture name (default linear_anticipated)")
    conv.add_argument("--n-list", help="comma-separated step counts")
    sub.add_parser("check-conditions", parents=[common],
                   help="sampled checks of the generator and delay assumptions")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {"engine": args.engine, "n_steps": args.steps, "mc__paths": args.paths,
                 "seed": args.seed, "tol": args.tol, "out": args.out}
    if getattr(args, "fixture", None):
        overrides["fixture"] = args.fixture
    if getattr(args, "n_list", None):
        overrides["n_list"] = args.n_list
    return cfg.override(**overrides)


def _emit(text: str, cfg: ExperimentConfig, stdout) -> None:
    path = cfg.get("out")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)


def cmd_partition(cfg, stdout, stderr) -> int:
    delays = cfg.delays()
    part = compute_partition(delays, cfg.T, cfg.scan_resolution)
    stdout.write(",".join(format(k, ".12g") for k in part.knots) + "\n")
    if cfg.get("out"):
        with open(cfg.get("out"), "w", encoding="utf-8", newline="") as fh:
            fh.write("index,knot\n")
            for i, k in enumerate(part.knots):
                fh.write(f"{i},{format(k, '.17g')}\n")
    for line in validate_delay_assumptions(delays, cfg.T).lines():
        print(line, file=stderr)
    return EXIT_OK


def cmd_solve(cfg, stdout, stderr) -> int:
    problem = cfg.problem(1)
    if cfg.engine == "lattice":
        surface = solve_absde(problem)
        _emit(write_surface_csv(surface), cfg, stdout)
        print(f"Y(0) = {surface.y0():.17g}", file=stderr)
    else:
        ensemble = simulate_paths(cfg.seed, cfg.paths, problem.grid)
        result = solve_absde_mc(problem, ensemble, RegressionBasis(cfg.basis_degree))
        _emit(result.write_csv(ensemble), cfg, stdout)
        print(f"Y(0) = {result.Y0_estimate:.17g} +/- {result.Y0_stderr:.3g}", file=stderr)
    return EXIT_OK


def cmd_compare(cfg, stdout, stderr) -> int:
    report = run_comparison(cfg)
    if cfg.get("out"):
        _emit(report.csv_text(), cfg, stdout)
        stdout.write(report.text() + "\n")
    else:
        stdout.write(report.text() + "\n")
    return report.exit_code


def cmd_equality(cfg, stdout, stderr) -> int:
    report = run_equality_check(cfg)
    stdout.write(report.text() + "\n")
    return EXIT_OK if report.co_occur else EXIT_VIOLATION


def cmd_converge(cfg, stdout, stderr) -> int:
    rows = run_convergence_study(cfg.get("fixture", "linear_anticipated"), cfg.n_list, cfg.picard)
    _emit(convergence_csv(rows), cfg, stdout)
    return EXIT_OK


def cmd_check_conditions(cfg, stdout, stderr) -> int:
    delays = cfg.delays()
    grid = cfg.grid()
    refuted = False
    for line in validate_delay_assumptions(delays, cfg.T).lines():
        stdout.write(line + "\n")
    box = DomainBox.for_horizon(cfg.T)
    gens = [cfg.generator(1)]
    if cfg.get("generator2"):
        gens.append(cfg.generator(2))
    for g in gens:
        report = check_lipschitz_sampled(g, box, cfg.samples, cfg.seed)
        refuted |= report.refuted
        stdout.write(report.summary() + "\n")
        stdout.write(f"square integrability[{g.name}]: "
                     f"{check_square_integrability(g, grid):.6g}\n")
    if len(gens) == 2:
        sampler = SamplerConfig(cfg.T, delays, cfg.samples, cfg.seed)
        try:
            report = check_order_conditions_sampled(gens[0], gens[1], cfg.terminal(1, grid),
                                                    cfg.terminal(2, grid), sampler)
            stdout.write(report.summary() + "\n")
            refuted |= report.refuted
        except PreconditionFailed as exc:
            stdout.write(f"terminal order: refuted ({exc})\n")
            refuted = True
        mode = cfg.get("sufficient_mode")
        if mode:
            report = check_sufficient_conditions(gens[0], gens[1], mode, cfg.ftilde(), box,
                                                 cfg.samples, cfg.seed)
            stdout.write(report.summary() + "\n")
            refuted |= report.refuted
    return EXIT_VIOLATION if refuted else EXIT_OK


COMMANDS = {
    "partition": cmd_partition,
    "solve": cmd_solve,
    "compare": cmd_compare,
    "equality": cmd_equality,
    "converge": cmd_converge,
    "check-conditions": cmd_check_conditions,
}


def cli_main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        thread_cap()
        cfg = load_config(args)
        return COMMANDS[args.command](cfg, stdout, stderr)
    except (AbsdeError, ValueError, OSError) as exc:
        print(f"absde: error: {exc}", file=stderr)
        return EXIT_ERROR


def main() -> None:
    raise SystemExit(cli_main())


if __name__ == "__main__":
    main()
