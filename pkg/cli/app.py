# cli/app.py
import argparse
import logging
import os
import sys
from typing import List, Optional

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if ROOT_DIR not in sys.path:
    sys.path.insert(0, ROOT_DIR)

import numpy as np

from cli.export import export_trace
from cli.scenario_file import LoadedScenario, read_scenario_file
from gramian.oracles import (
    empirical_gramian_trace,
    finite_difference_gradient,
    gradient_divergence,
    relative_error,
)
from gramian.privacy_cost import TRUNCATION_HORIZON, CostWindow, exact_gradient, privacy_cost
from online_opt.hindsight import hindsight_optimum
from online_opt.learners import estimate_constants, init_learner
from online_opt.projection import FeasibleSet
from scenario.engine import cost_sequence, resolve_initial_weights, run_scenario
from utils.errors import NetPrivError, ScenarioSyntaxError, ScenarioValidationError
from utils.logs import setup_logging

APP_TITLE = "netpriv: observability-aware online edge weighting"

OUTPUT_DIR = os.environ.get("NETPRIV_OUTPUT_DIR", "results")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

ORACLE_EPS = 1e-3
ORACLE_STEP = 0.005

log = logging.getLogger("cli")


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.6f}" for x in v) + "]"


# -------------------------
# Subcommands
# -------------------------
def cmd_run(loaded: LoadedScenario, output: Optional[str], many: bool) -> None:
    trace = run_scenario(loaded.config)
    if output:
        directory = os.path.join(output, loaded.name) if many else output
    else:
        directory = loaded.output.directory or os.path.join(OUTPUT_DIR, loaded.name)
    paths = export_trace(trace, directory, loaded.output.formats)
    T, regret = trace.regret_curve()[-1]
    print(f"[run] {loaded.name}: T={T} total cost {trace.records[-1].cum_cost:.10g} "
          f"regret {regret:.6g} (regret/T {regret / T:.6g})")
    for p in paths:
        print(f"[run]   {p}")


def cmd_hindsight(loaded: LoadedScenario) -> None:
    config = loaded.config
    fs = FeasibleSet.from_graph(config.graph)
    res = hindsight_optimum(config.graph, fs, cost_sequence(config))
    print(f"[hindsight] {loaded.name}: value {res.value:.17g} "
          f"({'converged' if res.converged else 'NOT converged'} after {res.iterations} iterations)")
    print(f"[hindsight]   w* = {_fmt_vec(res.weights)}")


def cmd_check(loaded: LoadedScenario) -> None:
    config = loaded.config
    graph = config.graph
    fs = FeasibleSet.from_graph(graph)
    terms = cost_sequence(config)
    G, D = estimate_constants(graph, fs, config.schedule.distinct_sets(), [w for _, w in terms],
                              samples=config.samples, safety=config.safety,
                              gradient_mode=config.gradient_mode, seed=config.rng_seed)
    state = init_learner(fs, fs.barycenter(), G, D)
    print(f"[check] {loaded.name}: N={graph.node_count} M={graph.edge_count} T={config.horizon} delta={config.delta:g}")
    print(f"[check]   G={G:.6g} D={D:.6g} beta={state.beta:.6g} epsilon={state.epsilon_reg:.6g}")


def cmd_oracle(loaded: LoadedScenario) -> None:
    """Finite-difference and trajectory-Gramian cross-checks at the initial weights."""
    config = loaded.config
    graph = config.graph
    fs = FeasibleSet.from_graph(graph)
    w = resolve_initial_weights(config, fs, np.random.default_rng(config.rng_seed))
    first = config.window(1)
    full = CostWindow(0.0, TRUNCATION_HORIZON, config.quadrature_order)
    worst_fd, worst_gram, worst_div = 0.0, 0.0, 0.0
    for intruders in config.schedule.distinct_sets():
        ex = exact_gradient(graph, w, intruders, first)
        fd = finite_difference_gradient(graph, w, intruders, first)
        worst_fd = max(worst_fd, relative_error(ex, fd))
        worst_div = max(worst_div, gradient_divergence(graph, w, intruders, first).relative)
        emp = empirical_gramian_trace(graph, w, intruders, ORACLE_EPS, TRUNCATION_HORIZON, ORACLE_STEP)
        ref = privacy_cost(graph, w, intruders, full)
        worst_gram = max(worst_gram, abs(emp - ref) / abs(ref))
    print(f"[oracle] {loaded.name}: exact vs finite-difference gradient, max relative error {worst_fd:.3e}")
    print(f"[oracle]   empirical Gramian trace vs cost on [0, {TRUNCATION_HORIZON:g}], max relative error {worst_gram:.3e}")
    print(f"[oracle]   closed-form vs exact gradient, max relative divergence {worst_div:.3e}")


# -------------------------
# Entry
# -------------------------
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netpriv", description=APP_TITLE)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default: $NETPRIV_LOG_LEVEL or INFO)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="play the online game and export traces")
    p_run.add_argument("scenarios", nargs="+", help="scenario file(s)")
    p_run.add_argument("--output", default=None, help="output directory (overrides [output] directory)")

    for name, text in (("hindsight", "best fixed weights in hindsight"),
                       ("check", "validate and print G, D, beta, epsilon"),
                       ("oracle", "gradient and Gramian cross-checks")):
        p = sub.add_parser(name, help=text)
        p.add_argument("scenario", help="scenario file")
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Exit codes: 0 ok, 1 validation or syntax error, 2 runtime error."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    setup_logging(args.log_level)

    paths = args.scenarios if args.command == "run" else [args.scenario]
    for path in paths:
        try:
            loaded = read_scenario_file(path)
        except (ScenarioSyntaxError, ScenarioValidationError) as exc:
            print(f"{path}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        except OSError as exc:
            print(f"{path}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_RUNTIME
        try:
            if args.command == "run":
                cmd_run(loaded, args.output, many=len(paths) > 1)
            elif args.command == "hindsight":
                cmd_hindsight(loaded)
            elif args.command == "check":
                cmd_check(loaded)
            else:
                cmd_oracle(loaded)
        except (NetPrivError, ValueError, ArithmeticError, OSError) as exc:
            log.debug("runtime failure", exc_info=True)
            print(f"{path}: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
