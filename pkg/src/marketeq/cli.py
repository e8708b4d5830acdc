"""Command-line front end.

Subcommands: ``check`` (desire-digraph feasibility), ``solve`` (reduce if
needed, run the alternating solver, write certificate and trace), ``fisher``
(proportional response), and ``reduce`` (write the bijective form).

Exit codes are a stable contract: 0 success (and, for solve, a passing
certificate), 1 input error, 2 digraph feasibility violation, 3 solver
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from . import fisher as fisher_mod
from . import market as market_mod
from . import solver as solver_mod
from . import verification
from .errors import ConditionStarViolated, MarketError, NonPositiveEta, ValidationError

__all__ = ["main", "run", "RunManifest"]


@dataclass
class RunManifest:
    command: str
    input_path: str
    overrides: dict = field(default_factory=dict)
    certificate_path: str | None = None
    trace_path: str | None = None
    output_path: str | None = None
    exit_status: int = 0


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_vector(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marketeq",
        description="Equilibria of linear exchange markets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="test the desire digraph for feasibility")
    check.add_argument("instance", help="market instance JSON")

    solve = sub.add_parser("solve", help="solve an instance and certify the result")
    solve.add_argument("instance", help="market instance JSON")
    solve.add_argument("--max-iters", type=int, default=None)
    solve.add_argument("--eta", type=float, default=None)
    solve.add_argument(
        "--eta-policy", choices=solver_mod.ETA_POLICIES, default=None
    )
    solve.add_argument("--obj-tol", type=float, default=None)
    solve.add_argument("--bmax", type=float, default=None, help="row-sum cap")
    solve.add_argument("--mode", choices=("balanced", "relaxed"), default=None)
    solve.add_argument("--trace", default=None, help="trace CSV path")
    solve.add_argument("--cert", default=None, help="certificate JSON path")

    fisher = sub.add_parser("fisher", help="solve a Fisher instance by proportional response")
    fisher.add_argument("instance", help="fisher instance JSON")
    fisher.add_argument("--tol", type=float, default=1e-10)
    fisher.add_argument("--max-iters", type=int, default=100_000)
    fisher.add_argument("--out", default=None, help="allocation JSON path")

    reduce_ = sub.add_parser("reduce", help="write the bijective reduction of an instance")
    reduce_.add_argument("instance", help="market instance JSON")
    reduce_.add_argument("--out", default=None, help="reduced instance JSON path")
    return parser


def _load_document(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _bijective_from_file(path: str) -> market_mod.BijectiveMarket:
    """Load an instance and reduce it when it is not already bijective."""
    doc = _load_document(path)
    if "endowments" not in doc and doc.get("n_agents") == doc.get("n_goods"):
        return market_mod.validate_bijective(market_mod.bijective_from_dict(doc))
    instance = market_mod.validate_instance(market_mod.instance_from_dict(doc))
    return market_mod.reduce_to_bijective(instance)


def cmd_check(args) -> RunManifest:
    manifest = RunManifest("check", args.instance)
    doc = _load_document(args.instance)
    if "endowments" not in doc and doc.get("n_agents") == doc.get("n_goods"):
        bijective = market_mod.bijective_from_dict(doc)
    else:
        instance = market_mod.validate_instance(market_mod.instance_from_dict(doc))
        bijective = market_mod.reduce_to_bijective(instance)
    report = market_mod.check_condition_star(bijective)
    if report.satisfied:
        print("condition_star=satisfied")
    else:
        components = json.dumps([list(c) for c in report.violating_components])
        print(f"condition_star=violated components={components}")
        manifest.exit_status = 2
    return manifest


def cmd_solve(args) -> RunManifest:
    overrides = {
        key: getattr(args, key)
        for key in ("max_iters", "eta", "eta_policy", "obj_tol", "bmax", "mode")
        if getattr(args, key) is not None
    }
    manifest = RunManifest("solve", args.instance, overrides)
    stem = Path(args.instance).stem
    manifest.certificate_path = args.cert or f"{stem}.certificate.json"
    manifest.trace_path = args.trace or f"{stem}.trace.csv"

    bijective = _bijective_from_file(args.instance)
    config = solver_mod.SolverConfig()
    if args.max_iters is not None:
        config.max_iters = args.max_iters
    if args.eta is not None:
        config.eta = args.eta
        config.eta_policy = "fixed"
    if args.eta_policy is not None:
        config.eta_policy = args.eta_policy
    if args.obj_tol is not None:
        config.objective_tol = args.obj_tol
    if args.bmax is not None:
        config.row_cap = args.bmax
    if args.mode is not None:
        config.balanced = args.mode == "balanced"

    with warnings.catch_warnings():
        warnings.simplefilter("always")
        result = solver_mod.solve(bijective, config)
    result.trace.write_csv(manifest.trace_path)

    extra = {
        "iterations": result.trace.iterations,
        "termination": result.trace.termination,
        "eta": result.trace.meta["eta"],
        "eta_policy": result.trace.meta["eta_policy"],
        "cap_binding": result.trace.meta["cap_binding"],
    }
    if bijective.origin_map is not None and not _is_identity(bijective.origin_map):
        lifted = market_mod.lift_solution(
            result.certificate.prices,
            bijective.spend_matrix(result.state.b),
            bijective.origin_map,
        )
        instance = market_mod.validate_instance(
            market_mod.instance_from_dict(_load_document(args.instance))
        )
        ad_cert = verification.certify_arrow_debreu(
            instance, lifted, result.certificate.epsilon
        )
        extra["lifted"] = verification.certificate_to_dict(ad_cert)
    verification.write_certificate(result.certificate, manifest.certificate_path, extra)

    print(
        f"iters={result.trace.iterations} "
        f"obj={_fmt(result.certificate.objective_value)} "
        f"passed={'true' if result.certificate.passed else 'false'}"
    )
    manifest.exit_status = 0 if result.certificate.passed else 3
    return manifest


def _is_identity(origin_map: market_mod.OriginMap) -> bool:
    return origin_map.n_agents == origin_map.n_goods == len(origin_map.pairs) and all(
        a == g == c for c, (a, g) in enumerate(origin_map.pairs)
    )


def cmd_fisher(args) -> RunManifest:
    manifest = RunManifest("fisher", args.instance)
    stem = Path(args.instance).stem
    manifest.output_path = args.out or f"{stem}.allocations.json"
    market = fisher_mod.load_fisher(args.instance)
    solution = fisher_mod.fisher_solve(market, tol=args.tol, max_iters=args.max_iters)
    print(f"prices={_fmt_vector(solution.prices)}")
    doc = {
        "prices": [float(v) for v in solution.prices],
        "allocations": [[float(v) for v in row] for row in solution.allocations],
        "iterations": solution.iterations,
    }
    with open(manifest.output_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return manifest


def cmd_reduce(args) -> RunManifest:
    manifest = RunManifest("reduce", args.instance)
    stem = Path(args.instance).stem
    manifest.output_path = args.out or f"{stem}.bijective.json"
    instance = market_mod.validate_instance(
        market_mod.instance_from_dict(_load_document(args.instance))
    )
    bijective = market_mod.reduce_to_bijective(instance)
    with open(manifest.output_path, "w", encoding="utf-8") as fh:
        json.dump(market_mod.bijective_to_dict(bijective), fh, indent=2)
        fh.write("\n")
    print(f"agents={bijective.n} edges={bijective.n_edges} out={manifest.output_path}")
    return manifest


_COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "fisher": cmd_fisher,
    "reduce": cmd_reduce,
}


def run(argv=None) -> RunManifest:
    args = _build_parser().parse_args(argv)
    command = _COMMANDS[args.command]
    try:
        return command(args)
    except (OSError, json.JSONDecodeError, ValidationError, NonPositiveEta) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RunManifest(args.command, getattr(args, "instance", ""), exit_status=1)
    except ConditionStarViolated as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RunManifest(args.command, getattr(args, "instance", ""), exit_status=2)
    except MarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RunManifest(args.command, getattr(args, "instance", ""), exit_status=3)


def main(argv=None) -> int:
    return run(argv).exit_status


if __name__ == "__main__":
    sys.exit(main())
