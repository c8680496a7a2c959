"""Command-line front end: generate instances, solve them, sweep benchmarks.

Exit codes: 0 when every requested solve finished optimal/complete, 2 when
some run ended gap-open, 1 on errors (including infeasible instances).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass

import numpy as np

from .benders import BendersOptions, run_benders
from .extensive import InfeasibleInstanceError, SolverLimitError, solve_extensive, solve_fix_du
from .lp import GE, LinearModel, solve_lp
from .model import PlanSolution, ProblemInstance, ProblemParams
from .studio import GeneratorConfig, generate_instance, read_instance, write_instance

METHODS = ("milp", "bd", "abd", "fixdu")

REPORT_FIELDS = (
    "method",
    "status",
    "objective",
    "capacity_term",
    "latency_term",
    "wall_ms",
    "iterations",
    "cuts_added",
    "cuts_filtered",
)


@dataclass
class RunReport:
    method: str
    status: str  # optimal | gap-open | infeasible
    objective: float | None
    capacity_term: float | None
    latency_term: float | None
    wall_ms: float
    iterations: int = 0
    cuts_added: int = 0
    cuts_filtered: int = 0

    def row(self) -> list:
        return [getattr(self, f) for f in REPORT_FIELDS]


def _warmup_solver() -> None:
    # exclude first-use numpy/BLAS setup from timed runs
    m = LinearModel("warmup")
    j = m.add_variable("x", 0.0, 10.0)
    m.add_constraint({j: 1.0}, GE, 1.0, "r")
    m.set_objective({j: 1.0})
    solve_lp(m)


def _with_gamma(instance: ProblemInstance, gamma: float | None) -> ProblemInstance:
    if gamma is None:
        return instance
    params = dataclasses.replace(instance.params, gamma=gamma)
    return ProblemInstance(params, instance.topology, instance.n_users, instance.scenarios)


def cmd_solve(instance: ProblemInstance, method: str, *, epsilon: float = 1e-6,
              max_iter: int = 500, parallel_sp: int = 0) -> tuple[RunReport, PlanSolution | None]:
    """Dispatch one solve and time it; failures land in the report status."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    _warmup_solver()
    started = time.perf_counter()
    plan: PlanSolution | None = None
    status = "optimal"
    iterations = 0
    cuts_added = 0
    cuts_filtered = 0
    try:
        if method == "milp":
            plan = solve_extensive(instance)
        elif method == "fixdu":
            plan = solve_fix_du(instance)
        else:
            opts = BendersOptions(
                epsilon=epsilon,
                max_iter=max_iter,
                abd_enabled=(method == "abd"),
                parallel_workers=parallel_sp,
            )
            result = run_benders(instance, opts)
            status = result.status
            plan = result.plan
            iterations = result.iterations
            cuts_added = len(result.cuts)
            cuts_filtered = len(result.filtered_pairs)
    except InfeasibleInstanceError:
        status = "infeasible"
    except SolverLimitError:
        status = "gap-open"
    wall_ms = (time.perf_counter() - started) * 1e3

    report = RunReport(
        method=method,
        status=status,
        objective=None if plan is None else plan.objective,
        capacity_term=None if plan is None else plan.capacity_term,
        latency_term=None if plan is None else plan.latency_term,
        wall_ms=wall_ms,
        iterations=iterations,
        cuts_added=cuts_added,
        cuts_filtered=cuts_filtered,
    )
    return report, plan


def _write_reports(path, rows: list[list], header: list[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _status_exit(statuses: list[str]) -> int:
    if any(s in ("infeasible", "error") for s in statuses):
        return 1
    if any(s == "gap-open" for s in statuses):
        return 2
    return 0


# -- verbs --------------------------------------------------------------------


def _do_generate(args) -> int:
    mix = tuple(float(x) for x in args.mix.split(","))
    if len(mix) != 3:
        print("--mix needs three comma-separated probabilities (eMBB,mMTC,uRLLC)", file=sys.stderr)
        return 1
    config = GeneratorConfig(
        n_cu=args.n_cu,
        n_users=args.users,
        n_scenarios=args.scenarios,
        service_mix=mix,
        shared_positions=args.shared_positions,
        seed=args.seed,
    )
    params = ProblemParams(gamma=args.gamma) if args.gamma is not None else ProblemParams()
    instance = generate_instance(config, params)
    write_instance(instance, args.out)
    print(f"wrote {args.out}: {config.n_cu} CUs, {instance.topology.n_du} DUs, "
          f"{instance.topology.n_ru} RUs, {config.n_users} users, {config.n_scenarios} scenarios")
    return 0


def _do_solve(args) -> int:
    instance = _with_gamma(read_instance(args.instance), args.gamma)
    report, plan = cmd_solve(
        instance, args.method, epsilon=args.epsilon, max_iter=args.max_iter, parallel_sp=args.parallel_sp
    )
    print(
        f"{report.method}: status={report.status} objective={report.objective} "
        f"(capacity={report.capacity_term}, latency={report.latency_term}) "
        f"wall={report.wall_ms:.1f} ms iterations={report.iterations}"
    )
    if args.out:
        _write_reports(args.out, [report.row()], list(REPORT_FIELDS))
    if args.solution and plan is not None:
        payload = {
            "p": plan.p.tolist(),
            "objective": plan.objective,
            "capacity_term": plan.capacity_term,
            "latency_term": plan.latency_term,
            "latencies": plan.latencies.tolist(),
        }
        with open(args.solution, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return _status_exit([report.status])


def _do_compare(args) -> int:
    instance = _with_gamma(read_instance(args.instance), args.gamma)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = []
    statuses = []
    for method in methods:
        report, _ = cmd_solve(
            instance, method, epsilon=args.epsilon, max_iter=args.max_iter, parallel_sp=args.parallel_sp
        )
        rows.append(report.row())
        statuses.append(report.status)
        print(
            f"{method:>6}: status={report.status} objective={report.objective} wall={report.wall_ms:.1f} ms"
        )
    if args.out:
        _write_reports(args.out, rows, list(REPORT_FIELDS))
    return _status_exit(statuses)


def _do_bench(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        config = json.load(fh)

    base = config.get("base", {})
    seeds = config.get("seeds", [0])
    methods = config.get("methods", ["bd", "abd"])
    epsilon = config.get("epsilon", 1e-6)
    max_iter = config.get("max_iter", 500)
    gamma = config.get("gamma")
    out_dir = args.out_dir.rstrip("/")

    header = ["sweep", "value", "seed"] + list(REPORT_FIELDS)
    statuses: list[str] = []
    for sweep in config.get("sweeps", []):
        name, param, values = sweep["name"], sweep["param"], sweep["values"]
        rows = []
        for value in values:
            for seed in seeds:
                gen_kwargs = dict(base)
                run_gamma = gamma
                if param == "gamma":
                    run_gamma = value
                else:
                    gen_kwargs[param] = value
                gen_kwargs["seed"] = seed
                try:
                    params = ProblemParams(gamma=run_gamma) if run_gamma is not None else ProblemParams()
                    instance = generate_instance(GeneratorConfig(**gen_kwargs), params)
                    for method in methods:
                        report, _ = cmd_solve(instance, method, epsilon=epsilon, max_iter=max_iter)
                        rows.append([name, value, seed] + report.row())
                        statuses.append(report.status)
                except Exception as exc:  # record the failure, keep sweeping
                    rows.append([name, value, seed, "-", "error", None, None, None, 0.0, 0, 0, 0])
                    statuses.append("error")
                    print(f"sweep {name}={value} seed={seed} failed: {exc}", file=sys.stderr)
        path = f"{out_dir}/{name}.csv"
        _write_reports(path, rows, header)
        print(f"wrote {path} ({len(rows)} rows)")
    return _status_exit(statuses)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oranplan", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    gen = sub.add_parser("generate", help="write a seeded instance file")
    gen.add_argument("--n-cu", type=int, default=2)
    gen.add_argument("--users", type=int, default=10)
    gen.add_argument("--scenarios", type=int, default=4)
    gen.add_argument("--mix", default="0.3334,0.3333,0.3333", help="eMBB,mMTC,uRLLC probabilities")
    gen.add_argument("--shared-positions", action="store_true",
                     help="reuse one position draw across scenarios")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--gamma", type=float, default=None)
    gen.add_argument("--out", required=True)

    slv = sub.add_parser("solve", help="solve one instance file")
    slv.add_argument("instance")
    slv.add_argument("--method", choices=METHODS, default="abd")
    slv.add_argument("--gamma", type=float, default=None, help="override the instance's objective weight")
    slv.add_argument("--epsilon", type=float, default=1e-6)
    slv.add_argument("--max-iter", type=int, default=500)
    slv.add_argument("--parallel-sp", type=int, default=0, help="worker threads for subproblem solves")
    slv.add_argument("--out", default=None, help="write the report row as CSV")
    slv.add_argument("--solution", default=None, help="write capacities and latencies as JSON")

    cmp_ = sub.add_parser("compare", help="run several methods on one instance")
    cmp_.add_argument("instance")
    cmp_.add_argument("--methods", default="milp,bd,abd,fixdu")
    cmp_.add_argument("--gamma", type=float, default=None)
    cmp_.add_argument("--epsilon", type=float, default=1e-6)
    cmp_.add_argument("--max-iter", type=int, default=500)
    cmp_.add_argument("--parallel-sp", type=int, default=0)
    cmp_.add_argument("--out", default=None)

    ben = sub.add_parser("bench", help="run the sweeps described by a JSON config")
    ben.add_argument("config")
    ben.add_argument("--out-dir", default=".")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "generate":
            return _do_generate(args)
        if args.verb == "solve":
            return _do_solve(args)
        if args.verb == "compare":
            return _do_compare(args)
        if args.verb == "bench":
            return _do_bench(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
