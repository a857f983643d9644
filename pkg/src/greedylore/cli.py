"""Command line entry point: ``greedylore run|compare|check``."""
from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from .checks import REGISTRY, run_checks
from .cluster import NumericalBlowup, ReplicaDivergence, RunConfig, RunResult, run
from .config import ExperimentPlan, PlanError, load_plan

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

SUMMARY_HEADER = "label,final_loss,tail_grad_norm_sq,total_comm_scalars,avg_comm_per_step"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _execute(cfg: RunConfig) -> RunResult:
    return run(cfg)


def execute_plan(plan: ExperimentPlan, jobs: int = 1) -> list[RunResult]:
    if jobs > 1 and len(plan.runs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_execute, plan.runs))
    return [_execute(cfg) for cfg in plan.runs]


def summary_text(results: list[RunResult]) -> str:
    lines = [SUMMARY_HEADER]
    warnings = []
    for res in results:
        lines.append(
            f"{res.cfg.label},{res.final_loss!r},{res.tail_mean_grad_norm_sq(0.1)!r},"
            f"{res.ledger.scalars_allreduce},{res.average_scalars_per_step()!r}"
        )
        warnings.extend(f"# warning: {res.cfg.label}: {w}" for w in res.warnings)
    return "\n".join(lines + warnings) + "\n"


def write_results(plan: ExperimentPlan, results: list[RunResult]) -> None:
    os.makedirs(plan.out_dir, exist_ok=True)
    for res in results:
        base = os.path.join(plan.out_dir, res.cfg.label)
        write_atomic(base + ".csv", res.trace_csv())
        write_atomic(base + ".ledger.txt", res.ledger.summary_text(res.cfg.steps))
    write_atomic(os.path.join(plan.out_dir, "summary"), summary_text(results))


def comparison_csv(results: list[RunResult]) -> str:
    """Loss per step for every run side by side, plus communication relative to the first run."""
    ref = results[0]
    labels = [r.cfg.label for r in results]
    header = ["step"] + [f"loss_{lab}" for lab in labels] + [f"rel_comm_{lab}" for lab in labels[1:]]
    rows = [",".join(header)]
    n = min(len(r.traces) for r in results)
    for i in range(n):
        step = ref.traces[i].step
        cells = [str(step)] + [repr(r.traces[i].loss) for r in results]
        ref_comm = ref.traces[i].comm_scalars_cumulative
        for r in results[1:]:
            c = r.traces[i].comm_scalars_cumulative
            cells.append(repr(c / ref_comm) if ref_comm else "")
        rows.append(",".join(cells))
    return "\n".join(rows) + "\n"


def compare_verdict(plan: ExperimentPlan, results: list[RunResult]) -> list[str]:
    ref = results[0]
    lines = []
    for res in results[1:]:
        ratio = res.final_loss / ref.final_loss if ref.final_loss else float("inf")
        comm = res.average_scalars_per_step() / ref.average_scalars_per_step() if ref.average_scalars_per_step() else float("nan")
        line = f"{res.cfg.label} vs {ref.cfg.label}: final loss ratio {ratio:.4g}, comm ratio {comm:.4g}"
        if plan.loss_tolerance is not None:
            ok = ratio <= plan.loss_tolerance
            line += f" [{'ok' if ok else 'over tolerance'} {plan.loss_tolerance}]"
        lines.append(line)
    return lines


def _load(args) -> ExperimentPlan:
    return load_plan(args.plan, overrides=args.set, seed=args.seed, out_dir=args.out_dir)


def cmd_run(args) -> int:
    plan = _load(args)
    results = execute_plan(plan, args.jobs)
    write_results(plan, results)
    sys.stdout.write(summary_text(results))
    return EXIT_OK


def cmd_compare(args) -> int:
    plan = _load(args)
    if len(plan.runs) < 2:
        raise PlanError(f"{args.plan}: compare needs a sweep with at least two runs")
    results = execute_plan(plan, args.jobs)
    write_results(plan, results)
    write_atomic(os.path.join(plan.out_dir, f"{plan.name}_compare.csv"), comparison_csv(results))
    verdict = compare_verdict(plan, results)
    sys.stdout.write(summary_text(results))
    print("\n".join(verdict))
    if plan.loss_tolerance is not None and any("over tolerance" in v for v in verdict):
        return EXIT_FAIL
    return EXIT_OK


def cmd_check(args) -> int:
    names = None if args.property is None else [args.property]
    if names and names[0] not in REGISTRY:
        print(f"error: unknown property {names[0]!r}; known: {', '.join(REGISTRY)}", file=sys.stderr)
        return EXIT_USAGE
    results = run_checks(names)
    for res in results:
        print(res.line(), flush=True)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_OK if not failed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override run.base_seed for every run")
    common.add_argument("--out-dir", default=None, help="output directory (default: ./out)")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one plan value; repeatable")
    common.add_argument("--jobs", type=int, default=1, help="run independent plan entries in parallel")

    parser = argparse.ArgumentParser(prog="greedylore", description="Compressed data-parallel optimization simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="execute every run in a plan")
    p.add_argument("plan")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("compare", parents=[common], help="run a plan and write side-by-side loss curves")
    p.add_argument("plan")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("check", help="run named property checks (all when omitted)")
    p.add_argument("property", nargs="?")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBlowup as exc:
        print(f"error: non-finite loss at step {exc.step} ({exc.value!r})", file=sys.stderr)
        return EXIT_NUMERIC
    except ReplicaDivergence as exc:
        print(f"error: replica divergence: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
