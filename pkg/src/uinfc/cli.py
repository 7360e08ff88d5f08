"""Command-line front end: ``uinfc simulate|sweep|bounds|validate``."""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bounds import compute_bounds, verify_bounds
from .config import apply_seed_override, build_run, load_config, parse_values, with_sweep_value
from .errors import DivergenceError, InfeasibleError, UinfcError
from .sim import check_practical_stability, simulate

EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE, EXIT_INCONCLUSIVE, EXIT_INFEASIBLE = 0, 1, 2, 3, 4
VERDICT_EXIT = {"stable": EXIT_OK, "unstable": EXIT_UNSTABLE, "inconclusive": EXIT_INCONCLUSIVE}


def _run_one(cfg, out_path):
    """Simulate one configuration, write its CSV, return a summary row."""
    setup = build_run(cfg)
    try:
        log = simulate(setup.run)
    except DivergenceError as exc:
        log = exc.log
    log.to_csv(out_path)
    verdict = check_practical_stability(log, setup.run.r, setup.t_max)
    final_norm = float(np.linalg.norm(log.x[-1]))
    return verdict, final_norm, float(np.min(log.V))


def run_simulate(config_path, out_path):
    cfg = apply_seed_override(load_config(config_path))
    verdict, final_norm, _ = _run_one(cfg, out_path)
    print(f"verdict: {verdict} final_norm={final_norm:.6g}")
    return VERDICT_EXIT[verdict.kind]


def _sweep_job(args):
    cfg, out_path = args
    verdict, final_norm, min_v = _run_one(cfg, out_path)
    return verdict.kind, verdict.t_entry, final_norm, min_v


def run_sweep(config_path, parameter, values_text, out_dir, workers=None):
    cfg = apply_seed_override(load_config(config_path))
    values = parse_values(values_text)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(with_sweep_value(cfg, parameter, v), out / f"run_{i:02d}_{parameter}_{v:g}.csv")
            for i, v in enumerate(values)]
    for job_cfg, _ in jobs:
        build_run(job_cfg)  # validate every job before any work starts
    workers = workers or os.cpu_count() or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    lines = ["value,verdict,T_entry,final_norm,min_V"]
    for v, (kind, t_entry, final_norm, min_v) in zip(values, results):
        t_text = "" if t_entry is None else f"{t_entry:.17g}"
        lines.append(f"{v:.17g},{kind},{t_text},{final_norm:.17g},{min_v:.17g}")
        print(f"{parameter}={v:g}: {kind}" + (f" T_entry={t_entry:g}" if t_entry is not None else ""))
    (out / "summary.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def run_bounds(config_path, out_path):
    cfg = apply_seed_override(load_config(config_path))
    setup = build_run(cfg)
    run = setup.run
    try:
        report = compute_bounds(run.clf, run.dyn, setup.bounds_R, setup.bounds_r, run.meas_noise.bound,
                                run.dist_noise.bound, run.params.alpha, run.params.input_set,
                                setup.estimation)
    except InfeasibleError as exc:
        print(f"{exc}\nbinding constraint: {exc.constraint}", file=sys.stderr)
        for k, v in exc.partial.items():
            print(f"  {k} = {v!r}", file=sys.stderr)
        return EXIT_INFEASIBLE
    Path(out_path).write_text(report.to_text())
    ok = verify_bounds(report)
    print(f"delta_bar = {report.delta_bar:.6g}, eps_bar = {report.eps_bar:.6g}, checks {'OK' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ERROR


def run_validate(list_only=False, corrupt_zeta=False):
    from .validate import SUITE, run_suite

    if list_only:
        for name, _ in SUITE:
            print(name)
        return EXIT_OK
    ok = run_suite(corrupt_zeta=corrupt_zeta)
    return EXIT_OK if ok else EXIT_ERROR


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with every other error; 2 means "unstable"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _parser():
    p = _Parser(prog="uinfc", description="Inf-convolution sample-and-hold control.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate", help="run one closed-loop simulation")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--workers", type=int, default=None)
    s = sub.add_parser("bounds", help="compute the certified bounds report")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s = sub.add_parser("validate", help="run the built-in property suite")
    s.add_argument("--list", action="store_true")
    s.add_argument("--corrupt-zeta", action="store_true", help=argparse.SUPPRESS)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return run_simulate(args.config, args.out)
        if args.command == "sweep":
            return run_sweep(args.config, args.param, args.values, args.out_dir, args.workers)
        if args.command == "bounds":
            return run_bounds(args.config, args.out)
        return run_validate(args.list, args.corrupt_zeta)
    except (UinfcError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
