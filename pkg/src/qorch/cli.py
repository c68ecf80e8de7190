"""``qorch`` command line: serve, run, qaoa, dqaoa, compare."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import time
from pathlib import Path
from typing import Iterator, Sequence

from . import bench
from .backends.base import BackendRegistry, MpsBackend, StateVectorBackend
from .backends.latency import Delay, LatencyProfile
from .backends.remote import EmulatorProcess, MockRemoteBackend
from .client import ENDPOINT_ENV, Client
from .errors import QorchError
from .execution import BackendSelector
from .server import serve
from .variational import DqaoaConfig, OptimizerSpec, QaoaParams, QuboProblem, dqaoa_solve, qaoa_solve, random_qubo

TIMELINE_COLUMNS = ("iteration", "wall_ms", "jobs_in_flight", "cost")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _delay(text: str) -> Delay:
    try:
        return Delay.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _sizes(text: str) -> list[int]:
    try:
        return bench.parse_sizes(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- service plumbing ----------------------------------------------------------

def _registry(profile: LatencyProfile) -> tuple[BackendRegistry, EmulatorProcess]:
    emu = EmulatorProcess(profile)
    reg = BackendRegistry()
    reg.register(StateVectorBackend())
    reg.register(MpsBackend())
    reg.register(MockRemoteBackend(emu.url, profile))
    return reg, emu


@contextlib.contextmanager
def _client(args: argparse.Namespace) -> Iterator[Client]:
    """Client for ``--endpoint`` / ``$QORCH_ENDPOINT``, or an embedded service with ``--inproc``."""
    if not args.inproc:
        yield Client(os.environ.get(ENDPOINT_ENV) or args.endpoint)
        return
    handle = serve(workers=args.workers)
    try:
        yield Client(handle.url)
    finally:
        handle.close()


def _add_service_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", default="http://127.0.0.1:8087",
                   help=f"orchestrator URL (${ENDPOINT_ENV} overrides)")
    p.add_argument("--inproc", action="store_true", help="embed an orchestrator instead of connecting")
    p.add_argument("--workers", type=_positive_int, default=8, help="workers for --inproc")


# -- commands ------------------------------------------------------------------

def cmd_serve(args: argparse.Namespace) -> int:
    profile = LatencyProfile(args.mock_remote_latency, args.mock_remote_network, args.mock_remote_deadline_ms)
    reg, emu = _registry(profile)
    try:
        handle = serve(workers=args.workers, port=args.port, registry=reg, host=args.host,
                       journal=args.journal)
    except OSError as exc:
        emu.close()
        print(f"qorch serve: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 2
    print(f"qorch orchestrator listening on {handle.url} with {args.workers} workers", flush=True)
    print(f"mock-remote emulator at {emu.url} profile {json.dumps(profile.to_dict())}", flush=True)
    try:
        handle.wait_stopped()
    except KeyboardInterrupt:
        pass
    finally:
        handle.close()
        emu.close()
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    sizes = args.sizes or list(bench.DEFAULT_SIZES[args.workload])
    backends = bench.parse_backends(args.backends)

    def progress(row: bench.BenchRow) -> None:
        status = row.error_code or f"{row.wall_ms:.1f} ms"
        print(f"  {row.workload} n={row.size} {row.backend} rep={row.rep}: {status}", file=sys.stderr)

    with _client(args) as client:
        rows = bench.run_grid(client, args.workload, sizes, backends, args.shots, args.reps, args.seed,
                              args.walltime, args.parallel_cells, args.steps, progress)
    if args.out:
        bench.write_csv(rows, args.out)
    summary = bench.summarize(rows)
    if args.dat:
        bench.write_dat(summary, args.dat)
    print(bench.format_summary(summary))
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _load_qubo(args: argparse.Namespace) -> QuboProblem:
    if args.qubo:
        return QuboProblem.load(args.qubo)
    return random_qubo(args.size, args.seed, args.density)


def _qaoa_params(args: argparse.Namespace) -> QaoaParams:
    return QaoaParams(p=args.p, shots=args.shots,
                      optimizer=OptimizerSpec(max_evals=args.max_evals, tolerance=args.tolerance,
                                              seed=args.seed))


def _write_timeline(rows: Sequence[dict], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=TIMELINE_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{r[k]:.3f}" if isinstance(r[k], float) else r[k]) for k in TIMELINE_COLUMNS})


def _selector(args: argparse.Namespace) -> BackendSelector:
    props = {}
    if getattr(args, "delay_ms", 0):
        props["delay_ms"] = str(args.delay_ms)
    return BackendSelector(args.backend, args.subbackend, props)


def cmd_qaoa(args: argparse.Namespace) -> int:
    q = _load_qubo(args)
    with _client(args) as client:
        t0 = time.perf_counter()
        sol = qaoa_solve(q, _qaoa_params(args), client, _selector(args))
        wall = (time.perf_counter() - t0) * 1e3
    timeline = [{"iteration": r["eval"], "wall_ms": r["wall_ms"], "jobs_in_flight": r["jobs_in_flight"],
                 "cost": r["mean_cost"]} for r in sol.iteration_log]
    if args.out:
        _write_timeline(timeline, args.out)
    if args.json:
        Path(args.json).write_text(json.dumps({"problem": {"size": q.size, "seed": args.seed,
                                                           "density": args.density},
                                               "params": _qaoa_params(args).to_dict(),
                                               "solution": sol.to_dict()}, indent=2))
    fid = "n/a" if sol.fidelity is None else f"{sol.fidelity:.4f}"
    print(f"qaoa N={q.size} p={args.p} backend={args.backend}: cost={sol.cost:.6f} fidelity={fid} "
          f"evals={sol.evals} wall_ms={wall:.1f}")
    print(f"bitstring {sol.bitstring}")
    return 0


def cmd_dqaoa(args: argparse.Namespace) -> int:
    q = _load_qubo(args)
    if args.subqsize > q.size:
        args.parser.error(f"--subqsize {args.subqsize} exceeds problem size {q.size}")
    cfg = DqaoaConfig(args.subqsize, args.nsubq, args.max_iters, args.patience, args.concurrency, args.seed)
    with _client(args) as client:
        t0 = time.perf_counter()
        sol = dqaoa_solve(q, cfg, _qaoa_params(args), client, _selector(args))
        wall = (time.perf_counter() - t0) * 1e3
    if args.out:
        _write_timeline(sol.timeline, args.out)
    if args.json:
        Path(args.json).write_text(json.dumps({"problem": {"size": q.size, "seed": args.seed,
                                                           "density": args.density},
                                               "config": cfg.to_dict(), "params": _qaoa_params(args).to_dict(),
                                               "solution": sol.to_dict()}, indent=2))
    peak = max((r["jobs_in_flight"] for r in sol.timeline), default=0)
    fid = "n/a" if sol.fidelity is None else f"{sol.fidelity:.4f}"
    print(f"dqaoa N={q.size} subqsize={cfg.subqsize} nsubq={cfg.nsubq}: cost={sol.cost:.6f} fidelity={fid} "
          f"iterations={len(sol.iteration_log)} evals={sol.evals} peak_jobs_in_flight={peak} wall_ms={wall:.1f}")
    for r in sol.iteration_log:
        print(f"  iter {r['iteration']}: cost={r['cost']:.6f} jobs_in_flight={r['jobs_in_flight']} "
              f"wall_ms={r['wall_ms']:.1f}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if args.csv:
        rows = [r for path in args.csv for r in bench.read_csv(path)]
    elif args.workload:
        with _client(args) as client:
            rows = bench.run_grid(client, args.workload, args.sizes or list(bench.DEFAULT_SIZES[args.workload]),
                                  bench.parse_backends(args.backends), args.shots, args.reps, args.seed)
    else:
        args.parser.error("give CSV files or --workload for a live grid")
    try:
        print(bench.format_compare(rows, args.format))
    except bench.GridMismatch as exc:
        print(f"qorch compare: {exc}", file=sys.stderr)
        return 2
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qorch", description="Quantum workload orchestration and benchmarks.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the orchestrator and the mock-remote emulator")
    p.add_argument("--workers", type=_positive_int, default=8)
    p.add_argument("--port", type=int, default=8087)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--mock-remote-latency", type=_delay, default=Delay(), metavar="DIST",
                   help="queue delay: fixed:MS, uniform:A,B or lognormal:MU,SIGMA")
    p.add_argument("--mock-remote-network", type=_delay, default=Delay(), metavar="DIST")
    p.add_argument("--mock-remote-deadline-ms", type=float, default=None)
    p.add_argument("--journal", default=None, help="append job transitions to this JSONL file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("run", help="run a workload grid and write CSV")
    p.add_argument("--workload", choices=bench.WORKLOADS, required=True)
    p.add_argument("--sizes", type=_sizes, default=None, help="e.g. 4,8,12 or 4..24:4")
    p.add_argument("--backends", default="sv,mps", help="comma list of backend[:subbackend]")
    p.add_argument("--shots", type=_positive_int, default=1024)
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=_positive_int, default=None, help="Trotter steps for ham/tfim")
    p.add_argument("--out", default=None, help="CSV output path")
    p.add_argument("--dat", default=None, help="gnuplot data output path")
    p.add_argument("--walltime", type=float, default=120.0, help="per-cell limit in seconds")
    p.add_argument("--parallel-cells", type=_positive_int, default=1)
    _add_service_flags(p)
    p.set_defaults(func=cmd_run)

    for name, func in (("qaoa", cmd_qaoa), ("dqaoa", cmd_dqaoa)):
        p = sub.add_parser(name, help=f"solve a random (or given) QUBO with {name.upper()}")
        p.add_argument("--size", type=_positive_int, default=8)
        p.add_argument("--qubo", default=None, help="QUBO JSON file instead of a random instance")
        p.add_argument("--density", type=float, default=0.5)
        p.add_argument("--p", type=_positive_int, default=2)
        p.add_argument("--shots", type=_positive_int, default=1024)
        p.add_argument("--max-evals", type=_positive_int, default=150)
        p.add_argument("--tolerance", type=float, default=1e-3)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--backend", default="sv")
        p.add_argument("--subbackend", default="")
        p.add_argument("--delay-ms", type=float, default=0.0, help="calibration delay added to each job")
        p.add_argument("--out", default=None, help="timeline CSV output path")
        p.add_argument("--json", default=None, help="SolutionRecord JSON output path")
        if name == "dqaoa":
            p.add_argument("--subqsize", type=_positive_int, required=True)
            p.add_argument("--nsubq", type=_positive_int, required=True)
            p.add_argument("--max-iters", type=_positive_int, default=10)
            p.add_argument("--patience", type=_positive_int, default=3)
            p.add_argument("--concurrency", type=_positive_int, default=4)
        _add_service_flags(p)
        p.set_defaults(func=func, parser=p)

    p = sub.add_parser("compare", help="cross-backend wall-time matrix from CSV files or a live grid")
    p.add_argument("csv", nargs="*")
    p.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--workload", choices=bench.WORKLOADS, default=None)
    p.add_argument("--sizes", type=_sizes, default=None)
    p.add_argument("--backends", default="sv,mps")
    p.add_argument("--shots", type=_positive_int, default=1024)
    p.add_argument("--reps", type=_positive_int, default=3)
    p.add_argument("--seed", type=int, default=0)
    _add_service_flags(p)
    p.set_defaults(func=cmd_compare, parser=p)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QorchError as exc:
        print(f"qorch {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
