"""Benchmark grid runner: workloads x sizes x backends x reps, written as CSV rows."""

from __future__ import annotations

import csv
import json
import math
import re
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TextIO

import numpy as np

from . import workloads as wl
from .circuit import Circuit
from .client import Client
from .errors import QorchError, WaitTimeout
from .execution import BackendSelector, ExecutionResult
from .statevector import marginal_probabilities, sv_evolve

CSV_COLUMNS = ("workload", "size", "backend", "subbackend", "shots", "rep", "wall_ms", "queue_ms",
               "exec_ms", "fidelity", "extra_json", "error_code")
WORKLOADS = ("ghz", "ham", "tfim", "hhl")
DEFAULT_SIZES = {"ghz": wl.GHZ_SIZES, "ham": wl.HAM_SIZES, "tfim": wl.TFIM_SIZES, "hhl": wl.HHL_SIZES}
# exact references are computed locally up to this size; beyond it 1024 shots
# cannot resolve the distribution and the sampled Hellinger score is meaningless
REFERENCE_MAX_QUBITS = 12


@dataclass
class BenchRow:
    workload: str
    size: int
    backend: str
    subbackend: str
    shots: int
    rep: int
    wall_ms: float
    queue_ms: float = 0.0
    exec_ms: float = 0.0
    fidelity: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    error_code: str = ""

    def to_csv(self) -> dict[str, str]:
        return {
            "workload": self.workload, "size": str(self.size), "backend": self.backend,
            "subbackend": self.subbackend, "shots": str(self.shots), "rep": str(self.rep),
            "wall_ms": f"{self.wall_ms:.3f}", "queue_ms": f"{self.queue_ms:.3f}",
            "exec_ms": f"{self.exec_ms:.3f}",
            "fidelity": "" if self.fidelity is None else f"{self.fidelity:.6f}",
            "extra_json": json.dumps(self.extra, sort_keys=True), "error_code": self.error_code,
        }

    @classmethod
    def from_csv(cls, d: dict[str, str]) -> BenchRow:
        return cls(d["workload"], int(d["size"]), d["backend"], d["subbackend"], int(d["shots"]),
                   int(d["rep"]), float(d["wall_ms"]), float(d["queue_ms"]), float(d["exec_ms"]),
                   float(d["fidelity"]) if d["fidelity"] else None, json.loads(d["extra_json"] or "{}"),
                   d["error_code"])

    @property
    def ok(self) -> bool:
        return not self.error_code


def write_csv(rows: Iterable[BenchRow], out: str | Path | TextIO) -> None:
    def dump(fh: TextIO) -> None:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(r.to_csv())

    if isinstance(out, (str, Path)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            dump(fh)
    else:
        dump(out)


def read_csv(path: str | Path) -> list[BenchRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [BenchRow.from_csv(d) for d in reader]


_RANGE = re.compile(r"^(\d+)\.\.(\d+)(?::(\d+))?$")


def parse_sizes(text: str) -> list[int]:
    """``"4,8,12"`` or ``"4..24:4"`` (inclusive range with step), or a mix of both."""
    out: list[int] = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        m = _RANGE.match(part)
        if m:
            lo, hi, step = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
            if step < 1 or hi < lo:
                raise ValueError(f"bad size range {part!r}")
            out += list(range(lo, hi + 1, step))
        else:
            out.append(int(part))
    if not out:
        raise ValueError("no sizes given")
    return out


def parse_backends(text: str) -> list[BackendSelector]:
    """``"sv,mps"`` or ``"mps:mps-chi32"`` entries (backend[:subbackend])."""
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, _, sub = part.partition(":")
        out.append(BackendSelector(name, sub))
    if not out:
        raise ValueError("no backends given")
    return out


# -- workload cells ------------------------------------------------------------

@dataclass
class Cell:
    circuit: Circuit
    extra: dict[str, Any]
    score: Callable[[ExecutionResult], float | None]


def _hellinger(counts: dict[str, int], probs: np.ndarray, shots: int) -> float:
    width = int(math.log2(len(probs)))
    total = 0.0
    for key, v in counts.items():
        total += math.sqrt(v / shots * probs[int(key, 2)]) if len(key) == width else 0.0
    return total * total


def _reference_score(c: Circuit) -> Callable[[ExecutionResult], float | None]:
    if c.num_qubits > REFERENCE_MAX_QUBITS:
        return lambda r: None
    probs = marginal_probabilities(sv_evolve(c), c.measured_qubits)
    return lambda r: _hellinger(r.counts, probs, r.shots)


def build_cell(workload: str, size: int, steps: int | None = None) -> Cell:
    """Circuit, recorded parameters and a scoring function for one grid point.

    Fidelity is the share of shots on the two GHZ outcomes for ``ghz``, the
    Hellinger fidelity of the sampled distribution to the exact one for
    ``ham``/``tfim`` (up to ``REFERENCE_MAX_QUBITS``), and ``1 - TV`` of the
    post-selected HHL solution against the classical one.
    """
    if workload == "ghz":
        c = wl.build_ghz(size)
        good = ("0" * size, "1" * size)
        return Cell(c, {}, lambda r: sum(r.counts.get(k, 0) for k in good) / r.shots)
    if workload == "ham":
        s = steps or wl.default_steps(size)
        c = wl.build_ham(size, s)
        return Cell(c, {"steps": s, "J": 1.0, "h": 1.0, "t": 1.0}, _reference_score(c))
    if workload == "tfim":
        spec = wl.TfimSpec(size, steps=steps)
        c = wl.build_tfim(spec)
        extra = {"steps": spec.steps, "J": spec.J, "h": spec.h, "t": spec.t, "boundary": spec.boundary,
                 "order": spec.order}
        return Cell(c, extra, _reference_score(c))
    if workload == "hhl":
        p = wl.hhl_benchmark_problem(size)
        c = wl.build_hhl(p)
        ref = p.classical_distribution()

        def score(r: ExecutionResult) -> float | None:
            kept, accepted = wl.hhl_postselect(r.counts)
            if not accepted:
                return None
            got = np.zeros(len(ref))
            for k, v in kept.items():
                got[int(k, 2)] = v / accepted
            return float(1 - 0.5 * np.abs(got - ref).sum())

        return Cell(c, {"n_b": p.n_b, "n_clock": p.n_clock, "t0": p.evolution_time,
                        "C": p.rotation_constant}, score)
    raise ValueError(f"unknown workload {workload!r}; choose from {', '.join(WORKLOADS)}")


# -- grid ----------------------------------------------------------------------

def run_cell(client: Client, workload: str, size: int, sel: BackendSelector, shots: int, rep: int,
             seed: int, cell: Cell | Exception, walltime_s: float) -> BenchRow:
    row = BenchRow(workload, size, sel.backend, sel.subbackend, shots, rep, 0.0)
    if isinstance(cell, Exception):
        row.error_code = "build_failed"
        row.extra = {"error": str(cell)}
        return row
    row.extra = dict(cell.extra, seed=seed)
    t0 = time.perf_counter()
    job = None
    try:
        job = client.submit(cell.circuit, shots, sel, seed)
        res = client.wait(job, walltime_s * 1e3)
    except WaitTimeout:
        if job is not None:
            try:
                client.cancel(job)
            except QorchError:
                pass
        row.wall_ms = (time.perf_counter() - t0) * 1e3
        row.error_code = "walltime_exceeded"
        return row
    except QorchError as exc:
        row.wall_ms = (time.perf_counter() - t0) * 1e3
        row.error_code = getattr(exc, "code", "error")
        row.extra["error"] = str(exc)
        return row
    row.wall_ms = (time.perf_counter() - t0) * 1e3
    row.queue_ms, row.exec_ms = res.queue_ms, res.exec_ms
    row.subbackend = row.subbackend or ""
    row.fidelity = cell.score(res)
    return row


def run_grid(client: Client, workload: str, sizes: Sequence[int], backends: Sequence[BackendSelector],
             shots: int = 1024, reps: int = 3, seed: int = 0, walltime_s: float = 120.0,
             parallel_cells: int = 1, steps: int | None = None,
             progress: Callable[[BenchRow], None] | None = None) -> list[BenchRow]:
    """One row per (size, backend, rep); failures become error-coded rows and the grid continues."""
    cells: dict[int, Cell | Exception] = {}
    for n in sizes:
        try:
            cells[n] = build_cell(workload, n, steps)
        except (ValueError, QorchError) as exc:
            cells[n] = exc
    plan = [(n, sel, rep) for n in sizes for sel in backends for rep in range(reps)]

    def one(item: tuple[int, BackendSelector, int]) -> BenchRow:
        n, sel, rep = item
        row = run_cell(client, workload, n, sel, shots, rep, seed + rep, cells[n], walltime_s)
        if progress is not None:
            progress(row)
        return row

    if parallel_cells <= 1:
        return [one(item) for item in plan]
    with ThreadPoolExecutor(max_workers=parallel_cells) as pool:
        return list(pool.map(one, plan))


def summarize(rows: Sequence[BenchRow]) -> list[dict[str, Any]]:
    """Mean and sample standard deviation of ``wall_ms`` per (workload, size, backend)."""
    groups: dict[tuple[str, int, str, str], list[BenchRow]] = {}
    for r in rows:
        groups.setdefault((r.workload, r.size, r.backend, r.subbackend), []).append(r)
    out = []
    for (w, n, b, sub), rs in groups.items():
        ok = [r.wall_ms for r in rs if r.ok]
        fids = [r.fidelity for r in rs if r.ok and r.fidelity is not None]
        out.append({
            "workload": w, "size": n, "backend": b, "subbackend": sub, "reps": len(ok),
            "mean_ms": statistics.fmean(ok) if ok else None,
            "std_ms": statistics.stdev(ok) if len(ok) > 1 else (0.0 if ok else None),
            "fidelity": statistics.fmean(fids) if fids else None,
            "errors": sorted({r.error_code for r in rs if not r.ok}),
        })
    return out


def format_summary(summary: Sequence[dict[str, Any]]) -> str:
    lines = [f"{'workload':<8} {'size':>4} {'backend':<22} {'wall_ms (mean ± std)':>24} {'fidelity':>9}"]
    for s in summary:
        label = s["backend"] + (f":{s['subbackend']}" if s["subbackend"] else "")
        if s["mean_ms"] is None:
            timing = "error: " + ",".join(s["errors"])
        else:
            timing = f"{s['mean_ms']:.1f} ± {s['std_ms']:.1f}"
        fid = "" if s["fidelity"] is None else f"{s['fidelity']:.4f}"
        lines.append(f"{s['workload']:<8} {s['size']:>4} {label:<22} {timing:>24} {fid:>9}")
    return "\n".join(lines)


def write_dat(summary: Sequence[dict[str, Any]], path: str | Path) -> None:
    """Gnuplot-friendly blocks: one per backend, columns ``size mean std``."""
    by_backend: dict[str, list[dict[str, Any]]] = {}
    for s in summary:
        label = s["backend"] + (f":{s['subbackend']}" if s["subbackend"] else "")
        by_backend.setdefault(label, []).append(s)
    with open(path, "w", encoding="utf-8") as fh:
        for label, items in by_backend.items():
            fh.write(f"# backend {label}\n# size mean_ms std_ms\n")
            for s in sorted(items, key=lambda s: s["size"]):
                if s["mean_ms"] is not None:
                    fh.write(f"{s['size']} {s['mean_ms']:.3f} {s['std_ms']:.3f}\n")
            fh.write("\n\n")


# -- cross-backend comparison ----------------------------------------------------

class GridMismatch(ValueError):
    pass


def compare_rows(rows: Sequence[BenchRow]) -> tuple[list[int], list[str], dict[tuple[int, str], float | None]]:
    """Per-size, per-backend mean wall_ms. Every backend must cover the same sizes."""
    labels: dict[str, set[int]] = {}
    values: dict[tuple[int, str], list[float]] = {}
    for r in rows:
        label = r.backend + (f":{r.subbackend}" if r.subbackend else "")
        labels.setdefault(label, set()).add(r.size)
        bucket = values.setdefault((r.size, label), [])
        if r.ok:
            bucket.append(r.wall_ms)
    if not labels:
        raise GridMismatch("no rows to compare")
    size_sets = {frozenset(s) for s in labels.values()}
    if len(size_sets) > 1:
        detail = "; ".join(f"{b}: {sorted(s)}" for b, s in sorted(labels.items()))
        raise GridMismatch(f"backends cover different size sets ({detail})")
    sizes = sorted(next(iter(size_sets)))
    backends = sorted(labels)
    means = {k: (statistics.fmean(v) if v else None) for k, v in values.items()}
    return sizes, backends, means


def fastest(sizes: Sequence[int], backends: Sequence[str],
            means: dict[tuple[int, str], float | None]) -> dict[int, str | None]:
    out = {}
    for n in sizes:
        done = [(means[(n, b)], b) for b in backends if means.get((n, b)) is not None]
        out[n] = min(done)[1] if done else None
    return out


def format_compare(rows: Sequence[BenchRow], fmt: str = "markdown") -> str:
    sizes, backends, means = compare_rows(rows)
    best = fastest(sizes, backends, means)
    if fmt == "csv":
        lines = ["size," + ",".join(backends) + ",fastest"]
        for n in sizes:
            cells = ["" if means.get((n, b)) is None else f"{means[(n, b)]:.3f}" for b in backends]
            lines.append(f"{n}," + ",".join(cells) + f",{best[n] or ''}")
        return "\n".join(lines)
    lines = ["| size | " + " | ".join(backends) + " |", "|---:|" + "---:|" * len(backends)]
    for n in sizes:
        cells = []
        for b in backends:
            m = means.get((n, b))
            if m is None:
                cells.append("error")
            else:
                cells.append(f"**{m:.1f}**" if best[n] == b else f"{m:.1f}")
        lines.append(f"| {n} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append("mean wall_ms; fastest backend per size in bold")
    return "\n".join(lines)
