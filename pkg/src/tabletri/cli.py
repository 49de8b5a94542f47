"""Command-line front end: ``gen``, ``count``, ``bench`` and ``stats``."""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .generator import GraphSpec, format_tsv, generate, load_tsv
from .kvengine import Engine, EngineError
from .oracle import brute_force_triangles, nppf_oracle_adjacency, skew_report
from .schema import (
    EdgeList,
    FixedWidthCodec,
    build_incidence,
    build_lower_adjacency,
    build_upper_adjacency,
    decode_vertex,
    get_codec,
)
from .tricount import (
    TriangleResult,
    ValidationError,
    count_adj_incidence,
    count_adjacency_only,
    count_hybrid,
)

ALGOS = ("adj", "adjinc", "hybrid", "oracle")
METRIC_COLUMNS = ["nedges", "nppf", "time_s", "rate", "matmul_s", "reduce_s", "triangles"]
BENCH_HEADER = ["scale", "algo"] + METRIC_COLUMNS
COUNT_HEADER = ["name", "algo"] + METRIC_COLUMNS


class CliError(Exception):
    pass


@dataclass(frozen=True)
class RunMetrics:
    name: str
    algo: str
    nedges: int
    nppf: int
    runtime_seconds: float
    matmul_seconds: float
    reduce_seconds: float
    triangles: int

    @property
    def rate(self) -> float:
        # partial products are touched once by the multiply and once by the reduce
        if self.runtime_seconds > 0:
            return 2 * self.nppf / self.runtime_seconds
        return 0.0 if self.nppf == 0 else math.inf

    def row(self) -> list:
        return [self.name, self.algo, self.nedges, self.nppf, self.runtime_seconds, self.rate,
                self.matmul_seconds, self.reduce_seconds, self.triangles]


def parse_threshold(text: str, g: EdgeList) -> Optional[int]:
    """``inf`` -> no high-degree rows, ``mean`` -> floor(2m/n), else a non-negative int."""
    t = text.strip().lower()
    if t in ("inf", "infinity", "none"):
        return None
    if t == "mean":
        return int(2 * g.nedges / g.n_vertices) if g.n_vertices else 0
    try:
        value = int(t)
    except ValueError:
        raise CliError(f"bad threshold {text!r}: expected an integer, 'mean' or 'inf'") from None
    if value < 0:
        raise CliError(f"threshold must be >= 0, got {value}")
    return value


def parse_scales(text: str) -> list[int]:
    """``10..13``, ``10,12`` or empty."""
    out: list[int] = []
    for part in text.replace(" ", "").split(","):
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def run_algorithm(g: EdgeList, algo: str, name: str = "", tablets: int = 24,
                  threshold: str = "mean", reps: int = 3, workers: int = 1,
                  encoding: str = "fixed") -> RunMetrics:
    """Build the tables ``algo`` needs once, then time ``reps`` runs and keep the fastest."""
    if algo not in ALGOS:
        raise CliError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGOS)}")
    if reps < 1:
        raise CliError("--reps must be >= 1")
    if tablets < 1:
        raise CliError("--tablets must be >= 1")
    codec = get_codec(encoding)
    if algo == "adjinc" and codec is not FixedWidthCodec:
        raise CliError("adjinc needs the fixed-width encoding: edge labels compare 4-byte vertex prefixes")

    if algo == "oracle":
        best = None
        for _ in range(reps):
            t0 = time.perf_counter()
            tri = brute_force_triangles(g)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        key = None if codec is FixedWidthCodec else codec.encode
        return RunMetrics(name, algo, g.nedges, nppf_oracle_adjacency(g, key), best, best, 0.0, tri)

    engine = Engine(workers=workers)
    if algo == "adjinc":
        al = build_lower_adjacency(g, engine, tablets)
        e = build_incidence(g, engine, tablets)
        run = lambda: count_adj_incidence(al, e, engine)
    else:
        a = build_upper_adjacency(g, engine, tablets, codec=codec)
        if algo == "adj":
            run = lambda: count_adjacency_only(a, engine)
        else:
            tau = parse_threshold(threshold, g)
            run = lambda: count_hybrid(a, tau, engine)

    best: Optional[TriangleResult] = None
    for _ in range(reps):
        r = run()
        if best is not None and r.triangles != best.triangles:
            raise CliError(f"repetitions disagree: {best.triangles} vs {r.triangles} triangles")
        if best is None or r.runtime_seconds < best.runtime_seconds:
            best = r
    return RunMetrics(name, algo, g.nedges, best.nppf, best.runtime_seconds,
                      best.matmul_seconds, best.reduce_seconds, best.triangles)


def write_csv(out, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        # repr keeps every float digit and ignores locale
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return None
    return open(path, "w", newline="", encoding="utf-8")


def format_table(metrics: Sequence[RunMetrics], algos: Sequence[str]) -> str:
    """One line per scale; nppf, time and rate side by side per algorithm."""
    by_scale: dict[str, dict[str, RunMetrics]] = {}
    for m in metrics:
        by_scale.setdefault(m.name, {})[m.algo] = m
    head = f"{'SCALE':>5} {'nedges':>10}"
    for a in algos:
        head += f" | {a + ' nppf':>14} {'time(s)':>9} {'rate(/s)':>14}"
    lines = [head, "-" * len(head)]
    for scale, row in by_scale.items():
        nedges = next(iter(row.values())).nedges
        line = f"{scale:>5} {nedges:>10}"
        for a in algos:
            m = row.get(a)
            if m is None:
                line += f" | {'':>14} {'':>9} {'':>14}"
            else:
                line += f" | {m.nppf:>14} {m.runtime_seconds:>9.3f} {m.rate:>14.1f}"
        lines.append(line)
    return "\n".join(lines)


# -- subcommands -------------------------------------------------------------

def cmd_gen(args) -> int:
    spec = GraphSpec(scale=args.scale, edge_factor=args.edge_factor, seed=args.seed)
    g = generate(spec, workers=args.workers)
    text = format_tsv(g)
    if args.out in (None, "-"):
        sys.stdout.write(text)
        print(f"nedges {g.nedges}", file=sys.stderr)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        print(f"nedges {g.nedges}")
    return 0


def cmd_count(args) -> int:
    g = load_tsv(args.input)
    name = os.path.splitext(os.path.basename(args.input))[0]
    m = run_algorithm(g, args.algo, name=name, tablets=args.tablets, threshold=args.threshold,
                      reps=args.reps, workers=args.workers, encoding=args.encoding)
    print(f"{m.algo}: triangles={m.triangles} nedges={m.nedges} nppf={m.nppf} "
          f"time_s={m.runtime_seconds:.4f} rate={m.rate:.1f} "
          f"matmul_s={m.matmul_seconds:.4f} reduce_s={m.reduce_seconds:.4f}")
    out = _open_out(args.out)
    if out is not None:
        with out:
            write_csv(out, COUNT_HEADER, [m.row()])
    return 0


def cmd_bench(args) -> int:
    scales = parse_scales(args.scale)
    algos = [a for a in args.algo.split(",") if a]
    for a in algos:
        if a not in ALGOS:
            raise CliError(f"unknown algorithm {a!r}; choose from {', '.join(ALGOS)}")
    metrics = []
    for s in scales:
        g = generate(GraphSpec(scale=s, edge_factor=args.edge_factor, seed=args.seed), workers=args.workers)
        row = [run_algorithm(g, a, name=str(s), tablets=args.tablets, threshold=args.threshold,
                             reps=args.reps, workers=args.workers, encoding=args.encoding)
               for a in algos]
        counts = {m.triangles for m in row}
        if len(counts) > 1:
            raise CliError(f"scale {s}: algorithms disagree on triangles: {sorted(counts)}")
        metrics.extend(row)
    rows = [[m.name] + m.row()[1:] for m in metrics]
    out = _open_out(args.out)
    if out is None:
        write_csv(sys.stdout, BENCH_HEADER, rows)
    else:
        with out:
            write_csv(out, BENCH_HEADER, rows)
    print(format_table(metrics, algos), file=sys.stderr if out is None else sys.stdout)
    return 0


def cmd_stats(args) -> int:
    g = load_tsv(args.input)
    engine = Engine()
    a = build_upper_adjacency(g, engine, args.tablets)
    splits = [decode_vertex(b) for b in a.splits.boundaries]
    tau = None if args.threshold is None else parse_threshold(args.threshold, g)
    rep = skew_report(g, splits, threshold=tau)
    print(f"vertices {g.n_vertices} edges {g.nedges}")
    print(f"max_degree {rep.max_degree} mean_degree {rep.mean_degree:.4f}")
    print("degree histogram (degree: vertices)")
    for d, n in rep.degree_histogram.items():
        print(f"  {d}: {n}")
    print("per-tablet wedge load")
    for i, load in enumerate(rep.per_tablet_load):
        print(f"  tablet {i}: {load}")
    print(f"imbalance_ratio {rep.imbalance_ratio:.4f}")
    out = _open_out(args.out)
    if out is not None:
        with out:
            write_csv(out, ["tablet", "load"], list(enumerate(rep.per_tablet_load)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tabletri", description="Triangle counting on a sorted key-value tablet engine")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=True):
        sp.add_argument("--tablets", type=int, default=24, help="at most this many tablets per table")
        sp.add_argument("--reps", type=int, default=3, help="repetitions; the best time is reported")
        sp.add_argument("--threshold", default="mean", help="hybrid degree threshold: int, 'mean' or 'inf'")
        sp.add_argument("--encoding", default="fixed", help="vertex encoding: fixed or decimal-string")
        if workers:
            sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--out", default=None, help="CSV output path")

    g = sub.add_parser("gen", help="generate an RMAT graph as a TSV edge list")
    g.add_argument("--scale", type=int, required=True)
    g.add_argument("--edge-factor", type=int, default=16)
    g.add_argument("--seed", type=int, default=GraphSpec.seed)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out", default=None, help="TSV path (default stdout)")
    g.set_defaults(fn=cmd_gen)

    c = sub.add_parser("count", help="count triangles of a TSV graph")
    c.add_argument("input")
    c.add_argument("--algo", required=True, choices=ALGOS)
    common(c)
    c.set_defaults(fn=cmd_count)

    b = sub.add_parser("bench", help="generate and count over a range of scales")
    b.add_argument("--scale", default="10..13", help="e.g. 10..13 or 10,12")
    b.add_argument("--algo", default="adj,adjinc", help="comma-separated algorithms")
    b.add_argument("--edge-factor", type=int, default=16)
    b.add_argument("--seed", type=int, default=GraphSpec.seed)
    common(b)
    b.set_defaults(fn=cmd_bench)

    s = sub.add_parser("stats", help="degree and per-tablet load report")
    s.add_argument("input")
    s.add_argument("--tablets", type=int, default=24)
    s.add_argument("--threshold", default=None, help="leave out rows above this degree ('mean', 'inf' or int)")
    s.add_argument("--out", default=None, help="CSV output path")
    s.set_defaults(fn=cmd_stats)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ValidationError, EngineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
