"""Command line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every command accepts ``--config FILE`` with ``key = value`` lines whose keys
are option names; explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mmio
from .errors import CoresetError
from .evaluation import cost_ratio, evaluate, optimal_cost_comparison
from .generate import low_rank_sparse
from .ifa import VectorOracle, frank_wolfe
from .matrix import SparseMatrix
from .onemean import one_mean_coreset
from .streaming import DEFAULT_CHUNK, leaf_epsilon, parallel_build, stream_rows
from .svd_coreset import CoresetResult, svd_coreset

log = logging.getLogger("svdcoreset")

COMMANDS = ("ifa", "one-mean", "svd-coreset", "stream", "evaluate", "bench", "gen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    input_path: str | None = None
    output_path: str | None = None
    k: int = 5
    epsilon: float = 0.25
    seed: int = 0
    chunk_size: int = DEFAULT_CHUNK
    n_queries: int = 100
    max_iter: int = 1000
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise UsageError(f"--epsilon must lie in (0, 1], got {self.epsilon}")
        if self.k < 1:
            raise UsageError(f"--k must be >= 1, got {self.k}")
        if self.chunk_size < 1 or self.n_queries < 1 or self.max_iter < 1:
            raise UsageError("--chunk-size, --queries and --max-iter must be positive")

    def get(self, key, default=None):
        return self.extra.get(key, default)


def load_config_file(path) -> dict:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        cfg[key.lstrip("-").replace("-", "_")] = value
    return cfg


def _common(p, *, inp=True, out=True):
    if inp:
        p.add_argument("-i", "--input", dest="input_path", help="input Matrix Market file")
    if out:
        p.add_argument("-o", "--output", dest="output_path", help="output file (written atomically)")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--config", help="key = value file with option defaults")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="svdcoreset", description="Deterministic coresets for sparse matrices.",
                     formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="synthesize a sparse rank-r plus noise matrix", formatter_class=fmt)
    _common(p, inp=False)
    p.add_argument("--n", type=int, default=2000, help="rows")
    p.add_argument("--d", type=int, default=100, help="columns")
    p.add_argument("--rank", type=int, default=5, help="signal rank")
    p.add_argument("--noise", type=float, default=0.01, help="relative noise level")
    p.add_argument("--row-nnz", type=int, default=None, help="cap on stored entries per row")

    p = sub.add_parser("ifa", help="sparse approximation of the mean of the unit-normalized rows",
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.1, help="target residual")
    p.add_argument("--max-iter", type=int, default=1000, help="iteration cap")
    p.add_argument("--start", choices=("first", "nearest"), default="first", help="start vertex")
    p.add_argument("--trace", help="also write the iteration trace as JSON")

    p = sub.add_parser("one-mean", help="1-mean coreset", formatter_class=fmt)
    _common(p)
    p.add_argument("--epsilon", type=float, default=0.2, help="relative error for every center")
    p.add_argument("--exact", action="store_true", help="exact Caratheodory construction")

    p = sub.add_parser("svd-coreset", help="(eps, k)-coreset for k-subspace queries", formatter_class=fmt)
    _common(p)
    p.add_argument("--k", type=int, default=5, help="subspace dimension")
    p.add_argument("--epsilon", type=float, default=0.25, help="nominal error")
    p.add_argument("--max-iter", dest="budget", type=int, default=None,
                   help="cap below the ceil(k/eps^2) step budget")
    p.add_argument("--workers", type=int, default=1, help="shard-parallel construction")
    p.add_argument("--rows-out", help="write the weighted rows as Matrix Market")

    p = sub.add_parser("stream", help="one-pass merge-and-reduce coreset", formatter_class=fmt)
    _common(p)
    p.add_argument("--k", type=int, default=5, help="subspace dimension")
    p.add_argument("--epsilon", type=float, default=0.25, help="nominal error")
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK, help="rows per leaf")
    p.add_argument("--leaf-epsilon", default=None,
                   help="per-reduction epsilon: a number, or 'auto' for eps/(2*levels)")
    p.add_argument("--d", type=int, default=None, help="column count (required for NDJSON input)")
    p.add_argument("--rows-out", help="write the weighted rows as Matrix Market")

    p = sub.add_parser("evaluate", help="query-error report for a coreset", formatter_class=fmt)
    _common(p)
    p.add_argument("--coreset", required=False, help="coreset JSON from svd-coreset or stream")
    p.add_argument("--queries", dest="n_queries", type=int, default=100, help="random query subspaces")
    p.add_argument("--csv", help="write per-query errors as CSV")
    p.add_argument("--timing", action="store_true", help="include wall times in the JSON report")

    p = sub.add_parser("bench", help="generate, build and evaluate in one run", formatter_class=fmt)
    _common(p, inp=False)
    p.add_argument("--n", type=int, default=2000, help="rows")
    p.add_argument("--d", type=int, default=100, help="columns")
    p.add_argument("--rank", type=int, default=5, help="signal rank")
    p.add_argument("--noise", type=float, default=0.01, help="relative noise level")
    p.add_argument("--k", type=int, default=5, help="subspace dimension")
    p.add_argument("--epsilon", type=float, default=0.25, help="nominal error")
    p.add_argument("--queries", dest="n_queries", type=int, default=100, help="random query subspaces")
    p.add_argument("--repeat", type=int, default=3, help="timed repetitions of the build")
    return parser


def parse_config(argv) -> RunConfig:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = load_config_file(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        # keys may name either the flag ("max-iter") or its destination
        known = {a.dest: a for a in sub._actions}
        for a in sub._actions:
            for opt in a.option_strings:
                if opt.startswith("--"):
                    known.setdefault(opt[2:].replace("-", "_"), a)
        unknown = set(cfg) - set(known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        typed = {}
        for key, raw in cfg.items():
            action = known[key]
            if action.type is not None:
                typed[action.dest] = action.type(raw)
            elif action.const is True:
                typed[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            else:
                typed[action.dest] = raw
        sub.set_defaults(**typed)
        args = parser.parse_args(argv)
    ns = vars(args)
    base = {f: ns.pop(f) for f in ("command", "input_path", "output_path", "seed") if f in ns}
    for f in ("k", "epsilon", "chunk_size", "n_queries", "max_iter"):
        if f in ns and ns[f] is not None:
            base[f] = ns.pop(f)
        else:
            ns.pop(f, None)
    ns.pop("config", None)
    return RunConfig(**base, extra=ns)


def _require(cfg: RunConfig, *names):
    for n in names:
        if getattr(cfg, n, None) is None and cfg.get(n) is None:
            raise UsageError(f"{cfg.command}: missing --{n.replace('_path', '').replace('_', '-')}")


def _read_input(cfg) -> SparseMatrix:
    _require(cfg, "input_path")
    return mmio.read_matrix_market(cfg.input_path)


def _emit(cfg, obj):
    if cfg.output_path:
        mmio.write_json(cfg.output_path, obj)
    else:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_gen(cfg):
    _require(cfg, "output_path")
    A = low_rank_sparse(cfg.get("n"), cfg.get("d"), cfg.get("rank"), cfg.get("noise"), cfg.seed,
                        row_nnz=cfg.get("row_nnz"))
    comment = f"gen n={A.n_rows} d={A.n_cols} rank={cfg.get('rank')} noise={cfg.get('noise')} seed={cfg.seed}"
    mmio.write_matrix_market(cfg.output_path, A, comment)
    log.info("wrote %s (%d nnz)", cfg.output_path, A.nnz)


def cmd_ifa(cfg):
    A = _read_input(cfg)
    P = A.to_dense()
    norms = np.linalg.norm(P, axis=1)
    if np.any(norms == 0):
        raise CoresetError("ifa: input has all-zero rows, which cannot be normalized")
    w, trace = frank_wolfe(VectorOracle(P / norms[:, None]), None, cfg.epsilon, cfg.max_iter,
                           start=cfg.get("start", "first"))
    _emit(cfg, w.to_dict())
    if cfg.get("trace"):
        mmio.write_json(cfg.get("trace"), trace.to_dict())


def cmd_one_mean(cfg):
    A = _read_input(cfg)
    cs = one_mean_coreset(A, cfg.epsilon, method="exact" if cfg.get("exact") else "fw")
    _emit(cfg, cs.to_dict())


def _write_rows(cfg, A, cs):
    if cfg.get("rows_out"):
        mmio.write_matrix_market(cfg.get("rows_out"), cs.weighted_rows(A),
                                 comment="coreset rows: diag(row_weights) @ A[indices]")


def cmd_svd_coreset(cfg):
    A = _read_input(cfg)
    workers = cfg.get("workers", 1)
    if workers > 1:
        cs = parallel_build(A, cfg.k, cfg.epsilon, n_workers=workers, seed=cfg.seed)
    else:
        cs = svd_coreset(A, cfg.k, cfg.epsilon, seed=cfg.seed, max_iter=cfg.get("budget"))
    _emit(cfg, cs.to_dict())
    _write_rows(cfg, A, cs)


def cmd_stream(cfg):
    _require(cfg, "input_path")
    path = cfg.input_path
    if str(path).endswith((".ndjson", ".jsonl")):
        d = cfg.get("d")
        if d is None:
            raise UsageError("stream: --d is required for NDJSON input")
        rows, n_hint = mmio.iter_ndjson_rows(path, d), None
    else:
        n_hint, d, _ = mmio.matrix_market_shape(path)
        rows = mmio.iter_matrix_market_rows(path)
    leaf = cfg.get("leaf_epsilon")
    if leaf == "auto":
        leaf = leaf_epsilon(cfg.epsilon, n_hint, cfg.chunk_size)
    elif leaf is not None:
        leaf = float(leaf)
    cs, state = stream_rows(rows, d, cfg.k, cfg.epsilon, cfg.chunk_size, leaf, cfg.seed)
    cs.meta["peak_rows"] = state.peak_rows
    _emit(cfg, cs.to_dict())
    if cfg.get("rows_out"):
        A = mmio.read_matrix_market(path) if n_hint is not None else None
        if A is None:
            raise UsageError("stream: --rows-out needs Matrix Market input")
        _write_rows(cfg, A, cs)


def cmd_evaluate(cfg):
    A = _read_input(cfg)
    _require(cfg, "coreset")
    cs = CoresetResult.from_dict(mmio.read_json(cfg.get("coreset")))
    report = evaluate(A, cs, cfg.n_queries, cfg.seed)
    _emit(cfg, report.to_dict(timing=bool(cfg.get("timing"))))
    if cfg.output_path:
        print(report.table())
    if cfg.get("csv"):
        with mmio.atomic_write(cfg.get("csv")) as fh:
            fh.write("query,kind,rel_error\n")
            kinds = ["random"] * cfg.n_queries + ["optimal", "worst"]
            for q, (kind, e) in enumerate(zip(kinds, report.errors)):
                fh.write(f"{q},{kind},{'' if e is None else repr(e)}\n")


def cmd_bench(cfg):
    t0 = time.perf_counter()
    A = low_rank_sparse(cfg.get("n"), cfg.get("d"), cfg.get("rank"), cfg.get("noise"), cfg.seed)
    t_gen = time.perf_counter() - t0
    times = []
    for _ in range(max(1, cfg.get("repeat", 1))):
        t0 = time.perf_counter()
        cs = svd_coreset(A, cfg.k, cfg.epsilon, seed=cfg.seed)
        times.append(time.perf_counter() - t0)
    report = evaluate(A, cs, cfg.n_queries, cfg.seed)
    opt, got = optimal_cost_comparison(A, cs, cfg.k)
    report.wall_time_ms.update(gen=1e3 * t_gen, build_min=1e3 * min(times), build_median=1e3 * float(np.median(times)))
    out = report.to_dict()
    out.update(n=A.n_rows, d=A.n_cols, nnz=A.nnz, k=cfg.k, optimal_cost=opt, coreset_subspace_cost=got,
               cost_ratio=cost_ratio(opt, got), epsilon_residual=cs.epsilon_residual)
    _emit(cfg, out)
    if cfg.output_path:
        print(report.table())


HANDLERS = {
    "gen": cmd_gen,
    "ifa": cmd_ifa,
    "one-mean": cmd_one_mean,
    "svd-coreset": cmd_svd_coreset,
    "stream": cmd_stream,
    "evaluate": cmd_evaluate,
    "bench": cmd_bench,
}


def run(config: RunConfig) -> int:
    try:
        HANDLERS[config.command](config)
    except UsageError as e:
        print(f"svdcoreset {config.command}: usage error: {e}", file=sys.stderr)
        return 1
    except CoresetError as e:
        print(f"svdcoreset {config.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"svdcoreset {config.command}: data error: {e}", file=sys.stderr)
        return 2
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as e:
        print(f"svdcoreset {config.command}: numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except UsageError as e:
        print(f"svdcoreset: usage error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"svdcoreset: cannot read config: {e}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if config.get("verbose") else logging.WARNING,
                        format="%(name)s: %(message)s")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
