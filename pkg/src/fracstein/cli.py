"""Command-line entry point: bounds, path simulation and verification runs."""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import processes, stein, verify
from ._rng import generator_info
from .fractional import BASIS_KINDS, uniform_grid
from .hilbert import DEFAULT_BASIS, DEFAULT_N, embed_piecewise_linear, embed_step_path

EXIT_OK, EXIT_PARAM, EXIT_FAILED = 0, 1, 2
DEFAULT_SAMPLES = 100_000


@dataclass
class RunConfig:
    command: str
    kind: str
    params: dict = field(default_factory=dict)
    seed: int | None = None
    out: str | None = None
    fmt: str = "json"

    def metadata(self) -> dict:
        meta = {"command": self.command, "kind": self.kind, "params": self.params, "schema_version": stein.SCHEMA_VERSION}
        meta.update(generator_info())
        if self.seed is not None:
            meta["seed"] = self.seed
        return meta


# ---------------------------------------------------------------- argument parsing


def parse_list(text: str, integer: bool = False) -> list:
    """'1e2..1e5' -> decades 1e2, 1e3, 1e4, 1e5; otherwise a comma list."""
    text = text.strip()
    if ".." in text:
        lo, hi = (float(x) for x in text.split(".."))
        if not (lo > 0 and hi >= lo):
            raise ValueError(f"bad range {text!r}")
        a, b = math.log10(lo), math.log10(hi)
        if abs(a - round(a)) > 1e-12 or abs(b - round(b)) > 1e-12:
            raise ValueError(f"range endpoints must be powers of 10, got {text!r}")
        vals = [10.0**k for k in range(round(a), round(b) + 1)]
    else:
        vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise ValueError("empty list")
    if integer:
        if any(v != int(v) for v in vals):
            raise ValueError(f"expected integers, got {text!r}")
        return [int(v) for v in vals]
    return vals


def _common(p: argparse.ArgumentParser, stochastic: bool = False):
    p.add_argument("--beta", type=float, default=0.25, help="path regularity β in (0, 1/2) (default 0.25)")
    p.add_argument("--n-max", type=int, default=DEFAULT_N, help=f"basis truncation N (default {DEFAULT_N})")
    p.add_argument("--basis", choices=BASIS_KINDS, default=DEFAULT_BASIS, help="orthonormal basis (default haar)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), dest="fmt", help="output format")
    p.add_argument("--gnuplot", action="store_true", help="emit a bare two-column table")
    if stochastic:
        p.add_argument("--seed", type=int, help="random seed (required)")
        p.add_argument("--workers", type=int, default=1, help="parallel Monte Carlo workers (default 1)")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the parameter-error code, keeping 2 for failed checks."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="fracstein",
        description="Convergence bounds and numerical checks for path-space normal approximation.",
        epilog="Defaults: β=0.25, N=128, grid M=1024, samples 1e5. Exit codes: 0 ok, 1 bad parameters, 2 failed check.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bound", help="evaluate a closed-form bound and its numeric certificate")
    b.add_argument("kind", choices=("poisson", "interp", "donsker", "fbm"))
    _common(b)
    b.add_argument("--lambda", dest="lam", default="100", help="intensity λ, list or decade range (default 100)")
    b.add_argument("--m", default="4", help="number of intervals m, list allowed (default 4)")
    b.add_argument("--hurst", type=float, default=0.75, help="Hurst index H (default 0.75)")
    b.add_argument("--epsilon", type=float, default=0.1, help="regularity loss ε for fbm (default 0.1)")

    v = sub.add_parser("verify", help="run a deterministic or Monte Carlo check")
    v.add_argument("kind", choices=("rate-poisson", "rate-interp", "cov", "cumulant"))
    _common(v, stochastic=True)
    v.add_argument("--lambdas", default="1e2..1e5", help="λ values for rate-poisson (default 1e2..1e5)")
    v.add_argument("--lambda", dest="lam", type=float, default=50.0, help="λ for cov/cumulant (default 50)")
    v.add_argument("--m", default=None, help="m list for rate-interp (default 2,4,8,16,32); single m for cov/cumulant (default 8)")
    v.add_argument("--process", choices=verify.PROCESSES, default="poisson", help="process for cov/cumulant")
    v.add_argument("--samples", type=float, default=DEFAULT_SAMPLES, help="Monte Carlo sample count (default 1e5)")
    v.add_argument("--mc-n-max", type=int, default=verify.MC_N, help=f"truncation for Monte Carlo checks (default {verify.MC_N})")

    s = sub.add_parser("simulate", help="sample one path and write it as CSV")
    s.add_argument("process", choices=("poisson", "interp", "donsker", "bm", "fbm"))
    _common(s, stochastic=True)
    s.add_argument("--lambda", dest="lam", type=float, default=50.0, help="Poisson intensity (default 50)")
    s.add_argument("--m", type=int, default=16, help="intervals for interp/donsker (default 16)")
    s.add_argument("--hurst", type=float, default=0.75, help="Hurst index for fbm (default 0.75)")
    s.add_argument("--grid", type=int, default=1024, help="grid nodes M for bm/fbm (default 1024)")
    s.add_argument("--embed", action="store_true", help="write the embedded coefficients instead of the path")
    return parser


# ---------------------------------------------------------------- output


def _write(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(meta: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, default=verify._jsonable) + "\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_cell(x) for x in row) + "\n")
    return buf.getvalue()


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _gnuplot(meta: dict, columns: tuple[str, str], rows) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, default=verify._jsonable) + "\n")
    buf.write(f"# {columns[0]} {columns[1]}\n")
    for x, y in rows:
        buf.write(f"{_cell(x)} {_cell(y)}\n")
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=verify._jsonable) + "\n"


# ---------------------------------------------------------------- commands


def cmd_bound(args) -> int:
    kind = args.kind
    reports = []
    if kind in ("poisson", "fbm"):
        for lam in parse_list(args.lam):
            if kind == "poisson":
                reports.append(stein.bound_poisson(args.beta, lam, args.n_max, args.basis))
            else:
                reports.append(stein.bound_fbm(stein.beta_for_epsilon(args.epsilon), lam, args.hurst, args.n_max, args.basis))
        xname = "lambda"
    else:
        fn = stein.bound_interp if kind == "interp" else stein.bound_donsker
        for m in parse_list(args.m, integer=True):
            reports.append(fn(args.beta, m, args.n_max, args.basis))
        xname = "m"
    cfg = RunConfig("bound", kind, {k: reports[0].parameters[k] for k in reports[0].parameters if k not in (xname,)}, None, args.out, args.fmt or "json")
    meta = cfg.metadata()
    if args.gnuplot:
        text = _gnuplot(meta, (xname, "closed_form_value"), [(r.parameters[xname], r.closed_form_value) for r in reports])
    elif cfg.fmt == "csv":
        text = _csv(meta, reports[0].csv_header().split(","), [r.csv_row().split(",") for r in reports])
    else:
        docs = [r.to_dict() for r in reports]
        text = _json(docs[0] if len(docs) == 1 else {"schema_version": stein.SCHEMA_VERSION, "reports": docs})
    _write(text, args.out)
    ok = all(r.certificate_ok is not False for r in reports)
    return EXIT_OK if ok else EXIT_FAILED


def _require_seed(args):
    if args.seed is None:
        raise ValueError("--seed is required for stochastic commands")
    if args.workers < 1:
        raise ValueError("--workers must be >= 1")


def cmd_verify(args) -> int:
    kind = args.kind
    params = {"beta": args.beta, "basis": args.basis}
    seed = None
    if kind == "rate-poisson":
        n_max = args.n_max if args.n_max != DEFAULT_N else 32
        series = verify.rate_poisson(args.beta, parse_list(args.lambdas), n_max=n_max, basis=args.basis)
        target, tol = -0.5, 0.1
        params["n_max"] = n_max
    elif kind == "rate-interp":
        ms = parse_list(args.m or "2,4,8,16,32", integer=True)
        series = verify.rate_interp(args.beta, ms, args.n_max, args.basis)
        target, tol = 2 * args.beta - 1, 0.15
        params["n_max"] = args.n_max
    else:
        _require_seed(args)
        seed = args.seed
        n = int(args.samples)
        m = parse_list(args.m or "8", integer=True)
        if len(m) != 1:
            raise ValueError("cov and cumulant take a single m")
        m = m[0]
        params.update(n_max=args.mc_n_max, samples=n, process=args.process)
        if kind == "cov":
            result = verify.covariance_check(args.process, args.beta, args.mc_n_max, n, seed, m, args.lam, args.workers, args.basis)
        elif args.process == "poisson":
            result = verify.third_cumulant_poisson(args.beta, args.lam, None, args.mc_n_max, n, seed, args.workers, args.basis)
        elif args.process == "donsker":
            result = verify.fourth_cumulant_donsker(args.beta, m, None, args.mc_n_max, n, seed, args.workers, args.basis)
        else:
            raise ValueError("cumulant checks exist for --process poisson (third) and donsker (fourth)")
        cfg = RunConfig("verify", kind, params, seed, args.out, args.fmt or "json")
        doc = result.to_dict()
        if cfg.fmt == "csv" or args.gnuplot:
            flat = {k: v for k, v in doc.items() if not isinstance(v, dict)}
            if "estimate" in doc:
                flat.update({f"estimate_{k}": v for k, v in doc["estimate"].items()})
            text = _csv(cfg.metadata(), list(flat), [list(flat.values())])
        else:
            text = _json(dict(doc, schema_version=stein.SCHEMA_VERSION, metadata=cfg.metadata()))
        _write(text, args.out)
        return EXIT_OK if result.passed else EXIT_FAILED

    passed = series.within(target, tol)
    cfg = RunConfig("verify", kind, params, seed, args.out, args.fmt or "json")
    meta = dict(cfg.metadata(), target_slope=target, tolerance=tol, fitted_slope=series.fitted_slope, passed=passed)
    xname = "lambda" if kind == "rate-poisson" else "m"
    pairs = list(zip(series.params, series.gaps))
    if args.gnuplot:
        text = _gnuplot(meta, (xname, "gap"), pairs)
    elif cfg.fmt == "csv":
        text = _csv(meta, [xname, "gap"], pairs)
    else:
        text = _json(dict(series.to_dict(), target_slope=target, tolerance=tol, passed=passed,
                          schema_version=stein.SCHEMA_VERSION, metadata=cfg.metadata()))
    _write(text, args.out)
    return EXIT_OK if passed else EXIT_FAILED


def _path_rows(process: str, args):
    if process == "poisson":
        path = processes.sample_poisson(args.lam, args.seed)
        t = np.concatenate(([0.0], path.jump_times, [1.0]))
        return path, t, path(t), {"lambda": args.lam}
    if process in ("interp", "donsker"):
        fn = processes.sample_interp_bm if process == "interp" else processes.sample_donsker
        path = fn(args.m, args.seed)
        return path, path.breakpoints, path.node_values, {"m": args.m}
    if process == "bm":
        path, emb = processes.sample_bm_series(args.beta, args.n_max, args.seed, grid_size=args.grid, basis=args.basis)
        return emb, path.breakpoints, path.node_values, {"grid": args.grid, "n_terms": processes.default_series_terms(args.n_max)}
    path = processes.sample_fbm(args.hurst, uniform_grid(args.grid), args.seed)
    return path, path.grid, path.values, {"hurst": args.hurst, "grid": args.grid}


def cmd_simulate(args) -> int:
    _require_seed(args)
    if args.grid < 2:
        raise ValueError("--grid must be >= 2")
    obj, t, vals, params = _path_rows(args.process, args)
    cfg = RunConfig("simulate", args.process, params, args.seed, args.out, args.fmt or "csv")
    if args.embed:
        if args.process == "fbm":
            raise ValueError("--embed is available for poisson, interp, donsker and bm")
        if args.process == "poisson":
            obj = embed_step_path(obj, args.beta, args.n_max, args.basis)
        elif args.process != "bm":
            obj = embed_piecewise_linear(obj, args.beta, args.n_max, args.basis)
        cfg.params.update(beta=args.beta, n_max=args.n_max, basis=args.basis)
        x, y, cols = np.arange(1, obj.n_max + 1), obj.coeffs, ("n", "coefficient")
    else:
        x, y, cols = t, vals, ("t", "value")
    meta = cfg.metadata()
    rows = list(zip(x.tolist(), np.asarray(y).tolist()))
    if args.gnuplot:
        text = _gnuplot(meta, cols, rows)
    elif cfg.fmt == "json":
        text = _json({"schema_version": stein.SCHEMA_VERSION, "metadata": meta, cols[0]: x, cols[1]: y})
    else:
        text = _csv(meta, list(cols), rows)
    _write(text, args.out)
    return EXIT_OK


COMMANDS = {"bound": cmd_bound, "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
