"""Command-line front end: ``hardcore {bounds,sample,alpha,verify,code}``.

Every run writes its output file plus ``<out>.config.json`` echoing the
resolved config, including a seed drawn at random when none was given.
Exit codes: 0 success, 2 bad arguments or preconditions, 3 sampler budget
exhausted, 4 a verification failed.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from . import bounds as bd
from . import io as hio
from . import rng as rngmod
from . import verify as vf
from .ensemble import alpha_direct, alpha_series, alpha_series_stderr, alpha_via_T, zhat_series
from .exceptions import BudgetExceeded, DomainError, TruncationInsufficient
from .geometry import cap_measure
from .regions import parse_region
from .sampler import DEFAULT_BUDGET, default_constraint, greedy_maximal_code, sample_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_VERIFY = 4


@dataclass
class RunConfig:
    subcommand: str
    seed: int = None
    streams: int = 1
    out: str = None
    format: str = "csv"
    region: str = None
    d: int = None
    theta: float = None
    lam: float = None
    n_samples: int = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def echo(self):
        """Config as embedded in output files; the output path is left out so reruns match byte for byte."""
        out = self.to_dict()
        out.pop("out")
        return out


def parse_d_range(text):
    """``a:b[:step]``, inclusive of ``b`` when it is on the grid."""
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(f"expected a:b or a:b:step, got {text!r}")
    try:
        a, b = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"d-range needs integers, got {text!r}") from exc
    if step <= 0 or a < 1 or b < a:
        raise argparse.ArgumentTypeError(f"need 1 <= a <= b and step > 0, got {text!r}")
    return list(range(a, b + 1, step))


def _add_common(p, n_default=None, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=None, help="master seed (random and printed if omitted)")
        p.add_argument("--streams", type=int, default=1, help="parallel Monte Carlo streams")
    p.add_argument("--out", default=None, help="output file (default under $HARDCORE_OUT_DIR)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    if n_default is not None:
        p.add_argument("--n", type=int, default=n_default, help="number of samples")


def _add_theta(p, default=None):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--theta", type=float, default=default, help="angle in radians")
    g.add_argument("--theta-deg", type=float, default=None, help="angle in degrees")


def _add_model(p):
    p.add_argument("--region", required=True, help="box:2x3, ball:r=1.5, sphere:d=4, cap:d=4,theta=1.0")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="fugacity")
    _add_theta(p)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="rejection retries per sample")


def build_parser():
    parser = argparse.ArgumentParser(prog="hardcore", description="Hard sphere and hard cap model toolkit")
    parser.add_argument("--version", action="version", version=f"hardcore {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("bounds", help="table of lower and upper bounds")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--d-range", type=parse_d_range, help="a:b:step, inclusive")
    g.add_argument("--d", type=int, nargs="+")
    _add_theta(p, default=math.pi / 3)
    _add_common(p, seed=False)

    p = sub.add_parser("sample", help="exact samples of the hard-core model")
    _add_model(p)
    p.add_argument("--k", type=int, default=None, help="sample the canonical ensemble of size k instead")
    _add_common(p, n_default=1000)

    p = sub.add_parser("alpha", help="expected packing density")
    _add_model(p)
    p.add_argument("--method", choices=("direct", "series", "via_T", "all"), default="direct")
    p.add_argument("--n-inner", type=int, default=24, help="inner tuples per k for via_T")
    _add_common(p, n_default=100_000)

    p = sub.add_parser("verify", help="lemma verification suites")
    p.add_argument("--suite", choices=vf.SUITES + ("all",), required=True)
    p.add_argument("--trials", type=int, default=None)
    _add_common(p, n_default=None)
    p.add_argument("--n", type=int, default=None, help="Monte Carlo size per check (suite default if omitted)")

    p = sub.add_parser("code", help="greedy saturated spherical codes")
    p.add_argument("--d", type=int, required=True)
    _add_theta(p, default=math.pi / 3)
    p.add_argument("--count", type=int, default=1, help="number of independent codes")
    _add_common(p)
    return parser


def _theta(args):
    if getattr(args, "theta_deg", None) is not None:
        return math.radians(args.theta_deg)
    return getattr(args, "theta", None)


def _out_path(args, cfg, stem):
    return Path(args.out) if args.out else hio.default_output(f"{stem}.{cfg.format}")


def _write_table(path, cfg, rows, columns, key):
    if cfg.format == "csv":
        hio.write_csv(path, rows, columns, cfg.echo())
    else:
        hio.write_json(path, {**hio.metadata(cfg.echo()), key: rows})


def _finish(path, cfg):
    cfg.out = str(path)
    hio.write_json(hio.sidecar_path(path), {**hio.metadata(cfg.to_dict())})


def run_bounds(args, cfg):
    d_values = args.d_range or args.d
    cfg.extra["d_values"] = d_values
    rows = [r.to_dict() for r in bd.bounds_table(d_values, cfg.theta)]
    path = _out_path(args, cfg, "bounds")
    _write_table(path, cfg, rows, ["d", "bound_name", "kind", "theta", "log_value", "value"], "rows")
    _finish(path, cfg)
    return EXIT_OK


def _model(args, cfg):
    region = parse_region(args.region, args.d)
    cfg.d = region.d
    return region, default_constraint(region, cfg.theta)


def run_sample(args, cfg):
    region, constraint = _model(args, cfg)
    cfg.extra.update(k=args.k, budget=args.budget)
    batch = sample_batch(region, cfg.lam, cfg.n_samples, cfg.seed, constraint, streams=cfg.streams,
                         budget=args.budget, k=args.k)
    path = _out_path(args, cfg, "samples")
    if cfg.format == "csv":
        coords = [f"x{i}" for i in range(region.d)]
        rows = []
        for s, pts in enumerate(batch):
            for j, p in enumerate(pts):
                rows.append({"sample": s, "index": j, **dict(zip(coords, p.tolist()))})
        hio.write_csv(path, rows, ["sample", "index"] + coords, cfg.echo())
    else:
        hio.write_json(path, {**hio.metadata(cfg.echo()), "samples": [p.tolist() for p in batch]})
    _finish(path, cfg)
    return EXIT_OK


def run_alpha(args, cfg):
    region, constraint = _model(args, cfg)
    cfg.extra.update(method=args.method, n_inner=args.n_inner, budget=args.budget)
    methods = ("direct", "series", "via_T") if args.method == "all" else (args.method,)
    rows = []
    for m in methods:
        if m == "direct":
            est = alpha_direct(region, cfg.lam, cfg.n_samples, constraint, cfg.seed, cfg.streams, args.budget)
            value, se = est.value, est.stderr
        elif m == "via_T":
            est = alpha_via_T(region, cfg.lam, cfg.n_samples, args.n_inner, constraint, cfg.seed,
                              cfg.streams, args.budget)
            value, se = est.value, est.stderr
        else:
            series = zhat_series(region, constraint, n_per_k=cfg.n_samples, seed=cfg.seed, lam=cfg.lam,
                                 streams=cfg.streams)
            value, se = alpha_series(series, cfg.lam), alpha_series_stderr(series, cfg.lam)
        rows.append({"method": m, "lambda": cfg.lam, "value": value, "stderr": se, "n": cfg.n_samples})
    path = _out_path(args, cfg, "alpha")
    _write_table(path, cfg, rows, ["method", "lambda", "value", "stderr", "n"], "estimates")
    for r in rows:
        print(f"{r['method']}: {r['value']!r} +/- {r['stderr']!r}")
    _finish(path, cfg)
    return EXIT_OK


def run_verify(args, cfg):
    cfg.extra.update(suite=args.suite, trials=args.trials)
    reports = vf.run_suite(args.suite, cfg.seed, args.trials, cfg.n_samples, cfg.streams)
    path = Path(args.out) if args.out else hio.default_output(f"verify_{args.suite}.csv")
    cfg.format = "csv"
    stem = path.with_suffix("")
    rows = []
    for r in reports:
        d = r.to_dict()
        report_path = Path(f"{stem}.{r.lemma_id}.json")
        hio.write_json(report_path, {**hio.metadata(cfg.echo()), "report": d})
        rows.append({"lemma_id": r.lemma_id, "trials": r.trials, "violations": r.violations,
                     "worst_margin": d["worst_margin"], "p_value": r.p_value})
        status = "ok" if r.passed else "FAILED"
        print(f"{r.lemma_id}: {status} ({r.violations} violations in {r.trials} trials)")
    hio.write_csv(path, rows, ["lemma_id", "trials", "violations", "worst_margin", "p_value"], cfg.echo())
    _finish(path, cfg)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def run_code(args, cfg):
    cfg.d = args.d
    cfg.extra["count"] = args.count
    bound = 1.0 / cap_measure(args.d, cfg.theta)
    codes = [greedy_maximal_code(args.d, cfg.theta, rngmod.stream(cfg.seed, rngmod.tag_of("code"), i))
             for i in range(args.count)]
    path = _out_path(args, cfg, "codes")
    summary = [{"code": i, "size": len(c), "valid": c.is_valid(), "covering_bound": bound}
               for i, c in enumerate(codes)]
    if cfg.format == "csv":
        coords = [f"x{i}" for i in range(args.d)]
        rows = [{"code": i, "index": j, **dict(zip(coords, p.tolist()))}
                for i, c in enumerate(codes) for j, p in enumerate(c.points)]
        hio.write_csv(path, rows, ["code", "index"] + coords, cfg.echo())
    else:
        hio.write_json(path, {**hio.metadata(cfg.echo()), "codes": [
            {**s, "points": c.points.tolist()} for s, c in zip(summary, codes)]})
    sizes = [s["size"] for s in summary]
    print(f"{len(codes)} codes, sizes {min(sizes)}..{max(sizes)}, covering bound {bound!r}")
    _finish(path, cfg)
    ok = all(s["valid"] and s["size"] >= bound for s in summary)
    return EXIT_OK if ok else EXIT_VERIFY


RUNNERS = {"bounds": run_bounds, "sample": run_sample, "alpha": run_alpha, "verify": run_verify,
           "code": run_code}


def run(argv=None):
    """Parse ``argv`` and execute; returns the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = RunConfig(args.subcommand, format=args.format, theta=_theta(args),
                    streams=getattr(args, "streams", 1), out=args.out,
                    region=getattr(args, "region", None), lam=getattr(args, "lam", None),
                    n_samples=getattr(args, "n", None))
    if hasattr(args, "seed"):
        given = args.seed
        cfg.seed = rngmod.resolve_seed(given)
        if given is None:
            print(f"seed: {cfg.seed}", file=sys.stderr)
    try:
        return RUNNERS[args.subcommand](args, cfg)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DomainError, TruncationInsufficient, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
