"""Command-line front end.

``priorforge priors`` reads a CSV, computes the default prior set for a model
formula, and writes a machine-readable report to stdout (diagnostics go to
stderr). ``priorforge simverify`` runs the seeded simulation checks and
writes tab-separated tables.

Exit codes: 0 success, 1 computation failure, 2 usage error.

JSON report schema (stable field order)::

    {
      "model": {"formula": str, "family": str, "n_used": int, "rows_dropped": int},
      "priors": {
        "slopes":                 [prior, ...],
        "intercept_or_cellmeans": [prior, ...],
        "residual_sd":            prior | null,
        "random_effects":         [prior, ...]
      },
      "diagnostics": [{"term": str, "a": float, "b": float, "beta_hat": float,
                       "quartic_fit_residual": float, "taylor_order": int}, ...]
    }

where each ``prior`` is ``{"term": str, "dist": "Normal"|"HalfNormal"|"Uniform",
"params": {...}, "provenance": {...}}`` and params are ``{mu, sigma}`` for
Normal, ``{sigma}`` for HalfNormal, ``{lower, upper}`` for Uniform.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .errors import FormulaError, PriorForgeError
from .formula import format_formula, parse_formula, read_csv_columns
from .priors import HalfNormal, Normal, PriorSet, PriorSpec, Uniform, build_all_priors
from .sim import (
    ROUNDTRIP_HEADER,
    ROUNDTRIP_THRESHOLD,
    TAYLOR_SD_HEADER,
    DEFAULT_SEED,
    SimGrid,
    run_roundtrip,
    run_taylor_sd,
)
from .taylor import SCALE_LABELS

USAGE_EXIT = 2
FAILURE_EXIT = 1


def _prior_to_dict(sp: PriorSpec) -> dict:
    dist = sp.distribution
    if isinstance(dist, Normal):
        name, params = "Normal", {"mu": dist.mu, "sigma": dist.sigma}
    elif isinstance(dist, HalfNormal):
        name, params = "HalfNormal", {"sigma": dist.sigma}
    elif isinstance(dist, Uniform):
        name, params = "Uniform", {"lower": dist.lower, "upper": dist.upper}
    else:  # pragma: no cover
        raise PriorForgeError(f"unknown distribution {dist!r}")
    return {"term": sp.term, "dist": name, "params": params, "provenance": sp.prov()}


def report_dict(priors: PriorSet) -> dict:
    diagnostics = []
    for sp in priors.slopes:
        p = sp.prov()
        diagnostics.append(
            {
                "term": sp.term,
                "a": p["a"],
                "b": p["b"],
                "beta_hat": p["beta_hat"],
                "quartic_fit_residual": p["quartic_fit_residual"],
                "taylor_order": p["taylor_order"],
            }
        )
    return {
        "model": {
            "formula": format_formula(priors.model),
            "family": priors.model.family,
            "n_used": priors.n_used,
            "rows_dropped": priors.rows_dropped,
        },
        "priors": {
            "slopes": [_prior_to_dict(sp) for sp in priors.slopes],
            "intercept_or_cellmeans": [_prior_to_dict(sp) for sp in priors.intercept_or_cellmeans],
            "residual_sd": _prior_to_dict(priors.residual_sd) if priors.residual_sd else None,
            "random_effects": [_prior_to_dict(sp) for sp in priors.random_effects],
        },
        "diagnostics": diagnostics,
    }


def _format_table(priors: PriorSet) -> str:
    rows = [("term", "distribution", "parameters")]
    blocks = [
        priors.slopes,
        priors.intercept_or_cellmeans,
        (priors.residual_sd,) if priors.residual_sd else (),
        priors.random_effects,
    ]
    for block in blocks:
        for sp in block:
            d = _prior_to_dict(sp)
            params = ", ".join(f"{k}={v:.6g}" for k, v in d["params"].items())
            rows.append((sp.term, d["dist"], params))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join(
        "  ".join(col.ljust(w) for col, w in zip(row, widths)).rstrip() for row in rows
    )


def _parse_scale_term(items: list[str]) -> dict[str, object]:
    scales: dict[str, object] = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise FormulaError(f"--scale-term expects NAME=LABEL, got {item!r}")
        scales[name] = float(value) if value not in SCALE_LABELS else value
    return scales


def cmd_priors(args: argparse.Namespace) -> int:
    try:
        spec = parse_formula(args.formula, family=args.family)
        table = read_csv_columns(args.data)
    except (FormulaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        scales = _parse_scale_term(args.scale_term or [])
    except (FormulaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    default_scale = args.sigma_rho if args.sigma_rho is not None else args.scale
    try:
        priors = build_all_priors(
            spec,
            table,
            scales=scales,
            default_scale=default_scale,
            taylor_order=args.taylor_order,
        )
    except PriorForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FAILURE_EXIT
    if priors.rows_dropped:
        print(f"dropped {priors.rows_dropped} rows with missing values", file=sys.stderr)
    for sp in priors.slopes:
        p = sp.prov()
        print(
            f"term {sp.term}: a={p['a']:.6g} b={p['b']:.6g} beta_hat={p['beta_hat']:.6g} "
            f"quartic_resid={p['quartic_fit_residual']:.3g} order={p['taylor_order']}",
            file=sys.stderr,
        )
    if args.output == "json":
        print(json.dumps(report_dict(priors), indent=2))
    else:
        print(_format_table(priors))
    return 0


def cmd_simverify(args: argparse.Namespace) -> int:
    failed = False
    if args.check in ("roundtrip", "all"):
        grid = SimGrid(reps=args.reps, seed=args.seed)
        results = run_roundtrip(grid)
        print(ROUNDTRIP_HEADER)
        for r in results:
            print(r.row())
        worst = max(r.mean_rel_err for r in results)
        print(
            f"roundtrip: {len(results)} cells, worst mean relative error {worst:.6e} "
            f"(threshold {ROUNDTRIP_THRESHOLD:g})",
            file=sys.stderr,
        )
        if worst > ROUNDTRIP_THRESHOLD:
            failed = True
    if args.check in ("taylor-sd", "all"):
        results = run_taylor_sd(seed=args.seed)
        print(TAYLOR_SD_HEADER)
        for r in results:
            print(r.row())
        bad = [r for r in results if not r.ok]
        if bad:
            for r in bad:
                print(
                    f"taylor-sd: ratio {r.ratio:.4f} at sigma_rho={r.sigma_rho:.4f} "
                    "outside bounds",
                    file=sys.stderr,
                )
            failed = True
    return FAILURE_EXIT if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorforge",
        description="Derive weakly-informative default priors for GLM coefficients "
        "on the partial-correlation scale.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("priors", help="compute the default prior set for a model")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--formula", required=True, help='model formula, e.g. "y ~ x1 + x2"')
    p.add_argument("--family", required=True, choices=["gaussian", "binomial", "poisson"])
    p.add_argument("--scale", default="wide", choices=sorted(SCALE_LABELS))
    p.add_argument("--sigma-rho", type=float, default=None, help="explicit sigma_rho in (0, 1); overrides --scale")
    p.add_argument(
        "--scale-term",
        action="append",
        metavar="NAME=LABEL",
        help="per-term scale (label or float); repeatable",
    )
    p.add_argument("--taylor-order", type=int, default=None, choices=[1, 3, 5])
    p.add_argument("--output", default="json", choices=["json", "table"])
    p.set_defaults(func=cmd_priors)

    s = sub.add_parser("simverify", help="run the seeded simulation checks")
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--reps", type=int, default=200, help="replicates per grid cell")
    s.add_argument("--check", default="all", choices=["roundtrip", "taylor-sd", "all"])
    s.set_defaults(func=cmd_simverify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
