"""Command-line front end.

Every command prints one JSON document (pretty on a terminal, compact
otherwise) that echoes the configuration, the seed and the tool version.
Exit codes: 0 success, 2 bad input, 3 budget exhausted or partial result.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from . import __version__, convergence, densities, geometry, teichmuller
from .errors import BudgetExceeded, DomainError

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_BUDGET = 3

THREADS_ENV = "HYPERDENSE_THREADS"


class _BudgetFlag(Exception):
    """Result computed but a budget ran out; carries the payload."""

    def __init__(self, payload):
        super().__init__("budget exhausted")
        self.payload = payload


def parse_complex(text: str) -> complex:
    """Accept 1, -1.5, i, 2-i, 0.3+0.9j, (1,2)."""
    s = str(text).strip().replace(" ", "")
    if s.startswith("(") and s.endswith(")") and "," in s:
        x, y = s[1:-1].split(",")
        return complex(float(x), float(y))
    s = s.replace("i", "j")
    s = re.sub(r"(^|[+-])j", r"\g<1>1j", s)
    try:
        return complex(s)
    except ValueError:
        raise DomainError(f"cannot parse complex number {text!r}") from None


def parse_complex_list(text: str) -> list:
    parts = [p for p in re.split(r"[;,](?![^()]*\))", text) if p.strip()]
    return [parse_complex(p) for p in parts]


def parse_floats(text: str) -> list:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise DomainError(f"cannot parse number list {text!r}") from None


def parse_kv(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise DomainError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _load_json(text: str):
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"invalid JSON: {exc}") from None


def _disc_from_spec(text: str) -> geometry.Disc:
    kv = parse_kv(text)
    unknown = set(kv) - {"r", "center"}
    if unknown:
        raise DomainError(f"unknown disc keys {sorted(unknown)}")
    r = float(kv.get("r", 1.0))
    return geometry.Disc(parse_complex(kv.get("center", "0")), r)


def _domain(args) -> object:
    if getattr(args, "disc", None):
        return _disc_from_spec(args.disc)
    if getattr(args, "domain", None):
        return geometry.domain_from_json(_load_json(args.domain))
    raise DomainError("a domain is required (--disc or --domain)")


def _sets(text: str):
    obj = _load_json(text)
    if isinstance(obj, list):
        return [geometry.set_from_json(o) for o in obj]
    return geometry.set_from_json(obj)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"{THREADS_ENV} must be a positive integer") from None
    if n < 1:
        raise DomainError(f"{THREADS_ENV} must be a positive integer")
    return n


def _pair(z: complex) -> list:
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# commands


def cmd_density(args) -> dict:
    z = parse_complex(args.z)
    modes = [m for m in ("disc", "pair", "triple", "domain") if getattr(args, m)]
    if len(modes) != 1:
        raise DomainError("give exactly one of --disc, --pair, --triple, --domain")
    if args.three_point:
        U = _domain(args)
        res = densities.three_point_density(
            U, z, budget=args.budget, n_samples=args.samples, rel_tol=args.rel_tol,
            offset=args.offset,
        )
        out = res.to_dict()
        if res.info["budget_exhausted"]:
            raise _BudgetFlag(out)
        return out
    if args.disc:
        U = _disc_from_spec(args.disc)
        return densities.rho_disc(z, U.radius, U.center).to_dict()
    if args.pair:
        pts = parse_complex_list(args.pair)
        if len(pts) != 2:
            raise DomainError("--pair needs two punctures")
        res = densities.rho_pair(*pts, z, rel_tol=args.rel_tol, budget=args.budget)
    elif args.triple:
        pts = parse_complex_list(args.triple)
        if len(pts) != 3:
            raise DomainError("--triple needs three punctures")
        res = densities.rho_triple(*pts, z, rel_tol=args.rel_tol, budget=args.budget)
    else:
        res = densities.density(_domain(args), z, rel_tol=args.rel_tol)
    out = res.to_dict()
    if res.info.get("converged") is False:
        raise _BudgetFlag(out)
    return out


def cmd_hausdorff(args) -> dict:
    A, B = _sets(args.a), _sets(args.b)
    rep = geometry.hausdorff_report(A, B)
    return {"H": rep.value, "d": geometry.set_distance(A, B), "tolerance": rep.tolerance}


def _family(args):
    K = None
    if args.K:
        K = parse_complex_list(args.K)
    elif args.K_samples:
        c = parse_complex(args.K_center)
        K = convergence.disc_samples(c, args.K_radius, args.K_samples, seed=args.seed)
    kw = {} if K is None else {"K": K}
    if args.family == "perturbed-boundary":
        kw["h"] = args.h
    if args.family in ("moving-puncture", "moving-pair") and args.punctures:
        kw["punctures"] = parse_complex_list(args.punctures)
    return convergence.FAMILIES[args.family](**kw)


def cmd_converge(args) -> dict:
    schedule = parse_floats(args.schedule) if args.schedule is not None else list(convergence.DEFAULT_SCHEDULE)
    if not schedule:
        raise DomainError("empty eps schedule")
    fam = _family(args)
    table = convergence.rate_sweep(fam, schedule, rel_tol=args.rel_tol)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    try:
        fits = convergence.fit_rate(table, models)
    except DomainError as exc:
        fits = []
        fit_error = str(exc)
    else:
        fit_error = None
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(table.to_csv(fits))
    out = convergence.sweep_report(fam, table, fits, {"fit_error": fit_error})
    if not table.complete:
        raise _BudgetFlag(out)
    return out


def cmd_teich(args) -> dict:
    U = _domain(args)
    z = parse_complex(args.z)
    if not args.h > 0:
        raise DomainError("grid spacing h must be positive")
    est, field = teichmuller.teich_upper_estimate(
        U, z, args.h, tol=args.tol, max_iter=args.max_iter, scheme=args.scheme, return_field=True
    )
    if args.field_out:
        with open(args.field_out, "wb") as fh:
            fh.write(field.to_bytes())
    if args.field_csv:
        with open(args.field_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(field.to_csv())
    return {**est.to_dict(), "scheme": args.scheme, "half_rho": _half_rho(U, z)}


def _half_rho(U, z):
    if isinstance(U, geometry.Disc):
        return 0.5 * densities.rho_disc(z, U.radius, U.center).value
    return None


def cmd_cutoff(args) -> dict:
    eps = args.eps
    if args.x is not None:
        xs = np.array(parse_floats(args.x))
    else:
        xs = np.linspace(0.0, args.x_max, args.n)
    out = {"eps": eps}
    if args.disc or args.domain:
        U = _domain(args)
        zs = np.array(parse_complex_list(args.z)) if args.z else xs.astype(complex)
        chi = np.atleast_1d(teichmuller.cutoff_chi(zs, U, eps))
        out["z"] = [_pair(complex(v)) for v in zs]
        out["chi"] = [float(v) for v in chi]
        rows = [(complex(a).real, complex(a).imag, float(c)) for a, c in zip(zs, chi)]
        header = "x,y,chi"
    else:
        j = np.atleast_1d(teichmuller.cutoff_j(xs, eps))
        out["x"] = [float(v) for v in xs]
        out["j"] = [float(v) for v in j]
        rows = [(float(a), float(b)) for a, b in zip(xs, j)]
        header = "x,j"
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(header + "\n")
            for r in rows:
                fh.write(",".join(repr(v) for v in r) + "\n")
    return out


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hyperdense", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hyperdense {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled sets (recorded)")
        sp.add_argument("--output", "-o", help="write JSON here instead of stdout")
        sp.add_argument("--pretty", action="store_true", help="indent JSON even off a terminal")

    d = sub.add_parser("density", help="evaluate a hyperbolic or three-point density")
    d.add_argument("--disc", help="disc spec r=R[,center=C]")
    d.add_argument("--pair", help="two punctures a,b (plane minus a, b)")
    d.add_argument("--triple", help="three punctures a,b,c")
    d.add_argument("--domain", help="domain JSON, or @file")
    d.add_argument("--three-point", action="store_true", help="three-point density of the domain")
    d.add_argument("--z", required=True, help="evaluation point")
    d.add_argument("--rel-tol", type=float, default=1e-6)
    d.add_argument("--budget", type=int, default=None)
    d.add_argument("--samples", type=int, default=48, help="boundary samples for --three-point")
    d.add_argument("--offset", type=float, default=0.0, help="sample phase for --three-point")
    common(d)
    d.set_defaults(func=cmd_density)

    h = sub.add_parser("hausdorff", help="Hausdorff distance H and set distance d")
    h.add_argument("--a", required=True, help="plane set JSON (or list), or @file")
    h.add_argument("--b", required=True, help="plane set JSON (or list), or @file")
    common(h)
    h.set_defaults(func=cmd_hausdorff)

    c = sub.add_parser("converge", help="rate sweep and fits for a domain family")
    c.add_argument("--family", required=True, choices=sorted(convergence.FAMILIES))
    c.add_argument("--schedule", help="comma-separated decreasing eps values")
    c.add_argument("--K", help="comma-separated test points")
    c.add_argument("--K-samples", type=int, default=0, help="draw this many test points from a disc")
    c.add_argument("--K-center", default="0")
    c.add_argument("--K-radius", type=float, default=0.5)
    c.add_argument("--punctures", help="base punctures for moving families")
    c.add_argument("--models", default="eps,eps-log")
    c.add_argument("--rel-tol", type=float, default=1e-10)
    c.add_argument("--h", type=float, default=1 / 16, help="grid spacing for perturbed-boundary")
    c.add_argument("--csv", help="write the sweep table here")
    common(c)
    c.set_defaults(func=cmd_converge)

    t = sub.add_parser("teich", help="grid estimate of the Teichmüller density")
    t.add_argument("--disc", help="disc spec r=R[,center=C]")
    t.add_argument("--domain", help="domain JSON, or @file")
    t.add_argument("--z", default="0")
    t.add_argument("--h", type=float, default=1 / 32)
    t.add_argument("--scheme", choices=("p1", "centered"), default="p1")
    t.add_argument("--tol", type=float, default=1e-4)
    t.add_argument("--max-iter", type=int, default=400)
    t.add_argument("--field-out", help="binary grid field output")
    t.add_argument("--field-csv", help="CSV grid field output")
    common(t)
    t.set_defaults(func=cmd_teich)

    k = sub.add_parser("cutoff", help="tabulate j, or chi on a domain")
    k.add_argument("--eps", type=float, required=True)
    k.add_argument("--x", help="comma-separated arguments of j")
    k.add_argument("--n", type=int, default=101)
    k.add_argument("--x-max", type=float, default=0.5)
    k.add_argument("--disc", help="evaluate chi on this disc")
    k.add_argument("--domain", help="evaluate chi on this domain JSON")
    k.add_argument("--z", help="points for chi")
    k.add_argument("--csv", help="write the table here")
    common(k)
    k.set_defaults(func=cmd_cutoff)
    return p


def _config(args) -> dict:
    skip = {"func", "output", "pretty"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(payload: dict, args) -> None:
    pretty = args.pretty or (not args.output and sys.stdout.isatty())
    text = json.dumps(payload, indent=2 if pretty else None, separators=None if pretty else (",", ":"))
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "budget", "absent") is None:
        args.budget = densities.quadrature.DEFAULT_BUDGET
    code = EXIT_OK
    try:
        _threads()
        result = args.func(args)
    except _BudgetFlag as flag:
        result = flag.payload
        code = EXIT_BUDGET
        print("hyperdense: budget exhausted; result is partial", file=sys.stderr)
    except BudgetExceeded as exc:
        print(f"hyperdense: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (DomainError, ValueError, OSError) as exc:
        print(f"hyperdense: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    meta = {"tool": "hyperdense", "version": __version__, "seed": args.seed, "config": _config(args)}
    _emit({**result, **meta}, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
