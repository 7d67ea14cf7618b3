"""Command-line front end: ``conelab <subcommand> ...``.

JSON goes to standard output and diagnostics to standard error. Exit codes
are 0 on success, 1 for analysis errors, 2 for usage and parse errors and
3 when a gallery expectation fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .classify import Options, classify_point
from .cone import (
    flat_normal_of_directions,
    is_flat,
    is_hypersurface_candidate,
    is_symmetric,
    sampled_cone,
    sign_change_locus,
)
from .errors import AnalysisError
from .expr import ParseError, leading_form, parse, to_text, translate
from .gallery import load_corpus, report_json, run_gallery, write_plots
from .measure import multiplicity
from .projective import projective_closure
from .puiseux import classify_germ
from .support import convexity_probe, positive_support, sample_surface
from .variety import Patch, Variety, as_point

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _point(text: str, n: int):
    try:
        return as_point([Fraction(v.strip()) for v in text.split(",")], n)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad point {text!r}: {exc}") from None


def _box(text: str, n: int):
    try:
        box = [tuple(float(v) for v in part.split(":")) for part in text.split(",")]
    except ValueError:
        raise UsageError(f"bad region {text!r}; expected lo:hi,lo:hi[,lo:hi]") from None
    if len(box) == 1:
        box = box * n
    if len(box) != n or any(len(b) != 2 or b[0] >= b[1] for b in box):
        raise UsageError(f"bad region {text!r}; expected {n} intervals lo:hi with lo < hi")
    return box


def _variety(args) -> Variety:
    texts = [args.expr, *getattr(args, "patch", []), *getattr(args, "union", [])]
    names = set()
    for t in texts:
        names |= set(parse(t).used_variables())
    from .expr import default_variables

    variables = default_variables(names)
    main = Patch(parse(args.expr, variables), tuple(parse(c, variables) for c in getattr(args, "patch", [])))
    others = [Patch(parse(u, variables)) for u in getattr(args, "union", [])]
    return Variety((main, *others))


def _options(args) -> Options:
    opts = Options(seed=args.seed)
    if args.tol is not None:
        opts.tolerance = args.tol
    if args.resolution is not None:
        opts.resolution = args.resolution
    return opts


def _cone_kwargs(args) -> dict:
    kw = {"seed": args.seed}
    if args.tol is not None:
        kw["tolerance"] = args.tol
    if args.samples is not None:
        kw["n_angles"] = args.samples
    return kw


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_parse(args):
    f = parse(args.expr)
    return {"text": to_text(f), "variables": list(f.variables), "degree": f.degree, "terms": len(f.terms)}


def cmd_leading_form(args):
    f = parse(args.expr)
    p = _point(args.at, f.nvars)
    h = leading_form(translate(f, p))
    return {"point": [str(v) for v in p], "leading_form": to_text(h.base), "degree": h.degree}


def cmd_cone(args):
    V = _variety(args)
    p = _point(args.at, V.ndim)
    out = {"point": [str(v) for v in p]}
    if V.is_polynomial:
        h = leading_form(translate(V.polynomial, p))
        locus = sign_change_locus(h, seed=args.seed)
        normal = is_flat(h, locus, seed=args.seed)
        out["algebraic"] = {
            "leading_form": to_text(h.base),
            "degree": h.degree,
            "odd_factors": [to_text(q) for q in locus.realizable_odd_factors()],
            "flat_normal": None if normal is None else np.round(normal, 10).tolist(),
        }
    cone = sampled_cone(V, p, **_cone_kwargs(args))
    tol = cone.tolerance
    normal = flat_normal_of_directions(cone, tol)
    out["sampled"] = {
        **cone.to_dict(),
        "hypersurface_candidate": bool(is_hypersurface_candidate(cone, tol)),
        "symmetric": bool(is_symmetric(cone, tol)),
        "flat_normal": None if normal is None else np.round(normal, 10).tolist(),
    }
    return out


def cmd_multiplicity(args):
    V = _variety(args)
    p = _point(args.at, V.ndim)
    cone = sampled_cone(V, p, **_cone_kwargs(args))
    if V.ndim == 3:
        normal = flat_normal_of_directions(cone, cone.tolerance)
        if normal is None:
            raise AnalysisError("surface cone is not flat; its density is not estimated")
        from .cone import FlatCone

        cone = FlatCone(normal)
    res = args.resolution if args.resolution is not None else 1e-3
    m = multiplicity(V, p, cone, resolution=res, seed=args.seed)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(m.numerator.csv_rows())
    return m.to_dict()


def cmd_puiseux(args):
    f = parse(args.expr)
    if f.nvars != 2:
        raise UsageError("puiseux expects a curve in two variables")
    p = _point(args.at, 2)
    g = translate(f, p)
    if g.constant_term() != 0:
        raise AnalysisError("point is not on the curve")
    return classify_germ(g, Fraction(args.order) if args.order else None).to_dict()


def cmd_support(args):
    f = parse(args.expr)
    box = _box(args.region, f.nvars)
    spacing = args.spacing or max(hi - lo for lo, hi in box) / 200
    S = sample_surface(f, box, spacing, seed=args.seed)
    rep = positive_support(S, r_max=args.r_max)
    convex, witness = convexity_probe(S)
    out = rep.to_dict()
    out["spacing"] = spacing
    out["convexity_probe"] = "passed" if convex else "failed"
    if witness is not None:
        out["convexity_witness"] = [np.round(w, 10).tolist() for w in witness]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            csv.writer(fh).writerows(S.csv_rows())
    return out


def cmd_closure(args):
    return projective_closure(parse(args.expr), seed=args.seed).to_dict()


def cmd_classify(args):
    V = _variety(args)
    p = _point(args.at, V.ndim)
    return classify_point(V, p, _options(args)).to_dict()


def cmd_gallery(args):
    corpus = load_corpus()
    report, results = run_gallery(seed=args.seed, name_filter=args.filter, options=_options(args), corpus=corpus)
    if args.svg:
        write_plots(corpus, results, args.svg)
    if not args.quiet:
        for e in report["entries"]:
            print(f"{'ok  ' if e['pass'] else 'FAIL'} {e['name']}", file=sys.stderr)
    text = report_json(report)
    if args.json_out:
        Path(args.json_out).write_text(text)
    else:
        sys.stdout.write(text)
    return None if report["passed"] else EXIT_MISMATCH


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------
def _add_globals(p: argparse.ArgumentParser, suppress: bool, json_flag: bool = True):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(42), help="random seed (default 42)")
    p.add_argument("--tol", type=float, default=d(None), help="angular tolerance for sampled cones")
    p.add_argument("--samples", type=int, default=d(None), help="angular samples per great circle")
    p.add_argument("--resolution", type=float, default=d(None), help="relative grid cell for measures")
    if json_flag:
        p.add_argument("--json", action="store_true", default=d(False), help="emit JSON (the default format)")
    p.add_argument("--quiet", action="store_true", default=d(False), help="suppress progress on stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conelab {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, expr=True, at=False):
        sp = sub.add_parser(name, help=help_text)
        # gallery takes --json OUT instead of the flag
        _add_globals(sp, suppress=True, json_flag=name != "gallery")
        if at:
            sp.add_argument("--at", required=True, metavar="P", help="point, e.g. 0,0 or 1/2,0,0")
        if expr:
            sp.add_argument("expr", help="polynomial expression")
        sp.set_defaults(func=func)
        return sp

    add("parse", cmd_parse, "parse and print a polynomial")
    add("leading-form", cmd_leading_form, "lowest-degree homogeneous part at a point", at=True)
    for name, func, text in (("cone", cmd_cone, "tangent cone descriptors"),
                             ("multiplicity", cmd_multiplicity, "density and multiplicity"),
                             ("classify", cmd_classify, "regularity verdict")):
        sp = add(name, func, text, at=True)
        sp.add_argument("--patch", action="append", default=[], metavar="INEQ",
                        help="constraint INEQ >= 0 on the main patch (repeatable)")
        sp.add_argument("--union", action="append", default=[], metavar="EXPR",
                        help="add another zero set to the union (repeatable)")
        if name == "multiplicity":
            sp.add_argument("--csv", metavar="PATH", help="write the ratio table as CSV")
    sp = add("puiseux", cmd_puiseux, "Newton-Puiseux branches of a plane curve")
    sp.add_argument("--at", default="0,0", metavar="P")
    sp.add_argument("--order", default=None, help="truncation order (rational)")
    sp = add("support", cmd_support, "positive support radii over a region")
    sp.add_argument("--region", required=True, metavar="BOX", help="lo:hi,lo:hi[,lo:hi]")
    sp.add_argument("--spacing", type=float, default=None)
    sp.add_argument("--r-max", type=float, default=None, dest="r_max")
    sp.add_argument("--csv", metavar="PATH", help="write samples and normals as CSV")
    add("closure", cmd_closure, "projective closure and points at infinity")
    sp = add("gallery", cmd_gallery, "run the shipped example corpus", expr=False)
    sp.add_argument("--filter", default=None, metavar="NAME")
    sp.add_argument("--json", dest="json_out", metavar="OUT", default=None, help="write the report to OUT")
    sp.add_argument("--svg", metavar="DIR", default=None, help="write SVG and CSV plot data to DIR")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        result = args.func(args)
    except (ParseError, UsageError) as exc:
        print(f"conelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AnalysisError, ValueError, ZeroDivisionError) as exc:
        print(f"conelab: analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"conelab: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    if isinstance(result, int):
        return result
    if result is not None:
        sys.stdout.write(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
