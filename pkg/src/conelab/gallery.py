"""The shipped corpus of example varieties, its runner and static plot output."""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np
from skimage import measure as skm

from . import __version__
from ._sampling import workers
from .classify import Options, classify_point
from .cone import sampled_cone
from .expr import default_variables, leading_form, parse
from .measure import multiplicity
from .projective import entire_graph_direction, exact_equivalence, projective_closure, standard_cone
from .support import positive_support, sample_surface
from .variety import Variety

CORPUS_COUNT = 17


class CorpusError(ValueError):
    pass


def load_corpus(path=None) -> list[dict]:
    """Entries of the corpus file, checked against the recorded entry count."""
    if path is None:
        text = resources.files("conelab").joinpath("data/gallery.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    entries = data["entries"]
    if data.get("count") != len(entries) or (path is None and len(entries) != CORPUS_COUNT):
        raise CorpusError(f"corpus has {len(entries)} entries, expected {data.get('count')}")
    names = [e["name"] for e in entries]
    if len(set(names)) != len(names):
        raise CorpusError("duplicate entry names in corpus")
    for e in entries:
        if not e.get("checks"):
            raise CorpusError(f"entry {e['name']} has no expectations")
    return entries


def entry_variety(entry: dict) -> Variety:
    if "patches" in entry:
        texts = [eq for eq, _ in entry["patches"]] + [c for _, cons in entry["patches"] for c in cons]
        names = set()
        for t in texts:
            names |= set(parse(t).used_variables())
        names = default_variables(names)
        return Variety.from_text(*[(eq, cons) for eq, cons in entry["patches"]], variables=names)
    f = parse(entry["definition"])
    cons = [parse(c, f.variables) for c in entry.get("constraints", [])]
    return Variety.from_polynomial(f, cons)


def _close(observed, expected, rel_tol) -> bool:
    return observed is not None and abs(observed - expected) <= rel_tol * abs(expected)


def run_entry(entry: dict, seed: int = 42, options: Options | None = None) -> dict:
    """Evaluate every check of one corpus entry."""
    opts = replace(options or Options(), seed=seed)
    V = entry_variety(entry)
    out = {"name": entry["name"], "checks": []}
    verdict = None
    density = None
    for chk in entry["checks"]:
        kind = chk["check"]
        expected = chk.get("expected")
        observed = None
        if kind == "class":
            if verdict is None:
                verdict = classify_point(V, entry["point"], opts)
            observed = verdict.kind
            ok = observed == expected
        elif kind in ("density", "multiplicity"):
            if density is None:
                cone = sampled_cone(V, entry["point"], seed=seed)
                density = multiplicity(V, entry["point"], cone, resolution=opts.resolution, seed=seed)
                out["density_table"] = density.numerator.csv_rows()
            value = density.numerator.liminf_estimate if kind == "density" else density.value
            observed = round(value, 10)
            ok = _close(observed, expected, chk["rel_tol"])
        elif kind == "hoelder":
            if verdict is None:
                verdict = classify_point(V, entry["point"], opts)
            observed = verdict.evidence.get("hoelder_exponent")
            ok = _close(observed, expected, chk["rel_tol"])
        elif kind in ("closure_conical", "closure_smooth"):
            f = V.polynomial
            rep = projective_closure(f, seed=seed)
            out["closure"] = rep.to_dict()
            if kind == "closure_smooth":
                observed = bool(rep.infinity_points) and all(p.verdict == "smooth" for p in rep.infinity_points)
            else:
                observed = False
                for p in rep.singular_points:
                    if p.germ is None:
                        continue
                    h = leading_form(p.germ).base
                    if h.degree == 2 and exact_equivalence(h, standard_cone(h.variables)) is not None:
                        observed = True
            ok = observed == expected
        elif kind == "entire_graph":
            f = V.patches[0].equation
            cons = V.patches[0].constraints
            S = sample_surface(f, entry["region"], 0.02, seed=seed, constraints=cons)
            res = entire_graph_direction(f, S, constraints=cons, seed=seed, region=entry.get("line_region"))
            out["entire_graph"] = res.to_dict()
            observed = None if res.direction is None else [round(float(c), 10) + 0.0 for c in res.direction]
            if expected is None:
                ok = observed is None
            else:
                ok = observed is not None and np.allclose(observed, expected, atol=1e-9)
        elif kind == "reach":
            f = V.polynomial
            box = np.asarray(entry["region"], dtype=float)
            S = sample_surface(f, box, 0.005, seed=seed)
            rep = positive_support(S, r_max=float(np.max(box[:, 1] - box[:, 0])))
            observed = round(rep.double_uniform_r, 10)
            ok = _close(observed, expected, chk["rel_tol"])
        else:
            raise CorpusError(f"unknown check {kind!r}")
        out["checks"].append({"check": kind, "expected": expected, "observed": observed, "pass": bool(ok)})
    if verdict is not None:
        out["verdict"] = verdict.to_dict()
    out["pass"] = all(c["pass"] for c in out["checks"])
    return out


def _run_one(args):
    entry, seed, options = args
    return run_entry(entry, seed, options)


def run_gallery(seed: int = 42, name_filter: str | None = None, options: Options | None = None,
                corpus=None) -> tuple[dict, list[dict]]:
    """Run the corpus (optionally a substring-filtered part); output order follows the corpus."""
    entries = load_corpus() if corpus is None else corpus
    if name_filter:
        entries = [e for e in entries if name_filter in e["name"]]
    jobs = [(e, seed, options) for e in entries]
    n = min(workers(), len(jobs)) if jobs else 1
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    opts = options or Options()
    return {
        "tool": "conelab",
        "version": __version__,
        "seed": seed,
        "options": {"margin": opts.margin, "tolerance": opts.tolerance, "resolution": opts.resolution},
        "count": len(results),
        "entries": [{k: v for k, v in r.items() if k != "density_table"} for r in results],
        "passed": all(r["pass"] for r in results),
    }, results


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# static plots
# ---------------------------------------------------------------------------
_SIZE = 400


def _polylines(entry: dict, V: Variety, box: np.ndarray, n: int = 400):
    """Zero-set polylines in the plane, or a slice through the point for surfaces."""
    lines = []
    axes = [np.linspace(lo, hi, n) for lo, hi in box[:2]] if V.ndim == 2 else [
        np.linspace(*box[0], n), np.linspace(*box[2], n)]
    X, Y = np.meshgrid(*axes, indexing="ij")
    if V.ndim == 2:
        grid = np.stack([X, Y], axis=-1)
    else:
        y0 = float(entry["point"].split(",")[1]) if "point" in entry else 0.0
        grid = np.stack([X, np.full_like(X, y0), Y], axis=-1)
    step = np.array([a[1] - a[0] for a in axes])
    origin = np.array([a[0] for a in axes])
    for patch in V.patches:
        vals = patch.equation.lambdify()(grid)
        for c in skm.find_contours(vals, 0.0):
            xy = origin + c * step
            keep = np.ones(len(xy), dtype=bool)
            if patch.constraints and V.ndim == 2:
                for g in patch.constraints:
                    keep &= g.lambdify()(xy) >= 0
            run = []
            for pt, k in zip(xy, keep):
                if k:
                    run.append(pt)
                elif len(run) > 1:
                    lines.append(np.array(run))
                    run = []
                else:
                    run = []
            if len(run) > 1:
                lines.append(np.array(run))
    return lines


def entry_svg(entry: dict, result: dict) -> str:
    """SVG 1.1 drawing of an entry: zero set, marked point, tangent rays and support circle."""
    V = entry_variety(entry)
    box = np.asarray(entry["region"], dtype=float)
    view = box[:2] if V.ndim == 2 else box[[0, 2]]
    span = max(view[:, 1] - view[:, 0])
    scale = _SIZE / span

    def px(pt):
        return (pt[0] - view[0, 0]) * scale, _SIZE - (pt[1] - view[1, 0]) * scale

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_SIZE}" height="{_SIZE}" '
        f'viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<title>{entry["name"]}</title>',
        f'<rect width="{_SIZE}" height="{_SIZE}" fill="white"/>',
    ]
    for line in _polylines(entry, V, box):
        pts = " ".join("{:.2f},{:.2f}".format(*px(p)) for p in line)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1.5"/>')
    if "point" in entry:
        p = [float(v) for v in entry["point"].split(",")]
        p2 = p[:2] if V.ndim == 2 else [p[0], p[2]]
        cx, cy = px(p2)
        ev = result.get("verdict", {}).get("evidence", {})
        rays = ev.get("branches", {}).get("rays") if V.ndim == 2 else None
        if rays is None and "flat_normal" in ev:
            nrm = ev["flat_normal"]
            t = [-nrm[1], nrm[0]] if V.ndim == 2 else [-nrm[2], nrm[0]]
            rays = [t, [-t[0], -t[1]]]
        for r in rays or []:
            end = px([p2[0] + 0.3 * span * r[0], p2[1] + 0.3 * span * r[1]])
            parts.append(f'<line x1="{cx:.2f}" y1="{cy:.2f}" x2="{end[0]:.2f}" y2="{end[1]:.2f}" '
                         'stroke="steelblue" stroke-width="1.5"/>')
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="4" fill="crimson"/>')
    for chk in result.get("checks", []):
        if chk["check"] == "reach" and chk["observed"]:
            cx, cy = px([0.0, 0.0])
            parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{chk["observed"] * scale:.2f}" fill="none" '
                         'stroke="darkorange" stroke-dasharray="4 3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_plots(corpus: list[dict], results: list[dict], directory) -> list[Path]:
    """One SVG per entry and a CSV ratio table for entries with a density run."""
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_name = {e["name"]: e for e in corpus}
    written = []
    for res in results:
        entry = by_name[res["name"]]
        path = out_dir / f"{res['name']}.svg"
        path.write_text(entry_svg(entry, res))
        written.append(path)
        if "density_table" in res:
            path = out_dir / f"{res['name']}-density.csv"
            with path.open("w", newline="") as fh:
                csv.writer(fh).writerows(res["density_table"])
            written.append(path)
    return written
