"""Configuration, canned scenarios, orchestration, and file emission.

Subcommands: check | solve | split | glue | extend | example <name>.
Configs, reports, and traces are JSON; fields are CSV; plots are SVG.  All
outputs are deterministic for a fixed config and seed.
"""

import argparse
import json
import sys

import numpy as np

from . import admissible, extension, gluing, martingale, solver, splitting
from .admissible import StepFunction, boundary_function, interval_membership, payoff
from .geometry import ConvexBody, LensDomain, check_conditions
from .martingale import SimpleMartingale, expected_payoff, terminal_distribution, validate
from .solver import SolverConfig, chord_value_iteration, check_local_concavity

CHEESE_RADIUS = np.sqrt(3.0) / 4.0 - 1.0 / 239.0
CHANNEL_RADIUS = 1.0 / 2.9


def canned_domains():
    """Exact parameterizations of the canonical domains."""
    cheese_centers = [(0.5 * np.cos(2 * np.pi * j / 3), 0.5 * np.sin(2 * np.pi * j / 3))
                      for j in range(3)]
    entries = [
        {"name": "disk_in_disk",
         "params": {"outer_radius": 1.0, "hole_radius": 0.4},
         "domain": {"outer": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                    "holes": [{"kind": "ball", "center": [0.0, 0.0], "radius": 0.4}]}},
        {"name": "a2",
         "params": {"delta": 2.0},
         "domain": {"outer": {"kind": "hyperbola", "level": 1.0},
                    "holes": [{"kind": "hyperbola", "level": 2.0}]},
         "note": "weight class domain between two hyperbolas; unbounded"},
        {"name": "bmo",
         "params": {"eps": 1.0, "dim": 2},
         "domain": {"outer": {"kind": "paraboloid", "dim": 2, "coeff": 1.0, "offset": 0.0},
                    "holes": [{"kind": "paraboloid", "dim": 2, "coeff": 1.0, "offset": 1.0}]},
         "note": "oscillation-class domain between two paraboloids; unbounded"},
        {"name": "sphere_bmo",
         "params": {"eps": 0.5, "dim": 2},
         "domain": {"outer": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                    "holes": [{"kind": "ball", "center": [0.0, 0.0],
                               "radius": float(np.sqrt(1.0 - 0.25))}]},
         "note": "unit ball minus the ball of radius sqrt(1 - eps^2)"},
        {"name": "cheese",
         "params": {"hole_radius": CHEESE_RADIUS},
         "domain": {"outer": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                    "holes": [{"kind": "ball", "center": [float(c[0]), float(c[1])],
                               "radius": float(CHEESE_RADIUS)} for c in cheese_centers]},
         "note": "three almost-touching holes; not strongly martingale connected"},
        {"name": "channel",
         "params": {"hole_radius": CHANNEL_RADIUS},
         "domain": {"outer": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0},
                    "holes": [{"kind": "ball", "center": [-0.5, 0.0], "radius": float(CHANNEL_RADIUS)},
                              {"kind": "ball", "center": [0.5, 0.0], "radius": float(CHANNEL_RADIUS)}]},
         "note": "two-hole counterexample domain with a non-convex union hole"},
        {"name": "hyperbola_pair",
         "params": {},
         "domain": {"outer": {"kind": "hyperbola", "level": 1.0},
                    "holes": [{"kind": "hyperbola", "level": 1.0, "shift": [1.0, 1.0]}]},
         "note": "unbounded domain with rays; still satisfies the cone condition"},
        {"name": "no_cone",
         "params": {},
         "domain": {"outer": {"kind": "upper_hyperbola", "c": 1.0},
                    "holes": [{"kind": "paraboloid", "dim": 2, "coeff": 1.0, "offset": 2.0}]},
         "note": "domain between sqrt(x^2+1) and x^2+2; fails the cone condition"},
        {"name": "multiplicative",
         "params": {"p": 2.0, "eps": 1.0},
         "domain": None,
         "supported": False,
         "note": "convex hull of the moment curve minus a paraboloid region; the "
                 "hole closure is not inside the outer body, so lens machinery "
                 "does not apply (stored as a documented limitation)"},
    ]
    for e in entries:
        e.setdefault("supported", e["domain"] is not None)
    return entries


def make_lens(spec, closed_variant=False):
    """Lens from a canned name or an explicit descriptor."""
    if isinstance(spec, str):
        for e in canned_domains():
            if e["name"] == spec:
                if not e["supported"]:
                    raise ValueError(f"domain {spec!r} is stored as a documented "
                                     f"limitation: {e['note']}")
                d = dict(e["domain"])
                d["closed_variant"] = closed_variant
                return LensDomain.from_descriptor(d)
        raise ValueError(f"unknown canned domain {spec!r}")
    d = dict(spec)
    d.setdefault("closed_variant", closed_variant)
    return LensDomain.from_descriptor(d)


def section9_function():
    """Three-valued function whose payoff separates the two value notions."""
    return StepFunction("interval", [0.0, 1.0 / 3.0, 2.0 / 3.0],
                        [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])


class ScenarioConfig:
    """Parsed run configuration; round-trips through JSON."""

    def __init__(self, pipeline, domain, boundary=None, solver_cfg=None,
                 split_cfg=None, extension_cfg=None, out_dir="out", seed=0,
                 extras=None):
        self.pipeline = pipeline
        self.domain = domain
        self.boundary = boundary or {"kind": "zero"}
        self.solver_cfg = solver_cfg or {}
        self.split_cfg = split_cfg or {}
        self.extension_cfg = extension_cfg or {}
        self.out_dir = out_dir
        self.seed = int(seed)
        self.extras = extras or {}

    def to_dict(self):
        return {"pipeline": self.pipeline, "domain": self.domain,
                "boundary": self.boundary, "solver": self.solver_cfg,
                "splitting": self.split_cfg, "extension": self.extension_cfg,
                "out_dir": self.out_dir, "seed": self.seed,
                "extras": self.extras}

    @staticmethod
    def from_dict(d):
        known = {"pipeline", "domain", "boundary", "solver", "splitting",
                 "extension", "out_dir", "seed", "extras"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "pipeline" not in d or "domain" not in d:
            raise ValueError("config requires 'pipeline' and 'domain'")
        return ScenarioConfig(d["pipeline"], d["domain"], d.get("boundary"),
                              d.get("solver"), d.get("splitting"),
                              d.get("extension"), d.get("out_dir", "out"),
                              d.get("seed", 0), d.get("extras"))

    @staticmethod
    def load(path):
        with open(path) as fh:
            return ScenarioConfig.from_dict(json.load(fh))


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _viridis_lite(t):
    # few-anchor approximation of a perceptual ramp
    anchors = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140],
                        [94, 201, 98], [253, 231, 37]], dtype=float)
    t = np.clip(t, 0.0, 1.0) * (len(anchors) - 1)
    i = np.minimum(t.astype(int), len(anchors) - 2)
    frac = t - i
    rgb = anchors[i] * (1 - frac[:, None]) + anchors[i + 1] * frac[:, None]
    return rgb.astype(int)


def emit_heatmap(field, lens, path):
    """SVG heatmap with lens boundaries overlaid; unreached cells hatched."""
    ny, nx = field.shape
    h = field.h
    xs, ys = field.cell_centers()
    x_lo, y_lo = field.x0 - h / 2, field.y0 - h / 2
    w, ht = nx * h, ny * h
    scale = 600.0 / max(w, ht)

    def sx(x):
        return (x - x_lo) * scale

    def sy(y):
        return (ht - (y - y_lo)) * scale  # flip vertically

    vals = field.values[field.mask]
    finite = vals[np.isfinite(vals)]
    lo = float(finite.min()) if len(finite) else 0.0
    hi = float(finite.max()) if len(finite) else 1.0
    span = hi - lo if hi > lo else 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{sx(x_lo + w):.1f}" '
        f'height="{sy(y_lo):.1f}" viewBox="0 0 {sx(x_lo + w):.1f} {sy(y_lo):.1f}">',
        '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">'
        '<path d="M0,6 L6,0" stroke="#888" stroke-width="1"/></pattern></defs>',
    ]
    iy, ix = np.nonzero(field.mask)
    cell_vals = field.values[iy, ix]
    norm = (cell_vals - lo) / span
    colors = _viridis_lite(np.nan_to_num(norm, nan=0.0))
    cell_px = h * scale + 0.5
    for k in range(len(ix)):
        x = sx(xs[ix[k]] - h / 2)
        y = sy(ys[iy[k]] + h / 2)
        if np.isnan(cell_vals[k]):
            fill = 'url(#hatch)'
        else:
            r, g, b = colors[k]
            fill = f"rgb({r},{g},{b})"
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cell_px:.2f}" '
                     f'height="{cell_px:.2f}" fill="{fill}"/>')

    def boundary_path(body):
        lo_t, hi_t, periodic = body._param_window()
        ts = np.linspace(lo_t, hi_t, 256, endpoint=True)
        pts = body.boundary_param(ts)
        coords = " ".join(f"{sx(p[0]):.2f},{sy(p[1]):.2f}" for p in pts)
        return f'<polyline points="{coords}" fill="none" stroke="black" stroke-width="1.5"/>'

    if lens.dim == 2 and lens.outer.is_bounded():
        parts.append(boundary_path(lens.outer))
    for hole in lens.holes:
        if lens.dim == 2:
            parts.append(boundary_path(hole))
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")


def _field_meta(field):
    meta = dict(field.meta)
    meta["grid"] = {"x0": field.x0, "y0": field.y0, "h": field.h,
                    "nx": field.shape[1], "ny": field.shape[0]}
    meta["unreached"] = field.unreached_count()
    return meta


def _build(cfg, closed_variant=False):
    lens = make_lens(cfg.domain, closed_variant)
    f = boundary_function(cfg.boundary)
    scfg = SolverConfig(**cfg.solver_cfg) if cfg.solver_cfg else SolverConfig()
    return lens, f, scfg


def run_scenario(cfg, out_dir=None):
    """Execute the configured pipeline; returns 0 on success."""
    import os
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    status = 0

    if cfg.pipeline == "check":
        lens = make_lens(cfg.domain)
        strict, cone = check_conditions(lens)
        report = {"strict_convexity": strict.to_dict(),
                  "cone_condition": cone.to_dict(),
                  "nesting_margin": lens.checked.get("nesting_margin")}
        _dump_json(report, f"{out}/conditions.json")
        if strict.verdict == "fail" or cone.verdict == "fail":
            status = 1

    elif cfg.pipeline == "solve":
        lens, f, scfg = _build(cfg)
        field = chord_value_iteration(lens, f, scfg)
        conc = check_local_concavity(field, lens, seed=cfg.seed)
        field.to_csv(f"{out}/field.csv")
        _dump_json({"meta": _field_meta(field), "concavity": conc},
                   f"{out}/solve.json")
        emit_heatmap(field, lens, f"{out}/field.svg")
        if not conc["ok"]:
            status = 1

    elif cfg.pipeline == "split":
        lens, f, _ = _build(cfg)
        phi = (section9_function() if cfg.extras.get("phi") == "section9"
               else StepFunction.from_dict(cfg.extras["phi"]))
        rep = interval_membership(phi, lens)
        spcfg = splitting.SplitConfig(**cfg.split_cfg) if cfg.split_cfg else splitting.SplitConfig()
        result = {"membership": rep.to_dict()}
        if rep.is_member:
            mart, trace = splitting.build_martingale(phi, lens, spcfg, f)
            shrunk = lens.with_holes(splitting.shrunk_holes(lens, spcfg.shrink))
            vrep = validate(mart, shrunk)
            result["trace"] = trace
            result["validation"] = vrep.to_dict()
            result["distribution_matches"] = bool(
                terminal_distribution(mart).same_as(phi.distribution()))
            _dump_json(mart.to_dict(), f"{out}/martingale.json")
            if not (vrep.ok and result["distribution_matches"]):
                status = 1
        else:
            status = 1
        _dump_json(result, f"{out}/split.json")

    elif cfg.pipeline == "glue":
        lens, f, _ = _build(cfg, closed_variant=True)
        mart = SimpleMartingale.from_dict(cfg.extras["martingale"])
        rr = gluing.realize_on_circle(mart, lens, seed=cfg.seed)
        report = rr.to_dict()
        if rr.found:
            report["payoff_identity_error"] = abs(
                payoff(rr.phi, f) - expected_payoff(mart, f))
            report["distribution_matches"] = bool(
                terminal_distribution(mart).same_as(rr.phi.distribution()))
            if not report["distribution_matches"]:
                status = 1
        else:
            status = 1
        _dump_json(report, f"{out}/glue.json")

    elif cfg.pipeline == "extend":
        lens, f, scfg = _build(cfg)
        field = chord_value_iteration(lens, f, scfg)
        ecfg = extension.ExtensionConfig(**cfg.extension_cfg) \
            if cfg.extension_cfg else extension.ExtensionConfig()
        eps = cfg.extras.get("eps", 0.05)
        res = extension.extend_through_free(field, lens, f, eps, ecfg)
        field_ext = chord_value_iteration(res.lens, f, scfg)
        pts = field.points()[:: max(1, field.points().shape[0] // 100)]
        d = field_ext.interp(pts) - field.interp(pts)
        d = d[np.isfinite(d)]
        lip = f.lipschitz or 1.0
        band = eps + 2 * (3 * scfg.grid_step * lip)
        report = {"diagnostics": res.diagnostics,
                  "sandwich": {"min": float(d.min()), "max": float(d.max()),
                               "band": band,
                               "ok": bool(d.min() >= -1e-9 and d.max() <= band)}}
        _dump_json(report, f"{out}/extend.json")
        if not report["sandwich"]["ok"]:
            status = 1

    elif cfg.pipeline == "example":
        status = run_example(cfg.extras.get("name", cfg.domain), cfg, out)

    else:
        raise ValueError(f"unknown pipeline {cfg.pipeline!r}")
    return status


def run_example(name, cfg, out):
    """Canned counterexample scenarios."""
    status = 0
    scfg = SolverConfig(**cfg.solver_cfg) if cfg.solver_cfg else \
        SolverConfig(grid_step=0.01, n_dirs=48, max_iterations=250, tol=1e-7)

    if name == "channel":
        lens = make_lens("channel")
        f = boundary_function({"kind": "channel"})
        phi = section9_function()
        rep = interval_membership(phi, lens)
        pay = payoff(phi, f)
        field = chord_value_iteration(lens, f, scfg)
        val = float(field.interp(np.array([0.0, -1.0 / 3.0])))
        report = {
            "membership": rep.to_dict(),
            "payoff": pay,
            "field_value_at_mean": val,
            "strict_gap": {"payoff_minus_field": pay - val,
                           "ok": bool(rep.is_member and abs(pay) <= 1e-12
                                      and val <= -1e-3)},
            "meta": _field_meta(field),
        }
        field.to_csv(f"{out}/channel_field.csv")
        emit_heatmap(field, lens, f"{out}/channel_field.svg")
        _dump_json(report, f"{out}/channel.json")
        if not report["strict_gap"]["ok"]:
            status = 1

    elif name == "cheese":
        lens = make_lens("cheese")
        f = boundary_function({"kind": "zero"})
        field = chord_value_iteration(lens, f, scfg)
        zero = field.copy()
        zero.values = np.where(field.mask, 0.0, np.nan)
        conc = check_local_concavity(zero, lens, seed=cfg.seed)
        reached = field.values[field.mask]
        reached = reached[np.isfinite(reached)]
        report = {
            "unreached_cells": field.unreached_count(),
            "reached_max_abs": float(np.max(np.abs(reached))) if len(reached) else 0.0,
            "zero_field_concavity": conc,
            "origin_unreached": bool(np.isnan(field.interp(np.array([0.0, 0.0])))),
            "meta": _field_meta(field),
        }
        field.to_csv(f"{out}/cheese_field.csv")
        emit_heatmap(field, lens, f"{out}/cheese_field.svg")
        _dump_json(report, f"{out}/cheese.json")
        ok = (report["unreached_cells"] > 0 and report["origin_unreached"]
              and conc["ok"] and report["reached_max_abs"] <= 1e-12)
        if not ok:
            status = 1

    else:
        raise ValueError(f"unknown example {name!r}")
    return status


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="lensbellman",
        description="Bellman functions on lens domains: chord value iteration, "
                    "martingale splitting and gluing, boundary extensions.")
    parser.add_argument("command",
                        choices=["check", "solve", "split", "glue", "extend", "example"])
    parser.add_argument("name", nargs="?", default=None,
                        help="canned domain or example name (when no --config)")
    parser.add_argument("--config", default=None, help="scenario config JSON")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--grid", type=float, default=None, help="grid step override")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled sweeps")
    args = parser.parse_args(argv)

    try:
        if args.config:
            cfg = ScenarioConfig.load(args.config)
            cfg.pipeline = args.command
        else:
            if args.name is None:
                raise ValueError("either --config or a domain/example name is required")
            extras = {"name": args.name} if args.command == "example" else {}
            cfg = ScenarioConfig(args.command, args.name, extras=extras)
        cfg.seed = args.seed if args.seed else cfg.seed
        if args.grid is not None:
            cfg.solver_cfg = dict(cfg.solver_cfg, grid_step=args.grid)
        status = run_scenario(cfg, out_dir=args.out)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
