"""Realize a simple martingale as a circle function with the same distribution.

The terminal distribution is laid out as arcs on the unit-length circle and
the arrangement is certified by the circle-class verifier against an
enlarged hole chosen as a Minkowski interpolation between the outer body and
the hole.  The search is exhaustive over cyclic orders for up to eight atoms
and annealed above; a failed search is reported as inconclusive, never as a
disproof.
"""

import itertools

import numpy as np

from .admissible import StepFunction, circle_membership
from .geometry import Segment, minkowski_interpolate, segment_min_distance
from .martingale import AtomicMeasure, terminal_distribution, validate

EXHAUSTIVE_ATOMS = 8


class GluingError(RuntimeError):
    pass


class MeasureNode:
    def __init__(self, measure, mass, children=None):
        self.measure = measure
        self.mass = float(mass)
        self.children = list(children) if children else []

    def is_leaf(self):
        return not self.children


class MeasureMartingale:
    """Tree mirroring a simple martingale; nodes carry the conditional
    distribution of the terminal value."""

    def __init__(self, root):
        self.root = root

    def walk(self):
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            yield node, path
            for i, c in enumerate(reversed(node.children)):
                stack.append((c, path + (len(node.children) - 1 - i,)))


def lift_to_measures(m):
    """Conditional terminal distributions, computed bottom-up."""

    def build(node):
        if node.is_leaf():
            return MeasureNode(AtomicMeasure([node.value], [1.0]), node.mass)
        kids = [build(c) for c in node.children]
        pts = np.concatenate([k.measure.points for k in kids])
        ms = np.concatenate([k.mass * k.measure.masses for k in kids])
        return MeasureNode(AtomicMeasure(pts, ms / ms.sum()), node.mass, kids)

    return MeasureMartingale(build(m.root))


def validate_lift(mm, enlarged_holes):
    """Check the measure-martingale identity and the barycenter condition.

    Every node measure must be the mass mix of its children's measures; every
    convex mix of children measures must have barycenter outside the closed
    enlarged hole, which reduces to clearance of the children-barycenter
    hull.  Leaves must be delta measures.
    """
    if not isinstance(enlarged_holes, (list, tuple)):
        enlarged_holes = (enlarged_holes,)
    from .martingale import _hull_clear_of_hole
    problems = []
    for node, path in mm.walk():
        if node.is_leaf():
            if len(node.measure) != 1:
                problems.append({"path": list(path), "kind": "leaf_not_delta",
                                 "detail": len(node.measure)})
            continue
        pts = np.concatenate([k.measure.points for k in node.children])
        ms = np.concatenate([k.mass * k.measure.masses for k in node.children])
        mix = AtomicMeasure(pts, ms / ms.sum())
        if not node.measure.same_as(mix, point_tol=1e-10, mass_tol=1e-12):
            problems.append({"path": list(path), "kind": "measure_identity",
                             "detail": None})
        barys = np.array([k.measure.barycenter() for k in node.children])
        hull_pts = np.vstack([barys, node.measure.barycenter()[None, :]])
        for eh in enlarged_holes:
            ok, worst = _hull_clear_of_hole(hull_pts, eh, closed_variant=True)
            if not ok:
                problems.append({"path": list(path), "kind": "hull_hits_enlarged_hole",
                                 "detail": worst})
    return {"ok": not problems, "problems": problems}


def _support_points(m):
    """Sampled points of the union of node hulls (children segments)."""
    pts = [m.root.value.copy()]
    for node, _, _ in m.walk():
        if node.is_leaf():
            pts.append(node.value)
            continue
        vals = [c.value for c in node.children] + [node.value]
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                seg = Segment(vals[i], vals[j])
                ts = np.linspace(0.0, 1.0, 17)
                pts.extend(seg.point(ts))
    return np.array(pts)


def choose_enlarged_hole(m, lens, backoff=0.1, n_boundary=128):
    """Enlarged hole(s) as outer/hole interpolations clear of the martingale.

    The interpolation parameter is found by bisection balancing the
    clearance from the martingale hulls against the nesting margin over the
    hole closures, then backed off toward the hole.  Fails when the hulls
    touch the hole closures.
    """
    C = _support_points(m)

    def hats(eps):
        return [minkowski_interpolate(lens.outer, h, eps) for h in lens.holes]

    def hole_boundary_samples(h):
        if lens.dim == 2:
            lo, hi, periodic = h._param_window()
            ts = np.linspace(lo, hi, n_boundary, endpoint=not periodic)
            return h.boundary_param(ts)
        from .geometry import _sphere_grid
        return _sphere_grid(lens.dim, n_boundary) * h.params["radius"] + h.params["center"]

    bnd = [hole_boundary_samples(h) for h in lens.holes]

    def margins(eps):
        hs = hats(eps)
        sep = min(float(np.min(h.signed_distance(C))) for h in hs)
        nest = min(float(-np.max(h.signed_distance(b)))
                   for h, b in zip(hs, bnd))
        return sep, nest

    sep1, _ = margins(1.0 - 1e-9)
    if sep1 <= 0:
        raise GluingError("martingale hulls touch the hole closure; "
                          "no enlarged hole separates them")
    lo, hi = 0.0, 1.0 - 1e-9
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        sep, nest = margins(mid)
        if sep < nest:
            lo = mid
        else:
            hi = mid
    eps_bal = 0.5 * (lo + hi)
    eps = eps_bal + backoff * (1.0 - eps_bal)
    sep, nest = margins(eps)
    if sep <= 0 or nest <= 0:
        raise GluingError(f"no valid interpolation parameter (sep={sep}, nest={nest})")
    return hats(eps), eps, {"separation": sep, "nesting": nest}


class RealizationReport:
    def __init__(self, found, phi=None, eps=None, stats=None, verifier=None,
                 reason=""):
        self.found = bool(found)
        self.phi = phi
        self.eps = eps
        self.stats = stats or {}
        self.verifier = verifier
        self.reason = reason

    def to_dict(self):
        return {"found": self.found,
                "phi": self.phi.to_dict() if self.phi is not None else None,
                "eps": self.eps, "stats": self.stats,
                "verifier": self.verifier.to_dict() if self.verifier else None,
                "reason": self.reason}

    def __repr__(self):
        return f"RealizationReport(found={self.found}, eps={self.eps})"


def _arrangement(dist, order):
    masses = dist.masses[list(order)]
    values = dist.points[list(order)]
    breaks = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
    return StepFunction("circle", breaks, values)


def _adjacent_margin(dist, order, hats):
    vals = dist.points[list(order)]
    worst = np.inf
    n = len(vals)
    for i in range(n):
        seg = Segment(vals[i], vals[(i + 1) % n])
        for h in hats:
            sd, _ = segment_min_distance(seg, h)
            worst = min(worst, sd)
    return worst


def realize_on_circle(m, lens, budget=400, seed=0, resolution=None):
    """Search for a circle function equidistributed with the terminal value.

    Atoms become arcs with lengths equal to their masses; cyclic orders are
    enumerated exhaustively for up to eight atoms (lexicographically, so the
    first certified arrangement is the least one) and by seeded annealing
    above.  Every success is certified by the circle-class verifier; an
    exhausted budget yields an inconclusive report, not a disproof.
    """
    rep = validate(m, lens.as_variant(True))
    if not rep.ok:
        raise ValueError(f"martingale is not valid on the starred lens: {rep.problems[:3]}")
    dist = terminal_distribution(m)
    n = len(dist)
    stats = {"orders_tried": 0, "full_checks": 0, "best_margin": -np.inf}
    try:
        hats, eps, margins = choose_enlarged_hole(m, lens)
    except GluingError as e:
        return RealizationReport(False, stats=stats, reason=str(e))
    stats["hat_margins"] = margins

    if n == 1:
        phi = _arrangement(dist, [0])
        ver = circle_membership(phi, lens, hats, resolution)
        stats["orders_tried"] = stats["full_checks"] = 1
        stats["best_margin"] = ver.margin
        return RealizationReport(ver.is_member, phi if ver.is_member else None,
                                 eps, stats, ver)

    def orders():
        rest = list(range(1, n))
        for perm in itertools.permutations(rest):
            if n >= 3 and perm[0] > perm[-1]:
                continue  # reflection of an earlier order
            yield (0,) + perm

    def check(order):
        stats["orders_tried"] += 1
        quick = _adjacent_margin(dist, order, hats)
        stats["best_margin"] = max(stats["best_margin"], quick)
        if quick <= 0:
            return None
        phi = _arrangement(dist, order)
        stats["full_checks"] += 1
        ver = circle_membership(phi, lens, hats, resolution)
        if ver.is_member:
            return phi, ver
        return None

    if n <= EXHAUSTIVE_ATOMS:
        for order in orders():
            if stats["full_checks"] >= budget:
                break
            hit = check(order)
            if hit:
                phi, ver = hit
                stats["best_margin"] = ver.margin
                return RealizationReport(True, phi, eps, stats, ver)
        return RealizationReport(False, eps=eps, stats=stats,
                                 reason="budget exhausted over cyclic orders")

    # annealed ordering search for larger atom counts
    rng = np.random.default_rng(seed)
    ang = np.arctan2(dist.points[:, 1], dist.points[:, 0])
    order = tuple(np.argsort(ang))
    best_order, best_q = order, _adjacent_margin(dist, order, hats)
    temp = 1.0
    for _ in range(budget):
        i, j = rng.integers(1, n, size=2)
        cand = list(best_order)
        cand[i], cand[j] = cand[j], cand[i]
        q = _adjacent_margin(dist, cand, hats)
        if q > best_q or rng.random() < np.exp((q - best_q) / max(temp, 1e-6)):
            best_order, best_q = tuple(cand), q
        temp *= 0.99
        stats["orders_tried"] += 1
        if best_q > 0:
            hit = check(best_order)
            if hit:
                phi, ver = hit
                stats["best_margin"] = ver.margin
                return RealizationReport(True, phi, eps, stats, ver)
    return RealizationReport(False, eps=eps, stats=stats,
                             reason="annealing budget exhausted")


__all__ = ["MeasureMartingale", "MeasureNode", "RealizationReport",
           "GluingError", "lift_to_measures", "validate_lift",
           "choose_enlarged_hole", "realize_on_circle"]
