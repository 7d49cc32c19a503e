"""Simple martingales on lens domains as finite trees.

A tree node carries a point value and its conditional probability mass; the
children of every node refine it, the leaves sit on the fixed boundary.  Only
finite-depth finitely-branching martingales are represented: they suffice for
the computational targets of the package.
"""

import numpy as np

from .geometry import (ChordNotFoundError, Segment, find_clear_chord,
                       segment_min_distance)

MASS_TOL = 1e-12
VALUE_TOL = 1e-10
MERGE_TOL = 1e-10


class AtomicMeasure:
    """Finitely supported probability measure with positive masses."""

    def __init__(self, points, masses, merge=True):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        masses = np.asarray(masses, dtype=float)
        if len(points) != len(masses):
            raise ValueError("points and masses differ in length")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(masses.sum() - 1.0) > 1e-9:
            raise ValueError(f"masses sum to {masses.sum()}, expected 1")
        if merge:
            points, masses = _merge_atoms(points, masses)
        self.points = points
        self.masses = masses

    def barycenter(self):
        return self.masses @ self.points

    def same_as(self, other, point_tol=MERGE_TOL, mass_tol=MASS_TOL):
        if len(self.points) != len(other.points):
            return False
        a = _lex_order(self.points)
        b = _lex_order(other.points)
        return (np.all(np.abs(self.points[a] - other.points[b]) <= point_tol)
                and np.all(np.abs(self.masses[a] - other.masses[b]) <= mass_tol))

    def scaled_mix(self, others, weights):
        """Mass-weighted mixture of measures (self excluded)."""
        pts = np.concatenate([m.points for m in others])
        ms = np.concatenate([w * m.masses for m, w in zip(others, weights)])
        return AtomicMeasure(pts, ms / ms.sum())

    def __len__(self):
        return len(self.masses)

    def __repr__(self):
        return f"AtomicMeasure({len(self)} atoms)"


def _lex_order(points):
    return np.lexsort(points.T[::-1])


def _merge_atoms(points, masses):
    order = _lex_order(points)
    points, masses = points[order], masses[order]
    out_p, out_m = [points[0]], [masses[0]]
    for p, m in zip(points[1:], masses[1:]):
        if np.linalg.norm(p - out_p[-1]) <= MERGE_TOL:
            w = out_m[-1] + m
            out_p[-1] = (out_m[-1] * out_p[-1] + m * p) / w
            out_m[-1] = w
        else:
            out_p.append(p)
            out_m.append(m)
    return np.array(out_p), np.array(out_m)


class MartingaleNode:
    """Tree node: point value, conditional mass, children."""

    def __init__(self, value, mass=1.0, children=None):
        self.value = np.asarray(value, dtype=float)
        self.mass = float(mass)
        self.children = list(children) if children else []

    def is_leaf(self):
        return not self.children

    def to_dict(self):
        return {"mass": self.mass, "value": self.value.tolist(),
                "children": [c.to_dict() for c in self.children]}

    @staticmethod
    def from_dict(d):
        return MartingaleNode(d["value"], d.get("mass", 1.0),
                              [MartingaleNode.from_dict(c) for c in d.get("children", [])])


class SimpleMartingale:
    """Finite martingale tree with root mass one."""

    def __init__(self, root):
        self.root = root

    @property
    def start(self):
        return self.root.value

    def depth(self):
        def d(node):
            return 0 if node.is_leaf() else 1 + max(d(c) for c in node.children)
        return d(self.root)

    def walk(self):
        """Yield (node, path, path_mass) in preorder."""
        stack = [(self.root, (), self.root.mass)]
        while stack:
            node, path, pm = stack.pop()
            yield node, path, pm
            for i, c in enumerate(reversed(node.children)):
                idx = len(node.children) - 1 - i
                stack.append((c, path + (idx,), pm * c.mass))

    def leaves(self):
        return [(n, pm) for n, _, pm in self.walk() if n.is_leaf()]

    def leaf_count(self):
        return len(self.leaves())

    def subtree(self, node):
        """Renormalized martingale rooted at an inner node."""
        clone = MartingaleNode(node.value, 1.0, node.children)
        return SimpleMartingale(clone)

    def to_dict(self):
        return self.root.to_dict()

    @staticmethod
    def from_dict(d):
        m = SimpleMartingale(MartingaleNode.from_dict(d))
        m.root.mass = 1.0
        return m

    def __repr__(self):
        return f"SimpleMartingale(depth={self.depth()}, leaves={self.leaf_count()})"


class ValidationReport:
    def __init__(self):
        self.problems = []

    @property
    def ok(self):
        return not self.problems

    def add(self, path, kind, detail):
        self.problems.append({"path": list(path), "kind": kind, "detail": detail})

    def to_dict(self):
        return {"ok": self.ok, "problems": self.problems}

    def __repr__(self):
        return f"ValidationReport(ok={self.ok}, problems={len(self.problems)})"


def _hull_vertices_2d(points):
    """Monotone-chain convex hull; returns vertices in order."""
    pts = np.unique(np.round(points, 12), axis=0)
    if len(pts) <= 2:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                u = out[-1] - out[-2]
                v = p - out[-2]
                if u[0] * v[1] - u[1] * v[0] > 0:
                    break
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _point_in_polygon(q, verts):
    if len(verts) < 3:
        return False
    x, y = q
    inside = False
    n = len(verts)
    for i in range(n):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xin:
                inside = not inside
    return inside


def _hull_clear_of_hole(points, hole, closed_variant):
    """Exact 2d check that the convex hull of the points misses the hole.

    Vertices and edges of the hull against the hole oracle, plus an
    anchor-in-hull test for full containment.  In d=3 the faces are sampled.
    """
    pts = np.atleast_2d(points)
    dim = pts.shape[1]
    min_needed = hole.tol if closed_variant else -hole.tol
    if dim == 2:
        verts = _hull_vertices_2d(pts)
        if len(verts) == 1:
            sd = float(hole.signed_distance(verts[0]))
            return sd >= min_needed, sd
        worst = np.inf
        m = len(verts)
        edges = [(verts[i], verts[(i + 1) % m]) for i in range(m)] if m > 2 else [(verts[0], verts[1])]
        for a, b in edges:
            sd, _ = segment_min_distance(Segment(a, b), hole)
            worst = min(worst, sd)
        if m >= 3 and _point_in_polygon(hole.anchor_point(), verts):
            return False, -np.inf
        return worst >= min_needed, worst
    # d = 3: vertices, edges and coarse face sampling
    from scipy.spatial import ConvexHull, Delaunay
    worst = np.inf
    if len(pts) <= dim:
        samples = _simplex_samples(pts)
        worst = float(np.min(hole.signed_distance(samples)))
        return worst >= min_needed, worst
    try:
        hull = ConvexHull(pts)
    except Exception:
        samples = _simplex_samples(pts)
        worst = float(np.min(hole.signed_distance(samples)))
        return worst >= min_needed, worst
    for simplex in hull.simplices:
        samples = _simplex_samples(pts[simplex])
        worst = min(worst, float(np.min(hole.signed_distance(samples))))
    try:
        tri = Delaunay(pts)
        if tri.find_simplex(hole.anchor_point()) >= 0:
            return False, -np.inf
    except Exception:
        pass
    return worst >= min_needed, worst


def _simplex_samples(verts, n=6):
    """Barycentric grid over a simplex (covers vertices and edges)."""
    verts = np.atleast_2d(verts)
    k = len(verts)
    if k == 1:
        return verts
    if k == 2:
        t = np.linspace(0, 1, 2 * n + 1)[:, None]
        return verts[0] + t * (verts[1] - verts[0])
    out = []
    grid = np.linspace(0, 1, n + 1)
    if k == 3:
        for a in grid:
            for b in grid:
                if a + b <= 1 + 1e-12:
                    out.append(a * verts[0] + b * verts[1] + (1 - a - b) * verts[2])
    else:
        for w in np.random.default_rng(0).dirichlet(np.ones(k), size=40):
            out.append(w @ verts)
        out.extend(verts)
    return np.array(out)


def validate(m, lens):
    """Check the martingale tree against the lens domain.

    Mass and martingale identities, leaf values on the fixed boundary, and
    for every internal node the convex hull of its children clear of the
    hole(s) and inside the closed outer body.  The starred variant of the
    lens demands strict clearance from the hole closures.
    """
    report = ValidationReport()
    outer = lens.outer
    leaf_tol = 100 * outer.tol
    if abs(m.root.mass - 1.0) > MASS_TOL:
        report.add((), "root_mass", m.root.mass)
    for node, path, _ in m.walk():
        if node.is_leaf():
            sd = float(outer.signed_distance(node.value))
            if abs(sd) > leaf_tol:
                report.add(path, "leaf_off_fixed_boundary", sd)
            continue
        msum = sum(c.mass for c in node.children)
        if abs(msum - 1.0) > MASS_TOL:
            report.add(path, "child_mass_sum", msum)
        mix = sum(c.mass * c.value for c in node.children)
        err = float(np.linalg.norm(mix - node.value))
        if err > VALUE_TOL:
            report.add(path, "martingale_identity", err)
        child_vals = np.array([c.value for c in node.children])
        everything = np.vstack([child_vals, node.value[None, :]])
        if np.any(outer.signed_distance(everything) > leaf_tol):
            report.add(path, "hull_outside_outer", None)
        for h in lens.holes:
            ok, worst = _hull_clear_of_hole(everything, h, lens.closed_variant)
            if not ok:
                report.add(path, "hull_hits_hole", worst)
    return report


def expected_payoff(m, f):
    """E f(terminal value) for a boundary function f."""
    leaves = m.leaves()
    pts = np.array([n.value for n, _ in leaves])
    ms = np.array([pm for _, pm in leaves])
    return float(ms @ f.evaluate(pts))


def terminal_distribution(m):
    """Distribution of the terminal value, atoms aggregated by location."""
    leaves = m.leaves()
    pts = np.array([n.value for n, _ in leaves])
    ms = np.array([pm for _, pm in leaves])
    return AtomicMeasure(pts, ms)


def two_point_martingale(lens, x, n_dirs=180, dirs=None):
    """Depth-one martingale from a clear chord through x; constant when x is
    already on the fixed boundary.  Raises ChordNotFoundError when the point
    admits no chord (possible on domains that are not strongly martingale
    connected)."""
    x = np.asarray(x, dtype=float)
    if abs(lens.outer.signed_distance(x)) <= 100 * lens.outer.tol:
        return SimpleMartingale(MartingaleNode(x))
    if not lens.contains(x):
        raise ValueError("x is outside the lens")
    seg, _ = find_clear_chord(lens, x, n_dirs=n_dirs, dirs=dirs)
    a, b = seg.a, seg.b
    lab = np.linalg.norm(a - b)
    alpha = float(np.linalg.norm(x - b) / lab)
    beta = 1.0 - alpha
    root = MartingaleNode(x, 1.0, [MartingaleNode(a, alpha), MartingaleNode(b, beta)])
    return SimpleMartingale(root)


__all__ = [
    "AtomicMeasure", "MartingaleNode", "SimpleMartingale", "ValidationReport",
    "validate", "expected_payoff", "terminal_distribution",
    "two_point_martingale", "ChordNotFoundError",
]
