"""Step functions on the fixed boundary and their class membership.

A step function maps the unit interval or the unit-length circle into the
fixed boundary of a lens.  It is admissible when every subinterval average
(every arc average, with winding, for the circle class against an enlarged
hole) stays out of the forbidden hole.  Verification is exact for spans
touching at most one breakpoint and proceeds by a certified Lipschitz grid
for wider spans.
"""

import numpy as np

from .geometry import Segment, find_clear_chord, segment_min_distance
from .martingale import AtomicMeasure

INCONCLUSIVE_MARGIN = 1e-7


class StepFunction:
    """Piecewise constant map into the fixed boundary.

    breakpoints are the piece start points, strictly increasing in [0, 1);
    piece j runs from breakpoints[j] to breakpoints[j+1] (to 1, or cyclically
    for the circle carrier).  Interval carriers must start at 0.  Circle
    carriers keep breakpoints[0] as their distinguished basepoint.
    """

    def __init__(self, carrier, breakpoints, values):
        if carrier not in ("interval", "circle"):
            raise ValueError("carrier must be 'interval' or 'circle'")
        b = np.asarray(breakpoints, dtype=float)
        v = np.atleast_2d(np.asarray(values, dtype=float))
        if b.ndim != 1 or len(b) != len(v):
            raise ValueError("one value per piece is required")
        if np.any(np.diff(b) <= 0) or b[0] < 0 or b[-1] >= 1:
            raise ValueError("breakpoints must be strictly increasing in [0, 1)")
        if carrier == "interval" and b[0] != 0.0:
            raise ValueError("interval carrier must start at 0")
        self.carrier = carrier
        self.breakpoints = b
        self.values = v
        # edges of the pieces over one period starting at the basepoint
        self._edges = np.append(b, b[0] + 1.0)
        self._lengths = np.diff(self._edges)
        self._cum = np.concatenate([[np.zeros(v.shape[1])],
                                    np.cumsum(self._lengths[:, None] * v, axis=0)])

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def n_pieces(self):
        return len(self.breakpoints)

    @property
    def piece_lengths(self):
        return self._lengths

    @property
    def sup_norm(self):
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def value_at(self, t):
        t = np.asarray(t, dtype=float)
        base = self.breakpoints[0]
        tt = (t - base) % 1.0 + base
        idx = np.clip(np.searchsorted(self._edges, tt, side="right") - 1, 0, self.n_pieces - 1)
        return self.values[idx]

    def _primitive(self, t):
        """Integral of the periodic extension from the basepoint to t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        base = self._edges[0]
        shifted = t - base
        wind = np.floor(shifted)
        frac = shifted - wind + base
        idx = np.clip(np.searchsorted(self._edges, frac, side="right") - 1, 0, self.n_pieces - 1)
        part = self._cum[idx] + (frac - self._edges[idx])[:, None] * self.values[idx]
        return wind[:, None] * self._cum[-1][None, :] + part

    def integral(self, a, b):
        A = np.atleast_1d(np.asarray(a, dtype=float))
        B = np.atleast_1d(np.asarray(b, dtype=float))
        return self._primitive(B) - self._primitive(A)

    def mean(self):
        return self._cum[-1].copy()

    def distribution(self):
        return AtomicMeasure(self.values, self._lengths)

    def rotated(self, s):
        """Circle function precomposed with a rotation by s."""
        if self.carrier != "circle":
            raise ValueError("rotation applies to circle carriers")
        b = (self.breakpoints - s) % 1.0
        order = np.argsort(b)
        return StepFunction("circle", b[order], self.values[order])

    def refined(self, k):
        """Split every piece into k equal parts (same values)."""
        bs, vs = [], []
        for j in range(self.n_pieces):
            e0, e1 = self._edges[j], self._edges[j + 1]
            for i in range(k):
                bs.append((e0 + (e1 - e0) * i / k) % 1.0)
                vs.append(self.values[j])
        b = np.array(bs)
        order = np.argsort(b)
        return StepFunction(self.carrier, b[order], np.array(vs)[order])

    def to_dict(self):
        return {"carrier": self.carrier,
                "breakpoints": self.breakpoints.tolist(),
                "values": self.values.tolist()}

    @staticmethod
    def from_dict(d):
        return StepFunction(d["carrier"], d["breakpoints"], d["values"])

    def __repr__(self):
        return f"StepFunction({self.carrier}, {self.n_pieces} pieces, dim={self.dim})"


def average(phi, sub):
    """Exact average of phi over a subinterval (periodic for circles).

    Circle carriers accept arbitrary intervals of the real line, including
    spans longer than one period.
    """
    a, b = float(sub[0]), float(sub[1])
    if not b > a:
        raise ValueError("degenerate interval")
    if phi.carrier == "interval" and not (-1e-12 <= a and b <= 1 + 1e-12):
        raise ValueError("subinterval must lie in [0, 1] for interval carriers")
    return phi.integral(a, b)[0] / (b - a)


def payoff(phi, f):
    """Average of f over the function: sum of piece length times f(value)."""
    return float(phi.piece_lengths @ f.evaluate(phi.values))


class MembershipReport:
    """Verdict of an admissibility check with a certified margin."""

    def __init__(self, verdict, margin, witness=None, witness_point=None,
                 resolution=None, checks=0):
        if verdict not in ("member", "violated", "inconclusive"):
            raise ValueError(verdict)
        self.verdict = verdict
        self.margin = float(margin)
        self.witness = witness          # offending (a, b) span, if any
        self.witness_point = witness_point
        self.resolution = resolution or {}
        self.checks = int(checks)

    @property
    def is_member(self):
        return self.verdict == "member"

    def to_dict(self):
        return {"verdict": self.verdict, "margin": self.margin,
                "witness": list(self.witness) if self.witness is not None else None,
                "witness_point": (np.asarray(self.witness_point).tolist()
                                  if self.witness_point is not None else None),
                "resolution": self.resolution, "checks": self.checks}

    def __repr__(self):
        return f"MembershipReport({self.verdict}, margin={self.margin:.3g})"


def _hole_sd(holes, pts):
    pts = np.atleast_2d(pts)
    return np.min(np.stack([h.signed_distance(pts) for h in holes]), axis=0)


def _adjacent_pair_check(phi, holes, cyclic):
    """Exact check of spans touching at most one breakpoint.

    Averages of such spans are exactly the points of the segments between
    adjacent piece values (and the piece values themselves).
    """
    worst = np.inf
    witness = None
    vals = phi.values
    n = phi.n_pieces
    sd_vals = _hole_sd(holes, vals)
    j0 = int(np.argmin(sd_vals))
    worst = float(sd_vals[j0])
    pairs = [(j, j + 1) for j in range(n - 1)]
    if cyclic and n > 1:
        pairs.append((n - 1, 0))
    for j, k in pairs:
        for h in holes:
            sd, t = segment_min_distance(Segment(vals[j], vals[k]), h)
            if sd < worst:
                worst = sd
                e = phi._edges
                lam = 1.0 - t     # weight on piece j value
                s = min(phi.piece_lengths[j] / max(lam, 1e-9),
                        phi.piece_lengths[k] / max(1.0 - lam, 1e-9), 1.0) * 0.5
                witness = (e[j + 1] - lam * s, e[j + 1] + (1 - lam) * s)
    return worst, witness


def _count_breakpoints_inside(phi, a, b):
    # breakpoints of the periodic extension strictly inside (a, b)
    base = phi._edges[0]
    cnt = 0
    k0 = int(np.floor(a - base - 1.0))
    k1 = int(np.ceil(b - base)) + 1
    for k in range(k0, k1):
        for e in phi._edges[:-1]:
            t = e + k
            if a < t < b:
                cnt += 1
                if cnt > 1:
                    return cnt
    return cnt


def _certified_grid(phi, holes, a_range, min_len, max_len, sup, depth_cap,
                    min_cell):
    """Adaptive certified sweep of span space (a, b), b - a in [min_len, max_len].

    A cell is certified once the hole clearance of a representative average
    exceeds the Lipschitz bound 2 sup|phi| / span times the cell radius.
    Cells whose widest span touches at most one breakpoint are covered
    exactly elsewhere and skipped.  Returns (certified_margin, witness,
    inconclusive_cells, checks).
    """
    n0 = 16
    step_a = (a_range[1] - a_range[0]) / n0
    step_l = max_len / n0
    cells = []
    for i in range(n0):
        for j in range(n0):
            a0 = a_range[0] + i * step_a
            b0 = a_range[0] + j * step_l
            cells.append((a0, a0 + step_a, b0, b0 + step_l))
    worst = np.inf
    inconclusive = 0
    checks = 0
    for _ in range(depth_cap + 1):
        if not cells:
            break
        keep = []
        for c in cells:
            a0, a1, b0, b1 = c
            if b1 - a0 < min_len or b0 - a1 > max_len:
                continue          # no valid span inside
            if _count_breakpoints_inside(phi, a0, min(b1, a0 + max_len)) <= 1:
                continue          # covered exactly by the adjacent-pair check
            keep.append(c)
        if not keep:
            cells = []
            break
        arr = np.array(keep)
        a0, a1, b0, b1 = arr.T
        whole = (b0 - a1 >= min_len) & (b1 - a0 <= max_len)
        # representative: cell center for interior cells, widest valid span
        # for cells cut by the domain boundary
        ra = np.where(whole, 0.5 * (a0 + a1), a0)
        rb = np.where(whole, 0.5 * (b0 + b1), np.minimum(b1, a0 + max_len))
        radius = np.where(whole, 0.5 * (a1 - a0) + 0.5 * (b1 - b0),
                          (a1 - a0) + (b1 - b0))
        span_min = np.where(whole, np.maximum(b0 - a1, min_len), min_len)
        avg = phi.integral(ra, rb) / (rb - ra)[:, None]
        sd = _hole_sd(holes, avg)
        checks += len(arr)
        kmin = int(np.argmin(sd))
        if sd[kmin] < -INCONCLUSIVE_MARGIN:
            return float(sd[kmin]), (float(ra[kmin]), float(rb[kmin])), 0, checks
        need = (2.0 * sup / span_min) * radius
        certified = sd >= need
        if np.any(certified):
            worst = min(worst, float(np.min((sd - need)[certified])))
        small = (a1 - a0) <= min_cell
        done_small = (~certified) & small
        inconclusive += int(done_small.sum())
        if np.any(done_small):
            worst = min(worst, float(np.min(sd[done_small])))
        todo = arr[(~certified) & ~small]
        new_cells = []
        for ca0, ca1, cb0, cb1 in todo:
            am, bm = 0.5 * (ca0 + ca1), 0.5 * (cb0 + cb1)
            new_cells.extend([(ca0, am, cb0, bm), (am, ca1, cb0, bm),
                              (ca0, am, bm, cb1), (am, ca1, bm, cb1)])
        cells = new_cells
    inconclusive += len(cells)
    return worst, None, inconclusive, checks


def interval_membership(phi, lens, resolution=None):
    """Does every subinterval average avoid the hole(s)?

    Exact for spans with at most one breakpoint; certified Lipschitz grid
    (constant 2 sup|phi| / span) for wider spans.  Returns inconclusive when
    the certified margin falls below the reporting threshold.
    """
    if phi.carrier != "interval":
        raise ValueError("interval carrier required")
    res = {"min_cell": 1e-4, "depth_cap": 24}
    if resolution:
        res.update(resolution)
    holes = lens.holes
    worst, witness = _adjacent_pair_check(phi, holes, cyclic=False)
    if worst < -INCONCLUSIVE_MARGIN:
        wit = witness or (0.0, 1.0)
        pt = average(phi, wit)
        return MembershipReport("violated", worst, wit, pt, res)
    if phi.n_pieces > 2:
        lmin = float(np.min(phi.piece_lengths))
        g_margin, g_wit, n_inc, checks = _certified_grid(
            phi, holes, (0.0, 1.0), lmin, 1.0, phi.sup_norm,
            res["depth_cap"], res["min_cell"])
        if g_wit is not None:
            pt = average(phi, g_wit)
            if _hole_sd(holes, pt)[0] < 0:
                return MembershipReport("violated", g_margin, g_wit, pt, res, checks)
        worst = min(worst, g_margin)
        if n_inc > 0 and worst < INCONCLUSIVE_MARGIN:
            return MembershipReport("inconclusive", worst, resolution=res, checks=checks)
    else:
        checks = 0
    if worst < INCONCLUSIVE_MARGIN:
        return MembershipReport("inconclusive", worst, resolution=res, checks=checks)
    return MembershipReport("member", worst, resolution=res, checks=checks)


def circle_membership(phi, lens, enlarged_holes, resolution=None):
    """Admissibility of a circle function against enlarged hole(s).

    Every arc of the periodic extension is covered: sub-period arcs by the
    exact adjacent checks plus the certified grid, winding arcs through the
    identity  avg over k + r  =  (k * full mean + r * sub-arc mean) / (k + r),
    checked for each winding count until the blend is pinned near the full
    mean.  The enlarged holes must contain the lens hole closures and sit
    strictly inside the outer body.
    """
    if phi.carrier != "circle":
        raise ValueError("circle carrier required")
    if not isinstance(enlarged_holes, (list, tuple)):
        enlarged_holes = (enlarged_holes,)
    res = {"min_cell": 1e-4, "depth_cap": 24, "max_winding": 64}
    if resolution:
        res.update(resolution)
    _check_enlargement(lens, enlarged_holes)
    holes = tuple(enlarged_holes)
    base = float(phi.breakpoints[0])

    worst, witness = _adjacent_pair_check(phi, holes, cyclic=True)
    if worst < -INCONCLUSIVE_MARGIN:
        wit = witness or (base, base + 1.0)
        return MembershipReport("violated", worst, wit, average(phi, wit), res)

    checks = 0
    if phi.n_pieces > 2:
        lmin = float(np.min(phi.piece_lengths))
        g_margin, g_wit, n_inc, ck = _certified_grid(
            phi, holes, (base, base + 1.0), lmin, 1.0,
            phi.sup_norm, res["depth_cap"], res["min_cell"])
        checks += ck
        if g_wit is not None:
            pt = average(phi, g_wit)
            if _hole_sd(holes, pt)[0] < 0:
                return MembershipReport("violated", g_margin, g_wit, pt, res, checks)
        worst = min(worst, g_margin)
        if n_inc > 0 and worst < INCONCLUSIVE_MARGIN:
            return MembershipReport("inconclusive", worst, resolution=res, checks=checks)

    # winding arcs: mean must itself stay clear, then finitely many k
    m = phi.mean()
    sd_m = float(_hole_sd(holes, m)[0])
    if sd_m < -INCONCLUSIVE_MARGIN:
        wit = (base, base + 1.0)
        return MembershipReport("violated", sd_m, wit, m, res, checks)
    if sd_m < INCONCLUSIVE_MARGIN:
        return MembershipReport("inconclusive", sd_m, resolution=res, checks=checks)
    sup = phi.sup_norm
    k_needed = int(np.ceil(2.4 * sup / sd_m))
    if phi.n_pieces <= 2:
        k_needed = 0  # all winding averages stay on the two-value segment
    k_max = min(k_needed, res["max_winding"])
    for k in range(1, k_max + 1):
        w_margin, w_wit, n_inc, ck = _winding_sweep(phi, holes, k, base, res)
        checks += ck
        if w_wit is not None:
            return MembershipReport("violated", w_margin, w_wit,
                                    average(phi, w_wit), res, checks)
        worst = min(worst, w_margin)
        if n_inc > 0 and worst < INCONCLUSIVE_MARGIN:
            return MembershipReport("inconclusive", worst, resolution=res, checks=checks)
    if k_needed > res["max_winding"]:
        return MembershipReport("inconclusive", worst, resolution=res, checks=checks)
    worst = min(worst, sd_m)
    if worst < INCONCLUSIVE_MARGIN:
        return MembershipReport("inconclusive", worst, resolution=res, checks=checks)
    return MembershipReport("member", worst, resolution=res, checks=checks)


def _winding_sweep(phi, holes, k, base, res):
    """Certified sweep of arcs of length k + r, r in [0, 1).

    The blend (k m + r A(a, r)) / (k + r) is Lipschitz in (a, r) with
    constant 2 sup|phi| / (k + 1), so a uniform grid certifies.
    """
    sup = phi.sup_norm
    lam = 2.0 * sup / (k + 1.0)
    m = phi.mean()
    n = 96
    worst = np.inf
    checks = 0
    delta = 1.0 / n
    need = lam * delta  # cell radius is delta/2 per coordinate
    for _ in range(10):
        a = base + (np.arange(n) + 0.5) * (1.0 / n)
        r = (np.arange(n) + 0.5) * (1.0 / n)
        A, R = np.meshgrid(a, r, indexing="ij")
        A, R = A.ravel(), R.ravel()
        ints = phi.integral(A, A + R)
        blend = (k * m[None, :] + ints) / (k + R)[:, None]
        sd = _hole_sd(holes, blend)
        checks += len(sd)
        kmin = int(np.argmin(sd))
        if sd[kmin] < -INCONCLUSIVE_MARGIN:
            return float(sd[kmin]), (float(A[kmin]), float(A[kmin] + k + R[kmin])), 0, checks
        worst = float(np.min(sd - need))
        if worst >= 0 or delta <= res["min_cell"]:
            break
        n *= 2
        delta = 1.0 / n
        need = lam * delta
    if worst < 0:
        return float(np.min(sd)), None, 1, checks
    return worst, None, 0, checks


def _check_enlargement(lens, enlarged_holes, n=128):
    for h in lens.holes:
        covered = False
        for eh in enlarged_holes:
            if lens.dim == 2:
                lo, hi, periodic = h._param_window()
                ts = np.linspace(lo, hi, n, endpoint=not periodic)
                pts = h.boundary_param(ts)
            else:
                from .geometry import _sphere_grid
                pts = _sphere_grid(lens.dim, n) * h.params["radius"] + h.params["center"]
            if np.all(eh.signed_distance(pts) < -eh.tol):
                covered = True
                break
        if not covered:
            raise ValueError("an enlarged hole must strictly contain each hole closure")
    for eh in enlarged_holes:
        if lens.dim == 2:
            lo, hi, periodic = eh._param_window()
            ts = np.linspace(lo, hi, n, endpoint=not periodic)
            pts = eh.boundary_param(ts)
            if np.any(lens.outer.signed_distance(pts) > -lens.outer.tol):
                raise ValueError("enlarged hole must sit strictly inside the outer body")


def two_point_function(lens, x, n_dirs=180, dirs=None):
    """Two-valued admissible function with the prescribed mean.

    Uses a clear chord through x; all subinterval averages then live on the
    chord.  Constant when x lies on the fixed boundary."""
    x = np.asarray(x, dtype=float)
    if abs(lens.outer.signed_distance(x)) <= 100 * lens.outer.tol:
        return StepFunction("interval", [0.0], [x])
    if not lens.contains(x):
        raise ValueError("x is outside the lens")
    seg, _ = find_clear_chord(lens, x, n_dirs=n_dirs, dirs=dirs)
    a, b = seg.a, seg.b
    alpha = float(np.linalg.norm(x - b) / np.linalg.norm(a - b))
    if alpha <= 0.0 or alpha >= 1.0:
        vals = [a] if alpha >= 1.0 else [b]
        return StepFunction("interval", [0.0], vals)
    return StepFunction("interval", [0.0, alpha], [a, b])


class BoundaryFunction:
    """Scalar data on the fixed boundary with regularity metadata."""

    REGULARITIES = ("bounded-below", "lipschitz", "C2", "indicator")

    def __init__(self, evaluator, regularity, descriptor=None,
                 lower_bound=None, lipschitz=None):
        if regularity not in self.REGULARITIES:
            raise ValueError(regularity)
        if regularity == "bounded-below" and lower_bound is None:
            raise ValueError("bounded-below tag requires a stored lower bound")
        self._evaluator = evaluator
        self.regularity = regularity
        self.descriptor = descriptor or {}
        self.lower_bound = lower_bound
        self.lipschitz = lipschitz

    def evaluate(self, p):
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        out = np.asarray(self._evaluator(pts), dtype=float)
        if out.shape != (len(pts),):
            raise ValueError("evaluator must return one value per point")
        return out if np.asarray(p).ndim > 1 else float(out[0])

    def __call__(self, p):
        return self.evaluate(p)

    def to_dict(self):
        return dict(self.descriptor)

    def __repr__(self):
        kind = self.descriptor.get("kind", "custom")
        return f"BoundaryFunction({kind}, {self.regularity})"


def boundary_function(desc):
    """Construct a canned boundary function from a descriptor."""
    kind = desc["kind"]
    if kind == "affine":
        coeffs = np.asarray(desc["coeffs"], dtype=float)
        offset = float(desc.get("offset", 0.0))
        return BoundaryFunction(lambda P: P @ coeffs + offset, "C2", desc,
                                lipschitz=float(np.linalg.norm(coeffs)))
    if kind == "zero":
        return BoundaryFunction(lambda P: np.zeros(len(P)), "C2", desc,
                                lower_bound=0.0, lipschitz=0.0)
    if kind == "exp_coord":
        k = int(desc.get("coord", 0))
        s = float(desc.get("scale", 1.0))
        return BoundaryFunction(lambda P: np.exp(s * P[:, k]), "C2", desc,
                                lower_bound=0.0,
                                lipschitz=desc.get("lipschitz"))
    if kind == "power":
        k = int(desc.get("coord", 0))
        p = float(desc["p"])
        return BoundaryFunction(lambda P: np.abs(P[:, k]) ** p, "bounded-below",
                                desc, lower_bound=0.0)
    if kind == "indicator":
        k = int(desc.get("coord", 0))
        thr = float(desc.get("threshold", 0.0))
        return BoundaryFunction(lambda P: (P[:, k] >= thr).astype(float),
                                "indicator", desc, lower_bound=0.0)
    if kind == "channel":
        # zero below the axis, minus the height above it
        return BoundaryFunction(lambda P: np.where(P[:, 1] <= 0, 0.0, -P[:, 1]),
                                "lipschitz", desc, lower_bound=-10.0, lipschitz=1.0)
    if kind == "angular_cosine":
        m = int(desc.get("multiple", 1))
        return BoundaryFunction(
            lambda P: np.cos(m * np.arctan2(P[:, 1], P[:, 0])), "C2", desc,
            lower_bound=-1.0, lipschitz=float(m))
    raise ValueError(f"unknown boundary function kind {kind!r}")


def canonical_embedding(kind, breakpoints, data):
    """Lift scalar or vector step data onto the canonical fixed boundaries.

    a2:      positive weight w        -> (w, 1/w)
    bmo:     scalar or vector psi     -> (psi, |psi|^2)
    sphere:  unit vectors, unchanged
    """
    data = np.asarray(data, dtype=float)
    if kind == "a2":
        w = data.reshape(-1)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        vals = np.stack([w, 1.0 / w], axis=1)
        return StepFunction("interval", breakpoints, vals)
    if kind == "bmo":
        psi = data.reshape(len(data), -1)
        vals = np.concatenate([psi, np.sum(psi * psi, axis=1, keepdims=True)], axis=1)
        return StepFunction("interval", breakpoints, vals)
    if kind == "sphere":
        v = np.atleast_2d(data)
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("sphere data must be unit vectors")
        return StepFunction("interval", breakpoints, v)
    raise ValueError(f"unknown embedding kind {kind!r}")


__all__ = [
    "StepFunction", "MembershipReport", "BoundaryFunction",
    "average", "payoff", "interval_membership", "circle_membership",
    "two_point_function", "boundary_function", "canonical_embedding",
]
