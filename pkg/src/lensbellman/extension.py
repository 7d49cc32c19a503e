"""Superdifferentials on the free boundary and extensions of the field.

A supporting functional at a free boundary point is assembled in the tangent
frame of the hole: a slope supporting the field on the tangent section plus
a normal coefficient obtained as a supremum of boundary difference quotients
over the visible part of the fixed boundary.  The extensions glue supporting
planes over a band, either through the free boundary (after a strong
concavity perturbation) or through the fixed boundary into an inflated outer
body.
"""

import numpy as np

from .geometry import ConvexBody, Segment, minkowski_interpolate, \
    segment_min_distance, shrink_toward_center
from .solver import ScalarField, free_boundary_continuation


class LinearFunctional:
    """Affine support plane anchored at a point."""

    def __init__(self, coeffs, offset, anchor, provenance="superdifferential"):
        if provenance not in ("superdifferential", "perturbed", "tangent"):
            raise ValueError(provenance)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.offset = float(offset)
        self.anchor = np.asarray(anchor, dtype=float)
        self.provenance = provenance
        if not np.all(np.isfinite(self.coeffs)) or not np.isfinite(self.offset):
            raise ValueError("non-finite functional")

    def evaluate(self, y):
        pts = np.atleast_2d(np.asarray(y, dtype=float))
        vals = self.offset + (pts - self.anchor) @ self.coeffs
        return vals if np.asarray(y).ndim > 1 else float(vals[0])

    def shifted(self, d_coeffs, d_offset, provenance):
        return LinearFunctional(self.coeffs + d_coeffs, self.offset + d_offset,
                                self.anchor, provenance)

    def to_dict(self):
        return {"coeffs": self.coeffs.tolist(), "offset": self.offset,
                "anchor": self.anchor.tolist(), "provenance": self.provenance}

    def __repr__(self):
        return f"LinearFunctional({self.coeffs}, anchor={self.anchor})"


class ExtensionConfig:
    def __init__(self, shrink_levels=(0.85, 0.9, 0.94, 0.97), anchors=96,
                 boundary_samples=4096, concavity_samples=200, seed=23,
                 vis_delta=None, inner_blend=None):
        self.shrink_levels = tuple(sorted(shrink_levels))
        self.anchors = int(anchors)
        self.boundary_samples = int(boundary_samples)
        self.concavity_samples = int(concavity_samples)
        self.seed = int(seed)
        self.vis_delta = vis_delta
        self.inner_blend = inner_blend

    def to_dict(self):
        return {"shrink_levels": list(self.shrink_levels), "anchors": self.anchors,
                "boundary_samples": self.boundary_samples,
                "concavity_samples": self.concavity_samples, "seed": self.seed,
                "vis_delta": self.vis_delta, "inner_blend": self.inner_blend}


def _tangent_frame(lens, x):
    hole = lens.on_free_boundary(x, tol=1e-6 * lens.outer.scale)
    if hole is None:
        raise ValueError("x is not on the free boundary")
    e_d = hole.boundary_inward_normal(x)       # toward the hole
    e_t = np.array([-e_d[1], e_d[0]])
    return hole, e_d, e_t


def _segment_hole_distance_many(x, Y, hole):
    """Minimum distance of segments [x, y] to a hole, vectorized for balls."""
    if hole.kind == "ball":
        c = hole.params["center"]
        r = hole.params["radius"]
        d = Y - x
        denom = np.einsum("ij,ij->i", d, d)
        t = np.clip(np.einsum("j,ij->i", c - x, d) / np.maximum(denom, 1e-300),
                    0.0, 1.0)
        proj = x + t[:, None] * d
        return np.linalg.norm(proj - c, axis=1) - r
    out = np.empty(len(Y))
    for i, y in enumerate(Y):
        out[i], _ = segment_min_distance(Segment(x, y), hole)
    return out


def visible_boundary_points(lens, x, n):
    """Fixed-boundary points visible from x (touching the holes allowed)."""
    ts = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False) \
        if lens.outer.kind in ("ball", "ellipse") else \
        np.linspace(*lens.outer._param_window()[:2], n)
    Y = lens.outer.boundary_param(ts)
    vis = np.ones(len(Y), dtype=bool)
    for hole in lens.holes:
        vis &= _segment_hole_distance_many(x, Y, hole) >= -hole.tol
    return Y[vis], ts[vis]


def superdifferential_at(field, lens, f, x, n_boundary=4096, a_cap=1e6):
    """Supporting functional of the field at a free boundary point.

    The tangential slope supports the field on the tangent section (average
    of the one-sided difference quotients); the normal coefficient is the
    supremum of boundary difference quotients over visible fixed-boundary
    points below the tangent plane, refined around the argmax.  Raises when
    the supremum diverges at the resolution (non-Lipschitz data).
    """
    x = np.asarray(x, dtype=float)
    hole, e_d, e_t = _tangent_frame(lens, x)
    v0 = free_boundary_continuation(field, lens, x)

    # one-sided slopes on the tangent section, at the first interpolation-safe
    # offsets (the tangent line leaves the hole neighborhood like s^2)
    r_est = max(hole.scale, 1e-6)
    s_min = max(np.sqrt(3.0 * field.h * r_est), 2.0 * field.h)
    quots = []
    for sgn in (1.0, -1.0):
        for k in range(8):
            s = s_min + k * field.h
            val = field.interp(x + sgn * s * e_t)
            if np.isfinite(val):
                quots.append(sgn * (float(val) - v0) / s)
                break
    ell = float(np.mean(quots)) if quots else 0.0

    Y, ts = visible_boundary_points(lens, x, n_boundary)
    yd = (Y - x) @ e_d
    yt = (Y - x) @ e_t
    # quotients closer to the tangent plane than the floor are 0/0 at grid
    # precision (the slope estimate carries an O(h) error that the division
    # would amplify); the limit is covered by the tangential slope
    yd_floor = max(1e-6 * lens.outer.scale, field.h)
    below = yd < -yd_floor
    if not np.any(below):
        raise ValueError("no visible boundary points below the tangent plane")
    fy = f.evaluate(Y[below])
    ratios = (fy - v0 - ell * yt[below]) / (-yd[below])
    k = int(np.argmax(ratios))
    a = float(ratios[k])
    # golden refinement of the boundary parameter around the argmax
    t_star = ts[below][k]
    dt = (ts[1] - ts[0]) if len(ts) > 1 else 1e-3
    lo, hi = t_star - dt, t_star + dt
    for _ in range(50):
        m1 = hi - 0.6180339887498949 * (hi - lo)
        m2 = lo + 0.6180339887498949 * (hi - lo)
        vals = []
        for m in (m1, m2):
            y = lens.outer.boundary_param(m)
            ydm = float((y - x) @ e_d)
            if ydm >= -yd_floor:
                vals.append(-np.inf)
                continue
            vals.append((float(f.evaluate(y)) - v0 - ell * float((y - x) @ e_t)) / (-ydm))
        if vals[0] > vals[1]:
            hi = m2
        else:
            lo = m1
        a = max(a, *[v for v in vals if np.isfinite(v)])
    if not np.isfinite(a) or abs(a) > a_cap:
        raise ValueError("normal coefficient diverges; boundary data is not "
                         "Lipschitz at this resolution")
    a += 1e-12 * (1.0 + abs(a))
    coeffs = ell * e_t - a * e_d
    L = LinearFunctional(coeffs, v0, x, "superdifferential")
    # calibration: the grid slope carries an O(h) error, so lift the plane
    # just enough to dominate the boundary data it must support
    deficit = float(np.max(f.evaluate(Y) - L.evaluate(Y)))
    if deficit > 0:
        L = LinearFunctional(coeffs, v0 + deficit + 1e-12, x, "superdifferential")
    return L


def strong_concavity_perturb(field, lens, eps):
    """Add eps times a normalized strongly concave bump to the field.

    g(x) = 1 - |x - c|^2 / diam^2 maps the bounding box into [0, 1], so the
    sandwich field <= perturbed <= field + eps holds by construction, and the
    negative definite Hessian buys the quadratic decay of the supporting
    planes at the free boundary.
    """
    if not lens.outer.is_bounded():
        raise ValueError("perturbation requires a bounded lens")
    box = lens.bounding_box()
    c = 0.5 * (box[0] + box[1])
    diam = float(np.linalg.norm(box[1] - box[0]))

    def g(p):
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        vals = 1.0 - np.einsum("ij,ij->i", pts - c, pts - c) / diam ** 2
        return vals if np.asarray(p).ndim > 1 else float(vals[0])

    def grad_g(p):
        return -2.0 * (np.asarray(p, dtype=float) - c) / diam ** 2

    out = field.copy()
    if eps != 0.0:
        xs, ys = field.cell_centers()
        X, Y = np.meshgrid(xs, ys)
        out.values = field.values + eps * g(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(field.shape)
    out.meta = dict(field.meta)
    out.meta["perturbation_eps"] = eps
    return out, g, grad_g


class ExtensionResult:
    """Extended lens plus an evaluator for the glued field."""

    def __init__(self, lens, base_field, evaluate, diagnostics):
        self.lens = lens
        self.base_field = base_field
        self._evaluate = evaluate
        self.diagnostics = diagnostics
        self.last_witness = None

    def evaluate(self, p):
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        vals, wit = self._evaluate(pts)
        self.last_witness = wit
        return vals if np.asarray(p).ndim > 1 else float(vals[0])

    def __repr__(self):
        return f"ExtensionResult({self.diagnostics.get('kind')})"


def _anchor_data(field, lens, f, eps, g, grad_g, n_anchors, n_boundary):
    hole = lens.hole
    ts = np.linspace(0.0, 2.0 * np.pi, n_anchors, endpoint=False)
    anchors = hole.boundary_param(ts)
    funcs = []
    pts = []
    for y in anchors:
        try:
            L = superdifferential_at(field, lens, f, y, n_boundary)
        except ValueError:
            continue
        if eps != 0.0:
            L = L.shifted(eps * grad_g(y), eps * g(y), "perturbed")
        funcs.append(L)
        pts.append(y)
    if not funcs:
        raise ValueError("no usable anchors on the free boundary")
    return np.array(pts), funcs


def _plane_matrix(funcs):
    C = np.array([L.coeffs for L in funcs])
    o = np.array([L.offset - L.coeffs @ L.anchor for L in funcs])
    return C, o


def extend_through_free(field, lens, f, eps, cfg=None):
    """Extend the field through the free boundary into a shrunk hole.

    The field is perturbed to strong concavity, supporting planes are
    collected along the free boundary, and the largest configured hole
    shrink whose glued extension passes a sampled local concavity sweep is
    returned.  Visibility between anchor and query is limited around a
    further-shrunk core so far-away planes cannot undercut the glue.
    """
    cfg = cfg or ExtensionConfig()
    hole = lens.hole
    pert, g, grad_g = strong_concavity_perturb(field, lens, eps)
    anchors, funcs = _anchor_data(field, lens, f, eps, g, grad_g,
                                  cfg.anchors, cfg.boundary_samples)
    C, o = _plane_matrix(funcs)
    delta = cfg.vis_delta if cfg.vis_delta is not None else lens.gap_width() / 4.0
    vis_core = _visibility_core(hole, delta, cfg.inner_blend,
                                min(cfg.shrink_levels))

    rng = np.random.default_rng(cfg.seed)
    diagnostics = {"kind": "free", "eps": eps, "levels": [], "anchors": len(funcs),
                   "vis_delta": delta}

    def make_eval(new_hole):
        def evaluate(pts):
            vals = np.full(len(pts), np.nan)
            wit = np.full(len(pts), -1)
            inside_old = lens.contains(pts)
            if np.any(inside_old):
                vals[inside_old] = pert.interp(pts[inside_old])
            band = (~inside_old) & (hole.signed_distance(pts) < 0) \
                & (new_hole.signed_distance(pts) >= 0)
            for i in np.nonzero(band)[0]:
                z = pts[i]
                sd = _segment_hole_distance_many(z, anchors, vis_core)
                visible = sd >= -vis_core.tol
                if not np.any(visible):
                    continue
                planes = o[visible] + C[visible] @ z
                k = int(np.argmin(planes))
                vals[i] = planes[k]
                wit[i] = np.nonzero(visible)[0][k]
            return vals, wit
        return evaluate

    for level in sorted(cfg.shrink_levels):
        new_hole = shrink_toward_center(hole, level)
        evaluate = make_eval(new_hole)
        report = _band_concavity(lens, hole, new_hole, evaluate,
                                 cfg.concavity_samples, rng,
                                 tol=1e-7 * (1.0 + pert.finite_sup()))
        diagnostics["levels"].append({"shrink": level, **report})
        if report["ok"]:
            diagnostics["chosen_shrink"] = level
            new_lens = lens.with_holes([new_hole])
            return ExtensionResult(new_lens, pert, evaluate, diagnostics)
    raise ValueError(f"no configured shrink passes the concavity sweep: {diagnostics}")


def _visibility_core(hole, delta, inner_blend, min_shrink):
    """Core limiting anchor visibility; must sit inside every candidate new
    hole so the whole extension band can see at least nearby anchors."""
    if inner_blend is not None:
        return shrink_toward_center(hole, inner_blend)
    if hole.kind == "ball":
        r = hole.params["radius"]
        r_core = np.sqrt(max(r * r - delta * delta / 4.0, (0.2 * r) ** 2))
        r_core = min(r_core, 0.95 * min_shrink * r)
        return ConvexBody.ball(hole.params["center"], r_core)
    return shrink_toward_center(hole, min(0.9, 0.95 * min_shrink))


def _band_concavity(lens, hole, new_hole, evaluate, samples, rng, tol):
    """Sampled local concavity of the glued field on segments through the band."""
    violations = []
    checked = 0
    c = hole.anchor_point()
    two_pi = 2.0 * np.pi
    tries = 0
    while checked < samples and tries < 40 * samples:
        tries += 1
        th = rng.uniform(0.0, two_pi)
        u = np.array([np.cos(th), np.sin(th)])
        p0 = hole.boundary_param(rng.uniform(0.0, two_pi)) if hole.kind in ("ball", "ellipse") \
            else hole.anchor_point()
        # segment near the free boundary crossing the band
        base = p0 + rng.uniform(-0.5, 1.5) * (p0 - c) * 0.05
        half = rng.uniform(0.05, 0.4) * lens.outer.scale
        a, b = base - half * u, base + half * u
        pts = np.array([a, b])
        if np.any(lens.outer.signed_distance(pts) > -1e-9) or \
           np.any(new_hole.signed_distance(pts) < 1e-9):
            continue
        ts = np.linspace(0.0, 1.0, 9)
        seg_pts = a[None, :] + ts[:, None] * (b - a)[None, :]
        if np.any(new_hole.signed_distance(seg_pts) < 0):
            continue
        vals, _ = evaluate(seg_pts)
        if np.any(np.isnan(vals)):
            continue
        checked += 1
        lin = vals[0] + (vals[-1] - vals[0]) * ts
        deficit = lin - vals
        worst = float(np.max(deficit))
        if worst > tol:
            violations.append({"segment": [a.tolist(), b.tolist()],
                               "deficit": worst})
    return {"ok": not violations, "checked": checked,
            "violations": violations[:5]}


def extend_through_fixed(field, lens, outer_margin, cfg=None):
    """Extend the field through the fixed boundary into an inflated outer body.

    Supporting planes are taken at sample points on an inner blend surface
    (interior gradients of the field); queries beyond the old outer boundary
    take the minimum over visible planes.  Finiteness and sampled local
    concavity on the enlarged lens are checked and reported.
    """
    cfg = cfg or ExtensionConfig()
    if not lens.outer.is_bounded():
        raise ValueError("fixed-boundary extension requires a bounded lens")
    inflated = ConvexBody.inflated(lens.outer, outer_margin)
    s = cfg.inner_blend
    if s is None:
        s = max(0.05, 4.0 * field.h / max(lens.gap_width(), 1e-6))
        s = min(s, 0.5)
    inner = minkowski_interpolate(lens.outer, lens.holes[0], s)
    ts = np.linspace(0.0, 2.0 * np.pi, cfg.anchors, endpoint=False)
    ys = inner.boundary_param(ts)
    good = []
    for y in ys:
        v = field.interp(y)
        gx = field.interp(y + np.array([field.h, 0.0])) - field.interp(y - np.array([field.h, 0.0]))
        gy = field.interp(y + np.array([0.0, field.h])) - field.interp(y - np.array([0.0, field.h]))
        if not (np.isfinite(v) and np.isfinite(gx) and np.isfinite(gy)):
            continue
        grad = np.array([gx, gy]) / (2.0 * field.h)
        good.append(LinearFunctional(grad, float(v), y, "tangent"))
    if not good:
        raise ValueError("no usable inner anchor points")
    anchors = np.array([L.anchor for L in good])
    C, o = _plane_matrix(good)

    def evaluate(pts):
        vals = np.full(len(pts), np.nan)
        wit = np.full(len(pts), -1)
        inside_old = lens.contains(pts)
        if np.any(inside_old):
            vals[inside_old] = field.interp(pts[inside_old])
        ring = (~inside_old) & (lens.outer.signed_distance(pts) > 0) \
            & (inflated.signed_distance(pts) <= 0)
        for i in np.nonzero(ring)[0]:
            z = pts[i]
            visible = np.ones(len(anchors), dtype=bool)
            for hole in lens.holes:
                visible &= _segment_hole_distance_many(z, anchors, hole) >= -hole.tol
            if not np.any(visible):
                continue
            planes = o[visible] + C[visible] @ z
            k = int(np.argmin(planes))
            vals[i] = planes[k]
            wit[i] = np.nonzero(visible)[0][k]
        return vals, wit

    # finiteness over a sampled ring plus a concavity sweep across the cut
    rng = np.random.default_rng(cfg.seed)
    thetas = rng.uniform(0.0, 2.0 * np.pi, 64)
    radii = rng.uniform(0.0, 1.0, 64)
    ring_pts = np.array([lens.outer.boundary_param(t) for t in thetas])
    normals = np.array([-lens.outer.boundary_inward_normal(p) for p in ring_pts])
    probes = ring_pts + (radii * outer_margin * 0.9)[:, None] * normals
    vals, _ = evaluate(probes)
    finite_frac = float(np.mean(np.isfinite(vals)))

    violations = []
    checked = 0
    tries = 0
    tol = 1e-7 * (1.0 + field.finite_sup())
    while checked < cfg.concavity_samples and tries < 40 * cfg.concavity_samples:
        tries += 1
        t1 = rng.uniform(0.0, 2.0 * np.pi)
        p_out = lens.outer.boundary_param(t1)
        n_out = -lens.outer.boundary_inward_normal(p_out)
        a = p_out + rng.uniform(0.2, 0.9) * outer_margin * n_out
        b = p_out - rng.uniform(0.2, 0.8) * lens.gap_width() * n_out \
            + rng.uniform(-0.3, 0.3) * np.array([-n_out[1], n_out[0]])
        pts = np.array([a, b])
        if inflated.signed_distance(a) > -1e-9 or not lens.contains(b):
            continue
        ts_ = np.linspace(0.0, 1.0, 9)
        seg_pts = a[None, :] + ts_[:, None] * (b - a)[None, :]
        bad = False
        for hole in lens.holes:
            if segment_min_distance(Segment(a, b), hole)[0] < 2 * field.h:
                bad = True
                break
        if bad:
            continue
        vals, _ = evaluate(seg_pts)
        if np.any(np.isnan(vals)):
            continue
        checked += 1
        lin = vals[0] + (vals[-1] - vals[0]) * ts_
        worst = float(np.max(lin - vals))
        if worst > tol:
            violations.append({"segment": [a.tolist(), b.tolist()], "deficit": worst})
    diagnostics = {"kind": "fixed", "outer_margin": outer_margin,
                   "inner_blend": s, "anchors": len(good),
                   "finite_fraction": finite_frac,
                   "concavity": {"ok": not violations, "checked": checked,
                                 "violations": violations[:5]}}
    if violations:
        raise ValueError(f"concavity violation in the outer ring: {violations[:2]}")
    new_lens = type(lens)(inflated, lens.holes, lens.closed_variant, validate=False)
    return ExtensionResult(new_lens, field, evaluate, diagnostics)


def boundary_regression(field, lens, f, n_anchors=12, pair_range=(0.05, 0.5),
                        n_pairs=160, degenerate_floor=1e-10):
    """Log-log exponent diagnostics of the supporting gaps.

    Fits the decay of G(x) + L(y - x) - G(y) over free-boundary pairs (gap
    exponent) and of f(z) - G(x) - L(z - x) near the contact point on the
    fixed boundary (contact exponent).  Reports a degenerate tag when the
    gaps sit at rounding level (affine data).
    """
    hole = lens.hole
    out = {"status": "ok", "free_gap_exponent": None, "contact_exponent": None,
           "pairs": 0}
    ts = np.linspace(0.0, 2.0 * np.pi, n_anchors, endpoint=False)
    gap_logr, gap_logq = [], []
    contact_logr, contact_logq = [], []
    for t in ts:
        x = hole.boundary_param(t)
        try:
            L = superdifferential_at(field, lens, f, x)
            v0 = L.offset
        except ValueError:
            continue
        # free boundary pairs at a range of separations
        for dt in np.linspace(pair_range[0], pair_range[1], n_pairs // n_anchors):
            for sgn in (1.0, -1.0):
                y = hole.boundary_param(t + sgn * dt)
                try:
                    vy = free_boundary_continuation(field, lens, y)
                except ValueError:
                    continue
                q = float(L.evaluate(y)) - vy
                r = float(np.linalg.norm(y - x))
                if q > degenerate_floor and r > 0:
                    gap_logr.append(np.log(r))
                    gap_logq.append(np.log(q))
        # contact decay on the fixed boundary
        Y, _ = visible_boundary_points(lens, x, 512)
        A = f.evaluate(Y) - L.evaluate(Y)
        if np.max(np.abs(A)) <= 1e-8 * (1.0 + abs(v0)):
            continue  # boundary gap at rounding level
        k = int(np.argmax(A))
        e_x = Y[k]
        rr = np.linalg.norm(Y - e_x, axis=1)
        ok = (np.abs(A) > degenerate_floor) & (rr > 1e-6) & (rr < 0.5 * lens.outer.scale)
        contact_logr.extend(np.log(rr[ok]))
        contact_logq.extend(np.log(np.abs(A[ok])))
    out["pairs"] = len(gap_logr)
    if len(gap_logr) < 8:
        out["status"] = "degenerate"
    else:
        out["free_gap_exponent"] = float(np.polyfit(gap_logr, gap_logq, 1)[0])
    if len(contact_logr) >= 8:
        out["contact_exponent"] = float(np.polyfit(contact_logr, contact_logq, 1)[0])
    return out


__all__ = ["LinearFunctional", "ExtensionConfig", "ExtensionResult",
           "superdifferential_at", "strong_concavity_perturb",
           "extend_through_free", "extend_through_fixed",
           "boundary_regression", "visible_boundary_points"]
