"""Oracle-based convex bodies and lens domains.

A convex body is represented by oracles (membership, signed distance,
support function, ray clipping) rather than a mesh; every construction in
the package reduces to ray and segment queries against convex sets.  A lens
is the closure of an open convex set minus one or more open convex holes
whose closures sit strictly inside the outer body.
"""

import numpy as np

# relative boundary tolerance: a point is "boundary" when |signed distance|
# is below REL_TOL * body scale
REL_TOL = 1e-9

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _as_points(p, dim):
    p = np.asarray(p, dtype=float)
    single = p.ndim == 1
    pts = p.reshape(1, -1) if single else p
    if pts.shape[1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {pts.shape[1]}")
    return pts, single


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero direction")
    return v / n


def _smallest_positive_root(a, b, c):
    """Vectorized smallest strictly positive root of a t^2 + b t + c = 0.

    Returns +inf where no positive real root exists.  Linear cases (a == 0)
    are handled.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    out = np.full(np.broadcast(a, b, c).shape, np.inf)
    lin = np.abs(a) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = -c / b
    good = lin & np.isfinite(tl) & (tl > 0)
    out[good] = tl[good]
    quad = ~lin
    disc = b * b - 4.0 * a * c
    ok = quad & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = (-b - sq) / (2.0 * a)
        r2 = (-b + sq) / (2.0 * a)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    pick = np.where(lo > 0, lo, np.where(hi > 0, hi, np.inf))
    out[ok] = pick[ok]
    return out


def _largest_root(a, b, c):
    """Vectorized largest real root of a t^2 + b t + c = 0 (a >= 0 convex case).

    Used for exits of convex sublevel sets from inside: returns +inf when the
    polynomial never returns to zero (recession direction).
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    out = np.full(np.broadcast(a, b, c).shape, np.inf)
    lin = np.abs(a) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = -c / b
    good = lin & (b > 0)
    out[good] = np.broadcast_to(tl, out.shape)[good]
    quad = ~lin
    disc = b * b - 4.0 * a * c
    ok = quad & (disc >= 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (-b + sq) / (2.0 * a)
    out[ok] = r[ok]
    return out


def _cubic_real_roots(c3, c1, c0):
    """Real roots of c3 x^3 + c1 x + c0 = 0, vectorized (c2 = 0, c3 > 0).

    Returns array of shape (n, 3) with NaN for complex roots.
    """
    c3 = np.asarray(c3, float)
    c1 = np.asarray(c1, float)
    c0 = np.asarray(c0, float)
    p = c1 / c3
    q = c0 / c3
    n = p.shape[0]
    roots = np.full((n, 3), np.nan)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    one = disc >= 0
    if np.any(one):
        sq = np.sqrt(disc[one])
        u = np.cbrt(-q[one] / 2.0 + sq)
        v = np.cbrt(-q[one] / 2.0 - sq)
        roots[one, 0] = u + v
    three = ~one
    if np.any(three):
        pp = p[three]
        qq = q[three]
        r = np.sqrt(-(pp ** 3) / 27.0)
        phi = np.arccos(np.clip(-qq / (2.0 * r), -1.0, 1.0))
        m = 2.0 * np.sqrt(-pp / 3.0)
        roots[three, 0] = m * np.cos(phi / 3.0)
        roots[three, 1] = m * np.cos((phi + 2.0 * np.pi) / 3.0)
        roots[three, 2] = m * np.cos((phi + 4.0 * np.pi) / 3.0)
    return roots


class ConvexBody:
    """Oracle record for an open convex set.

    Canonical kinds:
      ball            |x - center| < radius                     (any d)
      paraboloid      x_d > coeff*|x'|^2 + offset, shifted      (any d)
      hyperbola       (x - sx)(y - sy) > level on the shifted
                      open positive quadrant                    (d = 2)
      upper_hyperbola y > sqrt(|x'|^2 + c^2) + y0               (d = 2)
      ellipse         sum_i ((x_i - c_i)/ax_i)^2 < 1            (d = 2)
      blend           Minkowski interpolation of two bodies     (d = 2)

    Instances are immutable after construction and safe to share.
    """

    def __init__(self, kind, dim, params):
        self.kind = kind
        self.dim = int(dim)
        self.params = params
        self._scale = self._compute_scale()

    # ------------------------------------------------------------------ #
    # constructors

    @staticmethod
    def ball(center, radius):
        center = np.asarray(center, dtype=float)
        if radius < 0:
            raise ValueError("negative radius")
        return ConvexBody("ball", center.size, {"center": center, "radius": float(radius)})

    @staticmethod
    def disk(center, radius):
        c = np.asarray(center, dtype=float)
        if c.size != 2:
            raise ValueError("disk is two-dimensional")
        return ConvexBody.ball(c, radius)

    @staticmethod
    def paraboloid(dim=2, coeff=1.0, offset=0.0, apex=None):
        """Region x_d > coeff * |x'|^2 + offset, translated by apex."""
        if coeff <= 0:
            raise ValueError("coeff must be positive")
        apex = np.zeros(dim) if apex is None else np.asarray(apex, dtype=float)
        return ConvexBody("paraboloid", dim, {"coeff": float(coeff), "offset": float(offset), "apex": apex})

    @staticmethod
    def hyperbola(level, shift=(0.0, 0.0)):
        """Region (x - sx)(y - sy) > level with x > sx, y > sy."""
        if level <= 0:
            raise ValueError("level must be positive")
        return ConvexBody("hyperbola", 2, {"level": float(level), "shift": np.asarray(shift, dtype=float)})

    @staticmethod
    def upper_hyperbola(c, y0=0.0):
        """Region y > sqrt(x^2 + c^2) + y0."""
        if c <= 0:
            raise ValueError("c must be positive")
        return ConvexBody("upper_hyperbola", 2, {"c": float(c), "y0": float(y0)})

    @staticmethod
    def ellipse(center, semi_axes):
        center = np.asarray(center, dtype=float)
        ax = np.asarray(semi_axes, dtype=float)
        if center.size != 2 or ax.size != 2 or np.any(ax <= 0):
            raise ValueError("ellipse needs a 2d center and positive semi axes")
        return ConvexBody("ellipse", 2, {"center": center, "semi_axes": ax})

    @staticmethod
    def blend(b0, b1, t):
        if b0.dim != b1.dim:
            raise ValueError("dimension mismatch in blend")
        return ConvexBody("blend", b0.dim, {"b0": b0, "b1": b1, "t": float(t)})

    @staticmethod
    def inflated(base, margin):
        """Minkowski sum of a body with the closed ball of the given radius."""
        if margin < 0:
            raise ValueError("negative margin")
        if base.kind == "ball":
            return ConvexBody.ball(base.params["center"], base.params["radius"] + margin)
        if base.kind == "inflated":
            return ConvexBody.inflated(base.params["base"], base.params["margin"] + margin)
        return ConvexBody("inflated", base.dim, {"base": base, "margin": float(margin)})

    # ------------------------------------------------------------------ #
    # descriptor (JSON round trip)

    def descriptor(self):
        p = self.params
        if self.kind == "ball":
            return {"kind": "ball", "center": list(p["center"]), "radius": p["radius"]}
        if self.kind == "paraboloid":
            return {"kind": "paraboloid", "dim": self.dim, "coeff": p["coeff"],
                    "offset": p["offset"], "apex": list(p["apex"])}
        if self.kind == "hyperbola":
            return {"kind": "hyperbola", "level": p["level"], "shift": list(p["shift"])}
        if self.kind == "upper_hyperbola":
            return {"kind": "upper_hyperbola", "c": p["c"], "y0": p["y0"]}
        if self.kind == "ellipse":
            return {"kind": "ellipse", "center": list(p["center"]), "semi_axes": list(p["semi_axes"])}
        if self.kind == "blend":
            return {"kind": "blend", "b0": p["b0"].descriptor(), "b1": p["b1"].descriptor(), "t": p["t"]}
        if self.kind == "inflated":
            return {"kind": "inflated", "base": p["base"].descriptor(), "margin": p["margin"]}
        raise ValueError(self.kind)

    @staticmethod
    def from_descriptor(d):
        kind = d["kind"]
        if kind in ("ball", "disk"):
            return ConvexBody.ball(d["center"], d["radius"])
        if kind == "paraboloid":
            return ConvexBody.paraboloid(d.get("dim", 2), d.get("coeff", 1.0),
                                         d.get("offset", 0.0), d.get("apex"))
        if kind == "hyperbola":
            return ConvexBody.hyperbola(d["level"], d.get("shift", (0.0, 0.0)))
        if kind == "upper_hyperbola":
            return ConvexBody.upper_hyperbola(d["c"], d.get("y0", 0.0))
        if kind == "ellipse":
            return ConvexBody.ellipse(d["center"], d["semi_axes"])
        if kind == "blend":
            return minkowski_interpolate(ConvexBody.from_descriptor(d["b0"]),
                                         ConvexBody.from_descriptor(d["b1"]), d["t"])
        if kind == "inflated":
            return ConvexBody.inflated(ConvexBody.from_descriptor(d["base"]), d["margin"])
        raise ValueError(f"unknown body kind {kind!r}")

    # ------------------------------------------------------------------ #
    # basic geometry

    def _compute_scale(self):
        p = self.params
        if self.kind == "ball":
            return max(p["radius"], 1e-12)
        if self.kind == "ellipse":
            return float(np.max(p["semi_axes"]))
        if self.kind == "paraboloid":
            return max(1.0, abs(p["offset"]), 1.0 / p["coeff"])
        if self.kind == "hyperbola":
            return max(1.0, np.sqrt(p["level"]))
        if self.kind == "upper_hyperbola":
            return max(1.0, p["c"])
        if self.kind == "blend":
            return (1.0 - p["t"]) * p["b0"].scale + p["t"] * p["b1"].scale
        if self.kind == "inflated":
            return p["base"].scale + p["margin"]
        raise ValueError(self.kind)

    @property
    def scale(self):
        return self._scale

    @property
    def tol(self):
        return REL_TOL * self._scale

    def is_bounded(self):
        if self.kind in ("ball", "ellipse"):
            return True
        if self.kind == "blend":
            return self.params["b0"].is_bounded() and self.params["b1"].is_bounded()
        if self.kind == "inflated":
            return self.params["base"].is_bounded()
        return False

    def diameter_estimate(self):
        if self.kind == "ball":
            return 2.0 * self.params["radius"]
        if self.kind == "ellipse":
            return 2.0 * float(np.max(self.params["semi_axes"]))
        if self.kind == "blend" and self.is_bounded():
            p = self.params
            return (1.0 - p["t"]) * p["b0"].diameter_estimate() + p["t"] * p["b1"].diameter_estimate()
        if self.kind == "inflated" and self.is_bounded():
            return self.params["base"].diameter_estimate() + 2.0 * self.params["margin"]
        return np.inf

    def anchor_point(self):
        """A point well inside the open set."""
        p = self.params
        if self.kind == "ball":
            return p["center"].copy()
        if self.kind == "ellipse":
            return p["center"].copy()
        if self.kind == "paraboloid":
            a = np.zeros(self.dim)
            a[-1] = p["offset"] + 1.0
            return a + p["apex"]
        if self.kind == "hyperbola":
            s = np.sqrt(2.0 * p["level"])
            return p["shift"] + np.array([s, s])
        if self.kind == "upper_hyperbola":
            return np.array([0.0, p["y0"] + 2.0 * p["c"]])
        if self.kind == "blend":
            return (1.0 - p["t"]) * p["b0"].anchor_point() + p["t"] * p["b1"].anchor_point()
        if self.kind == "inflated":
            return p["base"].anchor_point()
        raise ValueError(self.kind)

    # ------------------------------------------------------------------ #
    # gauge: analytic defining inequality, negative inside, zero on the
    # boundary.  Sign is exact for canonical kinds; magnitude is not a
    # distance.

    def gauge(self, p):
        pts, single = _as_points(p, self.dim)
        g = self._gauge(pts)
        return g[0] if single else g

    def _gauge(self, pts):
        p = self.params
        if self.kind == "ball":
            return np.linalg.norm(pts - p["center"], axis=1) - p["radius"]
        if self.kind == "ellipse":
            q = (pts - p["center"]) / p["semi_axes"]
            return np.einsum("ij,ij->i", q, q) - 1.0
        if self.kind == "paraboloid":
            q = pts - p["apex"]
            r2 = np.einsum("ij,ij->i", q[:, :-1], q[:, :-1])
            return p["coeff"] * r2 + p["offset"] - q[:, -1]
        if self.kind == "hyperbola":
            q = pts - p["shift"]
            val = p["level"] - q[:, 0] * q[:, 1]
            # outside the open quadrant the point is certainly outside
            bad = (q[:, 0] <= 0) | (q[:, 1] <= 0)
            return np.where(bad, np.maximum(p["level"], np.abs(val)), val)
        if self.kind == "upper_hyperbola":
            return np.sqrt(pts[:, 0] ** 2 + p["c"] ** 2) + p["y0"] - pts[:, 1]
        if self.kind in ("blend", "inflated"):
            return self._signed_distance(pts)
        raise ValueError(self.kind)

    # ------------------------------------------------------------------ #
    # signed distance (negative inside, Euclidean)

    def signed_distance(self, p):
        pts, single = _as_points(p, self.dim)
        d = self._signed_distance(pts)
        return d[0] if single else d

    def distance_to(self, p):
        sd = self.signed_distance(p)
        return np.maximum(sd, 0.0)

    def _signed_distance(self, pts):
        p = self.params
        if self.kind == "ball":
            return np.linalg.norm(pts - p["center"], axis=1) - p["radius"]
        if self.kind == "paraboloid":
            return self._sd_paraboloid(pts)
        if self.kind == "hyperbola":
            return self._sd_sampled(pts)
        if self.kind == "upper_hyperbola":
            return self._sd_sampled(pts)
        if self.kind == "ellipse":
            return self._sd_sampled(pts)
        if self.kind == "blend":
            return self._sd_blend(pts)
        if self.kind == "inflated":
            return p["base"]._signed_distance(pts) - p["margin"]
        raise ValueError(self.kind)

    def _sd_paraboloid(self, pts):
        # reduce to the meridian plane: minimize (s-r)^2 + (a s^2 + c - y)^2
        p = self.params
        a, c = p["coeff"], p["offset"]
        q = pts - p["apex"]
        r = np.linalg.norm(q[:, :-1], axis=1)
        y = q[:, -1]
        roots = _cubic_real_roots(np.full_like(r, 2.0 * a * a),
                                  1.0 + 2.0 * a * (c - y), -r)
        s = np.where(np.isnan(roots), 0.0, roots)
        d2 = (s - r[:, None]) ** 2 + (a * s ** 2 + c - y[:, None]) ** 2
        d2[np.isnan(roots)] = np.inf
        dist = np.sqrt(np.min(d2, axis=1))
        inside = a * r * r + c - y < 0
        return np.where(inside, -dist, dist)

    def _boundary_curve(self, t):
        """2d boundary parametrization by a scalar parameter array."""
        p = self.params
        t = np.asarray(t, dtype=float)
        if self.kind == "ball":
            c, r = p["center"], p["radius"]
            return np.stack([c[0] + r * np.cos(t), c[1] + r * np.sin(t)], axis=-1)
        if self.kind == "ellipse":
            c, ax = p["center"], p["semi_axes"]
            return np.stack([c[0] + ax[0] * np.cos(t), c[1] + ax[1] * np.sin(t)], axis=-1)
        if self.kind == "paraboloid":
            if self.dim != 2:
                raise ValueError("boundary_param is 2d only")
            ap = p["apex"]
            return np.stack([ap[0] + t, ap[1] + p["coeff"] * t * t + p["offset"]], axis=-1)
        if self.kind == "hyperbola":
            s = np.sqrt(p["level"])
            sh = p["shift"]
            return np.stack([sh[0] + s * np.exp(t), sh[1] + s * np.exp(-t)], axis=-1)
        if self.kind == "upper_hyperbola":
            return np.stack([t, np.sqrt(t * t + p["c"] ** 2) + p["y0"]], axis=-1)
        if self.kind in ("blend", "inflated"):
            return self.support_point(np.stack([np.cos(t), np.sin(t)], axis=-1))
        raise ValueError(self.kind)

    def boundary_param(self, t):
        """Boundary point for an angle-like parameter (2d only)."""
        if self.dim != 2:
            raise ValueError("boundary_param is 2d only")
        t = np.asarray(t, dtype=float)
        single = t.ndim == 0
        out = self._boundary_curve(np.atleast_1d(t))
        return out[0] if single else out

    def _param_window(self):
        # parameter range that covers the relevant part of the boundary
        if self.kind in ("ball", "ellipse", "blend", "inflated"):
            if self.is_bounded():
                return 0.0, 2.0 * np.pi, True
        if self.kind == "hyperbola":
            return -10.0, 10.0, False
        return -30.0, 30.0, False

    def _sd_sampled(self, pts, n=241):
        """Distance by dense boundary sampling plus local golden refinement."""
        lo, hi, periodic = self._param_window()
        ts = np.linspace(lo, hi, n)
        curve = self._boundary_curve(ts)  # (n, 2)
        d2 = ((pts[:, None, :] - curve[None, :, :]) ** 2).sum(axis=2)
        best = np.argmin(d2, axis=1)
        step = ts[1] - ts[0]
        lo_t = ts[best] - step
        hi_t = ts[best] + step
        # golden section refine per point (vectorized)
        a, b = lo_t.copy(), hi_t.copy()
        for _ in range(48):
            m1 = b - GOLDEN * (b - a)
            m2 = a + GOLDEN * (b - a)
            f1 = ((pts - self._boundary_curve(m1)) ** 2).sum(axis=1)
            f2 = ((pts - self._boundary_curve(m2)) ** 2).sum(axis=1)
            take1 = f1 < f2
            b = np.where(take1, m2, b)
            a = np.where(take1, a, m1)
        tm = 0.5 * (a + b)
        dist = np.linalg.norm(pts - self._boundary_curve(tm), axis=1)
        inside = self._gauge(pts) < 0
        return np.where(inside, -dist, dist)

    # ------------------------------------------------------------------ #
    # support function and support points

    def support(self, u):
        """h(u) = sup over the closed body of <x, u>; +inf in open directions."""
        U, single = _as_points(u, self.dim)
        h = self._support(U)
        return h[0] if single else h

    def _support(self, U):
        p = self.params
        if self.kind == "ball":
            return U @ p["center"] + p["radius"] * np.linalg.norm(U, axis=1)
        if self.kind == "ellipse":
            c, ax = p["center"], p["semi_axes"]
            return U @ c + np.sqrt((ax[0] * U[:, 0]) ** 2 + (ax[1] * U[:, 1]) ** 2)
        if self.kind == "paraboloid":
            a, c, apex = p["coeff"], p["offset"], p["apex"]
            ud = U[:, -1]
            un2 = np.einsum("ij,ij->i", U[:, :-1], U[:, :-1])
            h = np.full(len(U), np.inf)
            neg = ud < 0
            h[neg] = un2[neg] / (-4.0 * a * ud[neg]) + ud[neg] * c
            axial = (~neg) & (un2 == 0) & (ud == 0)
            h[axial] = 0.0
            return h + U @ apex
        if self.kind == "hyperbola":
            lvl, sh = p["level"], p["shift"]
            h = np.full(len(U), np.inf)
            neg = (U[:, 0] <= 0) & (U[:, 1] <= 0)
            h[neg] = -2.0 * np.sqrt(U[neg, 0] * U[neg, 1] * lvl)
            return h + U @ sh
        if self.kind == "upper_hyperbola":
            c, y0 = p["c"], p["y0"]
            h = np.full(len(U), np.inf)
            ok = (U[:, 1] < 0) & (np.abs(U[:, 0]) < -U[:, 1])
            h[ok] = c * np.sqrt(U[ok, 1] ** 2 - U[ok, 0] ** 2) + y0 * U[ok, 1]
            return h
        if self.kind == "blend":
            t = p["t"]
            return (1.0 - t) * p["b0"]._support(U) + t * p["b1"]._support(U)
        if self.kind == "inflated":
            return p["base"]._support(U) + p["margin"] * np.linalg.norm(U, axis=1)
        raise ValueError(self.kind)

    def support_point(self, u):
        """Boundary point attaining the support value (smooth strictly convex)."""
        U, single = _as_points(u, self.dim)
        pt = self._support_point(U)
        return pt[0] if single else pt

    def _support_point(self, U):
        p = self.params
        if self.kind == "ball":
            n = np.linalg.norm(U, axis=1, keepdims=True)
            return p["center"] + p["radius"] * U / n
        if self.kind == "ellipse":
            c, ax = p["center"], p["semi_axes"]
            g = np.stack([ax[0] ** 2 * U[:, 0], ax[1] ** 2 * U[:, 1]], axis=1)
            denom = np.sqrt((ax[0] * U[:, 0]) ** 2 + (ax[1] * U[:, 1]) ** 2)[:, None]
            return c + g / denom
        if self.kind == "blend":
            t = p["t"]
            return (1.0 - t) * p["b0"]._support_point(U) + t * p["b1"]._support_point(U)
        if self.kind == "inflated":
            n = np.linalg.norm(U, axis=1, keepdims=True)
            return p["base"]._support_point(U) + p["margin"] * U / n
        if self.kind == "paraboloid":
            a, c, apex = p["coeff"], p["offset"], p["apex"]
            ud = U[:, -1]
            if np.any(ud >= 0):
                raise ValueError("support point undefined in non-descending direction")
            xp = U[:, :-1] / (-2.0 * a * ud[:, None])
            r2 = np.einsum("ij,ij->i", xp, xp)
            return np.concatenate([xp, (a * r2 + c)[:, None]], axis=1) + apex
        if self.kind == "hyperbola":
            lvl, sh = p["level"], p["shift"]
            if np.any((U[:, 0] >= 0) | (U[:, 1] >= 0)):
                raise ValueError("support point undefined outside the negative cone")
            x = np.sqrt(lvl * U[:, 1] / U[:, 0])
            return sh + np.stack([x, lvl / x], axis=1)
        raise ValueError(self.kind)

    def _sd_blend(self, pts, n=512):
        """Signed distance of a blend via sup_u (<p,u> - h(u)) on a direction grid."""
        if self.dim != 2:
            raise ValueError("generic blend oracles are 2d only")
        th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        h = self._support(U)
        fin = np.isfinite(h)
        vals = pts @ U[fin].T - h[fin][None, :]
        k = np.argmax(vals, axis=1)
        # golden refine around the best angle
        tf = th[fin]
        step = 2.0 * np.pi / n
        a = tf[k] - step
        b = tf[k] + step
        for _ in range(40):
            m1 = b - GOLDEN * (b - a)
            m2 = a + GOLDEN * (b - a)
            u1 = np.stack([np.cos(m1), np.sin(m1)], axis=1)
            u2 = np.stack([np.cos(m2), np.sin(m2)], axis=1)
            f1 = np.einsum("ij,ij->i", pts, u1) - self._support(u1)
            f2 = np.einsum("ij,ij->i", pts, u2) - self._support(u2)
            f1 = np.where(np.isfinite(f1), f1, -np.inf)
            f2 = np.where(np.isfinite(f2), f2, -np.inf)
            take1 = f1 > f2
            b = np.where(take1, m2, b)
            a = np.where(take1, a, m1)
        tm = 0.5 * (a + b)
        um = np.stack([np.cos(tm), np.sin(tm)], axis=1)
        fm = np.einsum("ij,ij->i", pts, um) - self._support(um)
        best0 = np.max(np.where(np.isfinite(vals), vals, -np.inf), axis=1)
        return np.maximum(best0, np.where(np.isfinite(fm), fm, -np.inf))

    # ------------------------------------------------------------------ #
    # membership

    def side(self, p):
        """-1 inside, 0 within boundary tolerance, +1 outside (vectorized)."""
        pts, single = _as_points(p, self.dim)
        sd = self._signed_distance(pts)
        out = np.where(sd > self.tol, 1, np.where(sd < -self.tol, -1, 0)).astype(np.int8)
        return out[0] if single else out

    # ------------------------------------------------------------------ #
    # ray clipping

    def ray_exit(self, x, u):
        """Exit parameter of the ray x + t u (t >= 0) from the closed body.

        Starting points are assumed inside the closure; +inf means the ray
        never leaves (recession direction).  Vectorized over rows of x.
        """
        X, single = _as_points(x, self.dim)
        u = _unit(u)
        t = self._ray_exit(X, u)
        return t[0] if single else t

    def _ray_exit(self, X, u):
        p = self.params
        if self.kind == "ball":
            q = X - p["center"]
            b = q @ u
            c = np.einsum("ij,ij->i", q, q) - p["radius"] ** 2
            disc = np.maximum(b * b - c, 0.0)
            return -b + np.sqrt(disc)
        if self.kind == "ellipse":
            ax = p["semi_axes"]
            q = (X - p["center"]) / ax
            v = u / ax
            a = v @ v
            b = 2.0 * q @ v
            c = np.einsum("ij,ij->i", q, q) - 1.0
            disc = np.maximum(b * b - 4 * a * c, 0.0)
            return (-b + np.sqrt(disc)) / (2 * a)
        if self.kind == "paraboloid":
            a0, c0, apex = p["coeff"], p["offset"], p["apex"]
            q = X - apex
            up, ud = u[:-1], u[-1]
            A = np.full(len(X), a0 * (up @ up))
            B = 2.0 * a0 * (q[:, :-1] @ up) - ud
            C = a0 * np.einsum("ij,ij->i", q[:, :-1], q[:, :-1]) + c0 - q[:, -1]
            return _largest_root(A, B, C)
        if self.kind == "hyperbola":
            sh, lvl = p["shift"], p["level"]
            q = X - sh
            A = np.full(len(X), u[0] * u[1])
            B = q[:, 0] * u[1] + q[:, 1] * u[0]
            C = q[:, 0] * q[:, 1] - lvl
            # inside: C >= 0; exit where the product first drops to the level
            return _first_downcross(A, B, C)
        if self.kind in ("upper_hyperbola", "blend", "inflated"):
            return self._ray_march_exit(X, u)
        raise ValueError(self.kind)

    def _ray_march_exit(self, X, u, t_max=1e6):
        out = np.empty(len(X))
        for i, x in enumerate(X):
            out[i] = _scalar_exit(lambda t: self.signed_distance(x + t * u), t_max)
        return out

    def ray_entry(self, x, u, clearance=0.0):
        """First parameter t >= 0 where the ray x + t u gets within `clearance`
        of the closed body (entry into the body inflated by the clearance).

        clearance == 0 is entry into the body itself.  Returns +inf where the
        ray never enters.  Exact for balls at any clearance; other kinds are
        exact at zero clearance and conservative (stop early) otherwise.
        """
        X, single = _as_points(x, self.dim)
        u = _unit(u)
        t = self._ray_entry(X, u, clearance)
        return t[0] if single else t

    def _ray_entry(self, X, u, clearance):
        p = self.params
        if self.kind == "ball":
            q = X - p["center"]
            r = p["radius"] + clearance
            b = 2.0 * (q @ u)
            c = np.einsum("ij,ij->i", q, q) - r * r
            t = _first_downcross(np.ones(len(X)), b, c,
                                 min_disc=8.0 * max(r, 1e-12) * self.tol)
            t[c < 0] = 0.0
            return t
        if self.kind == "paraboloid":
            a0, apex = p["coeff"], p["apex"]
            # conservative vertical drop of the boundary
            c0 = p["offset"] - clearance * self._grad_bound()
            q = X - apex
            up, ud = u[:-1], u[-1]
            A = np.full(len(X), a0 * (up @ up))
            B = 2.0 * a0 * (q[:, :-1] @ up) - ud
            C = a0 * np.einsum("ij,ij->i", q[:, :-1], q[:, :-1]) + c0 - q[:, -1]
            pen = self.tol * self._grad_bound()
            t = _first_downcross(A, B, C, min_disc=4.0 * max(a0, 1e-12) * pen)
            t[C < 0] = 0.0
            return t
        if self.kind == "hyperbola":
            sh = p["shift"]
            root = max(np.sqrt(p["level"]) - clearance * self._grad_bound(), 1e-12)
            lvl = root * root
            q = X - sh
            A = np.full(len(X), u[0] * u[1])
            B = q[:, 0] * u[1] + q[:, 1] * u[0]
            C = lvl - q[:, 0] * q[:, 1]
            # entering means the product climbs above lvl inside the quadrant
            t = _first_downcross(-A, -B, C, min_disc=1e-13 * max(1.0, lvl) ** 2)
            inside0 = (C < 0) & (q[:, 0] > 0) & (q[:, 1] > 0)
            t[inside0] = 0.0
            # require the entry point in the open quadrant
            ok = np.isfinite(t)
            if np.any(ok):
                pts = X[ok] + t[ok, None] * u
                good = np.all(pts - sh > 0, axis=1)
                tt = t[ok]
                tt[~good] = np.inf
                t[ok] = tt
            return t
        if self.kind == "ellipse" and clearance == 0.0:
            ax = p["semi_axes"]
            q = (X - p["center"]) / ax
            v = u / ax
            a = np.full(len(X), v @ v)
            b = 2.0 * q @ v
            c = np.einsum("ij,ij->i", q, q) - 1.0
            t = _smallest_positive_root(a, b, c)
            t[c <= 0] = 0.0
            return t
        if self.kind == "inflated":
            return p["base"]._ray_entry(X, u, clearance + p["margin"])
        if self.kind in ("upper_hyperbola", "blend", "ellipse"):
            out = np.empty(len(X))
            for i, x in enumerate(X):
                out[i] = _scalar_entry(lambda t: self.signed_distance(x + t * u) - clearance, 1e6)
            return out
        raise ValueError(self.kind)

    def _grad_bound(self, box_half_width=50.0):
        # bound on |grad gauge| used to convert Euclidean clearance into a
        # conservative level shift; fine at desk scale
        if self.kind == "paraboloid":
            return np.sqrt(1.0 + (2.0 * self.params["coeff"] * box_half_width) ** 2)
        if self.kind == "hyperbola":
            return np.sqrt(2.0) * box_half_width / max(np.sqrt(self.params["level"]), 1e-9)
        return 1.0

    # ------------------------------------------------------------------ #
    # tangent lines from an exterior point (2d)

    def tangent_directions(self, x, clearance=0.0):
        """Directions of the two lines through x supporting the (possibly
        inflated) body; empty list if x is in the inflated body."""
        x = np.asarray(x, dtype=float)
        if self.kind == "ball":
            c = self.params["center"]
            r = self.params["radius"] + clearance
            v = c - x
            d = np.linalg.norm(v)
            if d <= r:
                return []
            phi = np.arcsin(min(r / d, 1.0))
            base = np.arctan2(v[1], v[0])
            return [np.array([np.cos(base + s * phi), np.sin(base + s * phi)]) for s in (-1.0, 1.0)]
        # generic: scan directions minimizing entry, keep grazing ones
        out = []
        for target in (-1.0, 1.0):
            lo, hi = 0.0, np.pi
            # bisection on the rotation from the ray toward the anchor
            v = _unit(self.anchor_point() - x)
            ang0 = np.arctan2(v[1], v[0])
            def enters(a):
                u = np.array([np.cos(a), np.sin(a)])
                return np.isfinite(self.ray_entry(x, u, clearance))
            if not enters(ang0):
                return []
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if enters(ang0 + target * mid):
                    lo = mid
                else:
                    hi = mid
            a = ang0 + target * lo
            out.append(np.array([np.cos(a), np.sin(a)]))
        return out

    # ------------------------------------------------------------------ #
    # normals and recession

    def boundary_inward_normal(self, x):
        """Unit normal at a boundary point pointing into the body."""
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "ball":
            return _unit(p["center"] - x)
        if self.kind == "ellipse":
            q = (x - p["center"]) / p["semi_axes"] ** 2
            return _unit(-q)
        if self.kind == "paraboloid":
            q = x - p["apex"]
            g = np.concatenate([2.0 * p["coeff"] * q[:-1], [-1.0]])
            return _unit(-g)
        if self.kind == "hyperbola":
            q = x - p["shift"]
            return _unit(np.array([q[1], q[0]]))
        if self.kind == "upper_hyperbola":
            g = np.array([x[0] / np.sqrt(x[0] ** 2 + p["c"] ** 2), -1.0])
            return _unit(-g)
        if self.kind in ("blend", "inflated"):
            # numeric gradient of the signed distance
            h = 1e-6 * self.scale
            g = np.array([(self.signed_distance(x + h * e) - self.signed_distance(x - h * e)) / (2 * h)
                          for e in np.eye(self.dim)])
            return _unit(-g)
        raise ValueError(self.kind)

    def recession_dirs(self, n=8):
        """Deterministic sample of recession directions (empty when bounded)."""
        if self.is_bounded():
            return np.zeros((0, self.dim))
        if self.kind == "paraboloid":
            e = np.zeros(self.dim)
            e[-1] = 1.0
            return e[None, :]
        if self.kind == "hyperbola":
            ang = np.linspace(0.0, np.pi / 2.0, n)
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)
        if self.kind == "upper_hyperbola":
            ang = np.linspace(np.pi / 4.0, 3.0 * np.pi / 4.0, n)
            return np.stack([np.cos(ang), np.sin(ang)], axis=1)
        if self.kind == "blend":
            return self.params["b0"].recession_dirs(n)
        if self.kind == "inflated":
            return self.params["base"].recession_dirs(n)
        raise ValueError(self.kind)

    def __repr__(self):
        return f"ConvexBody({self.kind}, dim={self.dim})"


def _first_downcross(A, B, C, min_disc=0.0):
    """First t > 0 where A t^2 + B t + C crosses strictly below zero, starting
    from C >= 0; +inf if never.  Vectorized.

    min_disc filters out tangencies of the convex branch: a grazing contact
    (discriminant at rounding level) is not a crossing.
    """
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    C = np.asarray(C, float)
    out = np.full(np.broadcast(A, B, C).shape, np.inf)
    lin = np.abs(A) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        tl = -C / B
    good = lin & (B < 0)
    out[good] = np.broadcast_to(np.maximum(tl, 0.0), out.shape)[good]
    quad = ~lin
    disc = B * B - 4.0 * A * C
    ok = quad & np.where(A > 0, disc > min_disc, disc >= 0)
    sq = np.sqrt(np.where(ok, np.maximum(disc, 0.0), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = (-B - sq) / (2.0 * A)
        r2 = (-B + sq) / (2.0 * A)
    lo = np.minimum(r1, r2)
    hi = np.maximum(r1, r2)
    downs = np.where(A > 0, lo, hi)  # convex: crosses down at the smaller root
    # concave (A<0): value eventually negative; first downcross is hi if C>=0
    pick = np.where(downs > 0, downs, np.where((A < 0) & (hi > 0), hi, np.inf))
    out[ok] = pick[ok]
    return out


def _scalar_exit(sd_along, t_max):
    if sd_along(0.0) > 0:
        return 0.0
    t = 1e-3
    while sd_along(t) < 0 and t < t_max:
        t *= 2.0
    if t >= t_max:
        return np.inf
    lo, hi = t / 2.0, t
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if sd_along(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _scalar_entry(sd_along, t_max):
    if sd_along(0.0) <= 0:
        return 0.0
    # march to bracket the first nonpositive value
    t, prev = 1e-3, 0.0
    while t < t_max:
        if sd_along(t) <= 0:
            break
        prev, t = t, t * 1.5
    else:
        return np.inf
    if t >= t_max:
        return np.inf
    lo, hi = prev, t
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if sd_along(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------- #
# Minkowski interpolation

def _scaled_shifted(body, s, shift):
    """Closed form for s * body + shift (s > 0)."""
    p = body.params
    shift = np.asarray(shift, dtype=float)
    if body.kind == "ball":
        return ConvexBody.ball(s * p["center"] + shift, s * p["radius"])
    if body.kind == "ellipse":
        return ConvexBody.ellipse(s * p["center"] + shift, s * p["semi_axes"])
    if body.kind == "paraboloid":
        return ConvexBody.paraboloid(body.dim, p["coeff"] / s, p["offset"] * s,
                                     s * p["apex"] + shift)
    if body.kind == "hyperbola":
        return ConvexBody.hyperbola(p["level"] * s * s, s * p["shift"] + shift)
    if body.kind == "upper_hyperbola":
        if shift[0] != 0.0:
            raise ValueError("horizontal shift of upper_hyperbola unsupported")
        return ConvexBody.upper_hyperbola(s * p["c"], s * p["y0"] + shift[1])
    return None


def minkowski_interpolate(b0, b1, eps):
    """Minkowski interpolation (1 - eps) * b0 + eps * b1.

    Closed form for same-kind canonical pairs and for degenerate (radius zero)
    ball partners; otherwise a support-function blend oracle (2d).
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if b0.dim != b1.dim:
        raise ValueError("dimension mismatch")
    if eps == 0.0:
        return b0
    if eps == 1.0:
        return b1
    # degenerate partners: a zero-radius ball acts as a pure translation
    if b1.kind == "ball" and b1.params["radius"] == 0.0:
        out = _scaled_shifted(b0, 1.0 - eps, eps * b1.params["center"])
        if out is not None:
            return out
    if b0.kind == "ball" and b0.params["radius"] == 0.0:
        out = _scaled_shifted(b1, eps, (1.0 - eps) * b0.params["center"])
        if out is not None:
            return out
    if b0.kind == b1.kind:
        p0, p1 = b0.params, b1.params
        if b0.kind == "ball":
            return ConvexBody.ball((1 - eps) * p0["center"] + eps * p1["center"],
                                   (1 - eps) * p0["radius"] + eps * p1["radius"])
        if b0.kind == "paraboloid":
            inv = (1 - eps) / p0["coeff"] + eps / p1["coeff"]
            return ConvexBody.paraboloid(b0.dim, 1.0 / inv,
                                         (1 - eps) * p0["offset"] + eps * p1["offset"],
                                         (1 - eps) * p0["apex"] + eps * p1["apex"])
        if b0.kind == "hyperbola":
            rt = (1 - eps) * np.sqrt(p0["level"]) + eps * np.sqrt(p1["level"])
            return ConvexBody.hyperbola(rt * rt, (1 - eps) * p0["shift"] + eps * p1["shift"])
        if b0.kind == "ellipse" and np.allclose(p0["semi_axes"] / p1["semi_axes"],
                                                p0["semi_axes"][0] / p1["semi_axes"][0]):
            return ConvexBody.ellipse((1 - eps) * p0["center"] + eps * p1["center"],
                                      (1 - eps) * p0["semi_axes"] + eps * p1["semi_axes"])
    if b0.dim != 2:
        raise ValueError(f"unsupported blend pair {b0.kind}/{b1.kind} in dim {b0.dim}")
    return ConvexBody.blend(b0, b1, eps)


def shrink_toward_center(body, factor):
    """Minkowski blend of a body toward its anchor point: factor 1 is the
    identity, smaller factors contract the body about the anchor."""
    if not 0.0 < factor <= 1.0:
        raise ValueError("factor must lie in (0, 1]")
    if factor == 1.0:
        return body
    point = ConvexBody.ball(body.anchor_point(), 0.0)
    return minkowski_interpolate(body, point, 1.0 - factor)


# ---------------------------------------------------------------------- #
# segments

class Segment:
    """Straight segment between two points."""

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def point(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return self.a + t * (self.b - self.a)
        return self.a[None, :] + t[:, None] * (self.b - self.a)[None, :]

    @property
    def length(self):
        return float(np.linalg.norm(self.b - self.a))

    def is_point(self, tol=1e-14):
        return self.length <= tol

    def __repr__(self):
        return f"Segment({self.a}, {self.b})"


def segment_min_distance(seg, body, n_coarse=65):
    """Minimum of the signed distance to a convex body along a segment.

    Closed form for balls; otherwise distance to a convex set is convex
    along a line, so a coarse bracketing scan plus golden refinement is
    exact up to refinement tolerance.  Returns (min_sd, argmin_t).
    """
    if body.kind == "ball":
        c = body.params["center"]
        d = seg.b - seg.a
        denom = float(d @ d)
        t = 0.0 if denom <= 1e-300 else float(np.clip((c - seg.a) @ d / denom, 0.0, 1.0))
        sd = float(np.linalg.norm(seg.a + t * d - c)) - body.params["radius"]
        return sd, t
    ts = np.linspace(0.0, 1.0, n_coarse)
    sds = body.signed_distance(seg.point(ts))
    k = int(np.argmin(sds))
    lo = ts[max(k - 1, 0)]
    hi = ts[min(k + 1, n_coarse - 1)]
    a, b = lo, hi
    for _ in range(60):
        m1 = b - GOLDEN * (b - a)
        m2 = a + GOLDEN * (b - a)
        f1 = body.signed_distance(seg.point(m1))
        f2 = body.signed_distance(seg.point(m2))
        if f1 < f2:
            b = m2
        else:
            a = m1
    tm = 0.5 * (a + b)
    fm = float(body.signed_distance(seg.point(tm)))
    if sds[k] < fm:
        tm, fm = float(ts[k]), float(sds[k])
    return fm, tm


def segment_clear(seg, body):
    """True iff the segment keeps strictly positive distance to the closed body.

    Returns (clear, min_distance, minimizing_point).
    """
    sd, t = segment_min_distance(seg, body)
    return sd > 0.0, max(sd, 0.0), seg.point(t)


def segment_avoids_open(seg, body, margin=0.0):
    """True iff the segment does not enter the open body (touching allowed).

    A positive margin demands clearance from the closure by that amount.
    """
    sd, _ = segment_min_distance(seg, body)
    return sd >= margin - body.tol


# ---------------------------------------------------------------------- #
# condition reports

class ConditionReport:
    """Outcome of a sampled domain-condition check."""

    def __init__(self, condition, verdict, witnesses=(), samples=0, note=""):
        if verdict not in ("pass", "fail", "heuristic-pass"):
            raise ValueError(verdict)
        self.condition = condition
        self.verdict = verdict
        self.witnesses = list(witnesses)
        self.samples = int(samples)
        self.note = note
        if verdict == "fail" and not self.witnesses:
            raise ValueError("fail verdict requires witnesses")

    def to_dict(self):
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "witnesses": [np.asarray(w).tolist() for w in self.witnesses],
            "samples": self.samples,
            "note": self.note,
        }

    def __repr__(self):
        return f"ConditionReport({self.condition}: {self.verdict})"


# ---------------------------------------------------------------------- #
# lens domains

class LensDomain:
    """Closure of an outer convex body minus one or more open convex holes.

    closed_variant selects the smaller domain where the closures of the
    holes are removed as well.  The fixed boundary is the outer boundary,
    the free boundary is the union of hole boundaries.  More than one hole
    makes the domain a cheese; single-hole constructions are proper lenses.
    """

    def __init__(self, outer, holes, closed_variant=False, validate=True):
        if isinstance(holes, ConvexBody):
            holes = (holes,)
        self.outer = outer
        self.holes = tuple(holes)
        self.closed_variant = bool(closed_variant)
        self.checked = {}
        if any(h.dim != outer.dim for h in self.holes):
            raise ValueError("hole dimension mismatch")
        if validate:
            self._validate_nesting()

    @property
    def dim(self):
        return self.outer.dim

    @property
    def hole(self):
        if len(self.holes) != 1:
            raise ValueError("domain has multiple holes")
        return self.holes[0]

    def _validate_nesting(self, n=256):
        lo, hi, _ = None, None, None
        margin = np.inf
        for h in self.holes:
            if self.dim == 2:
                lo_t, hi_t, periodic = h._param_window()
                ts = np.linspace(lo_t, hi_t, n, endpoint=not periodic)
                pts = h.boundary_param(ts)
            else:
                # sample the boundary of a d-ball hole by random-free directions
                pts = _sphere_grid(self.dim, n) * h.params["radius"] + h.params["center"] \
                    if h.kind == "ball" else None
                if pts is None:
                    raise ValueError("only ball holes are supported in d >= 3")
            sd = self.outer.signed_distance(pts)
            margin = min(margin, float(-np.max(sd)))
            if np.max(sd) >= -self.outer.tol:
                raise ValueError("hole closure is not strictly inside the outer body")
        self.checked["nesting_margin"] = margin
        # holes must be mutually separated
        for i in range(len(self.holes)):
            for j in range(i + 1, len(self.holes)):
                hi_, hj = self.holes[i], self.holes[j]
                if hi_.kind == "ball" and hj.kind == "ball":
                    gap = np.linalg.norm(hi_.params["center"] - hj.params["center"]) \
                        - hi_.params["radius"] - hj.params["radius"]
                else:
                    anchor = hj.anchor_point()
                    gap = float(hi_.signed_distance(anchor))
                if gap <= 0:
                    raise ValueError("holes are not mutually separated")

    def with_holes(self, holes):
        return LensDomain(self.outer, holes, self.closed_variant, validate=False)

    def as_variant(self, closed_variant):
        out = LensDomain(self.outer, self.holes, closed_variant, validate=False)
        out.checked = dict(self.checked)
        return out

    # ------------------------------------------------------------------ #

    def contains(self, p, margin=0.0):
        """Vectorized membership in the (closed or starred) lens."""
        pts, single = _as_points(p, self.dim)
        ok = self.outer.signed_distance(pts) <= self.outer.tol
        for h in self.holes:
            sd = h.signed_distance(pts)
            if self.closed_variant:
                ok &= sd > max(margin, h.tol)
            else:
                ok &= sd >= -h.tol + margin
        return bool(ok[0]) if single else ok

    def hole_signed_distance(self, p):
        pts, single = _as_points(p, self.dim)
        sd = np.min(np.stack([h.signed_distance(pts) for h in self.holes]), axis=0)
        return float(sd[0]) if single else sd

    def on_free_boundary(self, x, tol=None):
        x = np.asarray(x, dtype=float)
        for h in self.holes:
            t = tol if tol is not None else h.tol * 10
            if abs(h.signed_distance(x)) <= t:
                return h
        return None

    def free_boundary_normal(self, x):
        """Unit normal at a free boundary point pointing away from the hole."""
        h = self.on_free_boundary(x, tol=1e-6 * self.outer.scale)
        if h is None:
            raise ValueError("point is not on the free boundary")
        return -h.boundary_inward_normal(x)

    def gap_width(self, n=128):
        """Smallest clearance between any hole boundary and the outer boundary."""
        w = np.inf
        for h in self.holes:
            if self.dim != 2:
                if h.kind != "ball":
                    continue
                pts = _sphere_grid(self.dim, n) * h.params["radius"] + h.params["center"]
            else:
                lo_t, hi_t, periodic = h._param_window()
                ts = np.linspace(lo_t, hi_t, n, endpoint=not periodic)
                pts = h.boundary_param(ts)
            w = min(w, float(np.min(-self.outer.signed_distance(pts))))
        return w

    def bounding_box(self, pad=0.0):
        if not self.outer.is_bounded():
            return None
        if self.outer.kind == "ball":
            c, r = self.outer.params["center"], self.outer.params["radius"]
            return np.array([c - r - pad, c + r + pad])
        if self.outer.kind == "ellipse":
            c, ax = self.outer.params["center"], self.outer.params["semi_axes"]
            return np.array([c - ax - pad, c + ax + pad])
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        pts = self.outer.support_point(np.stack([np.cos(th), np.sin(th)], axis=1))
        return np.array([pts.min(axis=0) - pad, pts.max(axis=0) + pad])

    def descriptor(self):
        return {
            "outer": self.outer.descriptor(),
            "holes": [h.descriptor() for h in self.holes],
            "closed_variant": self.closed_variant,
        }

    @staticmethod
    def from_descriptor(d):
        outer = ConvexBody.from_descriptor(d["outer"])
        holes = [ConvexBody.from_descriptor(h) for h in d["holes"]]
        return LensDomain(outer, holes, d.get("closed_variant", False))

    def __repr__(self):
        star = "*" if self.closed_variant else ""
        return f"LensDomain{star}({self.outer.kind} minus {len(self.holes)} hole(s))"


def _sphere_grid(dim, n):
    """Deterministic quasi-uniform directions on the unit sphere."""
    if dim == 2:
        th = np.linspace(0, 2 * np.pi, n, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if dim == 3:
        # Fibonacci sphere
        k = np.arange(n)
        z = 1.0 - 2.0 * (k + 0.5) / n
        r = np.sqrt(np.maximum(1 - z * z, 0))
        th = np.pi * (1 + np.sqrt(5)) * k
        return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)
    rng = np.random.default_rng(0)
    v = rng.standard_normal((n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def direction_fan(n, dim=2):
    """Deterministic set of undirected chord directions."""
    if dim == 2:
        th = np.linspace(0.0, np.pi, n, endpoint=False)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    return _sphere_grid(dim, n)


def ray_exit_rows(body, pts, U):
    """Row-wise ray exits (one direction per row); vectorized for balls."""
    if body.kind == "ball":
        p = body.params
        q = pts - p["center"]
        b = np.einsum("ij,ij->i", q, U)
        c = np.einsum("ij,ij->i", q, q) - p["radius"] ** 2
        return -b + np.sqrt(np.maximum(b * b - c, 0.0))
    out = np.empty(len(pts))
    for i in range(len(pts)):
        out[i] = body.ray_exit(pts[i], U[i])
    return out


def ray_entry_rows(body, pts, U, clearance=0.0):
    """Row-wise open-entry parameters (one direction per row)."""
    if body.kind == "ball":
        p = body.params
        r = p["radius"] + clearance
        q = pts - p["center"]
        b = 2.0 * np.einsum("ij,ij->i", q, U)
        c = np.einsum("ij,ij->i", q, q) - r * r
        t = _first_downcross(np.ones(len(pts)), b, c,
                             min_disc=8.0 * max(r, 1e-12) * body.tol)
        t[c < 0] = 0.0
        return t
    out = np.empty(len(pts))
    for i in range(len(pts)):
        out[i] = body.ray_entry(pts[i], U[i], clearance)
    return out


class ChordNotFoundError(RuntimeError):
    """No clear chord through the requested point at the search resolution."""


def find_clear_chord(lens, x, n_dirs=180, dirs=None):
    """Best clear chord through x: scans a deterministic direction fan plus
    near-tangent directions to each hole, returns (segment, clearance).

    Clearance is the minimum signed distance of the chord to the holes; the
    chord maximizing it is returned.  Raises ChordNotFoundError when no
    direction admits a chord with endpoints on the outer boundary.
    """
    x = np.asarray(x, dtype=float)
    cand = list(direction_fan(n_dirs, lens.dim)) if dirs is None else list(dirs)
    if lens.dim == 2:
        for h in lens.holes:
            margin = 0.05 * max(h.scale, 1e-6)
            for u in h.tangent_directions(x, clearance=margin):
                cand.append(u)
    best = None
    best_margin = -np.inf
    for u in cand:
        seg = max_chord(lens, x, u)
        if seg is None:
            continue
        margin = min(segment_min_distance(seg, h)[0] for h in lens.holes)
        if margin > best_margin:
            best, best_margin = seg, margin
    if best is None:
        raise ChordNotFoundError(
            f"no clear chord through {x.tolist()} among {len(cand)} directions")
    return best, best_margin


# ---------------------------------------------------------------------- #
# module-level operations

def contains(body, p):
    """Membership verdict for a single point: inside / boundary / outside."""
    s = body.side(np.asarray(p, dtype=float))
    return {-1: "inside", 0: "boundary", 1: "outside"}[int(s)]


def distance_to(body, p):
    return float(body.distance_to(np.asarray(p, dtype=float)))


def max_chord(lens, x, direction):
    """Maximal segment through x along a direction, inside the lens, with
    both endpoints on the outer boundary.  None when the line is blocked by
    a hole on either side or never reaches the outer boundary."""
    x = np.asarray(x, dtype=float)
    if not lens.contains(x):
        raise ValueError("x is outside the lens")
    u = _unit(direction)
    clearance = 0.0
    ts = []
    for sgn in (1.0, -1.0):
        t_out = float(lens.outer.ray_exit(x, sgn * u))
        if not np.isfinite(t_out):
            return None
        for h in lens.holes:
            margin = h.tol if lens.closed_variant else 0.0
            t_in = float(h.ray_entry(x, sgn * u, clearance=margin))
            if t_in < t_out - lens.outer.tol:
                return None
        ts.append(t_out)
    return Segment(x - ts[1] * u, x + ts[0] * u)


def transversal_segment(lens, x, tilt=0.0):
    """Segment in the lens starting at a free boundary point whose supporting
    line meets the hole.  Default direction is the reversed inward normal of
    the hole, optionally tilted; the segment is clipped at the outer boundary
    and at any other hole."""
    x = np.asarray(x, dtype=float)
    h = lens.on_free_boundary(x, tol=1e-7 * lens.outer.scale)
    if h is None:
        raise ValueError("x is not on the free boundary")
    d = -h.boundary_inward_normal(x)
    if tilt != 0.0:
        if lens.dim != 2:
            raise ValueError("tilt is 2d only")
        c, s = np.cos(tilt), np.sin(tilt)
        d = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
    t_end = float(lens.outer.ray_exit(x, d))
    for other in lens.holes:
        if other is h:
            continue
        t_in = float(other.ray_entry(x, d))
        t_end = min(t_end, t_in)
    if not np.isfinite(t_end) or t_end <= 0:
        raise ValueError("no transversal segment in this direction")
    return Segment(x, x + t_end * d)


def visibility_sample(lens, x, n_dirs=256, ray_range=10.0):
    """Farthest visible point along deterministic rays from x.

    Returns (points, diameter_estimate).  Rays stop at the outer boundary, at
    the first hole, or at the range cap for unbounded outers.
    """
    x = np.asarray(x, dtype=float)
    if not lens.contains(x):
        raise ValueError("x is outside the lens")
    dirs = _golden_dirs(lens.dim, n_dirs)
    pts = []
    X = np.tile(x, (n_dirs, 1))
    for k in range(n_dirs):
        u = dirs[k]
        t = float(lens.outer.ray_exit(x, u))
        for h in lens.holes:
            t_in = float(h.ray_entry(x, u))
            t = min(t, t_in)
        t = min(t, ray_range)
        if t > 0:
            pts.append(x + t * u)
    pts = np.array(pts) if pts else np.zeros((0, lens.dim))
    if len(pts) < 2:
        return pts, 0.0
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return pts, float(np.sqrt(d2.max()))


def _golden_dirs(dim, n):
    if dim == 2:
        # golden-angle sequence on the circle: deterministic and refinable
        k = np.arange(n)
        th = 2.0 * np.pi * ((k * GOLDEN) % 1.0)
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    return _sphere_grid(dim, n)


def split_ratio_bound(lens, shrunk_hole, x, n_samples=256):
    """Worst-case mass imbalance of an admissible split anchored at x.

    Supremum over sampled z on the shrunk hole boundary of
    max(1, |x - y_z| / |x - z|), where y_z is the farthest point of the lens
    on the ray from z through x.  Nondecreasing under nested sample
    refinement; always >= 1.  Undefined on the fixed boundary.
    """
    x = np.asarray(x, dtype=float)
    if abs(lens.outer.signed_distance(x)) <= lens.outer.tol:
        raise ValueError("ratio bound is undefined on the fixed boundary")
    if lens.dim != 2:
        raise ValueError("2d only")
    lo_t, hi_t, periodic = shrunk_hole._param_window()
    ts = np.linspace(lo_t, hi_t, n_samples, endpoint=not periodic)
    zs = shrunk_hole.boundary_param(ts)
    v = zs - x
    nz = np.linalg.norm(v, axis=1)
    keep = nz > 1e-12
    U = v[keep] / nz[keep][:, None]
    X = np.tile(x, (len(U), 1))
    # nearest point of the shrunk hole along each direction toward it, and
    # the farthest lens point on the opposite ray (the outer exit)
    t_in = ray_entry_rows(shrunk_hole, X, U)
    t_out = ray_exit_rows(lens.outer, X, -U)
    ok = np.isfinite(t_in) & (t_in > 0)
    if np.any(ok & ~np.isfinite(t_out)):
        return np.inf
    ok &= np.isfinite(t_out)
    if not np.any(ok):
        return 1.0
    return float(max(1.0, np.max(t_out[ok] / t_in[ok])))


def check_conditions(lens, samples=128):
    """Sampled strict-convexity and cone-condition checks.

    Strict convexity: boundary chord midpoints must land strictly inside each
    body.  Cone condition: vacuous for bounded outers; otherwise every sampled
    recession direction of the outer body must be a recession direction of
    every hole.  Sampled successes are labeled heuristic-pass.
    """
    rng = np.random.default_rng(7)
    witnesses = []
    bodies = [lens.outer, *lens.holes]
    total = 0
    for body in bodies:
        if lens.dim != 2:
            if body.kind == "ball":
                continue  # balls are strictly convex
            raise ValueError("condition checks in d >= 3 support ball bodies only")
        lo_t, hi_t, periodic = body._param_window()
        ts = rng.uniform(lo_t, hi_t, size=(samples, 2))
        p = body.boundary_param(ts[:, 0])
        q = body.boundary_param(ts[:, 1])
        far = np.linalg.norm(p - q, axis=1) > 1e-7 * body.scale
        mid = 0.5 * (p + q)[far]
        total += int(far.sum())
        sd = body.signed_distance(mid)
        bad = sd >= -body.tol
        for m in mid[bad]:
            witnesses.append(m)
    strict = ConditionReport(
        "strict_convexity",
        "fail" if witnesses else "heuristic-pass",
        witnesses=witnesses,
        samples=total,
        note="sampled boundary chord midpoints",
    )

    if lens.outer.is_bounded():
        cone = ConditionReport("cone_condition", "pass", samples=0,
                               note="outer body is bounded; condition is vacuous")
    else:
        bad_dirs = []
        dirs = lens.outer.recession_dirs(samples)
        for u in dirs:
            for h in lens.holes:
                anchor = h.anchor_point()
                horizon = 1e4 * max(h.scale, 1.0)
                probe = anchor[None, :] + np.outer([1.0, np.sqrt(horizon), horizon], u)
                if np.any(h.gauge(probe) >= 0):
                    bad_dirs.append(u)
                    break
        cone = ConditionReport(
            "cone_condition",
            "fail" if bad_dirs else "heuristic-pass",
            witnesses=bad_dirs,
            samples=len(dirs),
            note="sampled recession directions of the outer body tested in each hole",
        )
    lens.checked["strict_convexity"] = strict.verdict
    lens.checked["cone_condition"] = cone.verdict
    return strict, cone


def slicing_constant(body, plane_normal, plane_offset, p, r, R, n_check=0):
    """Constant C = (r + R) / r for the hyperplane slicing bound, with an
    optional sampled verifier.

    Preconditions (checked by sampling): the ball B(p, r) lies in the body and
    the slice body ∩ plane lies in B(p, R).  The verifier exhibits, for each
    sampled boundary point y, a point z on the sliced boundary with
    |y - z| <= C * dist(y, plane).
    """
    n_hat = _unit(plane_normal)
    p = np.asarray(p, dtype=float)
    if abs(p @ n_hat - plane_offset) > 1e-9 * body.scale:
        raise ValueError("p must lie on the plane")
    dirs = _sphere_grid(body.dim, 64)
    if np.any(body.signed_distance(p + r * dirs) > body.tol):
        raise ValueError("ball(p, r) is not inside the body")
    # slice endpoints along in-plane directions
    if body.dim != 2:
        raise ValueError("verifier is 2d only")
    v = np.array([-n_hat[1], n_hat[0]])
    ends = []
    for sgn in (1.0, -1.0):
        t = float(body.ray_exit(p, sgn * v))
        ends.append(p + sgn * t * v)
    for e in ends:
        if np.linalg.norm(e - p) > R + 1e-9 * body.scale:
            raise ValueError("slice is not contained in ball(p, R)")
    C = (r + R) / r
    report = []
    if n_check:
        lo_t, hi_t, periodic = body._param_window()
        ts = np.linspace(lo_t, hi_t, n_check, endpoint=not periodic)
        ys = body.boundary_param(ts)
        for y in ys:
            d_plane = abs(y @ n_hat - plane_offset)
            dz = min(np.linalg.norm(y - ends[0]), np.linalg.norm(y - ends[1]))
            report.append((y, dz, C * d_plane))
    return C, ends, report
