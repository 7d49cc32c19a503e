"""Monotone chord value iteration for the martingale value function.

The field starts unreached in the interior and is grown from below: every
sweep raises each cell to the best endpoint interpolation over a fixed fan
of maximal chords through the cell (plus the tangent chords of each hole).
Endpoints on the fixed boundary are exact and evaluate the boundary data
exactly; endpoints cut short by a hole are pulled back far enough that the
bilinear stencil around them stays inside the masked region.  Cells that no
chord ever reaches keep the unreached sentinel: that is precisely the set
where no simple martingale starts.
"""

import numpy as np

from .geometry import Segment, direction_fan, ray_entry_rows, \
    ray_exit_rows, segment_min_distance

UNREACHED = np.nan


class SolverConfig:
    """Grid and iteration parameters for the chord solver."""

    def __init__(self, grid_step=0.01, n_dirs=48, tol=1e-9, max_iterations=400,
                 boundary_samples=2048, box=None, clearance_factor=1.6,
                 metric_trim=3, stencil=True, stencil_sweeps=8):
        if grid_step <= 0 or n_dirs < 4 or tol < 1e-10 or max_iterations <= 0:
            raise ValueError("invalid solver configuration")
        self.grid_step = float(grid_step)
        self.n_dirs = int(n_dirs)
        self.tol = float(tol)
        self.max_iterations = int(max_iterations)
        self.boundary_samples = int(boundary_samples)
        self.box = None if box is None else np.asarray(box, dtype=float)
        self.clearance_factor = float(clearance_factor)
        self.metric_trim = int(metric_trim)
        self.stencil = bool(stencil)
        self.stencil_sweeps = int(stencil_sweeps)

    def to_dict(self):
        return {"grid_step": self.grid_step, "n_dirs": self.n_dirs,
                "tol": self.tol, "max_iterations": self.max_iterations,
                "boundary_samples": self.boundary_samples,
                "box": None if self.box is None else self.box.tolist(),
                "clearance_factor": self.clearance_factor,
                "metric_trim": self.metric_trim, "stencil": self.stencil,
                "stencil_sweeps": self.stencil_sweeps}

    @staticmethod
    def from_dict(d):
        cfg = dict(d)
        return SolverConfig(**cfg)


# short lattice chords for the local midpoint relaxation: together with the
# boundary chords they concavify the field along interior humps that
# endpoint interpolation of maximal chords cannot see
STENCIL_OFFSETS = ((1, 0), (0, 1), (1, 1), (1, -1),
                   (2, 1), (1, 2), (2, -1), (1, -2))


def _stencil_validity(lens, mask, x0, y0, h):
    """Per-offset cells whose symmetric short chord stays inside the lens.

    A short segment between points outside a convex hole dips inside by at
    most the sagitta, so endpoint clearance of that order certifies the
    whole chord.
    """
    ny, nx = mask.shape
    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    hole_sd = np.full(nx * ny, np.inf)
    min_scale = min(hole.scale for hole in lens.holes)
    for hole in lens.holes:
        hole_sd = np.minimum(hole_sd, hole.signed_distance(pts))
    hole_sd = hole_sd.reshape(ny, nx)
    out = {}
    for dx, dy in STENCIL_OFFSETS:
        ady, adx = abs(dy), abs(dx)
        length = 2.0 * h * np.hypot(dx, dy)
        sagitta = length * length / (8.0 * min_scale)
        clear = mask & (hole_sd >= sagitta)
        valid = np.zeros_like(mask)
        core = (slice(ady, ny - ady), slice(adx, nx - adx))
        plus = (slice(ady + dy, ny - ady + dy), slice(adx + dx, nx - adx + dx))
        minus = (slice(ady - dy, ny - ady - dy), slice(adx - dx, nx - adx - dx))
        valid[core] = mask[core] & clear[plus] & clear[minus]
        if valid.any():
            out[(dx, dy)] = valid
    return out


def _stencil_sweep(values, validity, ny, nx):
    """One pass of midpoint max-updates along the short lattice chords."""
    grid = values.reshape(ny, nx).copy()
    out = grid.copy()
    for (dx, dy), valid in validity.items():
        ady, adx = abs(dy), abs(dx)
        core = (slice(ady, ny - ady), slice(adx, nx - adx))
        plus = (slice(ady + dy, ny - ady + dy), slice(adx + dx, nx - adx + dx))
        minus = (slice(ady - dy, ny - ady - dy), slice(adx - dx, nx - adx - dx))
        cand = np.full_like(grid, np.nan)
        cand[core] = 0.5 * (grid[plus] + grid[minus])
        cand[~valid] = np.nan
        out = np.fmax(out, cand)
    return out.ravel()


class ScalarField:
    """Grid-sampled field over a lens with an unreached sentinel.

    values[iy, ix] is the value at the cell center (x0 + ix h, y0 + iy h);
    NaN marks unreached cells.  metric_mask excludes a ring near any box
    truncation cut of an unbounded outer body.
    """

    def __init__(self, x0, y0, h, values, mask, metric_mask=None, meta=None):
        self.x0 = float(x0)
        self.y0 = float(y0)
        self.h = float(h)
        self.values = values
        self.mask = mask
        self.metric_mask = metric_mask if metric_mask is not None else mask
        self.meta = meta or {}

    @property
    def shape(self):
        return self.values.shape

    def cell_centers(self):
        ny, nx = self.values.shape
        xs = self.x0 + self.h * np.arange(nx)
        ys = self.y0 + self.h * np.arange(ny)
        return xs, ys

    def points(self, which="mask"):
        sel = self.mask if which == "mask" else self.metric_mask
        iy, ix = np.nonzero(sel)
        return np.stack([self.x0 + self.h * ix, self.y0 + self.h * iy], axis=1)

    def interp(self, p):
        """Bilinear interpolation; NaN where any stencil corner leaves the mask."""
        pts = np.atleast_2d(np.asarray(p, dtype=float))
        ny, nx = self.values.shape
        gx = (pts[:, 0] - self.x0) / self.h
        gy = (pts[:, 1] - self.y0) / self.h
        ix = np.floor(gx).astype(int)
        iy = np.floor(gy).astype(int)
        fx = gx - ix
        fy = gy - iy
        ok = (ix >= 0) & (ix + 1 < nx) & (iy >= 0) & (iy + 1 < ny)
        out = np.full(len(pts), np.nan)
        if np.any(ok):
            ixo, iyo = ix[ok], iy[ok]
            m = (self.mask[iyo, ixo] & self.mask[iyo, ixo + 1]
                 & self.mask[iyo + 1, ixo] & self.mask[iyo + 1, ixo + 1])
            v00 = self.values[iyo, ixo]
            v10 = self.values[iyo, ixo + 1]
            v01 = self.values[iyo + 1, ixo]
            v11 = self.values[iyo + 1, ixo + 1]
            fxo, fyo = fx[ok], fy[ok]
            val = ((1 - fxo) * (1 - fyo) * v00 + fxo * (1 - fyo) * v10
                   + (1 - fxo) * fyo * v01 + fxo * fyo * v11)
            val[~m] = np.nan
            out[ok] = val
        return out[0] if np.asarray(p).ndim == 1 else out

    def finite_sup(self):
        v = self.values[self.mask]
        v = v[np.isfinite(v)]
        return float(np.max(np.abs(v))) if len(v) else 0.0

    def unreached_count(self, which="mask"):
        sel = self.mask if which == "mask" else self.metric_mask
        return int(np.isnan(self.values[sel]).sum())

    def copy(self):
        return ScalarField(self.x0, self.y0, self.h, self.values.copy(),
                           self.mask.copy(), self.metric_mask.copy(),
                           dict(self.meta))

    def to_csv(self, path):
        xs, ys = self.cell_centers()
        with open(path, "w") as fh:
            fh.write("x,y,value\n")
            for iy in range(self.values.shape[0]):
                for ix in range(self.values.shape[1]):
                    if not self.mask[iy, ix]:
                        continue
                    v = self.values[iy, ix]
                    sval = "UNREACHED" if np.isnan(v) else repr(float(v))
                    fh.write(f"{xs[ix]!r},{ys[iy]!r},{sval}\n")

    def __repr__(self):
        return (f"ScalarField({self.values.shape[1]}x{self.values.shape[0]}, "
                f"h={self.h}, unreached={self.unreached_count()})")


def _build_grid(lens, cfg):
    h = cfg.grid_step
    box = lens.bounding_box(pad=0.0)
    truncated = False
    if box is None:
        if cfg.box is None:
            raise ValueError("unbounded outer body requires a configured box")
        box = cfg.box
        truncated = True
    (xmin, ymin), (xmax, ymax) = box
    nx = int(np.floor((xmax - xmin) / h))
    ny = int(np.floor((ymax - ymin) / h))
    x0 = xmin + 0.5 * h
    y0 = ymin + 0.5 * h
    return x0, y0, h, nx, ny, truncated, box


def _mask_for(lens, x0, y0, h, nx, ny, hole_clearance):
    xs = x0 + h * np.arange(nx)
    ys = y0 + h * np.arange(ny)
    X, Y = np.meshgrid(xs, ys)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = lens.outer.signed_distance(pts) <= 0.0
    for hole in lens.holes:
        inside &= hole.signed_distance(pts) >= hole_clearance
    return inside.reshape(ny, nx)


def _stencil_ok(mask, x0, y0, h, pts):
    ny, nx = mask.shape
    gx = (pts[:, 0] - x0) / h
    gy = (pts[:, 1] - y0) / h
    ix = np.floor(gx).astype(int)
    iy = np.floor(gy).astype(int)
    ok = (ix >= 0) & (ix + 1 < nx) & (iy >= 0) & (iy + 1 < ny)
    out = np.zeros(len(pts), dtype=bool)
    if np.any(ok):
        ixo, iyo = ix[ok], iy[ok]
        out[ok] = (mask[iyo, ixo] & mask[iyo, ixo + 1]
                   & mask[iyo + 1, ixo] & mask[iyo + 1, ixo + 1])
    return out


def _interp_data(mask, x0, y0, h, pts, nx):
    gx = (pts[:, 0] - x0) / h
    gy = (pts[:, 1] - y0) / h
    ix = np.floor(gx).astype(np.int64)
    iy = np.floor(gy).astype(np.int64)
    fx = (gx - ix)[:, None]
    fy = (gy - iy)[:, None]
    base = iy * nx + ix
    idx = np.stack([base, base + 1, base + nx, base + nx + 1], axis=1)
    w = np.concatenate([(1 - fx) * (1 - fy), fx * (1 - fy),
                        (1 - fx) * fy, fx * fy], axis=1)
    return idx, w


def _box_exit(pts, u, box, inset):
    """Exit parameter from the (inset) box along direction u."""
    lo = box[0] + inset
    hi = box[1] - inset
    t = np.full(len(pts), np.inf)
    for k in range(2):
        if u[k] > 1e-15:
            t = np.minimum(t, (hi[k] - pts[:, k]) / u[k])
        elif u[k] < -1e-15:
            t = np.minimum(t, (lo[k] - pts[:, k]) / u[k])
    return np.maximum(t, 0.0)


def _tangent_dirs_ball(hole, pts, pad):
    """Per-cell tangent directions to an inflated ball hole (2d)."""
    c = hole.params["center"]
    r = hole.params["radius"] + pad
    rel = c - pts
    d = np.linalg.norm(rel, axis=1)
    ok = d > r + 1e-12
    phi = np.arcsin(np.clip(r / np.maximum(d, 1e-300), -1.0, 1.0))
    base = np.arctan2(rel[:, 1], rel[:, 0])
    dirs = []
    for s in (-1.0, 1.0):
        ang = base + s * phi
        dirs.append((np.stack([np.cos(ang), np.sin(ang)], axis=1), ok))
    return dirs


class _ChordBatch:
    """Per-direction chord data for a batch of cells, split by endpoint type."""

    def __init__(self):
        self.base_cells = []
        self.base_vals = []
        self.rows = []   # (cells, alpha, fA, idxA, wA, fB, idxB, wB)


def _clip_side(lens, pts, u, clearance, variant_margin, box, truncated, h,
               mask, x0, y0):
    """Clip the ray pts + t u against the lens for one side of the chords.

    Returns (t_end, on_boundary): on_boundary marks sides that reach the
    outer boundary with no obstruction (exact endpoints); other sides stop
    early (hole or box) at interpolation-safe parameters, t_end = NaN where
    the side is unusable.
    """
    n = len(pts)
    t_out = lens.outer._ray_exit(pts, u)
    t_true = np.full(n, np.inf)
    t_safe = np.full(n, np.inf)
    for hole in lens.holes:
        t_true = np.minimum(t_true, hole._ray_entry(pts, u, variant_margin))
        t_safe = np.minimum(t_safe, hole._ray_entry(pts, u, clearance))
    if truncated:
        t_box = _box_exit(pts, u, box, 0.0)
        t_box_safe = _box_exit(pts, u, box, clearance)
    else:
        t_box = np.full(n, np.inf)
        t_box_safe = np.full(n, np.inf)
    full = (t_true >= t_out - 1e-12) & (t_out <= t_box) & np.isfinite(t_out)
    t_end = np.where(full, t_out, np.minimum(t_safe, t_box_safe))
    on_boundary = full.copy()
    # pull early endpoints back until their interpolation stencil is masked
    blocked = ~full
    t_blk = t_end[blocked]
    pts_blk = pts[blocked]
    usable = np.isfinite(t_blk) & (t_blk > 1e-9)
    for _ in range(16):
        active = usable.copy()
        if not np.any(active):
            break
        probe = pts_blk[active] + t_blk[active, None] * u
        good = _stencil_ok(mask, x0, y0, h, probe)
        need_back = np.zeros(len(t_blk), dtype=bool)
        need_back[np.nonzero(active)[0][~good]] = True
        if not np.any(need_back):
            break
        t_blk[need_back] -= 0.5 * h
        usable &= t_blk > 1e-9
    # final check
    if np.any(usable):
        probe = pts_blk[usable] + t_blk[usable, None] * u
        good = _stencil_ok(mask, x0, y0, h, probe)
        idx = np.nonzero(usable)[0]
        usable[idx[~good]] = False
    t_blk[~usable] = np.nan
    out_blk = np.full(len(t_blk), np.nan)
    out_blk[usable] = t_blk[usable]
    t_end[blocked] = out_blk
    return t_end, on_boundary


def chord_value_iteration(lens, f, cfg=None):
    """Solve for the best simple-martingale value on a grid over the lens.

    Boundary data is evaluated exactly at exact chord endpoints on the fixed
    boundary; endpoints stopped by a hole interpolate the current field.  The
    iteration is monotone from below; unreached cells stay at the sentinel.
    """
    cfg = cfg or SolverConfig()
    if lens.dim != 2:
        raise ValueError("grid solver is 2d only")
    if f.lower_bound is None and not lens.outer.is_bounded():
        raise ValueError("boundary data must carry a lower bound on unbounded lenses")
    h = cfg.grid_step
    x0, y0, h, nx, ny, truncated, box = _build_grid(lens, cfg)
    # starred variant: strict clearance from the hole closures, shrinking
    # like h^2 so the variant difference stays O(h)
    hole_clearance = h * h if lens.closed_variant else 0.0
    mask = _mask_for(lens, x0, y0, h, nx, ny, hole_clearance)
    if not mask.any():
        raise ValueError("empty grid mask")
    iy, ix = np.nonzero(mask)
    cells = (iy * nx + ix).astype(np.int64)
    pts = np.stack([x0 + h * ix, y0 + h * iy], axis=1)

    clearance = cfg.clearance_factor * h
    variant_margin = hole_clearance

    dirs = list(direction_fan(cfg.n_dirs, 2))
    base = np.full(nx * ny, np.nan)
    rows = {k: [] for k in ("cell", "alpha", "fA", "iA", "wA", "fB", "iB", "wB")}

    def emit(cc, alpha, p_a, p_b, bnd_a, bnd_b):
        both = bnd_a & bnd_b
        if np.any(both):
            val = (alpha[both] * f.evaluate(p_a[both])
                   + (1 - alpha[both]) * f.evaluate(p_b[both]))
            _scatter_max(base, cc[both], val)
        rest = ~both
        if not np.any(rest):
            return
        a_pts, b_pts, al = p_a[rest], p_b[rest], alpha[rest]
        ba, bb = bnd_a[rest], bnd_b[rest]
        fA = np.full(len(al), np.nan)
        fB = np.full(len(al), np.nan)
        if np.any(ba):
            fA[ba] = f.evaluate(a_pts[ba])
        if np.any(bb):
            fB[bb] = f.evaluate(b_pts[bb])
        iA = np.zeros((len(al), 4), dtype=np.int64)
        wA = np.zeros((len(al), 4))
        iB = np.zeros((len(al), 4), dtype=np.int64)
        wB = np.zeros((len(al), 4))
        if np.any(~ba):
            iA[~ba], wA[~ba] = _interp_data(mask, x0, y0, h, a_pts[~ba], nx)
        if np.any(~bb):
            iB[~bb], wB[~bb] = _interp_data(mask, x0, y0, h, b_pts[~bb], nx)
        rows["cell"].append(cc[rest])
        rows["alpha"].append(al)
        rows["fA"].append(fA)
        rows["iA"].append(iA)
        rows["wA"].append(wA)
        rows["fB"].append(fB)
        rows["iB"].append(iB)
        rows["wB"].append(wB)

    for u in dirs:
        tp, bp = _clip_side(lens, pts, u, clearance, variant_margin,
                            box, truncated, h, mask, x0, y0)
        tm, bm = _clip_side(lens, pts, -u, clearance, variant_margin,
                            box, truncated, h, mask, x0, y0)
        ok = np.isfinite(tp) & np.isfinite(tm) & (tp + tm > 1e-9)
        if not np.any(ok):
            continue
        tpo, tmo = tp[ok], tm[ok]
        emit(cells[ok], tmo / (tpo + tmo),
             pts[ok] + tpo[:, None] * u, pts[ok] - tmo[:, None] * u,
             bp[ok], bm[ok])
    # tangent chords around each ball hole keep the cells hugging the free
    # boundary reachable
    for hole in lens.holes:
        if hole.kind != "ball":
            continue
        pad = variant_margin + 1e-12
        for tdirs, okc in _tangent_dirs_ball(hole, pts, pad):
            idxs = np.nonzero(okc)[0]
            # process per unique-ish direction is impossible (per-cell dirs):
            # clip per cell in a vector pass with row-specific directions
            _process_percell_dirs(lens, pts, cells, tdirs, idxs, f, base,
                                  rows, clearance, variant_margin, box,
                                  truncated, h, mask, x0, y0, nx, hole)

    if rows["cell"]:
        R = {k: np.concatenate(rows[k]) for k in rows}
    else:
        R = None
    validity = _stencil_validity(lens, mask, x0, y0, h) if cfg.stencil else {}

    values = base.copy()
    max_updates = []
    iterations = 0
    if R is not None or validity:
        for iterations in range(1, cfg.max_iterations + 1):
            buf = values.copy()
            if R is not None:
                vA = _endpoint_values(values, R["fA"], R["iA"], R["wA"])
                vB = _endpoint_values(values, R["fB"], R["iB"], R["wB"])
                cand = R["alpha"] * vA + (1 - R["alpha"]) * vB
                np.fmax.at(buf, R["cell"], cand)
            if validity:
                # the cheap local sweeps run several times per chord pass
                sbuf = np.fmax(buf, _stencil_sweep(values, validity, ny, nx))
                for _ in range(cfg.stencil_sweeps - 1):
                    sbuf = np.fmax(sbuf, _stencil_sweep(sbuf, validity, ny, nx))
                buf = sbuf
            both = np.isfinite(buf) & np.isfinite(values)
            upd = float(np.max(buf[both] - values[both])) if both.any() else 0.0
            newly = int((np.isfinite(buf) & ~np.isfinite(values)).sum())
            max_updates.append(upd)
            values = buf
            if upd <= cfg.tol and newly == 0:
                break

    values = values.reshape(ny, nx)
    values[~mask] = np.nan
    metric = mask.copy()
    if truncated:
        trim = cfg.metric_trim * h
        xs = x0 + h * np.arange(nx)
        ys = y0 + h * np.arange(ny)
        X, Y = np.meshgrid(xs, ys)
        near_cut = ((X - box[0][0] < trim) | (box[1][0] - X < trim)
                    | (Y - box[0][1] < trim) | (box[1][1] - Y < trim))
        metric &= ~near_cut
    meta = {
        "iterations": iterations,
        "max_updates": max_updates,
        "residual": max_updates[-1] if max_updates else 0.0,
        "unreached": int(np.isnan(values[mask]).sum()),
        "boundary_samples": cfg.boundary_samples,
        "config": cfg.to_dict(),
        "closed_variant": lens.closed_variant,
        "truncated": truncated,
    }
    return ScalarField(x0, y0, h, values, mask, metric, meta)


def _scatter_max(target, idx, vals):
    good = np.isfinite(vals)
    if np.any(good):
        np.fmax.at(target, idx[good], vals[good])


def _endpoint_values(values, fX, iX, wX):
    interp = (wX * values[iX]).sum(axis=1)
    return np.where(np.isnan(fX), interp, fX)


def _process_percell_dirs(lens, pts, cells, dirs, idxs, f, base, rows,
                          clearance, variant_margin, box, truncated, h,
                          mask, x0, y0, nx, tangent_hole):
    """Chords along per-cell directions (hole tangents).

    The tangent hole is known clear by construction; only the outer boundary,
    the box, and the other holes clip the chord.
    """
    if len(idxs) == 0:
        return
    sub_pts = pts[idxs]
    sub_dirs = dirs[idxs]
    n = len(idxs)
    res = {}
    for sgn in (1.0, -1.0):
        U = sgn * sub_dirs
        t_out = ray_exit_rows(lens.outer, sub_pts, U)
        t_true = np.full(n, np.inf)
        t_safe = np.full(n, np.inf)
        for hole in lens.holes:
            if hole is tangent_hole:
                continue
            t_true = np.minimum(t_true, ray_entry_rows(hole, sub_pts, U, variant_margin))
            t_safe = np.minimum(t_safe, ray_entry_rows(hole, sub_pts, U, clearance))
        if truncated:
            t_box = _box_exit_rows(sub_pts, U, box, 0.0)
            t_box_safe = _box_exit_rows(sub_pts, U, box, clearance)
        else:
            t_box = np.full(n, np.inf)
            t_box_safe = np.full(n, np.inf)
        full = (t_true >= t_out - 1e-12) & (t_out <= t_box) & np.isfinite(t_out)
        t_end = np.where(full, t_out, np.minimum(t_safe, t_box_safe))
        blocked = np.nonzero(~full)[0]
        tb = t_end[blocked]
        usable = np.isfinite(tb) & (tb > 1e-9)
        for _ in range(16):
            act = np.nonzero(usable)[0]
            if len(act) == 0:
                break
            probe = sub_pts[blocked[act]] + tb[act, None] * U[blocked[act]]
            good = _stencil_ok(mask, x0, y0, h, probe)
            bad = act[~good]
            if len(bad) == 0:
                break
            tb[bad] -= 0.5 * h
            usable &= tb > 1e-9
        act = np.nonzero(usable)[0]
        if len(act):
            probe = sub_pts[blocked[act]] + tb[act, None] * U[blocked[act]]
            good = _stencil_ok(mask, x0, y0, h, probe)
            usable[act[~good]] = False
        tb[~usable] = np.nan
        t_end[blocked] = tb
        res[sgn] = (t_end, full)
    tp, bp = res[1.0]
    tm, bm = res[-1.0]
    ok = np.isfinite(tp) & np.isfinite(tm) & (tp + tm > 1e-9)
    if not np.any(ok):
        return
    tpo, tmo = tp[ok], tm[ok]
    U = sub_dirs[ok]
    p_a = sub_pts[ok] + tpo[:, None] * U
    p_b = sub_pts[ok] - tmo[:, None] * U
    alpha = tmo / (tpo + tmo)
    bnd_a, bnd_b = bp[ok], bm[ok]
    cc = cells[idxs][ok]
    both = bnd_a & bnd_b
    if np.any(both):
        val = alpha[both] * f.evaluate(p_a[both]) + (1 - alpha[both]) * f.evaluate(p_b[both])
        _scatter_max(base, cc[both], val)
    rest = ~both
    if np.any(rest):
        a_pts, b_pts, al = p_a[rest], p_b[rest], alpha[rest]
        ba, bb = bnd_a[rest], bnd_b[rest]
        fA = np.full(len(al), np.nan)
        fB = np.full(len(al), np.nan)
        if np.any(ba):
            fA[ba] = f.evaluate(a_pts[ba])
        if np.any(bb):
            fB[bb] = f.evaluate(b_pts[bb])
        iA = np.zeros((len(al), 4), dtype=np.int64)
        wA = np.zeros((len(al), 4))
        iB = np.zeros((len(al), 4), dtype=np.int64)
        wB = np.zeros((len(al), 4))
        if np.any(~ba):
            iA[~ba], wA[~ba] = _interp_data(mask, x0, y0, h, a_pts[~ba], nx)
        if np.any(~bb):
            iB[~bb], wB[~bb] = _interp_data(mask, x0, y0, h, b_pts[~bb], nx)
        rows["cell"].append(cc[rest])
        rows["alpha"].append(al)
        rows["fA"].append(fA)
        rows["iA"].append(iA)
        rows["wA"].append(wA)
        rows["fB"].append(fB)
        rows["iB"].append(iB)
        rows["wB"].append(wB)


def _box_exit_rows(pts, U, box, inset):
    lo = box[0] + inset
    hi = box[1] - inset
    t = np.full(len(pts), np.inf)
    for k in range(2):
        pos = U[:, k] > 1e-15
        neg = U[:, k] < -1e-15
        tk = np.full(len(pts), np.inf)
        tk[pos] = (hi[k] - pts[pos, k]) / U[pos, k]
        tk[neg] = (lo[k] - pts[neg, k]) / U[neg, k]
        t = np.minimum(t, tk)
    return np.maximum(t, 0.0)


def check_local_concavity(field, lens, samples=400, t_points=9, seed=11,
                          tol=1e-9):
    """Sampled concavity along segments inside the lens.

    For sampled segments with interpolation-safe endpoints and interior
    points, requires value(t a + (1-t) b) >= t value(a) + (1-t) value(b)
    minus tol * (1 + sup |field|).  Violations are listed with segments.
    """
    rng = np.random.default_rng(seed)
    pts = field.points()
    reached = np.isfinite(field.interp(pts))
    pts = pts[reached]
    if len(pts) < 2:
        return {"ok": True, "violations": [], "checked": 0}
    slack = tol * (1.0 + field.finite_sup())
    clearance = 1.5 * field.h
    violations = []
    checked = 0
    tries = 0
    while checked < samples and tries < 50 * samples:
        tries += 1
        i, j = rng.integers(0, len(pts), size=2)
        if i == j:
            continue
        a, b = pts[i], pts[j]
        seg = Segment(a, b)
        ok = True
        for hole in lens.holes:
            sd, _ = segment_min_distance(seg, hole)
            if sd < clearance:
                ok = False
                break
        if not ok:
            continue
        ts = np.linspace(0.0, 1.0, t_points + 2)
        vals = field.interp(seg.point(ts))
        if np.any(np.isnan(vals)):
            continue
        checked += 1
        lin = vals[0] + (vals[-1] - vals[0]) * ts
        bad = vals < lin - slack
        if np.any(bad):
            k = int(np.argmax(lin - vals))
            violations.append({
                "segment": [a.tolist(), b.tolist()],
                "t": float(ts[k]),
                "deficit": float(lin[k] - vals[k]),
            })
    return {"ok": not violations, "violations": violations, "checked": checked}


def compare_domains(lens, f, cfg=None):
    """Solve on the lens and on its starred variant, report the sup difference
    over commonly reached metric cells."""
    cfg = cfg or SolverConfig()
    open_lens = lens.as_variant(False)
    closed_lens = lens.as_variant(True)
    fa = chord_value_iteration(open_lens, f, cfg)
    fb = chord_value_iteration(closed_lens, f, cfg)
    common = fa.metric_mask & fb.metric_mask
    va, vb = fa.values[common], fb.values[common]
    both = np.isfinite(va) & np.isfinite(vb)
    sup = float(np.max(np.abs(va[both] - vb[both]))) if both.any() else 0.0
    return {"sup_diff": sup, "cells": int(both.sum()),
            "field_open": fa, "field_closed": fb}


def free_boundary_continuation(field, lens, x, tilt=0.0):
    """One-sided limit of the field at a free boundary point along a
    transversal segment: linear extrapolation from the first two usable
    interpolation nodes on the segment."""
    from .geometry import transversal_segment
    seg = transversal_segment(lens, x, tilt)
    v = (seg.b - seg.a) / seg.length
    h = field.h
    s_vals = []
    f_vals = []
    s = h
    while s < seg.length and len(s_vals) < 2:
        val = field.interp(seg.a + s * v)
        if np.isfinite(val):
            s_vals.append(s)
            f_vals.append(float(val))
        s += h
    if len(s_vals) < 2:
        raise ValueError("no usable interpolation nodes on the transversal")
    s1, s2 = s_vals
    v1, v2 = f_vals
    return v1 - s1 * (v2 - v1) / (s2 - s1)
