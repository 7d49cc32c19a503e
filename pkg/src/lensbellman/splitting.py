"""Turn an admissible step function into a simple martingale.

Each interval is split at a point where the two side averages are joined by
a segment clear of a shrunk copy of the hole(s) and the mass imbalance stays
under the sampled worst-split-ratio bound.  Recursion stops at single-piece
intervals, so the construction is finite for step functions and the terminal
distribution matches the function's distribution exactly.
"""

import numpy as np

from .geometry import Segment, segment_min_distance, shrink_toward_center, \
    split_ratio_bound
from .martingale import MartingaleNode, SimpleMartingale


class SplitError(RuntimeError):
    """No admissible split point found; carries the best candidate seen."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SplitConfig:
    """Parameters of the splitting recursion."""

    def __init__(self, shrink=0.85, resolution=32, max_depth=None,
                 ratio_slack=1.05):
        if not 0.0 < shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if resolution < 16:
            raise ValueError("resolution must be at least 16")
        if ratio_slack < 1.0:
            raise ValueError("ratio slack must be at least 1")
        self.shrink = float(shrink)
        self.resolution = int(resolution)
        self.max_depth = max_depth
        self.ratio_slack = float(ratio_slack)

    def depth_cap(self, n_pieces):
        # the steered recursion needs extra levels to walk breakpoints into
        # the admissible ratio window when the bound is close to one
        floor = int(np.ceil(np.log2(max(n_pieces, 2)))) + 4
        if self.max_depth is None:
            return max(64, floor)
        return max(int(self.max_depth), floor)

    def to_dict(self):
        return {"shrink": self.shrink, "resolution": self.resolution,
                "max_depth": self.max_depth, "ratio_slack": self.ratio_slack}

    @staticmethod
    def from_dict(d):
        return SplitConfig(**d)


def shrunk_holes(lens, shrink):
    return [shrink_toward_center(h, shrink) for h in lens.holes]


def _segment_margin(p, q, holes):
    return min(segment_min_distance(Segment(p, q), h)[0] for h in holes)


def _centering_badness(breaks, a, b, t):
    """How far the breakpoints sit from the centers of the children.

    The recursion terminates once a breakpoint can be cut directly, which
    requires its relative position to be near 1/2; steering each level
    toward small badness is a greedy walk that cannot overshoot the
    admissible window.
    """
    worst = 1.0
    for e in breaks:
        if e < t:
            q = (e - a) / (t - a)
        else:
            q = (e - t) / (b - t)
        q = min(max(q, 1e-12), 1 - 1e-12)
        worst = max(worst, max(q, 1 - q) / min(q, 1 - q))
    return worst


def split_interval(phi, sub, shrunk, bound, resolution=32, slack=1.05):
    """Admissible split point of a subinterval.

    Candidates are the breakpoints inside the interval, a uniform grid, the
    mass midpoint, the admissibility-window ends, and steered points that
    center a breakpoint in one child; a candidate is admissible when the
    segment between the side averages clears every shrunk hole and the
    length imbalance respects bound * slack.  Breakpoints win outright,
    then candidates that center the remaining breakpoints best, then the
    clearance margin.  Returns (t, ratio, margin, at_breakpoint).
    """
    if not isinstance(shrunk, (list, tuple)):
        shrunk = (shrunk,)
    a, b = float(sub[0]), float(sub[1])
    if not b > a:
        raise ValueError("degenerate interval")
    mean = phi.integral(a, b)[0] / (b - a)
    if min(float(h.signed_distance(mean)) for h in shrunk) <= 0:
        raise ValueError("interval average must stay clear of the shrunk hole")
    eps = 1e-12 * (b - a)
    breaks = [float(t) for t in phi._edges[1:-1] if a + eps < t < b - eps]
    limit = bound * slack
    w_lo = a + (b - a) / (1.0 + limit)
    w_hi = a + (b - a) * limit / (1.0 + limit)
    grid = [a + (b - a) * k / resolution for k in range(1, resolution)]
    steered = [0.5 * (a + b), w_lo + eps, w_hi - eps]
    for e in breaks:
        steered.append(min(max(2 * e - a, w_lo + eps), w_hi - eps))
        steered.append(min(max(2 * e - b, w_lo + eps), w_hi - eps))
    candidates = [(t, True) for t in breaks]
    candidates += [(t, False) for t in grid + steered]
    best = None         # (key, margin, t, ratio, at_break)
    best_seen = None    # best margin over all candidates, for diagnostics
    for t, at_break in candidates:
        if not a + eps < t < b - eps:
            continue
        left = (t - a) / (b - t)
        ratio = max(left, 1.0 / left)
        if ratio > limit:
            continue
        avg_l = phi.integral(a, t)[0] / (t - a)
        avg_r = phi.integral(t, b)[0] / (b - t)
        margin = _segment_margin(avg_l, avg_r, shrunk)
        if best_seen is None or margin > best_seen[0]:
            best_seen = (margin, t, ratio)
        if margin <= 0:
            continue
        badness = _centering_badness(breaks, a, b, t) if not at_break else 1.0
        key = (at_break, -badness, margin, -ratio)
        if best is None or key > best[0]:
            best = (key, margin, t, ratio, at_break)
    if best is None:
        raise SplitError(
            f"no admissible split of [{a}, {b}] (best margin "
            f"{best_seen[0] if best_seen else float('nan'):.3g})", best_seen)
    _, margin, t, ratio, at_break = best
    return t, ratio, margin, at_break


def build_martingale(phi, lens, cfg=None, f=None):
    """Recursive splitting of an admissible step function.

    Returns (martingale, trace).  The terminal distribution equals the
    function's distribution exactly; when f is given the trace records the
    payoff identity check.  The caller is expected to have verified
    membership of phi.
    """
    cfg = cfg or SplitConfig()
    if phi.carrier != "interval":
        raise ValueError("interval carrier required")
    shrunk = shrunk_holes(lens, cfg.shrink)
    cap = cfg.depth_cap(phi.n_pieces)
    trace = []

    def piece_span(a, b):
        eps = 1e-12
        inner = [t for t in phi._edges[1:-1] if a + eps < t < b - eps]
        return inner

    def recurse(a, b, mass, depth):
        if depth > cap:
            raise SplitError(f"depth cap {cap} exceeded at [{a}, {b}]")
        if not piece_span(a, b):
            value = phi.value_at(0.5 * (a + b))
            return MartingaleNode(value, mass)
        mean = phi.integral(a, b)[0] / (b - a)
        try:
            bound = max(split_ratio_bound(lens, s, mean) for s in shrunk)
        except ValueError:
            bound = 1.0   # mean hugs the fixed boundary: balanced cuts only
        t, ratio, margin, at_break = split_interval(
            phi, (a, b), shrunk, bound, cfg.resolution, cfg.ratio_slack)
        trace.append({
            "interval": [a, b], "average": mean.tolist(), "t": t,
            "ratio": ratio, "ratio_bound": bound * cfg.ratio_slack,
            "margin": margin, "at_breakpoint": bool(at_break), "depth": depth,
        })
        wl = (t - a) / (b - a)
        left = recurse(a, t, wl, depth + 1)
        right = recurse(t, b, 1.0 - wl, depth + 1)
        return MartingaleNode(mean, mass, [left, right])

    root = recurse(0.0, 1.0, 1.0, 0)
    mart = SimpleMartingale(root)
    if f is not None:
        from .admissible import payoff
        from .martingale import expected_payoff
        trace.append({"payoff_function": payoff(phi, f),
                      "payoff_martingale": expected_payoff(mart, f)})
    return mart, trace


__all__ = ["SplitConfig", "SplitError", "split_interval", "build_martingale",
           "shrunk_holes"]
