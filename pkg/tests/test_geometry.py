import numpy as np
import pytest

from lensbellman import geometry as G


def brute_boundary_distance(body, p, n=20001):
    """Independent distance oracle: dense boundary sampling plus local
    parabola refinement of the squared distance."""
    lo, hi, periodic = body._param_window()
    ts = np.linspace(lo, hi, n, endpoint=not periodic)
    pts = body.boundary_param(ts)
    d2 = ((pts - p) ** 2).sum(axis=1)
    k = int(np.argmin(d2))
    step = ts[1] - ts[0]
    a, b = ts[k] - step, ts[k] + step
    for _ in range(200):
        m = 0.5 * (a + b)
        fa = ((body.boundary_param(m - 1e-7) - p) ** 2).sum()
        fb = ((body.boundary_param(m + 1e-7) - p) ** 2).sum()
        if fa < fb:
            b = m
        else:
            a = m
    return float(np.sqrt(((body.boundary_param(0.5 * (a + b)) - p) ** 2).sum()))


class TestMembership:
    def test_disk_center(self, unit_disk):
        assert G.contains(unit_disk, (0.0, 0.0)) == "inside"

    def test_bmo_hole_point(self):
        hole = G.ConvexBody.paraboloid(2, 1.0, 1.0)  # y > x^2 + 1
        assert G.contains(hole, (0.0, 2.0)) == "inside"

    def test_a2_outer_open_boundary(self):
        outer = G.ConvexBody.hyperbola(1.0)
        # on the curve itself: not in the open set; flagged as boundary
        assert G.contains(outer, (1.0, 1.0)) == "boundary"
        assert G.contains(outer, (1.0, 1.0 - 1e-6)) == "outside"

    def test_dimension_mismatch(self, unit_disk):
        with pytest.raises(ValueError):
            unit_disk.side(np.array([1.0, 2.0, 3.0]))

    def test_closed_form_agreement(self):
        """Membership verdicts match the defining inequality on random points."""
        rng = np.random.default_rng(3)
        bodies = [
            (G.ConvexBody.disk((0.3, -0.2), 0.8),
             lambda p: np.linalg.norm(p - [0.3, -0.2], axis=1) - 0.8),
            (G.ConvexBody.paraboloid(2, 1.0, 1.0),
             lambda p: p[:, 0] ** 2 + 1.0 - p[:, 1]),
            (G.ConvexBody.hyperbola(1.0),
             lambda p: np.where((p[:, 0] > 0) & (p[:, 1] > 0),
                                1.0 - p[:, 0] * p[:, 1], 1.0)),
            (G.ConvexBody.ellipse((0, 0), (2.0, 1.0)),
             lambda p: (p[:, 0] / 2) ** 2 + p[:, 1] ** 2 - 1.0),
        ]
        for body, ineq in bodies:
            pts = rng.uniform(-3, 3, size=(10000, 2))
            vals = ineq(pts)
            keep = np.abs(vals) > 1e-10  # skip the measure-zero boundary skin
            sides = body.side(pts[keep])
            assert np.all((sides < 0) == (vals[keep] < 0))


class TestDistance:
    def test_disk_outside(self, unit_disk):
        assert G.distance_to(unit_disk, (2.0, 0.0)) == pytest.approx(1.0, abs=1e-12)

    def test_disk_inside(self, unit_disk):
        assert G.distance_to(unit_disk, (0.0, 0.0)) == 0.0

    def test_paraboloid_origin(self):
        # nearest boundary point of y = x^2 + 1 from the origin is the apex
        hole = G.ConvexBody.paraboloid(2, 1.0, 1.0)
        oracle = brute_boundary_distance(hole, np.array([0.0, 0.0]))
        assert oracle == pytest.approx(1.0, abs=1e-9)
        assert G.distance_to(hole, (0.0, 0.0)) == pytest.approx(oracle, abs=1e-9)

    def test_against_oracle(self):
        rng = np.random.default_rng(5)
        bodies = [G.ConvexBody.paraboloid(2, 0.7, 0.5),
                  G.ConvexBody.hyperbola(2.0),
                  G.ConvexBody.ellipse((0.1, 0.2), (1.5, 0.7))]
        for body in bodies:
            for _ in range(20):
                p = rng.uniform(-2.5, 2.5, size=2)
                got = float(body.signed_distance(p))
                want = brute_boundary_distance(body, p)
                assert abs(abs(got) - want) < 1e-6, (body.kind, p)

    def test_lipschitz(self):
        rng = np.random.default_rng(7)
        body = G.ConvexBody.paraboloid(2, 1.0, 0.3)
        p = rng.uniform(-2, 2, size=(300, 2))
        q = p + rng.normal(scale=0.1, size=p.shape)
        dp = body.distance_to(p)
        dq = body.distance_to(q)
        step = np.linalg.norm(p - q, axis=1)
        assert np.all(np.abs(dp - dq) <= step + 1e-9)

    def test_midpoint_convexity(self):
        rng = np.random.default_rng(9)
        body = G.ConvexBody.ellipse((0, 0), (1.3, 0.6))
        # points of the closed body have zero distance, so do midpoints
        th = rng.uniform(0, 2 * np.pi, size=(200, 2))
        r = rng.uniform(0, 1, size=(200, 2))
        p = body.boundary_param(th[:, 0]) * r[:, :1]
        q = body.boundary_param(th[:, 1]) * r[:, 1:]
        mid = 0.5 * (p + q)
        assert np.all(body.distance_to(mid) <= 1e-9)


class TestSegments:
    def test_segment_through_hole(self):
        hole = G.ConvexBody.disk((0, 0), 0.5)
        clear, _, _ = G.segment_clear(G.Segment((-1, 0), (1, 0)), hole)
        assert not clear

    def test_segment_below_hole(self):
        hole = G.ConvexBody.disk((0, 0), 0.5)
        clear, dist, _ = G.segment_clear(G.Segment((-1, -1), (1, -1)), hole)
        assert clear and dist == pytest.approx(0.5, abs=1e-9)

    def test_channel_diagonal_clear(self, channel_lens):
        # the segment between two of the three values of the counterexample
        # function passes between the holes
        seg = G.Segment((-1.0, 0.0), (0.0, -1.0))
        for hole in channel_lens.holes:
            clear, dist, _ = G.segment_clear(seg, hole)
            assert clear, dist
        # freeze the margin computed by the independent oracle:
        # min over the segment of |p - (-1/2, 0)| - 1/2.9 at t = 1/4
        want = np.sqrt(0.125) - 1.0 / 2.9
        got = min(G.segment_clear(seg, h)[1] for h in channel_lens.holes)
        assert got == pytest.approx(want, abs=1e-9)


class TestChords:
    def test_horizontal_chord(self, half_disk_lens):
        seg = G.max_chord(half_disk_lens, (0.0, -0.75), (1.0, 0.0))
        x_end = np.sqrt(1 - 0.5625)
        assert seg.a[0] == pytest.approx(-x_end, abs=1e-9) or \
            seg.a[0] == pytest.approx(x_end, abs=1e-9)
        assert abs(seg.b[0]) == pytest.approx(x_end, abs=1e-9)
        assert seg.a[1] == pytest.approx(-0.75, abs=1e-12)

    def test_blocked_chord(self, half_disk_lens):
        assert G.max_chord(half_disk_lens, (0.0, -0.6), (0.0, 1.0)) is None

    def test_outside_raises(self, half_disk_lens):
        with pytest.raises(ValueError):
            G.max_chord(half_disk_lens, (0.0, 0.0), (1.0, 0.0))

    def test_endpoints_on_boundary_and_clear(self, disk_lens):
        rng = np.random.default_rng(11)
        fan = G.direction_fan(32)
        for _ in range(200):
            th = rng.uniform(0, 2 * np.pi)
            r = rng.uniform(0.45, 0.99)
            x = np.array([r * np.cos(th), r * np.sin(th)])
            u = fan[rng.integers(0, len(fan))]
            seg = G.max_chord(disk_lens, x, u)
            if seg is None:
                continue
            assert abs(disk_lens.outer.signed_distance(seg.a)) < 1e-9
            assert abs(disk_lens.outer.signed_distance(seg.b)) < 1e-9
            sd, _ = G.segment_min_distance(seg, disk_lens.hole)
            assert sd >= -1e-9

    def test_sphere_bmo_tangential_chord(self, sphere_bmo_lens):
        """Chord from a free boundary point in the tangent direction: both
        endpoints on the unit circle, cross-checked against dense sampling."""
        r = np.sqrt(0.75)
        x = np.array([0.0, -r])
        seg = G.max_chord(sphere_bmo_lens, x, (1.0, 0.0))
        assert seg is not None
        for end in (seg.a, seg.b):
            assert abs(np.linalg.norm(end) - 1.0) < 1e-9
        # dense-sampling oracle for the exit abscissa: x^2 + r^2 = 1
        want = 0.5
        assert max(abs(seg.a[0]), abs(seg.b[0])) == pytest.approx(want, abs=1e-9)


class TestTransversal:
    def test_radial(self, half_disk_lens):
        seg = G.transversal_segment(half_disk_lens, (0.0, -0.5))
        assert np.allclose(seg.a, [0.0, -0.5])
        assert np.allclose(seg.b, [0.0, -1.0], atol=1e-9)

    def test_sphere_bmo_radial(self, sphere_bmo_lens):
        r = np.sqrt(1 - 0.25)
        seg = G.transversal_segment(sphere_bmo_lens, (0.0, -r))
        assert np.allclose(seg.b, [0.0, -1.0], atol=1e-9)

    def test_channel_lowest_point(self, channel_lens):
        # lowest point of the left hole drops vertically to the unit circle
        x = np.array([-0.5, -1.0 / 2.9])
        seg = G.transversal_segment(channel_lens, x)
        assert np.allclose(seg.b, [-0.5, -np.sqrt(0.75)], atol=1e-9)

    def test_not_on_boundary(self, half_disk_lens):
        with pytest.raises(ValueError):
            G.transversal_segment(half_disk_lens, (0.0, -0.8))


class TestMinkowski:
    def test_endpoints(self, unit_disk):
        b1 = G.ConvexBody.disk((0, 0), 0.5)
        assert G.minkowski_interpolate(unit_disk, b1, 0.0) is unit_disk
        assert G.minkowski_interpolate(unit_disk, b1, 1.0) is b1

    def test_disk_blend(self, unit_disk):
        b1 = G.ConvexBody.disk((0, 0), 0.5)
        mid = G.minkowski_interpolate(unit_disk, b1, 0.5)
        assert mid.kind == "ball"
        assert mid.params["radius"] == pytest.approx(0.75)

    def test_paraboloid_blend(self):
        b0 = G.ConvexBody.paraboloid(2, 1.0, 0.0)
        b1 = G.ConvexBody.paraboloid(2, 1.0, 1.0)
        mid = G.minkowski_interpolate(b0, b1, 0.25)
        assert mid.kind == "paraboloid"
        assert mid.params["coeff"] == pytest.approx(1.0)
        assert mid.params["offset"] == pytest.approx(0.25)

    def test_hyperbola_blend_support(self):
        b0 = G.ConvexBody.hyperbola(1.0)
        b1 = G.ConvexBody.hyperbola(4.0)
        mid = G.minkowski_interpolate(b0, b1, 0.5)
        # support functions of the interpolation blend linearly
        u = np.array([-0.6, -0.8])
        want = 0.5 * b0.support(u) + 0.5 * b1.support(u)
        assert mid.support(u) == pytest.approx(want, abs=1e-12)

    def test_generic_blend_oracle(self):
        disk = G.ConvexBody.disk((0.2, 0.0), 0.6)
        ell = G.ConvexBody.ellipse((0, 0), (1.0, 0.5))
        mid = G.minkowski_interpolate(disk, ell, 0.5)
        assert mid.kind == "blend"
        u = np.array([0.3, -0.95])
        u /= np.linalg.norm(u)
        want = 0.5 * disk.support(u) + 0.5 * ell.support(u)
        assert mid.support(u) == pytest.approx(want, abs=1e-12)
        # support point lies on the boundary: signed distance about zero
        sp = mid.support_point(u)
        assert abs(mid.signed_distance(sp)) < 1e-6

    def test_shrink_toward_center(self):
        hole = G.ConvexBody.disk((0.3, 0.1), 0.5)
        s = G.shrink_toward_center(hole, 0.8)
        assert s.kind == "ball"
        assert s.params["radius"] == pytest.approx(0.4)
        assert np.allclose(s.params["center"], [0.3, 0.1])


class TestVisibility:
    def test_unobstructed(self, disk_lens):
        # far from the hole every ray reaches the outer boundary
        pts, diam = G.visibility_sample(disk_lens, (0.0, -0.9), 128)
        assert diam > 1.0

    def test_free_boundary_stability(self, disk_lens):
        x = (0.0, -0.4)
        _, d1 = G.visibility_sample(disk_lens, x, 256)
        _, d2 = G.visibility_sample(disk_lens, x, 512)
        assert abs(d1 - d2) <= 0.05 * max(d1, d2)

    def test_unbounded_growth(self):
        # the domain between two shifted hyperbolas contains full rays, so
        # interior visibility grows with the range cap
        lens = G.LensDomain(G.ConvexBody.hyperbola(1.0),
                            G.ConvexBody.hyperbola(1.0, shift=(1.0, 1.0)))
        x = np.array([3.0, 0.5])
        assert lens.contains(x)
        _, d_small = G.visibility_sample(lens, x, 128, ray_range=10.0)
        _, d_large = G.visibility_sample(lens, x, 128, ray_range=100.0)
        assert d_large > 5.0 * d_small


class TestSplitRatioBound:
    def test_at_least_one(self, half_disk_lens):
        sh = G.ConvexBody.disk((0, 0), 0.25)
        assert G.split_ratio_bound(half_disk_lens, sh, (0.0, -0.6)) >= 1.0

    def test_frozen_value(self, half_disk_lens):
        # brute-force oracle over the sample grid: the ray from the shrunk
        # hole top through x exits at the bottom of the outer circle
        sh = G.ConvexBody.disk((0, 0), 0.25)
        got = G.split_ratio_bound(half_disk_lens, sh, (0.0, -0.6))
        assert got == pytest.approx(0.4 / 0.35, abs=1e-9)

    def test_monotone_in_samples(self, half_disk_lens):
        sh = G.ConvexBody.disk((0, 0), 0.25)
        x = (0.13, -0.62)
        vals = [G.split_ratio_bound(half_disk_lens, sh, x, n_samples=n)
                for n in (64, 128, 256, 512)]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))

    def test_growth_near_hole(self, half_disk_lens):
        sh = G.ConvexBody.disk((0, 0), 0.25)
        vals = [G.split_ratio_bound(half_disk_lens, sh, (0.0, -0.25 - d))
                for d in (0.2, 0.1, 0.05, 0.025)]
        assert vals[0] < vals[1] < vals[2] < vals[3]

    def test_fixed_boundary_rejected(self, half_disk_lens):
        with pytest.raises(ValueError):
            G.split_ratio_bound(half_disk_lens, G.ConvexBody.disk((0, 0), 0.25),
                                (0.0, -1.0))


class TestConditions:
    def test_bounded_lens(self, disk_lens):
        strict, cone = G.check_conditions(disk_lens)
        assert strict.verdict == "heuristic-pass"
        assert cone.verdict == "pass"

    def test_bmo_lens(self, bmo_lens):
        strict, cone = G.check_conditions(bmo_lens)
        assert strict.verdict == "heuristic-pass"
        assert cone.verdict == "heuristic-pass"

    def test_hyperbola_pair(self):
        lens = G.LensDomain(G.ConvexBody.hyperbola(1.0),
                            G.ConvexBody.hyperbola(1.0, shift=(1.0, 1.0)))
        _, cone = G.check_conditions(lens)
        assert cone.verdict == "heuristic-pass"

    def test_no_cone_domain(self):
        lens = G.LensDomain(G.ConvexBody.upper_hyperbola(1.0),
                            G.ConvexBody.paraboloid(2, 1.0, 2.0))
        _, cone = G.check_conditions(lens)
        assert cone.verdict == "fail"
        assert len(cone.witnesses) > 0
        # each witness direction really fails the recession test in the hole
        hole = lens.holes[0]
        for u in cone.witnesses:
            anchor = hole.anchor_point()
            probe = anchor + 1e4 * np.asarray(u)
            assert hole.gauge(probe) >= 0

    def test_fail_requires_witness(self):
        with pytest.raises(ValueError):
            G.ConditionReport("x", "fail", witnesses=[])


class TestSlicing:
    def test_unit_disk_constant(self, unit_disk):
        C, ends, _ = G.slicing_constant(unit_disk, (0, 1), 0.0, (0, 0), 1.0, 1.0)
        assert C == 2.0
        xs = sorted(e[0] for e in ends)
        assert xs == pytest.approx([-1.0, 1.0], abs=1e-9)

    def test_top_point(self, unit_disk):
        # y = (0,1): nearest slice endpoint at distance sqrt(2) <= 2 * 1
        C, ends, _ = G.slicing_constant(unit_disk, (0, 1), 0.0, (0, 0), 1.0, 1.0)
        y = np.array([0.0, 1.0])
        dz = min(np.linalg.norm(y - e) for e in ends)
        assert dz == pytest.approx(np.sqrt(2), abs=1e-9)
        assert dz <= C * 1.0

    def test_ellipse_verifier(self):
        ell = G.ConvexBody.ellipse((0, 0), (2.0, 1.0))
        C, ends, report = G.slicing_constant(ell, (0, 1), 0.0, (0, 0), 1.0, 2.0,
                                             n_check=50)
        assert C == 3.0
        for y, dz, bound in report:
            assert dz <= bound + 1e-9

    def test_bad_precondition(self, unit_disk):
        with pytest.raises(ValueError):
            G.slicing_constant(unit_disk, (0, 1), 0.0, (0, 0), 1.5, 1.0)


class TestLensDomain:
    def test_nesting_enforced(self, unit_disk):
        with pytest.raises(ValueError):
            G.LensDomain(unit_disk, G.ConvexBody.disk((0.8, 0), 0.5))

    def test_separation_enforced(self, unit_disk):
        with pytest.raises(ValueError):
            G.LensDomain(unit_disk, [G.ConvexBody.disk((-0.2, 0), 0.3),
                                     G.ConvexBody.disk((0.2, 0), 0.3)])

    def test_variants(self, half_disk_lens):
        on_free = np.array([0.0, -0.5])
        assert half_disk_lens.contains(on_free)
        assert not half_disk_lens.as_variant(True).contains(on_free)

    def test_descriptor_roundtrip(self, channel_lens):
        d = channel_lens.descriptor()
        again = G.LensDomain.from_descriptor(d)
        assert again.descriptor() == d

    def test_gap_width(self, disk_lens):
        assert disk_lens.gap_width() == pytest.approx(0.6, abs=1e-9)


class TestRayOracles:
    def test_ray_exit_matches_bisection(self):
        rng = np.random.default_rng(13)
        bodies = [G.ConvexBody.disk((0.1, -0.2), 0.9),
                  G.ConvexBody.paraboloid(2, 0.8, 0.2),
                  G.ConvexBody.hyperbola(1.5),
                  G.ConvexBody.ellipse((0, 0), (1.4, 0.8))]
        for body in bodies:
            x = body.anchor_point()
            for _ in range(24):
                th = rng.uniform(0, 2 * np.pi)
                u = np.array([np.cos(th), np.sin(th)])
                t = float(body.ray_exit(x, u))
                if not np.isfinite(t):
                    # recession direction: far point still inside
                    assert body.gauge(x + 1e5 * u) <= 0
                    continue
                assert abs(body.signed_distance(x + t * u)) < 1e-6
                assert body.gauge(x + 0.5 * t * u) < 0

    def test_ray_entry_clearance(self):
        hole = G.ConvexBody.disk((0, 0), 0.4)
        x = np.array([0.0, -0.9])
        u = np.array([0.0, 1.0])
        t0 = float(hole.ray_entry(x, u))
        t1 = float(hole.ray_entry(x, u, clearance=0.1))
        assert t0 == pytest.approx(0.5, abs=1e-12)
        assert t1 == pytest.approx(0.4, abs=1e-12)

    def test_tangent_directions(self):
        hole = G.ConvexBody.disk((0, 0), 0.4)
        x = np.array([0.0, -0.8])
        for u in hole.tangent_directions(x):
            seg = G.Segment(x - 3 * u, x + 3 * u)
            sd, _ = G.segment_min_distance(seg, hole)
            assert abs(sd) < 1e-9
