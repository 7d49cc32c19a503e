import numpy as np
import pytest

from lensbellman import admissible as A
from lensbellman import geometry as G
from lensbellman import martingale as M
from lensbellman import solver as S
from lensbellman import splitting as SP

AFFINE = {"kind": "affine", "coeffs": [1.0, 2.0]}


@pytest.fixture(scope="module")
def affine_field(disk_lens):
    f = A.boundary_function(AFFINE)
    cfg = S.SolverConfig(grid_step=0.02, n_dirs=32, max_iterations=200)
    return S.chord_value_iteration(disk_lens, f, cfg)


@pytest.fixture(scope="module")
def channel_field(channel_lens):
    f = A.boundary_function({"kind": "channel"})
    cfg = S.SolverConfig(grid_step=0.02, n_dirs=32, max_iterations=250, tol=1e-7)
    return S.chord_value_iteration(channel_lens, f, cfg)


class TestAffineFixedPoint:
    def test_exact_on_mask(self, affine_field):
        pts = affine_field.points()
        vals = affine_field.values[affine_field.mask]
        exact = pts @ np.array([1.0, 2.0])
        assert affine_field.unreached_count() == 0
        assert np.max(np.abs(vals - exact)) < 1e-12

    def test_zero_data(self, disk_lens):
        f = A.boundary_function({"kind": "zero"})
        cfg = S.SolverConfig(grid_step=0.04, n_dirs=16, max_iterations=50)
        field = S.chord_value_iteration(disk_lens, f, cfg)
        vals = field.values[field.mask]
        assert np.nanmax(np.abs(vals)) == 0.0

    def test_monotone_updates(self, channel_field):
        ups = channel_field.meta["max_updates"]
        burn = 5
        tail = ups[burn:]
        assert all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))


class TestCheese:
    @pytest.fixture(scope="class")
    def cheese_field(self, cheese_lens):
        f = A.boundary_function({"kind": "zero"})
        cfg = S.SolverConfig(grid_step=0.02, n_dirs=32, max_iterations=100)
        return S.chord_value_iteration(cheese_lens, f, cfg)

    def test_central_region_unreached(self, cheese_field, cheese_lens):
        assert np.isnan(cheese_field.interp(np.array([0.0, 0.0])))
        # every cell strictly inside the hull of the holes is unreached
        centers = np.array([h.params["center"] for h in cheese_lens.holes])
        rho = cheese_lens.holes[0].params["radius"]
        th = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        hull_support = (U @ centers.T).max(axis=1) + rho
        pts = cheese_field.points()
        vals = cheese_field.values[cheese_field.mask]
        inside_hull = np.all(pts @ U.T <= hull_support[None, :] - 2 * cheese_field.h,
                             axis=1)
        assert np.all(np.isnan(vals[inside_hull]))

    def test_outer_region_zero(self, cheese_field):
        vals = cheese_field.values[cheese_field.mask]
        fin = np.isfinite(vals)
        assert fin.sum() > 0
        assert np.max(np.abs(vals[fin])) == 0.0

    def test_zero_field_locally_concave(self, cheese_field, cheese_lens):
        zero = cheese_field.copy()
        zero.values = np.where(cheese_field.mask, 0.0, np.nan)
        rep = S.check_local_concavity(zero, cheese_lens, samples=200, tol=1e-9)
        assert rep["ok"]


class TestChannelStrictness:
    def test_value_strictly_negative(self, channel_field):
        v = float(channel_field.interp(np.array([0.0, -1.0 / 3.0])))
        assert v <= -1e-3
        assert v >= -1.0 / 3.0 - 0.05

    def test_bounded_below_by_channel_chord(self, channel_field):
        # the vertical chord through (0, -1/3) realizes -1/3
        v = float(channel_field.interp(np.array([0.0, -1.0 / 3.0])))
        assert v >= -1.0 / 3.0 - 1e-6


class TestLocalConcavity:
    def test_affine_passes(self, affine_field, disk_lens):
        rep = S.check_local_concavity(affine_field, disk_lens, samples=200,
                                      tol=1e-9)
        assert rep["ok"] and rep["checked"] == 200

    def test_corrupted_cell_fails(self, affine_field, disk_lens):
        # a dented cell drags interpolated midpoints below their chords
        bad = affine_field.copy()
        pts = bad.points()
        k = int(np.argmin(np.linalg.norm(pts - [0.0, -0.75], axis=1)))
        iy, ix = np.nonzero(bad.mask)
        bad.values[iy[k], ix[k]] -= 0.5
        rep = S.check_local_concavity(bad, disk_lens, samples=800, tol=1e-6)
        assert not rep["ok"]
        assert rep["violations"][0]["deficit"] > 1e-3

    def test_channel_field_concave_at_grid_scale(self, channel_field,
                                                 channel_lens):
        # the discrete field under-approximates unevenly where chords must
        # hug the holes, so its concavity defect is a grid-scale quantity
        tol = 6 * channel_field.h
        rep = S.check_local_concavity(channel_field, channel_lens,
                                      samples=150, tol=tol)
        assert rep["ok"], rep["violations"][:2]


class TestCompareDomains:
    def test_affine_tiny_difference(self, disk_lens):
        f = A.boundary_function(AFFINE)
        cfg = S.SolverConfig(grid_step=0.04, n_dirs=16, max_iterations=60)
        rep = S.compare_domains(disk_lens, f, cfg)
        assert rep["sup_diff"] <= 2 * 0.04 * f.lipschitz

    def test_zero_difference(self, disk_lens):
        f = A.boundary_function({"kind": "zero"})
        cfg = S.SolverConfig(grid_step=0.04, n_dirs=16, max_iterations=60)
        rep = S.compare_domains(disk_lens, f, cfg)
        assert rep["sup_diff"] == 0.0


class TestContinuation:
    def test_affine_value(self, affine_field, disk_lens):
        v = S.free_boundary_continuation(affine_field, disk_lens, (0.0, -0.4))
        assert v == pytest.approx(-0.8, abs=1e-9)

    def test_zero(self, disk_lens):
        f = A.boundary_function({"kind": "zero"})
        cfg = S.SolverConfig(grid_step=0.04, n_dirs=16, max_iterations=60)
        field = S.chord_value_iteration(disk_lens, f, cfg)
        assert S.free_boundary_continuation(field, disk_lens, (0.0, 0.4)) == 0.0

    def test_two_transversals_agree(self, channel_field, channel_lens):
        x = np.array([-0.5, -1.0 / 2.9])
        v1 = S.free_boundary_continuation(channel_field, channel_lens, x)
        v2 = S.free_boundary_continuation(channel_field, channel_lens, x,
                                          tilt=0.25)
        assert abs(v1 - v2) <= 2 * channel_field.h

    def test_not_free_boundary(self, affine_field, disk_lens):
        with pytest.raises(ValueError):
            S.free_boundary_continuation(affine_field, disk_lens, (0.0, -0.9))


class TestUpperBound:
    def test_two_point_payoffs(self, channel_field, channel_lens):
        """Sampled admissible functions never beat the field at their mean."""
        f = A.boundary_function({"kind": "channel"})
        rng = np.random.default_rng(19)
        pts = channel_field.points()
        h = channel_field.h
        checked = 0
        fan = G.direction_fan(32)
        for k in rng.permutation(len(pts)):
            x = pts[k]
            if checked >= 60:
                break
            try:
                phi = A.two_point_function(channel_lens, x, dirs=fan)
            except G.ChordNotFoundError:
                continue
            pay = A.payoff(phi, f)
            val = channel_field.values[channel_field.mask][k]
            if not np.isfinite(val):
                continue
            checked += 1
            assert val >= pay - (3 * h * f.lipschitz + 1e-9)
        assert checked == 60

    def test_splitting_consistency_on_extension(self, channel_lens):
        """The split martingale lives on the lens with the shrunk holes, and
        the field solved there dominates its payoff; on the original channel
        the same start point sits strictly below (the hallmark gap)."""
        phi = A.StepFunction("interval", [0.0, 1 / 3, 2 / 3],
                             [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
        f = A.boundary_function({"kind": "channel"})
        mart, _ = SP.build_martingale(phi, channel_lens, SP.SplitConfig(shrink=0.5))
        extended = channel_lens.with_holes(SP.shrunk_holes(channel_lens, 0.5))
        cfg = S.SolverConfig(grid_step=0.02, n_dirs=32, max_iterations=250,
                             tol=1e-7)
        field_ext = S.chord_value_iteration(extended, f, cfg)
        val = float(field_ext.interp(mart.start))
        pay = M.expected_payoff(mart, f)
        assert pay == pytest.approx(0.0, abs=1e-12)
        assert val >= pay - (3 * field_ext.h * f.lipschitz + 1e-9)


class TestGridRefinement:
    def test_first_order(self, disk_lens):
        f = A.boundary_function({"kind": "channel"})
        vals = {}
        for h in (0.04, 0.02):
            cfg = S.SolverConfig(grid_step=h, n_dirs=24, max_iterations=150,
                                 tol=1e-7)
            field = S.chord_value_iteration(disk_lens, f, cfg)
            vals[h] = field
        pts = vals[0.04].points()[::7]
        a = vals[0.04].interp(pts)
        b = vals[0.02].interp(pts)
        ok = np.isfinite(a) & np.isfinite(b)
        # refinement moves values by a bounded first-order amount
        assert np.max(np.abs(a[ok] - b[ok])) <= 6 * 0.04


class TestTruncatedGrid:
    def test_bmo_lens_metrics(self, bmo_lens):
        # 0.5 x + 0.25 y on y = x^2 is bounded below by -1/4
        coeffs = np.array([0.5, 0.25])
        f = A.BoundaryFunction(lambda P: P @ coeffs, "C2",
                               {"kind": "affine"}, lower_bound=-0.25,
                               lipschitz=float(np.linalg.norm(coeffs)))
        cfg = S.SolverConfig(grid_step=0.05, n_dirs=16, max_iterations=80,
                             box=[[-2.0, 0.0], [2.0, 3.0]])
        field = S.chord_value_iteration(bmo_lens, f, cfg)
        assert field.meta["truncated"]
        assert field.metric_mask.sum() < field.mask.sum()
        pts = field.points("metric")
        vals = field.interp(pts)
        exact = pts @ coeffs
        ok = np.isfinite(vals)
        # affine data stays an (approximate) fixed point away from the cut
        assert np.max(np.abs(vals[ok] - exact[ok])) < 0.05

    def test_unbounded_requires_box(self, bmo_lens):
        f = A.boundary_function({"kind": "affine", "coeffs": [1.0, 0.0]})
        with pytest.raises(ValueError):
            S.chord_value_iteration(bmo_lens, f, S.SolverConfig(grid_step=0.05))


class TestScalarField:
    def test_interp_matches_cells(self, affine_field):
        pts = affine_field.points()[::11]
        vals = affine_field.interp(pts)
        exact = pts @ np.array([1.0, 2.0])
        ok = np.isfinite(vals)
        assert np.max(np.abs(vals[ok] - exact[ok])) < 1e-10

    def test_csv_roundtrip(self, affine_field, tmp_path):
        path = tmp_path / "field.csv"
        affine_field.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x,y,value"
        assert len(lines) == 1 + int(affine_field.mask.sum())

    def test_unreached_in_csv(self, cheese_lens, tmp_path):
        f = A.boundary_function({"kind": "zero"})
        cfg = S.SolverConfig(grid_step=0.04, n_dirs=16, max_iterations=40)
        field = S.chord_value_iteration(cheese_lens, f, cfg)
        path = tmp_path / "cheese.csv"
        field.to_csv(path)
        assert "UNREACHED" in path.read_text()
