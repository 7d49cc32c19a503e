import numpy as np
import pytest

from lensbellman import admissible as A
from lensbellman import geometry as G
from lensbellman import martingale as M
from lensbellman import splitting as SP


@pytest.fixture(scope="module")
def phi9():
    return A.StepFunction("interval", [0.0, 1 / 3, 2 / 3],
                          [[-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])


def random_sphere_function(rng, n_pieces, spread=0.8):
    """Random admissible step function on the planar sphere-oscillation lens:
    values walk a bounded angular window so all averages stay in the thin
    annulus."""
    base = rng.uniform(0, 2 * np.pi)
    angles = base + rng.uniform(-spread / 2, spread / 2, size=n_pieces)
    masses = rng.dirichlet(np.full(n_pieces, 3.0))
    masses = 0.08 + 0.92 * masses  # keep pieces off the tiny end
    masses /= masses.sum()
    breaks = np.concatenate([[0.0], np.cumsum(masses)[:-1]])
    values = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return A.StepFunction("interval", breaks, values)


class TestSplitInterval:
    def test_two_piece_breakpoint(self, half_disk_lens):
        phi = A.two_point_function(half_disk_lens, (0.0, -0.75))
        shrunk = SP.shrunk_holes(half_disk_lens, 0.85)
        t, ratio, margin, at_break = SP.split_interval(phi, (0.0, 1.0), shrunk, 10.0)
        assert at_break
        assert t == pytest.approx(phi.breakpoints[1], abs=1e-12)
        assert margin > 0

    def test_constant_any_point(self, half_disk_lens):
        phi = A.StepFunction("interval", [0.0], [[0.0, -1.0]])
        shrunk = SP.shrunk_holes(half_disk_lens, 0.85)
        t, ratio, _, _ = SP.split_interval(phi, (0.0, 1.0), shrunk, 10.0)
        assert ratio == pytest.approx(1.0)

    def test_section9_split_exists(self, channel_lens, phi9):
        shrunk = SP.shrunk_holes(channel_lens, 0.85)
        t, ratio, margin, _ = SP.split_interval(phi9, (0.0, 1.0), shrunk, 5.0)
        assert margin > 0
        # the found split average pair clears the shrunk holes by sweep
        avg_l = A.average(phi9, (0, t))
        avg_r = A.average(phi9, (t, 1))
        for h in shrunk:
            sd, _ = G.segment_min_distance(G.Segment(avg_l, avg_r), h)
            assert sd > 0

    def test_ratio_bound_respected(self, half_disk_lens):
        phi = A.StepFunction("interval", [0.0, 0.05], [[0.0, -1.0], [0.0, -1.0]])
        shrunk = SP.shrunk_holes(half_disk_lens, 0.85)
        # bound 2 excludes the 19:1 breakpoint split; the sweep finds another
        t, ratio, _, _ = SP.split_interval(phi, (0.0, 1.0), shrunk, 2.0)
        assert ratio <= 2.0 * 1.05

    def test_no_split_reports_best(self):
        # the ratio bound pins the split near the mass midpoint, where the
        # right-side average sits inside the forbidden body
        phi = A.StepFunction("interval", [0.0, 0.75], [[-1.0, 0.0], [1.0, 0.0]])
        shrunk = [G.ConvexBody.disk((0.0, 0.0), 0.1)]
        with pytest.raises(SP.SplitError) as err:
            SP.split_interval(phi, (0.0, 1.0), shrunk, 1.0, slack=1.05)
        assert err.value.best is not None


class TestBuildMartingale:
    def test_two_piece_is_two_point(self, half_disk_lens):
        phi = A.two_point_function(half_disk_lens, (0.0, -0.75))
        mart, _ = SP.build_martingale(phi, half_disk_lens)
        assert mart.depth() == 1
        assert mart.leaf_count() == 2
        assert np.allclose(mart.start, [0.0, -0.75], atol=1e-9)

    def test_section9_builds_exactly(self, channel_lens, phi9):
        # the worst-split-ratio bound at the mean forbids the unbalanced
        # breakpoint cuts here, so the tree is deeper than three leaves; the
        # terminal data is still exact: three atoms, payoff zero
        cfg = SP.SplitConfig(shrink=0.5)
        mart, trace = SP.build_martingale(phi9, channel_lens, cfg,
                                          A.boundary_function({"kind": "channel"}))
        dist = M.terminal_distribution(mart)
        assert len(dist) == 3
        assert dist.same_as(phi9.distribution())
        assert trace[-1]["payoff_martingale"] == pytest.approx(0.0, abs=1e-15)

    def test_breakpoint_splits_keep_one_leaf_per_piece(self, sphere_bmo_lens):
        # equal dyadic masses make every breakpoint cut balanced, so the
        # whole tree splits along the pieces and keeps one leaf per piece
        rng = np.random.default_rng(53)
        cfg = SP.SplitConfig(shrink=0.85)
        for n in (2, 4, 4, 4):
            base = rng.uniform(0, 2 * np.pi)
            angles = base + np.linspace(-0.3, 0.3, n)
            values = np.stack([np.cos(angles), np.sin(angles)], axis=1)
            phi = A.StepFunction("interval", np.arange(n) / n, values)
            assert A.interval_membership(phi, sphere_bmo_lens).is_member
            mart, trace = SP.build_martingale(phi, sphere_bmo_lens, cfg)
            assert all(row["at_breakpoint"] for row in trace)
            assert mart.leaf_count() == phi.n_pieces

    def test_validates_on_shrunk_lens(self, channel_lens, phi9):
        cfg = SP.SplitConfig(shrink=0.5)
        mart, _ = SP.build_martingale(phi9, channel_lens, cfg)
        shrunk_lens = channel_lens.with_holes(SP.shrunk_holes(channel_lens, 0.5))
        assert M.validate(mart, shrunk_lens).ok

    def test_distribution_exact(self, channel_lens, phi9):
        mart, _ = SP.build_martingale(phi9, channel_lens, SP.SplitConfig(shrink=0.6))
        assert M.terminal_distribution(mart).same_as(phi9.distribution())

    def test_ratio_bound_invariant(self, sphere_bmo_lens):
        rng = np.random.default_rng(41)
        cfg = SP.SplitConfig(shrink=0.85)
        for _ in range(10):
            phi = random_sphere_function(rng, rng.integers(3, 7))
            if not A.interval_membership(phi, sphere_bmo_lens).is_member:
                continue
            mart, trace = SP.build_martingale(phi, sphere_bmo_lens, cfg)
            for row in trace:
                if "ratio" in row:
                    assert row["ratio"] <= row["ratio_bound"] + 1e-12

    def test_payoff_identity_random(self, sphere_bmo_lens):
        rng = np.random.default_rng(43)
        cfg = SP.SplitConfig(shrink=0.85)
        f = A.boundary_function({"kind": "exp_coord", "coord": 0})
        done = 0
        while done < 8:
            phi = random_sphere_function(rng, int(rng.integers(3, 7)))
            if not A.interval_membership(phi, sphere_bmo_lens).is_member:
                continue
            mart, _ = SP.build_martingale(phi, sphere_bmo_lens, cfg)
            assert M.expected_payoff(mart, f) == pytest.approx(
                A.payoff(phi, f), abs=1e-9)
            assert M.terminal_distribution(mart).same_as(phi.distribution())
            done += 1

    def test_depth_cap(self, sphere_bmo_lens):
        rng = np.random.default_rng(47)
        phi = random_sphere_function(rng, 6)
        cfg = SP.SplitConfig(shrink=0.85)
        mart, _ = SP.build_martingale(phi, sphere_bmo_lens, cfg)
        assert mart.depth() <= cfg.depth_cap(phi.n_pieces)


class TestSplitConfig:
    def test_invalid_values(self):
        with pytest.raises(ValueError):
            SP.SplitConfig(shrink=1.5)
        with pytest.raises(ValueError):
            SP.SplitConfig(resolution=4)
        with pytest.raises(ValueError):
            SP.SplitConfig(ratio_slack=0.9)

    def test_roundtrip(self):
        cfg = SP.SplitConfig(shrink=0.7, resolution=64, max_depth=12,
                             ratio_slack=1.1)
        assert SP.SplitConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()
