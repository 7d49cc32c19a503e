import numpy as np
import pytest

from lensbellman import admissible as A
from lensbellman import geometry as G
from lensbellman import martingale as M


def two_point(lens, x):
    return M.two_point_martingale(lens, x)


class TestValidate:
    def test_two_point_valid(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.0, -0.75))
        assert M.validate(m, half_disk_lens).ok

    def test_constant_valid(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.0, -1.0))
        assert m.leaf_count() == 1
        assert M.validate(m, half_disk_lens).ok

    def test_straddling_split_invalid(self, half_disk_lens):
        # children straddle the hole: the connecting segment crosses it
        root = M.MartingaleNode((0.0, -0.75), 1.0, [
            M.MartingaleNode((0.0, 1.0), 0.125),
            M.MartingaleNode((0.0, -1.0), 0.875),
        ])
        rep = M.validate(M.SimpleMartingale(root), half_disk_lens)
        assert not rep.ok
        assert any(p["kind"] == "hull_hits_hole" for p in rep.problems)

    def test_mass_defect_detected(self, half_disk_lens):
        root = M.MartingaleNode((0.0, -0.75), 1.0, [
            M.MartingaleNode((-np.sqrt(1 - 0.5625), -0.75), 0.4),
            M.MartingaleNode((np.sqrt(1 - 0.5625), -0.75), 0.55),
        ])
        rep = M.validate(M.SimpleMartingale(root), half_disk_lens)
        kinds = {p["kind"] for p in rep.problems}
        assert "child_mass_sum" in kinds

    def test_martingale_identity_detected(self, half_disk_lens):
        root = M.MartingaleNode((0.1, -0.75), 1.0, [
            M.MartingaleNode((-np.sqrt(1 - 0.5625), -0.75), 0.5),
            M.MartingaleNode((np.sqrt(1 - 0.5625), -0.75), 0.5),
        ])
        rep = M.validate(M.SimpleMartingale(root), half_disk_lens)
        assert any(p["kind"] == "martingale_identity" for p in rep.problems)

    def test_leaf_off_boundary_detected(self, half_disk_lens):
        root = M.MartingaleNode((0.0, -0.8), 1.0, [
            M.MartingaleNode((-0.9, -0.8), 0.5),
            M.MartingaleNode((0.9, -0.8), 0.5),
        ])
        rep = M.validate(M.SimpleMartingale(root), half_disk_lens)
        assert any(p["kind"] == "leaf_off_fixed_boundary" for p in rep.problems)

    def test_starred_variant_stricter(self, half_disk_lens):
        # a chord touching the hole boundary is fine for the plain lens but
        # not for the starred variant
        x = np.array([0.0, -0.5])  # on the free boundary
        u = np.array([1.0, 0.0])
        t = float(half_disk_lens.outer.ray_exit(x, u))
        a, b = x + t * u, x - t * u
        root = M.MartingaleNode(x, 1.0, [M.MartingaleNode(a, 0.5),
                                         M.MartingaleNode(b, 0.5)])
        m = M.SimpleMartingale(root)
        assert M.validate(m, half_disk_lens).ok
        assert not M.validate(m, half_disk_lens.as_variant(True)).ok

    def test_random_two_point_sweep(self, disk_lens, sphere_bmo_lens):
        rng = np.random.default_rng(31)
        for lens in (disk_lens, sphere_bmo_lens):
            r_hole = lens.hole.params["radius"]
            n = 0
            while n < 150:
                th = rng.uniform(0, 2 * np.pi)
                r = rng.uniform(r_hole + 1e-3, 0.999)
                x = np.array([r * np.cos(th), r * np.sin(th)])
                m = two_point(lens, x)
                assert M.validate(m, lens).ok
                n += 1


class TestPayoffAndDistribution:
    def test_two_point_payoff(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.0, -0.75))
        f = A.boundary_function({"kind": "indicator", "coord": 0, "threshold": 0.0})
        (a, wa), (b, wb) = [(n.value, pm) for n, pm in m.leaves()]
        want = wa * float(f.evaluate(a)) + wb * float(f.evaluate(b))
        assert M.expected_payoff(m, f) == pytest.approx(want, abs=1e-15)

    def test_zero_function(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.3, -0.7))
        f = A.boundary_function({"kind": "zero"})
        assert M.expected_payoff(m, f) == 0.0

    def test_affine_equals_start(self, half_disk_lens):
        f = A.boundary_function({"kind": "affine", "coeffs": [1.0, 2.0]})
        rng = np.random.default_rng(17)
        for _ in range(50):
            th = rng.uniform(0, 2 * np.pi)
            r = rng.uniform(0.52, 0.99)
            x = np.array([r * np.cos(th), r * np.sin(th)])
            m = two_point(half_disk_lens, x)
            assert M.expected_payoff(m, f) == pytest.approx(x @ [1.0, 2.0],
                                                            abs=1e-12)

    def test_terminal_distribution(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.0, -0.75))
        dist = M.terminal_distribution(m)
        assert dist.masses.sum() == pytest.approx(1.0, abs=1e-15)
        assert np.allclose(dist.barycenter(), [0.0, -0.75], atol=1e-10)

    def test_merged_atoms(self):
        e = np.sqrt(1 - 0.5625)
        root = M.MartingaleNode((0.0, -0.75), 1.0, [
            M.MartingaleNode((-e, -0.75), 0.25),
            M.MartingaleNode((-e, -0.75), 0.25),
            M.MartingaleNode((e, -0.75), 0.5),
        ])
        dist = M.terminal_distribution(M.SimpleMartingale(root))
        assert len(dist) == 2

    def test_subtree_property(self, half_disk_lens):
        e = np.sqrt(1 - 0.5625)
        inner = M.MartingaleNode((0.0, -0.75), 0.5, [
            M.MartingaleNode((-e, -0.75), 0.5),
            M.MartingaleNode((e, -0.75), 0.5),
        ])
        x = np.array([0.0, -0.875])
        bot = M.MartingaleNode((0.0, -1.0), 0.5)
        root = M.MartingaleNode(x, 1.0, [inner, bot])
        m = M.SimpleMartingale(root)
        assert M.validate(m, half_disk_lens).ok
        sub = m.subtree(inner)
        assert sub.root.mass == 1.0
        assert M.validate(sub, half_disk_lens).ok


class TestTwoPointMartingale:
    def test_symmetric(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.0, -0.75))
        masses = sorted(c.mass for c in m.root.children)
        assert masses == pytest.approx([0.5, 0.5], abs=1e-9)

    def test_cheese_center_fails(self, cheese_lens):
        with pytest.raises(M.ChordNotFoundError):
            two_point(cheese_lens, (0.0, 0.0))

    def test_json_roundtrip(self, half_disk_lens):
        m = two_point(half_disk_lens, (0.2, -0.7))
        d = m.to_dict()
        again = M.SimpleMartingale.from_dict(d)
        assert again.to_dict() == d
        assert M.validate(again, half_disk_lens).ok


class TestAtomicMeasure:
    def test_mass_positivity(self):
        with pytest.raises(ValueError):
            M.AtomicMeasure([[0, 0]], [0.0])

    def test_sum_to_one(self):
        with pytest.raises(ValueError):
            M.AtomicMeasure([[0, 0], [1, 1]], [0.5, 0.6])

    def test_merge_tolerance(self):
        mu = M.AtomicMeasure([[0, 0], [1e-12, 0], [1, 0]], [0.25, 0.25, 0.5])
        assert len(mu) == 2
        assert np.allclose(mu.barycenter(), [0.5, 0.0])

    def test_same_as(self):
        a = M.AtomicMeasure([[0, 0], [1, 0]], [0.4, 0.6])
        b = M.AtomicMeasure([[1, 0], [0, 0]], [0.6, 0.4])
        assert a.same_as(b)
        c = M.AtomicMeasure([[0, 0], [1, 0]], [0.5, 0.5])
        assert not a.same_as(c)
