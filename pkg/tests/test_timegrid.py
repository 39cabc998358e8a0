"""Time partitions and the L2 projection between nonmatching grids."""

import numpy as np
import pytest

from spacetimedd.timegrid import (
    TimePartition,
    TraceFunction,
    integrate_in_time,
    project,
)


def random_partition(rng, T=1.0, max_slabs=40):
    n = int(rng.integers(1, max_slabs + 1))
    cuts = np.sort(rng.uniform(0.0, T, n - 1))
    return TimePartition(np.concatenate([[0.0], cuts, [T]]))


class TestTimePartition:
    def test_uniform(self):
        p = TimePartition.uniform(2.0, 4)
        assert p.n_slabs == 4
        assert p.final_time == 2.0
        np.testing.assert_allclose(p.widths, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimePartition(np.array([0.0]))
        with pytest.raises(ValueError):
            TimePartition(np.array([0.5, 1.0]))  # must start at 0
        with pytest.raises(ValueError):
            TimePartition(np.array([0.0, 0.5, 0.5, 1.0]))  # not increasing

    def test_refine(self):
        p = TimePartition(np.array([0.0, 0.3, 1.0]))
        f = p.refine(2)
        np.testing.assert_allclose(f.boundaries, [0.0, 0.15, 0.3, 0.65, 1.0])

    def test_same_span(self):
        a = TimePartition.uniform(1.0, 3)
        b = TimePartition.uniform(1.0, 7)
        c = TimePartition.uniform(2.0, 3)
        assert a.same_span(b)
        assert not a.same_span(c)


class TestProjection:
    def test_single_overlap_average(self):
        # target slab (0, 0.5] overlaps source slabs (0, 0.3] and (0.3, 1]:
        # value = (0.3*v0 + 0.2*v1) / 0.5
        src_p = TimePartition(np.array([0.0, 0.3, 1.0]))
        dst_p = TimePartition(np.array([0.0, 0.5, 1.0]))
        src = TraceFunction(src_p, [7], np.array([[2.0], [0.0]]))
        out = project(src, dst_p)
        np.testing.assert_allclose(out.values, [[1.2], [0.0]])

    def test_identity_same_partition(self):
        p = TimePartition.uniform(1.0, 5)
        src = TraceFunction(p, [0, 1], np.arange(10.0).reshape(5, 2))
        out = project(src, TimePartition.uniform(1.0, 5))
        np.testing.assert_array_equal(out.values, src.values)

    def test_constant_preserved(self):
        src_p = TimePartition.uniform(1.0, 3)
        dst_p = TimePartition(np.array([0.0, 0.1, 0.45, 1.0]))
        src = TraceFunction(src_p, [0], np.full((3, 1), 4.2))
        out = project(src, dst_p)
        np.testing.assert_allclose(out.values, 4.2)

    def test_span_mismatch_rejected(self):
        src = TraceFunction(TimePartition.uniform(1.0, 2), [0])
        with pytest.raises(ValueError):
            project(src, TimePartition.uniform(2.0, 2))

    def test_randomized_conservation_and_bounds(self):
        # 1000 random partition pairs: the projection conserves the time
        # integral per edge and never leaves the source value range.
        rng = np.random.default_rng(20240817)
        worst_cons = 0.0
        for _ in range(1000):
            src_p = random_partition(rng)
            dst_p = random_partition(rng)
            n_edges = int(rng.integers(1, 4))
            vals = rng.standard_normal((src_p.n_slabs, n_edges))
            src = TraceFunction(src_p, np.arange(n_edges), vals)
            out = project(src, dst_p)
            i_src = integrate_in_time(src)
            i_dst = integrate_in_time(out)
            scale = max(1.0, float(np.abs(i_src).max()))
            worst_cons = max(worst_cons, float(np.abs(i_src - i_dst).max()) / scale)
            assert out.values.min() >= vals.min() - 1e-12
            assert out.values.max() <= vals.max() + 1e-12
        assert worst_cons <= 1e-13

    def test_coarse_fine_coarse_roundtrip(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            coarse = random_partition(rng, max_slabs=12)
            fine = coarse.refine(int(rng.integers(2, 6)))
            vals = rng.standard_normal((coarse.n_slabs, 2))
            src = TraceFunction(coarse, [0, 1], vals)
            back = project(project(src, fine), coarse)
            np.testing.assert_allclose(back.values, vals, atol=1e-13)

    def test_mismatched_shape_rejected(self):
        p = TimePartition.uniform(1.0, 2)
        with pytest.raises(ValueError):
            TraceFunction(p, [0, 1], np.zeros((3, 2)))


def test_integrate_in_time():
    p = TimePartition(np.array([0.0, 0.25, 1.0]))
    f = TraceFunction(p, [0], np.array([[4.0], [2.0]]))
    np.testing.assert_allclose(integrate_in_time(f), [0.25 * 4 + 0.75 * 2])
