import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vczsynth.errors import ContractViolation
from vczsynth.geometry import (
    OVERFLOW,
    GridSpec,
    IntervalBox,
    cells_intersecting,
    cells_intersecting_many,
    dilate,
    erode,
    quantize,
    quantize_many,
    reach_set,
)


def box(*pairs):
    return IntervalBox.from_bounds(pairs)


coord = st.floats(-5, 5, allow_nan=False)


@st.composite
def boxes(draw, n=2):
    lo = np.array([draw(coord) for _ in range(n)])
    w = np.array([draw(st.floats(1e-6, 4)) for _ in range(n)])
    return IntervalBox(lo, lo + w)


margins = st.floats(0, 2)


class TestIntervalBox:
    def test_rejects_inverted(self):
        with pytest.raises(ContractViolation):
            IntervalBox([1.0], [0.0])

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            IntervalBox([0.0, 0.0], [1.0, 1.0, 1.0])

    def test_empty_box(self):
        e = IntervalBox.empty_box(2)
        assert e.empty and e.dim == 2
        assert not e.contains([0, 0])
        assert box([0, 1], [0, 1]).contains_box(e)

    def test_contains_points(self):
        b = box([0, 1], [0, 2])
        got = b.contains_points([[0.5, 1.0], [1.0, 2.0], [1.1, 0.0]])
        assert got.tolist() == [True, True, False]


class TestErodeDilate:
    def test_running_example(self):
        out = erode(box([-0.2, 0.2]), 0.018)
        assert np.allclose(out.lo, [-0.182]) and np.allclose(out.hi, [0.182])

    def test_zero_margin_identity(self):
        b = box([0.1, 0.7], [-3, 2])
        assert erode(b, 0.0) == b and dilate(b, 0.0) == b

    def test_collapse_to_empty(self):
        assert erode(box([0, 0.03]), 0.018).empty

    def test_dilate(self):
        out = dilate(box([0.1, 0.2]), 0.05)
        assert np.allclose(out.to_bounds(), [[0.05, 0.25]])
        out = dilate(box([-1, 1], [-1, 1]), [0.8, 0.8])
        assert np.allclose(out.to_bounds(), [[-1.8, 1.8], [-1.8, 1.8]])

    def test_margin_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            erode(box([0, 1], [0, 1]), [0.1, 0.1, 0.1])
        with pytest.raises(ContractViolation):
            dilate(box([0, 1]), [0.1, 0.2])

    def test_negative_margin(self):
        with pytest.raises(ContractViolation):
            erode(box([0, 1]), -0.1)

    @given(boxes(), margins)
    def test_erode_dilate_galois(self, b, m):
        assert erode(dilate(b, m), m).isclose(b, atol=1e-9)
        inner = erode(b, m)
        if not inner.empty:
            assert b.contains_box(dilate(inner, m), tol=1e-9)

    @given(boxes(), st.floats(0.01, 1.0), st.integers(0, 2**31 - 1))
    def test_box_erosion_is_ball_erosion(self, b, lam, seed):
        # B(xi, lam) in box  <=>  xi in erode(box, lam): the tightest points of
        # the ball are the axis directions.
        rng = np.random.default_rng(seed)
        inner = erode(b, lam)
        xi = rng.uniform(b.lo - lam, b.hi + lam)
        dirs = rng.normal(size=(256, 2))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.vstack([dirs, np.eye(2), -np.eye(2)])
        ball_in = bool(b.contains_points(xi + lam * dirs).all())
        assert ball_in == inner.contains(xi)


class TestGrid:
    grid = GridSpec(box([0.0, 1.0]), np.array([0.1]))

    def test_shape(self):
        assert self.grid.shape == (10,)
        g = GridSpec(box([-0.2, 0.2], [-0.1, 0.1]), np.array([0.01, 0.01]))
        assert g.n_cells == 800

    def test_quantize_examples(self):
        c = quantize([0.47], self.grid)
        assert c == (4,)
        assert np.allclose(self.grid.cell_box(c).center, [0.45])
        assert quantize([0.45], self.grid) == (4,)
        assert quantize([1.7], self.grid) is OVERFLOW
        assert quantize([-0.01], self.grid) is OVERFLOW

    def test_half_open_and_top_face(self):
        assert quantize([0.5], self.grid) == (5,)
        assert quantize([1.0], self.grid) == (9,)
        assert quantize([0.0], self.grid) == (0,)

    def test_non_finite(self):
        with pytest.raises(ContractViolation):
            quantize([math.nan], self.grid)

    @given(st.floats(0.0, 1.0))
    def test_point_in_closed_cell(self, p):
        c = quantize([p], self.grid)
        assert self.grid.cell_box(c).contains([p], tol=1e-12)

    @given(st.lists(st.floats(-0.5, 1.5), min_size=1, max_size=20))
    def test_quantize_many_matches_scalar(self, pts):
        flat = quantize_many(np.array(pts)[:, None], self.grid)
        for p, f in zip(pts, flat):
            assert f == self.grid.flat(quantize([p], self.grid))

    def test_flat_roundtrip(self):
        g = GridSpec(box([0, 1], [0, 2], [0, 3]), np.array([0.5, 0.5, 0.5]))
        for k in range(g.n_cells):
            assert g.flat(g.unflat(k)) == k
        assert g.flat(OVERFLOW) == -1 and g.unflat(-1) is OVERFLOW


class TestReachSet:
    def test_examples(self):
        g = GridSpec(box([0.0, 1.0]), np.array([0.1]))
        out = reach_set((4,), [0.1], 0.5, g)
        assert np.allclose(out.to_bounds(), [[0.45, 0.55]])
        assert reach_set((4,), [0.0], 3.0, g).isclose(g.cell_box((4,)))
        g2 = GridSpec(box([0, 1], [-1, 1]), np.array([0.1, 0.1]))
        out = reach_set((0, 10), [0.1, -0.1], 1.0, g2)
        assert np.allclose(out.to_bounds(), [[0.1, 0.2], [-0.1, 0.0]])

    def test_overflow(self):
        g = GridSpec(box([0.0, 1.0]), np.array([0.1]))
        with pytest.raises(ContractViolation):
            reach_set(OVERFLOW, [0.1], 1.0, g)

    @given(st.integers(0, 9), st.integers(0, 9), st.floats(-1, 1), st.floats(-1, 1),
           st.floats(0.01, 2.0), st.floats(0, 1), st.floats(0, 1))
    def test_exact(self, i, j, ux, uy, h, a, b):
        g = GridSpec(box([0, 1], [0, 1]), np.array([0.1, 0.1]))
        cb = g.cell_box((i, j))
        r = reach_set((i, j), [ux, uy], h, g)
        assert np.allclose(r.lo, cb.lo + h * np.array([ux, uy]))
        p = cb.lo + np.array([a, b]) * g.eta
        assert r.contains(p + h * np.array([ux, uy]), tol=1e-12)


class TestCellsIntersecting:
    g = GridSpec(box([0.0, 1.0], [0.0, 0.5]), np.array([0.1, 0.1]))

    def test_overlap_not_touch(self):
        assert cells_intersecting(box([0.45, 0.55], [0.1, 0.2]), self.g) == [(4, 5), (1, 1)]

    def test_outside(self):
        assert cells_intersecting(box([0.95, 1.05], [0.1, 0.2]), self.g) is None

    @given(st.floats(0, 0.9), st.floats(0, 0.1), st.floats(0, 0.4), st.floats(0, 0.1))
    def test_cover_and_many(self, x, wx, y, wy):
        b = box([x, x + wx], [y, y + wy])
        ranges = cells_intersecting(b, self.g)
        first, last, inside = cells_intersecting_many(b.lo[None], b.hi[None], self.g)
        assert inside[0] == (ranges is not None)
        if ranges is None:
            return
        assert [tuple(r) for r in zip(first[0], last[0])] == ranges
        # every point of the box quantizes into the returned range
        rng = np.random.default_rng(0)
        pts = rng.uniform(b.lo, b.hi, size=(64, 2))
        for p in pts:
            c = quantize(p, self.g)
            assert all(lo <= k <= hi for k, (lo, hi) in zip(c, ranges))
