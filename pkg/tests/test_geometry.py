import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plumetrace import PlumeParams, Transect, TransectLayout, build_grid, linear_change_map
from plumetrace.geometry import change_map_table, grid_from_dict, region_bounds


def one_transect_layout(y=1.0, window=(-1.0, 1.0), shift=0.0, n=100):
    return TransectLayout(n=n, transects=(Transect(y=y, x_min=window[0], x_max=window[1], x_shift=shift),))


class TestLinearChangeMap:
    def test_right_angle_covers_full_window(self):
        # half-width tan(45 deg) * 1 = 1 spans the [-1, 1] window
        cm = linear_change_map(one_transect_layout(), PlumeParams(0.0, 0.0, 90.0))
        assert cm.start[0] == pytest.approx(0.0, abs=1e-15)
        assert cm.end[0] == pytest.approx(1.0, abs=1e-15)

    def test_narrow_angle_interior_cut(self):
        cm = linear_change_map(one_transect_layout(), PlumeParams(0.0, 0.0, 20.0))
        half = math.tan(math.radians(10.0))
        assert cm.start[0] == pytest.approx(0.4118365096457675, abs=1e-15)
        assert cm.end[0] == pytest.approx(0.5881634903542325, abs=1e-15)
        assert cm.end[0] - cm.start[0] == pytest.approx(half, abs=1e-15)

    def test_source_on_transect_gives_empty_region(self):
        cm = linear_change_map(one_transect_layout(y=1.0), PlumeParams(0.0, 1.0, 45.0))
        assert cm.start[0] == 0.0 and cm.end[0] == 0.0

    def test_source_downwind_gives_empty_region(self):
        cm = linear_change_map(one_transect_layout(y=1.0), PlumeParams(0.0, 2.0, 45.0))
        assert cm.start[0] == 0.0 and cm.end[0] == 0.0

    def test_plume_missing_window_clamps_to_empty(self):
        cm = linear_change_map(one_transect_layout(window=(-1.0, 1.0)), PlumeParams(10.0, 0.0, 20.0))
        assert cm.start[0] == cm.end[0]

    def test_table_matches_pointwise(self, layout):
        points = [PlumeParams(0.3, -0.5, 35.0), PlumeParams(-1.0, 0.2, 110.0)]
        lo, hi = change_map_table(layout, points)
        for k, p in enumerate(points):
            cm = linear_change_map(layout, p)
            np.testing.assert_array_equal(lo[k], cm.start)
            np.testing.assert_array_equal(hi[k], cm.end)


finite_coord = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestProperties:
    @given(
        x=finite_coord,
        y=st.floats(min_value=-10, max_value=0.99, allow_nan=False),
        a1=st.floats(min_value=1, max_value=179, exclude_max=True),
        a2=st.floats(min_value=1, max_value=179, exclude_max=True),
    )
    @settings(max_examples=200, deadline=None)
    def test_wider_angle_never_shrinks_regions(self, x, y, a1, a2):
        layout = one_transect_layout()
        lo_a, hi_a = (min(a1, a2), max(a1, a2))
        cm_small = linear_change_map(layout, PlumeParams(x, y, lo_a))
        cm_big = linear_change_map(layout, PlumeParams(x, y, hi_a))
        assert np.all(cm_big.end - cm_big.start >= cm_small.end - cm_small.start)

    @given(x=finite_coord, y=finite_coord, angle=st.floats(min_value=0.5, max_value=179.5, exclude_max=True))
    @settings(max_examples=200, deadline=None)
    def test_outputs_always_clamped(self, x, y, angle):
        cm = linear_change_map(one_transect_layout(), PlumeParams(x, y, angle))
        assert 0.0 <= cm.start[0] <= cm.end[0] <= 1.0

    @given(shift=st.floats(min_value=-3, max_value=3, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_shift_consistency(self, shift):
        # shifting the window by c equals moving the source by -c on that transect
        params = PlumeParams(0.1, 0.0, 40.0)
        shifted = linear_change_map(one_transect_layout(shift=shift), params)
        moved = linear_change_map(
            one_transect_layout(), PlumeParams(params.x - shift, params.y, params.angle)
        )
        np.testing.assert_allclose(shifted.start, moved.start, atol=1e-12)
        np.testing.assert_allclose(shifted.end, moved.end, atol=1e-12)


class TestRegionBounds:
    def test_matches_indicator_convention(self):
        # region (s, e] on the t/n lattice equals 1-based times floor(n*s)+1 .. floor(n*e)
        n = 37
        for s, e in [(0.0, 1.0), (0.25, 0.75), (0.1, 0.100001), (0.33, 0.34)]:
            lo, hi = region_bounds(np.array([s]), np.array([e]), n)
            t = np.arange(1, n + 1)
            indicator = (s < t / n) & (t / n <= e)
            expected = np.flatnonzero(indicator)
            got = np.arange(lo[0], hi[0])
            np.testing.assert_array_equal(got, expected)


class TestBuildGrid:
    def test_single_point(self, layout):
        grid = build_grid((0.0, 0.0, 1.0), (0.0, 0.0, 1.0), [20.0], layout)
        assert len(grid) == 1

    def test_cardinality(self, layout):
        grid = build_grid((-1.0, 1.0, 1.0), (-2.0, 0.0, 1.0), [20.0], layout)
        assert len(grid) == 9

    def test_strict_mode_filters_downwind_sources(self, layout):
        # sources at y >= 1 sit on or downwind of the first transect
        strict = build_grid((0.0, 0.0, 1.0), (0.0, 2.0, 1.0), [20.0], layout, mode="strict")
        relaxed = build_grid((0.0, 0.0, 1.0), (0.0, 2.0, 1.0), [20.0], layout, mode="relaxed")
        assert len(relaxed) == 3
        assert len(strict) == 1
        lo, hi = change_map_table(layout, strict.points)
        assert np.all(lo < hi)

    def test_empty_strict_grid_raises(self, layout):
        with pytest.raises(ValueError, match="empty"):
            build_grid((0.0, 0.0, 1.0), (7.0, 8.0, 1.0), [20.0], layout, mode="strict")

    def test_duplicate_points_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            from plumetrace.geometry import ParamGrid

            p = PlumeParams(0.0, 0.0, 20.0)
            ParamGrid(points=(p, p))

    def test_json_round_trip(self, layout):
        payload = {"x": [-1.0, 1.0, 0.5], "y": [-2.0, 0.0, 0.5], "angles": [20.0, 40.0], "mode": "strict"}
        grid = grid_from_dict(payload, layout)
        rebuilt = build_grid((-1.0, 1.0, 0.5), (-2.0, 0.0, 0.5), [20.0, 40.0], layout)
        assert grid.points == rebuilt.points


class TestValidation:
    def test_bad_window(self):
        with pytest.raises(ValueError):
            Transect(y=1.0, x_min=1.0, x_max=-1.0)

    def test_nonpositive_distance(self):
        with pytest.raises(ValueError):
            Transect(y=0.0, x_min=-1.0, x_max=1.0)

    def test_decreasing_distances(self):
        with pytest.raises(ValueError):
            TransectLayout(
                n=10,
                transects=(Transect(2.0, -1.0, 1.0), Transect(1.0, -1.0, 1.0)),
            )

    def test_angle_range(self):
        with pytest.raises(ValueError):
            PlumeParams(0.0, 0.0, 180.0)
        with pytest.raises(ValueError):
            PlumeParams(0.0, 0.0, 0.0)

    def test_layout_round_trip(self, layout):
        assert TransectLayout.from_dict(layout.to_dict()) == layout
