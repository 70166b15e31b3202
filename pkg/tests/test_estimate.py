import numpy as np
import pytest

from plumetrace import (
    CovModel,
    NumericalError,
    PlumeParams,
    build_grid,
    estimate_multivariate,
    estimate_projection,
    gen_dataset,
    linear_change_map,
    reduce_surface,
    reference_design,
    reference_layout,
    t_multivariate,
)
from plumetrace.estimate import constant_profile_points, subgrid
from plumetrace.simulate import region_signal


@pytest.fixture
def angle_grid(layout):
    return build_grid((-1.0, 1.0, 0.5), (-2.0, 0.0, 0.5), [10.0, 20.0, 40.0], layout)


class TestMultivariateEstimator:
    def test_noise_free_recovery(self, layout, angle_grid, identity_cov, truth):
        series = gen_dataset(reference_design(seed=0), noiseless=True)
        theta, surface = estimate_multivariate(series.x, layout, angle_grid, identity_cov)
        assert theta == truth
        assert surface.max_value == pytest.approx(float(np.nanmax(surface.values)))

    def test_zero_data_first_point(self, layout, angle_grid, identity_cov):
        theta, surface = estimate_multivariate(
            np.zeros((layout.d, layout.n)), layout, angle_grid, identity_cov
        )
        assert surface.argmax_index == 0
        assert theta == angle_grid.points[0]

    def test_cov_scalar_invariance(self, layout, angle_grid, identity_cov):
        series = gen_dataset(reference_design(seed=1))
        theta_a, surf_a = estimate_multivariate(series.x, layout, angle_grid, identity_cov)
        theta_b, surf_b = estimate_multivariate(
            series.x, layout, angle_grid, identity_cov.scaled(7.5)
        )
        assert surf_a.argmax_index == surf_b.argmax_index
        assert theta_a == theta_b

    def test_coherent_with_test_statistic(self, layout, angle_grid, identity_cov):
        series = gen_dataset(reference_design(seed=2))
        theta, surface = estimate_multivariate(series.x, layout, angle_grid, identity_cov)
        res = t_multivariate(series.x, angle_grid, layout, identity_cov)
        assert surface.argmax_index == res.argmax_index
        assert theta == res.argmax

    def test_strict_grid_required(self, layout, identity_cov):
        relaxed = build_grid((0.0, 0.0, 1.0), (0.0, 0.0, 1.0), [20.0], layout, mode="relaxed")
        with pytest.raises(ValueError, match="strict"):
            estimate_multivariate(np.zeros((layout.d, layout.n)), layout, relaxed, identity_cov)


class TestProjectionEstimator:
    def test_noise_free_recovery(self, layout, angle_grid, identity_cov, direction, truth):
        series = gen_dataset(reference_design(seed=3), noiseless=True)
        theta, surface = estimate_projection(series.x, layout, angle_grid, direction, identity_cov)
        assert theta == truth

    def test_noise_free_maximum_is_cauchy_schwarz_bound(
        self, layout, angle_grid, identity_cov, direction
    ):
        # with the correct direction the normalized objective at the truth
        # attains ||centered projection||, the Cauchy-Schwarz upper bound
        series = gen_dataset(reference_design(seed=4), noiseless=True)
        from plumetrace import project_series

        y = project_series(series.x, direction, identity_cov)
        bound = float(np.linalg.norm(y - y.mean()))
        _, surface = estimate_projection(series.x, layout, angle_grid, direction, identity_cov)
        assert surface.values[surface.argmax_index] / np.sqrt(layout.n) <= bound * (1 + 1e-12)
        assert surface.max_value / np.sqrt(layout.n) == pytest.approx(bound, rel=1e-9)

    def test_direction_scaling_same_argmax(self, layout, angle_grid, identity_cov, direction):
        series = gen_dataset(reference_design(seed=5))
        _, surf_a = estimate_projection(series.x, layout, angle_grid, direction, identity_cov)
        _, surf_b = estimate_projection(series.x, layout, angle_grid, 4.0 * direction, identity_cov)
        assert surf_a.argmax_index == surf_b.argmax_index

    def test_constant_profile_raises(self, identity_cov):
        layout = reference_layout(n=40, d=1)
        grid = build_grid((0.0, 0.0, 1.0), (0.0, 0.0, 1.0), [20.0, 179.0], layout)
        cov = CovModel("diagonal", np.ones(1), "known")
        x = np.random.default_rng(0).normal(size=(1, 40))
        with pytest.raises(NumericalError, match="constant"):
            estimate_projection(x, layout, grid, np.ones(1), cov)

    def test_constant_profile_screening(self):
        layout = reference_layout(n=40, d=1)
        grid = build_grid((0.0, 0.0, 1.0), (0.0, 0.0, 1.0), [20.0, 179.0], layout)
        cov = CovModel("diagonal", np.ones(1), "known")
        dropped = constant_profile_points(layout, grid, np.ones(1), cov)
        np.testing.assert_array_equal(dropped, [1])
        sub, kept = subgrid(grid, dropped)
        assert len(sub) == 1
        np.testing.assert_array_equal(kept, [0])
        x = np.random.default_rng(0).normal(size=(1, 40))
        theta, _ = estimate_projection(x, layout, sub, np.ones(1), cov)
        assert theta == grid.points[0]


class TestShiftedWindows:
    def test_wind_shift_compensation_end_to_end(self, identity_cov, direction):
        # shifting a transect's window moves its change region exactly as if
        # the plume had drifted; estimation on the shifted layout still
        # recovers the true source from noise-free data
        from plumetrace.geometry import Transect, TransectLayout
        from plumetrace.simulate import SimDesign

        shifts = [0.0, 0.1, -0.2, 0.3, 0.0, -0.1]
        layout = TransectLayout(
            n=240,
            transects=tuple(
                Transect(y=1.0 + i, x_min=-3.0, x_max=3.0, x_shift=shifts[i]) for i in range(6)
            ),
        )
        truth = PlumeParams(0.0, 0.0, 20.0)
        design = SimDesign(layout=layout, true_params=truth, seed=40)
        series = gen_dataset(design, noiseless=True)
        grid = build_grid((-0.5, 0.5, 0.25), (-1.0, 0.0, 0.25), [10.0, 20.0, 40.0], layout)
        theta_m, _ = estimate_multivariate(series.x, layout, grid, identity_cov)
        theta_p, _ = estimate_projection(series.x, layout, grid, direction, identity_cov)
        assert theta_m == truth
        assert theta_p == truth


class TestSignalIdentifiability:
    def test_truth_dominates_componentwise(self):
        # |shift * region signal| is maximized at the true boundaries
        rng = np.random.default_rng(6)
        for _ in range(10):
            n = 200
            layout = reference_layout(n=n, d=int(rng.integers(2, 7)))
            truth = PlumeParams(
                x=float(rng.uniform(-0.5, 0.5)),
                y=float(rng.uniform(-1.0, 0.4)),
                angle=float(rng.uniform(12.0, 40.0)),
            )
            true_map = linear_change_map(layout, truth)
            if not true_map.is_strict():
                continue
            grid = build_grid((-1.0, 1.0, 0.25), (-2.0, 0.25, 0.25), [truth.angle], layout)
            for params in grid.points:
                cand = linear_change_map(layout, params)
                for i in range(layout.d):
                    h_cand = region_signal(true_map, cand, i)
                    h_true = region_signal(true_map, true_map, i)
                    assert abs(h_cand) <= h_true + 1e-12


class TestSurfaceReduction:
    def test_single_angle_identity(self, layout, fixed_angle_grid, identity_cov):
        series = gen_dataset(reference_design(seed=7))
        _, surface = estimate_multivariate(series.x, layout, fixed_angle_grid, identity_cov)
        reduced = reduce_surface(surface)
        assert len(reduced.cells) == len(fixed_angle_grid)
        for (x, y), v in reduced.cells.items():
            idx = [i for i, p in enumerate(surface.params) if (p.x, p.y) == (x, y)]
            assert v == pytest.approx(float(surface.values[idx[0]]))

    def test_argmax_cell_dominates(self, layout, angle_grid, identity_cov):
        series = gen_dataset(reference_design(seed=8))
        _, surface = estimate_multivariate(series.x, layout, angle_grid, identity_cov)
        reduced = reduce_surface(surface)
        top = reduced.cells[reduced.argmax]
        assert all(top >= v for v in reduced.cells.values())

    def test_adding_angle_never_decreases(self, layout, identity_cov):
        series = gen_dataset(reference_design(seed=9))
        small = build_grid((-1.0, 0.0, 0.5), (-1.0, 0.0, 0.5), [20.0], layout)
        big = build_grid((-1.0, 0.0, 0.5), (-1.0, 0.0, 0.5), [20.0, 60.0], layout)
        _, s_small = estimate_multivariate(series.x, layout, small, identity_cov)
        _, s_big = estimate_multivariate(series.x, layout, big, identity_cov)
        r_small = reduce_surface(s_small)
        r_big = reduce_surface(s_big)
        for cell, v in r_small.cells.items():
            assert r_big.cells[cell] >= v - 1e-12

    def test_near_ties_reported(self, layout, identity_cov):
        # duplicate-valued points: every zero-data value ties at the top
        grid = build_grid((-0.5, 0.5, 0.5), (0.0, 0.0, 0.5), [20.0], layout)
        _, surface = estimate_multivariate(
            np.zeros((layout.d, layout.n)), layout, grid, identity_cov
        )
        assert set(surface.near_ties) == set(range(len(grid)))
