import numpy as np
import pytest

from plumetrace import (
    build_grid,
    contaminate_direction,
    delta_profile,
    gen_dataset,
    gen_errors,
    linear_change_map,
    reference_design,
    reference_layout,
)
from plumetrace.geometry import region_bounds
from plumetrace.rng import derive_rng
from plumetrace.simulate import (
    MA9_COEFFS,
    SimDesign,
    noiseless_signal_check,
    partial_sum_signal,
    region_signal,
)
from plumetrace.stats import region_sums


class TestDeltaProfile:
    def test_single_component(self):
        np.testing.assert_allclose(delta_profile(1, 2.5), [2.5])

    def test_norm_matches_target(self):
        for d in (2, 5, 6, 12):
            p = delta_profile(d, 3.0)
            assert np.linalg.norm(p) == pytest.approx(3.0, rel=1e-12)

    def test_reference_profile_entry_range(self):
        p = delta_profile(6, 1.0)
        assert np.all(p >= 0.22)
        assert np.all(p <= 0.62)

    def test_positive_and_unimodal(self):
        for d in (3, 6, 10):
            p = delta_profile(d)
            assert np.all(p > 0)
            signs = np.sign(np.diff(p))
            # rises then decays: at most one sign change in the differences
            changes = np.count_nonzero(np.diff(signs[signs != 0]) != 0)
            assert changes <= 1

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            delta_profile(0)
        with pytest.raises(ValueError):
            delta_profile(3, delta_norm=-1.0)


class TestGenErrors:
    def test_iid_unit_variance(self):
        x = gen_errors("iid_gaussian", 1, 100_000, derive_rng(0, "t"))
        assert float(np.var(x)) == pytest.approx(1.0, abs=0.02)

    def test_ma9_lag_one_autocorrelation(self):
        c = np.array(MA9_COEFFS)
        rho1 = float(c[:-1] @ c[1:] / (c @ c))
        x = gen_errors("ma9", 1, 100_000, derive_rng(1, "t"))[0]
        x = x - x.mean()
        sample = float(x[:-1] @ x[1:] / (x @ x))
        assert sample == pytest.approx(rho1, abs=0.02)

    def test_seed_determinism(self):
        a = gen_errors("ma9", 3, 500, 42)
        b = gen_errors("ma9", 3, 500, 42)
        np.testing.assert_array_equal(a, b)

    def test_custom_coefficients(self):
        x = gen_errors((2.0,), 2, 1000, derive_rng(2, "t"))
        assert x.shape == (2, 1000)
        assert float(np.var(x)) == pytest.approx(4.0, rel=0.1)

    def test_unknown_model_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            gen_errors("arma", 1, 100, 0)


class TestGenDataset:
    def test_indicator_agrees_with_region_convention(self, layout, truth):
        series = gen_dataset(reference_design(seed=3), noiseless=True)
        cm = linear_change_map(layout, truth)
        lo, hi = region_bounds(cm.start, cm.end, layout.n)
        for i in range(layout.d):
            nz = np.flatnonzero(series.x[i] != 0.0)
            np.testing.assert_array_equal(nz, np.arange(lo[i], hi[i]))
            assert np.allclose(series.x[i, lo[i] : hi[i]], series.truth.shift[i])

    def test_region_sum_of_noiseless_truth(self, layout, truth):
        series = gen_dataset(reference_design(seed=4), noiseless=True)
        cm = linear_change_map(layout, truth)
        lo, hi = region_bounds(cm.start, cm.end, layout.n)
        sums = region_sums(series, cm)
        counts = hi - lo
        expected = series.truth.shift * counts * (1 - counts / layout.n)
        np.testing.assert_allclose(sums, expected, rtol=1e-9)

    def test_null_dataset_via_custom_zero_model(self, layout):
        # unit-free way to get pure noise: noiseless=False with zero shift is
        # not allowed (delta_norm > 0), so compare signal+noise minus signal
        design = reference_design(seed=5)
        full = gen_dataset(design)
        signal = gen_dataset(design, noiseless=True)
        noise = full.x - signal.x
        expected = gen_errors("iid_gaussian", layout.d, layout.n, derive_rng(5, "errors"))
        np.testing.assert_allclose(noise, expected, atol=1e-12)

    def test_empty_region_at_truth_rejected(self):
        layout = reference_layout(n=40, d=2)
        design_dict = reference_design(seed=0).to_dict()
        design_dict["true_params"] = {"x": 10.0, "y": 0.0, "angle": 10.0}
        with pytest.raises(ValueError, match="empty"):
            gen_dataset(SimDesign.from_dict({**design_dict, "layout": layout.to_dict()}))

    def test_seed_determinism_and_truth(self, truth):
        a = gen_dataset(reference_design(seed=6))
        b = gen_dataset(reference_design(seed=6))
        np.testing.assert_array_equal(a.x, b.x)
        assert a.truth.params == truth

    def test_baseline_offsets(self):
        design = SimDesign.from_dict(
            {**reference_design(seed=7).to_dict(), "baseline": [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]}
        )
        series = gen_dataset(design, noiseless=True)
        assert np.allclose(series.x[:, 0], np.arange(1.0, 7.0))

    def test_design_round_trip(self):
        design = reference_design(seed=8, error_model="ma9", tau=0.1, delta_norm=3.0)
        assert SimDesign.from_dict(design.to_dict()) == design

    def test_null_dataset_is_pure_error(self, layout):
        from plumetrace import null_dataset

        series = null_dataset(layout, seed=5)
        assert series.truth is None
        expected = gen_errors("iid_gaussian", layout.d, layout.n, derive_rng(5, "errors"))
        np.testing.assert_array_equal(series.x, expected)


class TestContamination:
    def test_zero_tau_identity(self):
        delta = delta_profile(6)
        np.testing.assert_array_equal(contaminate_direction(delta, 0.0, 0), delta)

    def test_noise_scale(self):
        delta = delta_profile(4)
        rng = derive_rng(9, "tau")
        draws = np.array([contaminate_direction(delta, 0.1, rng) - delta for _ in range(10_000)])
        assert float(draws.std()) == pytest.approx(0.1, rel=0.05)

    def test_contaminated_dataset_keeps_clean_direction_available(self):
        design = reference_design(seed=10, tau=0.3)
        series = gen_dataset(design, noiseless=True)
        clean = delta_profile(6)
        assert not np.allclose(series.truth.shift, clean)
        assert np.linalg.norm(series.truth.shift - clean) < 4 * 0.3 * np.sqrt(6)


class TestSignalOracles:
    def test_boundary_values_zero(self):
        for t0, t1 in [(0.0, 1.0), (0.2, 0.7), (0.45, 0.55)]:
            assert partial_sum_signal(t0, t1, 0.0) == 0.0
            assert partial_sum_signal(t0, t1, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_branch_continuity(self):
        for t0, t1 in [(0.2, 0.7), (0.1, 0.9), (0.4, 0.5)]:
            left_at_t0 = -t0 * (t1 - t0)
            mid_at_t0 = t0 * (1 - (t1 - t0)) - t0
            assert left_at_t0 == pytest.approx(mid_at_t0, abs=1e-15)
            mid_at_t1 = t1 * (1 - (t1 - t0)) - t0
            right_at_t1 = (1 - t1) * (t1 - t0)
            assert mid_at_t1 == pytest.approx(right_at_t1, abs=1e-15)
            assert partial_sum_signal(t0, t1, t0) == pytest.approx(left_at_t0, abs=1e-15)
            assert partial_sum_signal(t0, t1, t1) == pytest.approx(right_at_t1, abs=1e-15)

    def test_truth_value(self):
        from plumetrace.geometry import ChangeMap

        cm = ChangeMap([0.25], [0.75])
        assert region_signal(cm, cm, 0) == pytest.approx(0.25)

    def test_truth_maximizes_exhaustively(self):
        # over all rational candidate boundary pairs, the true pair attains
        # the unique maximum of the region signal
        from plumetrace.geometry import ChangeMap

        grid = np.round(np.linspace(0.0, 1.0, 21), 10)
        t0, t1 = 0.3, 0.65
        truth = ChangeMap([t0], [t1])
        best = region_signal(truth, truth, 0)
        for a in grid:
            for b in grid:
                if a >= b:
                    continue
                cand = ChangeMap([a], [b])
                val = region_signal(truth, cand, 0)
                assert val <= best + 1e-12
                if not (abs(a - t0) < 1e-9 and abs(b - t1) < 1e-9):
                    assert val < best - 1e-12 or (a, b) == (t0, t1)

    def test_noiseless_signal_check_bound(self, layout):
        design = reference_design(seed=11)
        grid = build_grid((-1.0, 1.0, 0.25), (-2.0, 0.0, 0.25), [10.0, 20.0, 40.0], layout)
        deviation = noiseless_signal_check(design, grid)
        max_shift = float(delta_profile(layout.d).max())
        assert deviation < 4.0 * max_shift / layout.n

    def test_zero_shift_zero_deviation(self, layout):
        # degenerate check: zero data deviates from a zero signal by zero
        design = reference_design(seed=12)
        series = gen_dataset(design, noiseless=True)
        cm = linear_change_map(layout, design.true_params)
        sums = region_sums(np.zeros_like(series.x), cm)
        np.testing.assert_array_equal(sums, np.zeros(layout.d))
