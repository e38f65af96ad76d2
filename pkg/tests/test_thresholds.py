import itertools
import math

import numpy as np
import pytest

from errors import DimensionError, LevelError, SchemaError
from ordinal import (
    ThresholdMode,
    ThresholdParams,
    Thresholds,
    backprop_thresholds,
    build_thresholds,
    default_threshold_params,
    interval_bounds,
    interval_of,
    params_from_thresholds,
    predict_level,
    project_ordered,
    project_symmetric,
    project_thresholds,
)
from utils.gradcheck import central_diff, rel_error

SYM = ThresholdMode.SYMMETRIC
ASYM = ThresholdMode.ASYMMETRIC


class TestBuildThresholds:

    def test_symmetric_unit_gaps(self):
        th = build_thresholds(ThresholdParams(2, SYM, [0.0, 0.0]))
        np.testing.assert_allclose(th.zeta, [-2.0, -1.0, 1.0, 2.0])

    def test_asymmetric_offset(self):
        th = build_thresholds(ThresholdParams(1, ASYM, [-1.5, math.log(3.0)]))
        np.testing.assert_allclose(th.zeta, [-1.5, 1.5])

    def test_symmetric_k3(self):
        th = build_thresholds(ThresholdParams(3, SYM, [math.log(0.5), math.log(0.5), 0.0]))
        np.testing.assert_allclose(th.zeta, [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0])

    def test_wrong_length(self):
        with pytest.raises(DimensionError):
            build_thresholds(ThresholdParams(2, SYM, [0.0, 0.0, 0.0]))
        with pytest.raises(DimensionError):
            build_thresholds(ThresholdParams(2, ASYM, [0.0, 0.0]))

    @pytest.mark.parametrize("mode,alpha", [(SYM, [-800.0, 0.0]), (ASYM, [0.0, -800.0, -1000.0, 0.0])])
    def test_underflowing_gaps_stay_ordered(self, mode, alpha):
        params = ThresholdParams(2, mode, alpha)
        th = build_thresholds(params)
        assert np.all(np.diff(th.zeta) > 0)
        grad = backprop_thresholds(params, np.ones(4))
        assert np.all(np.isfinite(grad))
        np.testing.assert_array_equal(grad[np.asarray(alpha) < -700], 0.0)

    @pytest.mark.parametrize("mode", [SYM, ASYM])
    def test_random_params_always_ordered(self, mode):
        rng = np.random.default_rng(7)
        for _ in range(200):
            K = int(rng.integers(1, 6))
            size = K if mode is SYM else 2 * K
            th = build_thresholds(ThresholdParams(K, mode, rng.normal(0.0, 2.0, size=size)))
            assert np.all(np.diff(th.zeta) > 0)
            if mode is SYM:
                np.testing.assert_array_equal(th.zeta[:K] + th.zeta[::-1][:K], 0.0)

    @pytest.mark.parametrize("mode", [SYM, ASYM])
    def test_params_round_trip(self, mode):
        th = build_thresholds(default_threshold_params(3, mode))
        back = build_thresholds(params_from_thresholds(th))
        np.testing.assert_allclose(back.zeta, th.zeta, atol=1e-12)

    def test_default_spacing(self):
        th = build_thresholds(default_threshold_params(3, "symmetric"))
        np.testing.assert_allclose(th.zeta, [-1.5, -0.9, -0.3, 0.3, 0.9, 1.5], atol=1e-12)


class TestThresholdValidation:

    def test_rejects_unordered(self):
        with pytest.raises(SchemaError):
            Thresholds(1, ASYM, [1.0, -1.0])

    def test_rejects_broken_symmetry(self):
        with pytest.raises(SchemaError):
            Thresholds(1, SYM, [-1.0, 1.5])

    def test_rejects_wrong_length(self):
        with pytest.raises(DimensionError):
            Thresholds(2, ASYM, [0.0, 1.0])

    def test_is_read_only(self, th_k2):
        with pytest.raises(ValueError):
            th_k2.zeta[0] = 5.0

    def test_logical_indexing(self, th_k2):
        assert th_k2.logical(-2) == -2.0
        assert th_k2.logical(1) == 1.0
        with pytest.raises(LevelError):
            th_k2.logical(0)

    def test_dict_round_trip(self, th_k2):
        assert Thresholds.from_dict(th_k2.to_dict()).to_dict() == th_k2.to_dict()

    def test_from_dict_missing_field(self):
        with pytest.raises(SchemaError, match="zeta"):
            Thresholds.from_dict({"K": 1, "mode": "asymmetric"})


class TestBackprop:

    def test_asymmetric_ones(self):
        alpha = np.array([0.3, 0.7])
        grad = backprop_thresholds(ThresholdParams(1, ASYM, alpha), [1.0, 1.0])
        np.testing.assert_allclose(grad, [2.0, math.exp(0.7)])

    def test_symmetric_cancellation(self):
        grad = backprop_thresholds(ThresholdParams(1, SYM, [0.4]), [1.0, 1.0])
        np.testing.assert_allclose(grad, [0.0])

    def test_symmetric_outer_threshold(self):
        grad = backprop_thresholds(ThresholdParams(2, SYM, [0.0, 0.0]), [0.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(grad, [1.0, 1.0])

    def test_gradient_length_checked(self):
        with pytest.raises(DimensionError):
            backprop_thresholds(ThresholdParams(2, SYM, [0.0, 0.0]), [1.0, 1.0])

    @pytest.mark.parametrize("mode", [SYM, ASYM])
    def test_matches_finite_differences(self, mode):
        rng = np.random.default_rng(11)
        for _ in range(50):
            K = int(rng.integers(1, 5))
            size = K if mode is SYM else 2 * K
            alpha = rng.normal(-0.2, 0.5, size=size)
            w = rng.normal(size=2 * K)

            def f(a):
                zeta = build_thresholds(ThresholdParams(K, mode, a)).zeta
                return float(w @ np.sin(zeta))

            params = ThresholdParams(K, mode, alpha)
            analytic = backprop_thresholds(params, w * np.cos(build_thresholds(params).zeta))
            assert rel_error(analytic, central_diff(f, alpha)) <= 1e-5


class TestIntervals:

    def test_tied_level(self, th_k2):
        assert interval_of(0, th_k2) == (-1.0, 1.0)

    def test_top_level_unbounded(self, th_k2):
        assert interval_of(2, th_k2) == (2.0, math.inf)
        assert interval_of(-2, th_k2) == (-math.inf, -2.0)

    def test_negative_level(self, th_k2):
        assert interval_of(-1, th_k2) == (-2.0, -1.0)

    def test_out_of_range(self, th_k2):
        with pytest.raises(LevelError):
            interval_of(3, th_k2)

    def test_predict_examples(self, th_k1, th_k2):
        assert predict_level(0.5, th_k1) == 0
        assert predict_level(10.0, th_k2) == 2
        assert predict_level(-1.0, th_k2) == 0

    def test_predict_returns_int_for_scalars(self, th_k2):
        assert isinstance(predict_level(0.0, th_k2), int)

    def test_intervals_partition_line(self, th_k2):
        s = np.concatenate((np.random.default_rng(3).normal(0.0, 3.0, 1000), th_k2.zeta))
        z = predict_level(s, th_k2)
        lo, hi = interval_bounds(z, th_k2)
        assert np.all(lo <= s) and np.all(s < hi)


def _brute_force_isotonic(u: np.ndarray) -> np.ndarray:
    # best feasible block-mean vector over every contiguous partition
    n = u.size
    best, best_dist = None, np.inf
    for cuts in itertools.product([False, True], repeat=n - 1):
        edges = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        fitted = np.concatenate([np.full(e - s, u[s:e].mean()) for s, e in zip(edges[:-1], edges[1:])])
        if np.all(np.diff(fitted) >= -1e-12):
            dist = float(np.sum((fitted - u) ** 2))
            if dist < best_dist:
                best, best_dist = fitted, dist
    return best


class TestProjection:

    def test_separated_input_unchanged(self):
        raw = np.array([-1.0, 0.0, 0.5, 3.0])
        np.testing.assert_allclose(project_thresholds(raw, 0.1).zeta, raw, atol=1e-15)

    def test_two_point_swap(self):
        np.testing.assert_allclose(project_thresholds([1.0, 0.0], 0.1).zeta, [0.45, 0.55], atol=1e-12)

    def test_three_point_pool(self):
        np.testing.assert_allclose(project_ordered([0.0, 0.0, 0.0], 1.0), [-1.0, 0.0, 1.0], atol=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 7))
            eps = float(rng.uniform(0.01, 0.5))
            raw = rng.normal(0.0, 1.0, size=n)
            offsets = eps * np.arange(n)
            expected = _brute_force_isotonic(raw - offsets) + offsets
            np.testing.assert_allclose(project_ordered(raw, eps), expected, atol=1e-6)

    def test_idempotent_and_feasible(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            raw = rng.normal(0.0, 2.0, size=2 * int(rng.integers(1, 4)))
            once = project_thresholds(raw, 0.05).zeta
            twice = project_thresholds(once, 0.05).zeta
            np.testing.assert_allclose(twice, once, rtol=0, atol=1e-12)
            assert np.all(np.diff(once) >= 0.05 - 1e-12)

    def test_closer_than_random_feasible_points(self):
        rng = np.random.default_rng(13)
        eps = 0.1
        for _ in range(10):
            raw = rng.normal(0.0, 1.0, size=4)
            dist = np.sum((project_thresholds(raw, eps).zeta - raw) ** 2)
            start = rng.normal(0.0, 1.5, size=(10_000, 1))
            gaps = eps + rng.exponential(0.5, size=(10_000, 3))
            feasible = np.concatenate((start, start + np.cumsum(gaps, axis=1)), axis=1)
            assert dist <= np.min(np.sum((feasible - raw) ** 2, axis=1)) + 1e-12

    def test_symmetric_projection_is_exact(self):
        th = project_symmetric([0.05, 0.02, 1.0], 0.1)
        assert th.mode is SYM
        np.testing.assert_array_equal(th.zeta[:3], -th.zeta[::-1][:3])
        assert np.all(np.diff(th.zeta) >= 0.1 - 1e-12)

    def test_rejects_bad_eps(self):
        with pytest.raises(ValueError):
            project_ordered([0.0, 1.0], 0.0)
