import numpy as np
import pytest

from conftest import TRUE_ZETA
from errors import DimensionError, LevelError, SchemaError
from evaluation import calibrate, posthoc_calibrate
from ordinal import ThresholdMode, Thresholds, predict_level
from prefdata import GenConfig, generate


class TestCalibrate:

    def test_all_top_level(self):
        diffs = np.linspace(-2.0, 2.0, 40)
        th = posthoc_calibrate(diffs, np.full(40, 2), K=2)
        assert th.mode is ThresholdMode.ASYMMETRIC
        assert np.all(predict_level(diffs, th) == 2)

    def test_objective_not_worse_than_start(self):
        rng = np.random.default_rng(0)
        diffs = rng.normal(size=300)
        labels = np.clip(np.round(diffs + rng.normal(0.0, 0.7, 300)), -2, 2).astype(int)
        result = calibrate(diffs, labels, K=2)
        assert result.objective <= result.objective_history[0]
        assert len(result.objective_history) == result.epochs + 1
        assert result.objective == min(result.objective_history)
        assert not result.low_information

    def test_low_information_flag(self):
        result = calibrate(np.full(20, 0.3), np.tile([-1, 0, 1, 0], 5), K=1)
        assert result.low_information
        assert np.all(np.diff(result.thresholds.zeta) > 0)

    def test_too_few_examples(self):
        with pytest.raises(SchemaError):
            calibrate(np.zeros(4), np.zeros(4, dtype=int), K=2)

    def test_label_range(self):
        with pytest.raises(LevelError):
            calibrate(np.zeros(10), np.full(10, 3), K=2)

    def test_lengths(self):
        with pytest.raises(DimensionError):
            calibrate(np.zeros(10), np.zeros(9, dtype=int), K=1)

    def test_to_dict(self):
        rng = np.random.default_rng(1)
        out = calibrate(rng.normal(size=50), rng.integers(-1, 2, 50), K=1, epochs=5).to_dict()
        assert out["mode"] == "asymmetric" and len(out["zeta"]) == 2
        assert out["epochs"] == 5 and out["objective"] <= out["initial_objective"]


@pytest.mark.slow
class TestCalibrationRecovery:

    def test_recovers_true_thresholds(self):
        cfg = GenConfig(n=50_000, d=4, K=3, seed=21, true_thresholds=TRUE_ZETA)
        ds = generate(cfg)
        diffs = cfg.scorer().diff_batch(ds.a, ds.b)
        result = calibrate(diffs, ds.z, K=3)
        assert result.epochs == 100
        np.testing.assert_allclose(result.thresholds.zeta, TRUE_ZETA, atol=0.05)
        truth = Thresholds(3, ThresholdMode.SYMMETRIC, TRUE_ZETA)
        agreement = (predict_level(diffs, result.thresholds) == predict_level(diffs, truth)).mean()
        assert agreement > 0.9
