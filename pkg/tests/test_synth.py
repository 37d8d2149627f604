"""Tests for synthetic stream generation."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from anomix.synth import random_instance, synth_timestamps


class TestRandomInstance:
    def test_shapes_and_ranges(self):
        rng = np.random.default_rng(70)
        scores, outcomes = random_instance(rng, 4, 50, anomaly_rate=0.2)
        assert scores.shape == (50, 4)
        assert outcomes.shape == (50,)
        assert np.all((scores >= 0.0) & (scores < 1.0))
        assert set(np.unique(outcomes)) <= {0, 1}

    def test_seed_pins_the_instance(self):
        a = random_instance(np.random.default_rng(71), 3, 40)
        b = random_instance(np.random.default_rng(71), 3, 40)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_scores_look_uniform(self):
        rng = np.random.default_rng(72)
        scores, _ = random_instance(rng, 1, 10_000)
        assert abs(float(scores.mean()) - 0.5) < 0.02

    def test_anomaly_rate_is_respected(self):
        rng = np.random.default_rng(73)
        _, outcomes = random_instance(rng, 1, 10_000, anomaly_rate=0.1)
        assert abs(float(outcomes.mean()) - 0.1) < 0.02

    def test_rate_endpoints(self):
        rng = np.random.default_rng(74)
        _, none = random_instance(rng, 1, 100, anomaly_rate=0.0)
        _, all_ = random_instance(rng, 1, 100, anomaly_rate=1.0)
        assert none.sum() == 0 and all_.sum() == 100

    def test_bad_arguments_rejected(self):
        rng = np.random.default_rng(75)
        with pytest.raises(ValueError):
            random_instance(rng, 0, 10)
        with pytest.raises(ValueError):
            random_instance(rng, 1, 0)
        with pytest.raises(ValueError):
            random_instance(rng, 1, 10, anomaly_rate=1.5)


class TestSynthTimestamps:
    def test_five_minute_grid(self):
        ts = synth_timestamps(3)
        assert ts[0] == datetime(2020, 1, 1)
        assert ts[1] - ts[0] == timedelta(minutes=5)
        assert ts[2] - ts[0] == timedelta(minutes=10)

    def test_custom_start(self):
        start = datetime(1999, 12, 31, 23, 55)
        ts = synth_timestamps(2, start=start)
        assert ts == [start, datetime(2000, 1, 1)]
