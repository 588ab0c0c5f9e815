"""Preprocessing tests: differencing, scaling, window assembly."""

import numpy as np
import pytest
from sklearn.exceptions import NotFittedError

from thermocast.exceptions import DataError
from thermocast.ingest import SensorFrame
from thermocast.preprocess import (
    DELTA_KEY,
    NormStats,
    PatternBuilder,
    PatternSet,
    WindowSpec,
    admissible_origins,
    build_patterns,
    compute_norm_stats,
    difference,
    encode_hour,
    invert_difference,
    znormalize,
)


def make_frame(n=64, start=0, seed=0, channels=("W", "H", "Q", "R")):
    rng = np.random.default_rng(seed)
    data = {"d": 20.0 + np.cumsum(rng.normal(0, 0.1, n))}
    if "W" in channels:
        data["W"] = rng.uniform(0, 900, n)
    if "H" in channels:
        data["H"] = rng.uniform(30, 70, n)
    if "Q" in channels:
        data["Q"] = rng.uniform(400, 900, n)
    if "R" in channels:
        data["R"] = rng.uniform(0, 1, n)
    return SensorFrame(start, 900, data)


class TestDifference:
    def test_hand_values(self):
        np.testing.assert_allclose(difference([1.0, 4.0, 9.0, 16.0]), [3.0, 5.0, 7.0])

    def test_needs_two_samples(self):
        with pytest.raises(DataError):
            difference([1.0])

    def test_invert_hand_values(self):
        np.testing.assert_allclose(invert_difference([1.0, -2.0], 10.0), [11.0, 9.0])

    def test_round_trip(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            x = rng.normal(20, 5, size=rng.integers(2, 200))
            back = invert_difference(difference(x), x[0])
            np.testing.assert_allclose(back, x[1:], atol=1e-9)

    def test_round_trip_matrix(self):
        rng = np.random.default_rng(7)
        x = rng.normal(0, 30, size=(1000, 13))
        deltas = np.diff(x, axis=1)
        back = invert_difference(deltas, x[:, 0])
        assert np.max(np.abs(back - x[:, 1:])) < 1e-9

    def test_matrix_needs_matching_anchors(self):
        with pytest.raises(ValueError):
            invert_difference(np.zeros((3, 2)), [1.0, 2.0])


class TestScaling:
    def test_znormalize_centers(self):
        v = np.array([2.0, 4.0, 6.0])
        out = znormalize(v, v.mean(), v.std())
        np.testing.assert_allclose(out.mean(), 0.0, atol=1e-15)
        np.testing.assert_allclose(out.std(), 1.0, atol=1e-15)

    def test_zero_std_rejected(self):
        with pytest.raises(DataError, match="zero"):
            znormalize([1.0, 1.0], 1.0, 0.0)

    def test_population_std(self):
        frame = SensorFrame(0, 900, {"d": np.arange(4.0), "W": np.array([1.0, 2.0, 3.0, 4.0])})
        stats = compute_norm_stats(frame, ["W"])
        assert stats.means["W"] == 2.5
        assert stats.stds["W"] == pytest.approx(np.sqrt(1.25), abs=1e-15)

    def test_delta_statistics_on_request(self):
        frame = SensorFrame(0, 900, {"d": np.array([1.0, 3.0, 6.0, 10.0])})
        stats = compute_norm_stats(frame, [], include_deltas=True)
        assert stats.means[DELTA_KEY] == pytest.approx(3.0)

    def test_missing_channel_rejected(self):
        frame = SensorFrame(0, 900, {"d": np.arange(4.0)})
        with pytest.raises(DataError, match="no channel"):
            compute_norm_stats(frame, ["W"])


class TestEncodeHour:
    def test_one_hot(self):
        v = encode_hour(13)
        assert v.shape == (24,)
        assert v.sum() == 1.0
        assert v[13] == 1.0

    def test_range_checked(self):
        with pytest.raises(DataError):
            encode_hour(24)


class TestWindowSpec:
    def test_covariates_canonicalized(self):
        spec = WindowSpec(covariates=("W", "h"))
        assert spec.covariates == ("h", "W")

    def test_input_size_with_hour_and_sun(self):
        spec = WindowSpec(past_size=5, covariates=("h", "W"), covariate_past=5)
        assert spec.input_size == 5 + 5 + 24

    def test_input_size_full_set(self):
        spec = WindowSpec(past_size=21, covariates=("h", "W", "H", "Q", "R"), covariate_past=5)
        assert spec.input_size == 21 + 4 * 5 + 24

    def test_unknown_covariate_rejected(self):
        with pytest.raises(DataError, match="unknown"):
            WindowSpec(covariates=("x",))

    def test_duplicate_covariate_rejected(self):
        with pytest.raises(DataError, match="repeat"):
            WindowSpec(covariates=("W", "W"))

    def test_per_channel_past_sizes(self):
        spec = WindowSpec(past_size=3, covariates=("W", "H"), covariate_past={"W": 2, "H": 7})
        assert spec.past_of("W") == 2
        assert spec.past_of("H") == 7
        assert spec.max_past == 7
        assert spec.input_size == 3 + 2 + 7


class TestOrigins:
    def test_window_count_example(self):
        spec = WindowSpec(past_size=5, future_window=12)
        origins = admissible_origins(30, spec)
        assert len(origins) == 13
        assert origins[0] == 5 and origins[-1] == 17

    def test_count_matches_arithmetic(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(40, 200))
            spec = WindowSpec(
                past_size=int(rng.integers(1, 22)),
                covariates=("W",),
                covariate_past=int(rng.integers(1, 22)),
                future_window=int(rng.integers(1, 13)),
            )
            if n - 1 - spec.max_past - spec.future_window + 1 <= 0:
                continue
            got = len(admissible_origins(n, spec))
            assert got == n - 1 - spec.max_past - spec.future_window + 1

    def test_too_short_frame_rejected(self):
        with pytest.raises(DataError, match="too short"):
            admissible_origins(17, WindowSpec(past_size=5, future_window=12))


class TestBuildPatterns:
    def test_univariate_windows_line_up(self):
        d = np.array([0.0, 1.0, 3.0, 6.0, 10.0, 15.0, 21.0, 28.0])
        frame = SensorFrame(0, 900, {"d": d})
        spec = WindowSpec(past_size=2, future_window=2)
        ps = build_patterns(frame, spec)
        # origins run from max_past=2 to n-1-Z=5
        np.testing.assert_array_equal(ps.origins, [2, 3, 4, 5])
        np.testing.assert_allclose(ps.inputs[0], [1.0, 2.0])  # deltas into t=2
        np.testing.assert_allclose(ps.targets[0], [3.0, 4.0])  # deltas t->t+2
        np.testing.assert_allclose(ps.anchors, d[2:6])

    def test_absolute_targets_recover_frame(self):
        frame = make_frame(60, channels=())
        spec = WindowSpec(past_size=3, future_window=4)
        ps = build_patterns(frame, spec)
        d = frame.channels["d"]
        for k, t in enumerate(ps.origins):
            np.testing.assert_allclose(ps.absolute_targets()[k], d[t + 1 : t + 5], atol=1e-9)

    def test_covariates_scaled_with_given_stats(self):
        train = make_frame(64, seed=1)
        val = make_frame(64, seed=2)
        spec = WindowSpec(past_size=2, covariates=("W",), covariate_past=3, future_window=2)
        stats = compute_norm_stats(train, ["W"])
        ps = build_patterns(val, spec, stats)
        t = ps.origins[0]
        raw = val.channels["W"][t - 2 : t + 1]
        expected = (raw - stats.means["W"]) / stats.stds["W"]
        np.testing.assert_allclose(ps.inputs[0, 2:5], expected)

    def test_hour_block_matches_timestamp(self):
        frame = make_frame(64, seed=3)
        spec = WindowSpec(past_size=2, covariates=("h",), future_window=2)
        ps = build_patterns(frame, spec)
        hours = frame.hours()
        for k, t in enumerate(ps.origins):
            block = ps.inputs[k, 2:]
            assert block.sum() == 1.0
            assert block[hours[t]] == 1.0

    def test_two_hour_blocks_oldest_first(self):
        frame = make_frame(64, seed=4)
        spec = WindowSpec(past_size=2, covariates=("h",), hour_blocks=2, future_window=2)
        ps = build_patterns(frame, spec)
        hours = frame.hours()
        t = ps.origins[0]
        older, newer = ps.inputs[0, 2:26], ps.inputs[0, 26:]
        assert older[hours[t - 1]] == 1.0
        assert newer[hours[t]] == 1.0

    def test_no_future_leakage(self):
        frame = make_frame(64, seed=5)
        spec = WindowSpec(past_size=4, covariates=("h", "W"), covariate_past=4, future_window=3)
        stats = compute_norm_stats(frame, ["W"])
        ps = build_patterns(frame, spec, stats)
        t = int(ps.origins[10])
        tampered = {ch: v.copy() for ch, v in frame.channels.items()}
        for ch in tampered:
            tampered[ch][t + 1 :] += 5.0 if ch != "R" else 0.0
        ps2 = build_patterns(SensorFrame(frame.start, frame.period, tampered), spec, stats)
        np.testing.assert_array_equal(ps.inputs[10], ps2.inputs[10])

    def test_normalize_deltas_flag(self):
        frame = make_frame(64, seed=6, channels=())
        spec = WindowSpec(past_size=3, future_window=2, normalize_deltas=True)
        stats = compute_norm_stats(frame, [], include_deltas=True)
        ps = build_patterns(frame, spec, stats)
        raw = build_patterns(frame, WindowSpec(past_size=3, future_window=2))
        expected = (raw.inputs - stats.means[DELTA_KEY]) / stats.stds[DELTA_KEY]
        np.testing.assert_allclose(ps.inputs, expected)
        # targets stay raw deltas either way
        np.testing.assert_array_equal(ps.targets, raw.targets)

    def test_stats_required_for_covariates(self):
        frame = make_frame(64, seed=7)
        spec = WindowSpec(covariates=("W",))
        with pytest.raises(DataError, match="statistics"):
            build_patterns(frame, spec)

    def test_csv_export_shape(self, tmp_path):
        frame = make_frame(40, seed=8, channels=())
        ps = build_patterns(frame, WindowSpec(past_size=2, future_window=2))
        path = tmp_path / "patterns.csv"
        ps.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("origin,x0,x1,y0,y1")
        assert len(lines) == len(ps) + 1


class TestPatternBuilder:
    def test_fit_then_transform(self):
        train = make_frame(64, seed=9)
        val = make_frame(64, seed=10)
        builder = PatternBuilder(WindowSpec(past_size=3, covariates=("h", "W"), future_window=2))
        ps = builder.fit(train).transform(val)
        direct = build_patterns(val, builder.spec, compute_norm_stats(train, ["W"]))
        np.testing.assert_array_equal(ps.inputs, direct.inputs)

    def test_transform_before_fit_raises(self):
        builder = PatternBuilder(WindowSpec())
        with pytest.raises(NotFittedError):
            builder.transform(make_frame(64))

    def test_get_params_round_trip(self):
        spec = WindowSpec(past_size=7)
        builder = PatternBuilder(spec)
        assert builder.get_params()["spec"] is spec
