"""Grid-search harness tests: enumeration, resume, summaries, sweep."""

from dataclasses import replace

import numpy as np
import pytest

import thermocast.search as search
from thermocast.ensemble import combine_softmax
from thermocast.exceptions import ConfigError
from thermocast.ingest import build_frames
from thermocast.mlp import MlpForecaster
from thermocast.preprocess import build_patterns, compute_norm_stats, invert_difference
from thermocast.search import (
    BoxStats,
    GridSpec,
    TrainSettings,
    TrialResult,
    box_stats,
    decode_covariates,
    encode_covariates,
    enumerate_grid,
    read_results,
    run_grid,
    sweep_past_sizes,
    write_box_stats,
)
from thermocast.synth import SynthConfig, generate


@pytest.fixture(scope="module")
def frames():
    series = generate(SynthConfig(days=6, seed=1))
    frame = build_frames(series.values(), period=900, max_gap=5)[0][0]
    return frame.slice(0, 384), frame.slice(384, 576)


FAST = dict(layout="4t", future_window=4, epochs=2, patience=5)


def tiny_grid(**kw):
    base = dict(
        covariate_sets=((), ("W",)),
        layouts=("4t", "2t"),
        etas=(0.005,),
        mus=(0.001,),
        epsilons=(1e-6,),
        seeds=(0,),
        future_window=4,
        epochs=2,
        patience=5,
    )
    base.update(kw)
    return GridSpec(**base)


def fake_result(settings, mae=0.5):
    return TrialResult(settings, mae, mae * 1.2, 10.0, 1, False, 0.01)


class TestCovariateLabels:
    def test_round_trip(self):
        for covs in ((), ("h",), ("h", "W"), ("W", "H", "Q", "R")):
            assert decode_covariates(encode_covariates(covs)) == covs

    def test_plain_target_label(self):
        assert encode_covariates(()) == "d"

    def test_bad_label(self):
        with pytest.raises(ConfigError):
            decode_covariates("h+W")


class TestEnumerate:
    def test_product_size_and_order(self):
        grid = tiny_grid()
        configs = enumerate_grid(grid)
        assert len(configs) == 4
        assert configs[0].covariates == () and configs[0].layout == "4t"
        assert configs[1].layout == "2t"
        assert configs[2].covariates == ("W",)
        assert configs == enumerate_grid(grid)

    def test_single_point(self):
        grid = tiny_grid(covariate_sets=((),), layouts=("4t",))
        assert len(enumerate_grid(grid)) == 1

    def test_trial_ids_unique(self):
        ids = [c.trial_id for c in enumerate_grid(tiny_grid(seeds=(0, 1)))]
        assert len(set(ids)) == len(ids) == 8

    def test_empty_axis_rejected(self):
        with pytest.raises(ConfigError, match="etas"):
            tiny_grid(etas=())


class TestRunGrid:
    def test_executes_each_cell_once_and_persists(self, tmp_path, monkeypatch, frames):
        calls = []

        def fake(settings, train_frame, val_frame):
            calls.append(settings.trial_id)
            return fake_result(settings)

        monkeypatch.setattr(search, "_execute_trial", fake)
        path = tmp_path / "grid.csv"
        results = run_grid(tiny_grid(), *frames, path)
        assert len(results) == 4 and len(calls) == 4
        assert path.read_text().count("\n") == 5  # header + one row per trial

    def test_resume_skips_completed_cells(self, tmp_path, monkeypatch, frames):
        calls = []

        def fake(settings, train_frame, val_frame):
            calls.append(settings.trial_id)
            return fake_result(settings)

        monkeypatch.setattr(search, "_execute_trial", fake)
        path = tmp_path / "grid.csv"
        run_grid(tiny_grid(), *frames, path)
        run_grid(tiny_grid(), *frames, path)
        assert len(calls) == 4  # second run found everything on disk

    def test_resume_after_interruption_runs_only_the_tail(self, tmp_path, monkeypatch, frames):
        calls = []

        def fake(settings, train_frame, val_frame):
            calls.append(settings.trial_id)
            return fake_result(settings)

        monkeypatch.setattr(search, "_execute_trial", fake)
        path = tmp_path / "grid.csv"
        run_grid(tiny_grid(), *frames, path)
        lines = path.read_text().splitlines(keepends=True)
        path.write_text("".join(lines[:3]))  # keep header + first two trials

        calls.clear()
        results = run_grid(tiny_grid(), *frames, path)
        assert len(calls) == 2
        assert len(results) == 4
        assert len({r.settings.trial_id for r in results}) == 4
        # surviving rows were not rewritten
        assert path.read_text().splitlines()[1:3] == [l.rstrip("\n") for l in lines[1:3]]

    def test_results_round_trip_exactly(self, tmp_path, monkeypatch, frames):
        monkeypatch.setattr(
            search, "_execute_trial",
            lambda s, train_frame, val_frame: fake_result(s, mae=0.123456789012345),
        )
        path = tmp_path / "grid.csv"
        written = run_grid(tiny_grid(), *frames, path)
        assert read_results(path) == written

    def test_single_cell_matches_direct_training(self, tmp_path, frames):
        settings = TrainSettings(**FAST)
        path = tmp_path / "one.csv"
        grid = tiny_grid(covariate_sets=((),), layouts=("4t",))
        result = run_grid(grid, *frames, path)[0]

        train_frame, val_frame = frames
        window = settings.window()
        stats = compute_norm_stats(train_frame, window.value_covariates)
        train_set = build_patterns(train_frame, window, stats)
        val_set = build_patterns(val_frame, window, stats)
        fc = settings.forecaster().fit(train_set, validation=val_set)
        assert result.val_mae == pytest.approx(fc.validation_mae(val_set), abs=1e-12)
        assert not result.diverged

    def test_rerun_reproduces_everything_but_wall_time(self, tmp_path, frames):
        grid = tiny_grid(covariate_sets=((),), layouts=("4t", "2t"))
        a = run_grid(grid, *frames, tmp_path / "a.csv")
        b = run_grid(grid, *frames, tmp_path / "b.csv")
        for ra, rb in zip(a, b):
            assert ra.settings == rb.settings
            assert ra.val_mae == rb.val_mae
            assert ra.val_rmse == rb.val_rmse
            assert ra.val_smape == rb.val_smape
            assert ra.best_epoch == rb.best_epoch

    def test_parallel_jobs_match_sequential(self, tmp_path, frames):
        grid = tiny_grid(covariate_sets=((),), layouts=("4t", "2t"), epochs=1)
        seq = run_grid(grid, *frames, tmp_path / "seq.csv", jobs=1)
        par = run_grid(grid, *frames, tmp_path / "par.csv", jobs=2)
        assert [r.val_mae for r in par] == [r.val_mae for r in seq]
        assert [r.settings.trial_id for r in par] == [r.settings.trial_id for r in seq]


class TestBoxStats:
    def _results(self, maes, **setting_kw):
        out = []
        for k, mae in enumerate(maes):
            settings = TrainSettings(seed=k, **setting_kw)
            out.append(fake_result(settings, mae=mae))
        return out

    def test_linear_interpolation_quartiles(self):
        stats = box_stats(self._results([1.0, 2.0, 3.0, 4.0, 5.0]), "eta")
        assert len(stats) == 1
        s = stats[0]
        assert (s.minimum, s.q1, s.median, s.q3, s.maximum) == (1.0, 2.0, 3.0, 4.0, 5.0)

    def test_single_trial_collapses(self):
        s = box_stats(self._results([0.7]), "layout")[0]
        assert s.minimum == s.q1 == s.median == s.q3 == s.maximum == 0.7

    def test_groups_partition_the_trials(self):
        results = self._results([1.0, 2.0]) + self._results([3.0, 4.0, 5.0], eta=0.001)
        stats = box_stats(results, "eta")
        assert [s.value for s in stats] == [0.001, 0.005]
        assert sum(s.count for s in stats) == 5

    def test_diverged_trials_excluded(self):
        results = self._results([1.0, 2.0])
        results.append(
            TrialResult(TrainSettings(seed=9), float("nan"), float("nan"), float("nan"), 0, True, 0.0)
        )
        stats = box_stats(results, "eta")
        assert stats[0].count == 2

    def test_unknown_axis(self):
        with pytest.raises(ConfigError, match="axis"):
            box_stats(self._results([1.0]), "dropout")

    def test_csv_shape(self, tmp_path):
        stats = box_stats(self._results([1.0, 2.0, 3.0]), "mu")
        path = tmp_path / "box.csv"
        write_box_stats(stats, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "axis,value,count,min,q1,median,q3,max"
        assert lines[1].startswith("mu,0.001,3,")

    def test_invariant_ordering(self):
        rng = np.random.default_rng(0)
        results = self._results(list(rng.uniform(0.1, 2.0, 40)))
        s = box_stats(results, "epsilon")[0]
        assert s.minimum <= s.q1 <= s.median <= s.q3 <= s.maximum


class TestSweep:
    def test_one_member_per_size(self, frames):
        base = TrainSettings(**FAST)
        scores, members = sweep_past_sizes(base, (1, 3), *frames)
        assert [s.member_id for s in scores] == ["I1", "I3"]
        assert [s.past_size for s in scores] == [1, 3]
        assert [m.window.past_size for m in members] == [1, 3]
        spec = combine_softmax(scores)  # scores plug into the weighters as-is
        assert abs(sum(spec.weights) - 1.0) < 1e-12

    def test_member_predictions_rebuild_absolutes(self, frames):
        train_frame, val_frame = frames
        base = TrainSettings(**FAST)
        scores, members = sweep_past_sizes(base, (3,), train_frame, val_frame)
        member = members[0]
        stats = compute_norm_stats(train_frame, member.window.value_covariates)
        val_set = build_patterns(val_frame, member.window, stats)
        preds = invert_difference(member.forecaster.predict(val_set.inputs), val_set.anchors)
        assert np.isfinite(preds).all()
        assert preds.shape == val_set.absolute_targets().shape

    def test_default_sweep_has_eleven_sizes(self):
        assert search.DEFAULT_SWEEP == (1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21)

    def test_bad_sizes(self, frames):
        base = TrainSettings(**FAST)
        with pytest.raises(ConfigError):
            sweep_past_sizes(base, (), *frames)
        with pytest.raises(ConfigError):
            sweep_past_sizes(base, (3, 3), *frames)
