"""Tests for stage training, multi-scale inference and the training monitor."""

import numpy as np
import pytest

from src.crosslabel_vad.car import generate_dataset_tracks
from src.crosslabel_vad.config import PseudoDirection, SynthConfig, TrainConfig
from src.crosslabel_vad.dataio import FeatureSequence, synthesize
from src.crosslabel_vad.exceptions import MissingPseudoTrackError, PreconditionError
from src.crosslabel_vad.model import CrossLabelModel
from src.crosslabel_vad.monitoring import LOG_COLUMNS, TrainingMonitor
from src.crosslabel_vad.training import (
    aggregate_inference,
    balanced_order,
    checkpoint_name,
    combine_levels,
    log_name,
    train_stage,
    write_scores,
)

TINY_SYNTH = SynthConfig(
    num_videos=6,
    dim=4,
    num_categories=3,
    min_length=24,
    max_length=32,
    min_segment=4,
    max_segment=6,
    seed=3,
)


def _tiny_cfg(**update):
    cfg = TrainConfig(levels=2, n=16, hidden_dim=4, epochs=2, batch_size=3, lr=1e-3)
    return cfg.model_copy(update=update)


def _interpolate(values, t, n):
    # value at output snippet t when resampling len(values) points to n
    if len(values) == 1 or n == 1:
        return values[0]
    position = t * (len(values) - 1) / (n - 1)
    lower = min(int(position), len(values) - 2)
    frac = position - lower
    return (1.0 - frac) * values[lower] + frac * values[lower + 1]


class TestBalancedOrder:
    """Tests for the per-epoch sampling order."""

    def test_minority_is_resampled(self):
        """Test both classes appear equally often with balancing on."""
        binary = np.array([0, 0, 0, 0, 1])

        order = balanced_order(binary, np.random.default_rng(0))

        assert order.size == 8
        assert (binary[order] == 1).sum() == 4
        assert set(order[binary[order] == 0]) == {0, 1, 2, 3}

    def test_without_balance_is_permutation(self):
        """Test balancing off yields each video exactly once."""
        order = balanced_order(np.array([0, 0, 1]), np.random.default_rng(0), False)
        assert sorted(order.tolist()) == [0, 1, 2]

    def test_same_seed_same_order(self):
        """Test the order is a pure function of the generator state."""
        binary = np.array([0, 1, 1, 0, 0, 0])
        a = balanced_order(binary, np.random.default_rng(9))
        b = balanced_order(binary, np.random.default_rng(9))
        np.testing.assert_array_equal(a, b)


class TestTrainStage:
    """Tests for seeded training of one stage."""

    @pytest.fixture
    def dataset(self):
        """Six short synthetic videos, three of them abnormal."""
        return synthesize(TINY_SYNTH)

    def test_artifacts_written(self, dataset, tmp_path):
        """Test a run leaves a checkpoint and one log row per epoch."""
        result = train_stage(dataset, _tiny_cfg(), out_dir=tmp_path)

        assert result.model.trained
        assert result.checkpoint == tmp_path / checkpoint_name(1)
        assert result.checkpoint.is_file()
        lines = (tmp_path / log_name(1)).read_text().splitlines()
        assert lines[0].split("\t") == list(LOG_COLUMNS)
        assert [line.split("\t")[0] for line in lines[1:]] == ["1", "2"]
        assert result.report["epochs"] == 2
        assert all(e.focal == 0.0 for e in result.history)

    def test_same_seed_same_checkpoint(self, dataset, tmp_path):
        """Test identical settings give byte-identical checkpoints."""
        train_stage(dataset, _tiny_cfg(), out_dir=tmp_path / "a")
        train_stage(dataset, _tiny_cfg(), out_dir=tmp_path / "b")

        a = (tmp_path / "a" / checkpoint_name(1)).read_bytes()
        b = (tmp_path / "b" / checkpoint_name(1)).read_bytes()
        assert a == b

    def test_worker_threads_do_not_change_result(self, dataset, tmp_path):
        """Test per-video gradient threads reproduce the sequential checkpoint."""
        train_stage(dataset, _tiny_cfg(), out_dir=tmp_path / "one")
        train_stage(dataset, _tiny_cfg(workers=3), out_dir=tmp_path / "three")

        one = (tmp_path / "one" / checkpoint_name(1)).read_bytes()
        three = (tmp_path / "three" / checkpoint_name(1)).read_bytes()
        assert one == three

    def test_total_loss_decreases(self, dataset):
        """Test the last epoch has a lower mean total loss than the first."""
        cfg = _tiny_cfg(hidden_dim=8, epochs=12, lr=3e-3)

        result = train_stage(dataset, cfg)

        assert result.history[-1].total < result.history[0].total

    def test_stage_two_needs_pseudo_dir(self, dataset):
        """Test stage 2 with a pseudo direction but no tracks is a usage error."""
        with pytest.raises(PreconditionError) as exc_info:
            train_stage(dataset, _tiny_cfg(stage=2))
        assert exc_info.value.flag == "--pseudo-dir"
        assert exc_info.value.exit_code == 1

    def test_stage_two_without_direction_needs_no_tracks(self, dataset):
        """Test direction none trains stage 2 from video labels alone."""
        cfg = _tiny_cfg(stage=2, direction=PseudoDirection.NONE, epochs=1)
        result = train_stage(dataset, cfg)
        assert result.history[0].focal == 0.0

    def test_stage_two_uses_focal_term(self, dataset, tmp_path):
        """Test stage 2 with tracks reports a positive focal loss."""
        stage1 = train_stage(dataset, _tiny_cfg(epochs=1))
        generate_dataset_tracks(stage1.model, dataset, _tiny_cfg(), tmp_path)

        result = train_stage(dataset, _tiny_cfg(stage=2, epochs=1), pseudo_dir=tmp_path)

        assert result.history[0].focal > 0.0

    def test_missing_abnormal_track(self, dataset, tmp_path):
        """Test an abnormal video without a track file stops stage 2."""
        with pytest.raises(MissingPseudoTrackError):
            train_stage(dataset, _tiny_cfg(stage=2), pseudo_dir=tmp_path)

    def test_empty_dataset(self):
        """Test training on nothing is rejected."""
        with pytest.raises(PreconditionError):
            train_stage([], _tiny_cfg())


class TestInference:
    """Tests for multi-scale score aggregation."""

    def test_zero_logits(self):
        """Test zero logits give S_ab 0.5 and uniform category scores."""
        b_levels = [np.zeros((8, 1)), np.zeros((4, 1))]
        c_levels = [np.zeros((8, 3)), np.zeros((4, 3))]

        result = combine_levels(b_levels, c_levels, 8)

        np.testing.assert_allclose(result.s_ab, np.full(8, 0.5))
        np.testing.assert_allclose(result.s_cls, np.full((8, 3), 1 / 3))

    def test_levels_are_averaged_before_squashing(self):
        """Test logits are averaged over levels, then passed through the sigmoid."""
        result = combine_levels(
            [np.full((4, 1), 2.0), np.full((2, 1), -1.0)], [np.zeros((4, 2))] * 2, 4
        )
        np.testing.assert_allclose(result.s_ab, np.full(4, 1 / (1 + np.exp(-0.5))))

    def test_matches_straight_line_oracle(self):
        """Test S_ab and S_cls against per-snippet interpolation on 100 pyramids."""
        rng = np.random.default_rng(21)
        for trial in range(100):
            levels = 2 if trial < 50 else int(rng.integers(3, 7))
            n = 2 ** (levels - 1) * int(rng.integers(1, 5))
            m = int(rng.integers(2, 6))
            lengths = [n // 2**i for i in range(levels)]
            b_levels = [rng.normal(0.0, 3.0, (t, 1)) for t in lengths]
            c_levels = [rng.normal(0.0, 3.0, (t, m)) for t in lengths]

            result = combine_levels(b_levels, c_levels, n)

            for t in range(n):
                b_sum, c_sum = 0.0, np.zeros(m)
                for b, c in zip(b_levels, c_levels):
                    b_sum += _interpolate(b[:, 0], t, n)
                    c_sum = c_sum + _interpolate(c, t, n)
                c_mean = c_sum / levels
                expected_cls = np.exp(c_mean - c_mean.max())
                expected_cls /= expected_cls.sum()
                expected_ab = 1.0 / (1.0 + np.exp(-b_sum / levels))
                assert abs(result.s_ab[t] - expected_ab) <= 1e-9
                np.testing.assert_allclose(result.s_cls[t], expected_cls, atol=1e-9)
            np.testing.assert_allclose(result.s_cls.sum(axis=1), 1.0, atol=1e-6)

    def test_model_scores_are_distributions(self):
        """Test inference on a real model yields valid score ranges."""
        dataset = synthesize(TINY_SYNTH)
        model = train_stage(dataset, _tiny_cfg(epochs=1)).model

        result = aggregate_inference(model, dataset[0], 16)

        assert result.n == 16
        assert np.all((result.s_ab > 0) & (result.s_ab < 1))
        np.testing.assert_allclose(result.s_cls.sum(axis=1), 1.0, atol=1e-9)

    def test_zero_feature_rows_are_reported(self):
        """Test snippets with all-zero features are reported per level."""
        cfg = TrainConfig(levels=2, n=8, hidden_dim=3)
        model = CrossLabelModel.initialize(3, 4, cfg, identity_encoder=True)
        features = np.ones((8, 3))
        features[4:6] = 0.0

        result = aggregate_inference(model, FeatureSequence("v", features), 8)

        assert result.zero_norm_rows == {1: [4, 5], 2: [2]}
        np.testing.assert_allclose(result.s_cls.sum(axis=1), 1.0, atol=1e-6)

    def test_scores_file(self, tmp_path):
        """Test the scores file names its category columns."""
        result = combine_levels([np.zeros((2, 1))], [np.zeros((2, 2))], 2, "vid_0")

        path = write_scores(tmp_path, result, {0: "normal", 1: "riot"})

        lines = path.read_text().splitlines()
        assert lines[0] == "snippet\tS_ab\tS_cls_normal\tS_cls_riot"
        assert lines[1] == "0\t0.5\t0.5\t0.5"


class TestTrainingMonitor:
    """Tests for epoch summaries and the loss log."""

    def test_epoch_means_and_log(self, tmp_path):
        """Test epoch rows average the recorded per-video terms."""
        log = tmp_path / "train.log.tsv"
        monitor = TrainingMonitor(stage=2, log_path=log)
        monitor.start_batch()
        monitor.record_batch(
            [
                {"bce": 1.0, "nce": 2.0, "focal": 0.5, "total": 3.5},
                {"bce": 3.0, "nce": 2.0, "focal": 1.5, "total": 6.5},
            ]
        )

        summary = monitor.end_epoch(1)

        assert (summary.bce, summary.focal, summary.total) == (2.0, 1.0, 5.0)
        assert log.read_text().splitlines()[1] == "1\t2\t2\t1\t5"
        report = monitor.get_training_report()
        assert report["first_total_loss"] == 5.0
        assert report["batches"] == 1

    def test_non_finite_events_are_counted(self):
        """Test non-finite notices are kept in the report."""
        monitor = TrainingMonitor()
        for i in range(12):
            monitor.record_non_finite(f"nan in op {i}")

        report = monitor.get_training_report()

        assert report["non_finite_events"] == 12
        assert len(monitor.metrics.recent_errors) == 10
        assert report["recent_errors"][-1].endswith("nan in op 11")
