"""Benchmarks for the training and evaluation hot paths using pytest-benchmark."""

import numpy as np
import pytest

from src.crosslabel_vad.car import aggregate_scales, temporal_refine
from src.crosslabel_vad.config import (
    PseudoDirection,
    RefineConfig,
    SynthConfig,
    TrainConfig,
)
from src.crosslabel_vad.dataio import decode_features, encode_features, synthesize
from src.crosslabel_vad.evaluation import frame_ap, frame_auc
from src.crosslabel_vad.model import CrossLabelModel
from src.crosslabel_vad.training import aggregate_inference
from src.crosslabel_vad.training.trainer import prepare_samples, video_gradients


@pytest.mark.performance
class TestPerformanceBenchmarks:
    """Performance benchmarks for core functionality."""

    @pytest.fixture
    def cfg(self):
        """Default pyramid depth and length with a narrow encoder."""
        return TrainConfig(hidden_dim=16)

    @pytest.fixture
    def dataset(self):
        """A handful of full-length synthetic videos."""
        return synthesize(SynthConfig(num_videos=4, dim=32, seed=1))

    @pytest.fixture
    def model(self, dataset, cfg):
        """A model marked trained so inference paths accept it."""
        model = CrossLabelModel.initialize(dataset[0].dim, 7, cfg)
        model.trained = True
        return model

    def test_video_gradient_performance(self, benchmark, dataset, model, cfg):
        """Benchmark one forward and backward pass over a full pyramid."""
        sample = prepare_samples([dataset[1]], cfg)[0]

        record, grads = benchmark(
            video_gradients, model, sample, cfg, PseudoDirection.NONE
        )

        assert np.isfinite(record["total"])
        assert set(grads) == {p.name for p in model.params}

    def test_inference_performance(self, benchmark, dataset, model, cfg):
        """Benchmark multi-scale inference on one video."""
        result = benchmark(aggregate_inference, model, dataset[0], cfg.n)
        assert result.s_ab.shape == (cfg.n,)

    def test_refinement_performance(self, benchmark):
        """Benchmark scale fusion followed by temporal refinement."""
        rng = np.random.default_rng(0)
        tracks = rng.uniform(size=(6, 192))
        cfg = RefineConfig()

        def refine():
            return temporal_refine(aggregate_scales(tracks, cfg), cfg)

        refined = benchmark(refine)
        assert refined.values.shape == (192,)

    def test_frame_metric_performance(self, benchmark):
        """Benchmark frame AP and AUC on a large snippet pool."""
        rng = np.random.default_rng(1)
        scores = rng.uniform(size=100_000)
        labels = (rng.uniform(size=100_000) < 0.1).astype(int)

        def metrics():
            return frame_ap(scores, labels), frame_auc(scores, labels)

        ap, auc = benchmark(metrics)

        assert 0.0 < ap < 1.0
        assert 0.4 < auc < 0.6

    def test_feature_codec_performance(self, benchmark):
        """Benchmark decoding a long feature file."""
        features = np.random.default_rng(2).normal(size=(2000, 512)).astype(np.float32)
        blob = encode_features(features)

        decoded = benchmark(decode_features, blob)

        np.testing.assert_array_equal(decoded, features)
