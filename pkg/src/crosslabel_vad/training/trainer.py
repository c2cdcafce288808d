"""Seeded mini-batch training of one stage."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from ..car.pseudo import read_pseudo_tracks, pseudo_path
from ..config import PseudoDirection, TrainConfig
from ..dataio.models import Dataset, FeatureSequence
from ..diffcore import OptimState, adam_step, forward_backward
from ..error_handler import get_error_handler
from ..exceptions import NonFiniteError, PreconditionError
from ..model.network import CrossLabelModel
from ..model.pyramid import resample_to_n
from ..monitoring import EpochSummary, TrainingMonitor
from .losses import video_loss

logger = structlog.get_logger(__name__)

Grads = Dict[str, np.ndarray]
PseudoArrays = Tuple[np.ndarray, np.ndarray]


@dataclass
class TrainingSample:
    """A video prepared for training: resampled features plus supervision."""

    video_id: str
    features: np.ndarray  # n x d, float32
    labels: Tuple[int, ...]
    binary: int
    pseudo: Optional[PseudoArrays] = None


@dataclass
class TrainResult:
    model: CrossLabelModel
    history: List[EpochSummary] = field(default_factory=list)
    report: Dict[str, Any] = field(default_factory=dict)
    checkpoint: Optional[Path] = None


def checkpoint_name(stage: int) -> str:
    return f"stage{stage}.ckpt"


def log_name(stage: int) -> str:
    return f"train_stage{stage}.log.tsv"


def prepare_samples(
    videos: Sequence[FeatureSequence],
    cfg: TrainConfig,
    pseudo_dir: Optional[Union[str, Path]] = None,
) -> List[TrainingSample]:
    """Resample every video to ``n`` and attach pseudo tracks when given.

    Abnormal videos must have a track in ``pseudo_dir``; normal videos fall
    back to all-zero tracks when theirs is absent.
    """
    samples = []
    for video in videos:
        pseudo: Optional[PseudoArrays] = None
        if pseudo_dir is not None:
            missing = not pseudo_path(pseudo_dir, video.video_id).is_file()
            if video.is_normal and missing:
                pseudo = (np.zeros(cfg.n), np.zeros(cfg.n))
            else:
                b, c = read_pseudo_tracks(pseudo_dir, video.video_id, cfg.n)
                pseudo = (b.values, c.values)
        samples.append(
            TrainingSample(
                video_id=video.video_id,
                features=resample_to_n(video.features, cfg.n, cfg.levels).astype(
                    np.float32
                ),
                labels=tuple(sorted(video.video_labels)),
                binary=video.binary_label,
                pseudo=pseudo,
            )
        )
    return samples


def balanced_order(
    binary: np.ndarray, rng: np.random.Generator, balance: bool = True
) -> np.ndarray:
    """Shuffled epoch order; with ``balance`` the minority class is resampled 1:1."""
    order = np.arange(binary.shape[0])
    if balance:
        normal = order[binary == 0]
        abnormal = order[binary == 1]
        if normal.size and abnormal.size and normal.size != abnormal.size:
            minority, majority = sorted((normal, abnormal), key=lambda a: a.size)
            extra = rng.choice(minority, majority.size - minority.size, replace=True)
            order = np.concatenate([order, extra])
    return rng.permutation(order)


def video_gradients(
    model: CrossLabelModel,
    sample: TrainingSample,
    cfg: TrainConfig,
    direction: PseudoDirection,
) -> Tuple[Dict[str, float], Grads]:
    """Loss terms and parameter gradients of one video."""
    record: Dict[str, float] = {}

    def objective(p):  # type: ignore[no-untyped-def]
        outputs = model.forward(p, sample.features)
        breakdown = video_loss(
            outputs, sample.labels, cfg.loss, cfg.n, direction, sample.pseudo
        )
        record.update(breakdown.values())
        return breakdown.total

    _, grads = forward_backward(objective, model.params)
    return record, grads


def train_stage(
    dataset: Union[Dataset, Sequence[FeatureSequence]],
    cfg: TrainConfig,
    out_dir: Optional[Union[str, Path]] = None,
    pseudo_dir: Optional[Union[str, Path]] = None,
) -> TrainResult:
    """Train a fresh seeded model for ``cfg.stage``.

    Stage 1 minimizes the video-level terms only. Stage 2 adds the focal terms
    wired by ``cfg.direction`` and needs ``pseudo_dir`` unless the direction is
    ``none``. A checkpoint is written after every epoch when ``out_dir`` is set.
    """
    direction = cfg.direction if cfg.stage == 2 else PseudoDirection.NONE
    if cfg.stage == 2 and direction is not PseudoDirection.NONE and pseudo_dir is None:
        raise PreconditionError(
            "Stage 2 needs pseudo tracks: pass --pseudo-dir", flag="--pseudo-dir"
        )
    if direction is PseudoDirection.NONE:
        pseudo_dir = None
    if len(dataset) == 0:
        raise PreconditionError("Cannot train on an empty dataset")

    videos = list(dataset)
    dim_in = videos[0].dim
    num_categories = (
        dataset.num_categories
        if isinstance(dataset, Dataset)
        else 1 + max(max(v.video_labels) for v in videos)
    )
    samples = prepare_samples(videos, cfg, pseudo_dir)
    binary = np.array([s.binary for s in samples])

    model = CrossLabelModel.initialize(dim_in, num_categories, cfg, seed=cfg.seed)
    state = OptimState.for_params(
        model.params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )
    rng = np.random.default_rng(cfg.seed)
    out_path = Path(out_dir) if out_dir is not None else None
    monitor = TrainingMonitor(
        stage=cfg.stage, log_path=out_path / log_name(cfg.stage) if out_path else None
    )
    handler = get_error_handler()
    checkpoint = out_path / checkpoint_name(cfg.stage) if out_path else None

    logger.info(
        "training_started",
        stage=cfg.stage,
        videos=len(samples),
        epochs=cfg.epochs,
        direction=direction.value,
        car=cfg.car,
        seed=cfg.seed,
    )
    executor = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = balanced_order(binary, rng, cfg.balance)
            size = cfg.batch_size
            batches = [order[i : i + size] for i in range(0, order.size, size)]
            for batch_id, batch in enumerate(batches, 1):
                monitor.start_batch()
                batch_samples = [samples[i] for i in batch]
                try:
                    if executor is not None:
                        results = list(
                            executor.map(
                                lambda s: video_gradients(model, s, cfg, direction),
                                batch_samples,
                            )
                        )
                    else:
                        results = [
                            video_gradients(model, s, cfg, direction)
                            for s in batch_samples
                        ]
                    model.params.zero_grad()
                    for _, grads in results:
                        model.params.accumulate(grads)
                    scale = 1.0 / len(results)
                    for param in model.params:
                        param.grad *= scale
                    adam_step(model.params, state)
                except NonFiniteError as e:
                    monitor.record_non_finite(e.message)
                    raise handler.handle_non_finite(
                        e.op or "unknown", epoch=epoch, batch=batch_id
                    ) from e
                monitor.record_batch([record for record, _ in results])
            monitor.end_epoch(epoch)
            if checkpoint is not None:
                model.save(checkpoint)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    model.trained = True
    report = monitor.get_training_report()
    logger.info(
        "training_finished",
        stage=cfg.stage,
        first_total_loss=report["first_total_loss"],
        last_total_loss=report["last_total_loss"],
    )
    return TrainResult(
        model=model,
        history=list(monitor.metrics.epochs),
        report=report,
        checkpoint=checkpoint,
    )
