"""Pseudo-label structure ablation: supervision wiring and refinement per seed.

Each seed trains stage 1 once. Every stage-2 configuration of that seed then
reuses the same stage-1 checkpoint and differs only in which pseudo track
feeds which branch and whether the tracks were refined.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, field_validator

from ..car.pseudo import generate_dataset_tracks
from ..config import PseudoDirection, TrainConfig
from ..dataio.models import Dataset
from ..evaluation.report import EvalReport, evaluate
from ..evaluation.templates import TemplateType, get_report_templates
from ..exceptions import DataError
from ..training.trainer import train_stage
from .pipeline import stage_config

logger = structlog.get_logger(__name__)

ABLATION_TSV = "ablation.tsv"
ABLATION_MD = "ablation.md"
ABLATION_COLUMNS = ("direction", "car", "seed", "frame_ap", "frame_auc", "map_avg")


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


class AblationSpec(BaseModel):
    """Directions, refinement flags and seeds to cross."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    directions: Tuple[PseudoDirection, ...] = (
        PseudoDirection.NONE,
        PseudoDirection.B_TO_C,
        PseudoDirection.C_TO_B,
        PseudoDirection.SELF,
        PseudoDirection.BOTH,
    )
    car: Tuple[bool, ...] = (True, False)
    seeds: Tuple[int, ...] = (1, 2, 3)

    @field_validator("directions", mode="before")
    @classmethod
    def _parse_directions(cls, value: Any) -> Any:
        value = _split(value)
        return tuple(
            PseudoDirection.parse(v) if isinstance(v, str) else v for v in value
        )

    @field_validator("car", "seeds", mode="before")
    @classmethod
    def _parse_lists(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("directions", "car", "seeds")
    @classmethod
    def _non_empty(cls, value: Tuple[Any, ...]) -> Tuple[Any, ...]:
        if not value:
            raise ValueError("at least one value is required")
        return tuple(dict.fromkeys(value))

    def configurations(self) -> List[Tuple[PseudoDirection, Optional[bool]]]:
        """``(direction, car)`` pairs; ``none`` uses no tracks so ``car`` is None."""
        pairs: List[Tuple[PseudoDirection, Optional[bool]]] = []
        for direction in self.directions:
            if direction is PseudoDirection.NONE:
                pairs.append((direction, None))
            else:
                pairs.extend((direction, car) for car in self.car)
        return pairs


@dataclass
class AblationRow:
    direction: PseudoDirection
    car: Optional[bool]
    seed: int
    frame_ap: float
    frame_auc: float
    map_avg: float

    @classmethod
    def from_report(
        cls,
        direction: PseudoDirection,
        car: Optional[bool],
        seed: int,
        report: EvalReport,
    ) -> "AblationRow":
        return cls(
            direction, car, seed, report.frame_ap, report.frame_auc, report.map_avg
        )

    @property
    def car_label(self) -> str:
        if self.car is None:
            return "-"
        return "true" if self.car else "false"

    def as_row(self) -> str:
        metrics = (self.frame_ap, self.frame_auc, self.map_avg)
        return "\t".join(
            [self.direction.value, self.car_label, str(self.seed)]
            + [f"{v:.9g}" for v in metrics]
        )


def _config_dir(direction: PseudoDirection, car: Optional[bool]) -> str:
    if car is None:
        return f"stage2_{direction.value}"
    return f"stage2_{direction.value}_{'car' if car else 'nocar'}"


def run_seed(
    spec: AblationSpec,
    dataset: Dataset,
    cfg: TrainConfig,
    seed: int,
    seed_dir: Path,
    eval_dataset: Optional[Dataset] = None,
) -> Tuple[EvalReport, List[AblationRow]]:
    """Stage 1 once, then every stage-2 configuration for one seed."""
    eval_videos = eval_dataset if eval_dataset is not None else dataset
    cfg1 = stage_config(cfg.model_copy(update={"seed": seed}), 1)
    stage1 = train_stage(dataset, cfg1, out_dir=seed_dir)
    baseline, _ = evaluate(stage1.model, eval_videos, cfg1)

    pseudo_dirs: Dict[bool, Path] = {}
    rows: List[AblationRow] = []
    for direction, car in spec.configurations():
        pseudo_dir = None
        if car is not None:
            if car not in pseudo_dirs:
                pseudo_dirs[car] = seed_dir / ("pseudo" if car else "pseudo_nocar")
                generate_dataset_tracks(
                    stage1.model,
                    dataset,
                    cfg1.model_copy(update={"car": car}),
                    pseudo_dirs[car],
                )
            pseudo_dir = pseudo_dirs[car]
        update: Dict[str, Any] = {"stage": 2, "direction": direction}
        if car is not None:
            update["car"] = car
        cfg2 = cfg1.model_copy(update=update)
        result = train_stage(
            dataset,
            cfg2,
            out_dir=seed_dir / _config_dir(direction, car),
            pseudo_dir=pseudo_dir,
        )
        report, _ = evaluate(result.model, eval_videos, cfg2)
        rows.append(AblationRow.from_report(direction, car, seed, report))
        logger.info(
            "ablation_configuration_finished",
            seed=seed,
            direction=direction.value,
            car=car,
            frame_ap=round(report.frame_ap, 6),
        )
    return baseline, rows


def summarize(
    rows: Sequence[AblationRow], baselines: Sequence[EvalReport]
) -> Dict[str, Any]:
    """Mean and population std over seeds per configuration, in row order."""
    groups: Dict[Tuple[PseudoDirection, Optional[bool]], List[AblationRow]] = {}
    for row in rows:
        groups.setdefault((row.direction, row.car), []).append(row)
    table = []
    for (direction, _), members in groups.items():
        entry: Dict[str, Any] = {
            "direction": direction.value,
            "car": members[0].car_label,
        }
        for metric in ("frame_ap", "frame_auc", "map_avg"):
            values = np.array([getattr(m, metric) for m in members])
            entry[metric] = float(values.mean())
            entry[f"{metric}_std"] = float(values.std())
        table.append(entry)
    baseline = None
    if baselines:
        aps = np.array([b.frame_ap for b in baselines])
        baseline = {"frame_ap": float(aps.mean()), "frame_ap_std": float(aps.std())}
    return {"rows": table, "baseline": baseline}


def write_ablation_table(path: Path, rows: Sequence[AblationRow]) -> Path:
    lines = ["\t".join(ABLATION_COLUMNS)] + [row.as_row() for row in rows]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e}", path=str(path)) from e
    return path


def run_ablation(
    spec: AblationSpec,
    dataset: Dataset,
    cfg: TrainConfig,
    out_dir: Union[str, Path],
    eval_dataset: Optional[Dataset] = None,
) -> List[AblationRow]:
    """Train and evaluate every configuration; writes the TSV and markdown tables."""
    out_dir = Path(out_dir)
    logger.info(
        "ablation_started",
        configurations=len(spec.configurations()),
        seeds=list(spec.seeds),
    )
    rows: List[AblationRow] = []
    baselines: List[EvalReport] = []
    for seed in spec.seeds:
        baseline, seed_rows = run_seed(
            spec, dataset, cfg, seed, out_dir / f"seed{seed}", eval_dataset
        )
        baselines.append(baseline)
        rows.extend(seed_rows)

    order = {pair: i for i, pair in enumerate(spec.configurations())}
    rows.sort(key=lambda r: (order[(r.direction, r.car)], r.seed))
    write_ablation_table(out_dir / ABLATION_TSV, rows)
    context = summarize(rows, baselines)
    context["seeds"] = list(spec.seeds)
    get_report_templates().render_to(
        TemplateType.ABLATION, out_dir / ABLATION_MD, context
    )
    logger.info("ablation_finished", out_dir=str(out_dir), rows=len(rows))
    return rows
