"""Episode-log metrics and CSV/JSON export."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

from .algos.train import EpisodeRecord, TrainingLog

CSV_HEADER = [
    "episode",
    "mean_step_reward",
    "collision",
    "success_rate",
    "mean_speed",
    "epsilon",
    "loss_critic",
    "loss_actor",
]


@dataclass
class MetricsRecord:
    mean_episode_reward: float
    collision_rate: float
    success_rate: float
    mean_speed: float

    def to_dict(self) -> dict:
        return asdict(self)


def compute_metrics(records: list[EpisodeRecord]) -> MetricsRecord:
    """Aggregate per-episode records: mean of per-step reward means, fraction
    of episodes ending in collision, mean per-episode success fraction, and
    the mean of per-episode mean speeds."""
    if not records:
        raise ValueError("compute_metrics needs at least one episode record")
    n = len(records)
    return MetricsRecord(
        mean_episode_reward=sum(r.mean_step_reward for r in records) / n,
        collision_rate=sum(r.collision for r in records) / n,
        success_rate=sum(r.success_rate for r in records) / n,
        mean_speed=sum(r.mean_speed for r in records) / n,
    )


def export_metrics(log: TrainingLog, path: str | Path) -> Path:
    """Write the per-episode CSV plus a summary JSON next to it; returns the
    CSV path. Floats are written with repr so a round-trip parse is exact."""
    if not log.records:
        raise ValueError("refusing to export an empty log")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in log.records:
            writer.writerow(
                [
                    r.episode,
                    repr(r.mean_step_reward),
                    r.collision,
                    repr(r.success_rate),
                    repr(r.mean_speed),
                    repr(r.epsilon),
                    repr(r.loss_critic),
                    repr(r.loss_actor),
                ]
            )
    summary = compute_metrics(log.records).to_dict()
    summary.update({"algo": log.algo, "scenario": log.scenario, "seed": log.seed, "episodes": len(log.records)})
    path.with_suffix(".summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return path


def read_metrics_csv(path: str | Path) -> list[EpisodeRecord]:
    records = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        for row in reader:
            records.append(
                EpisodeRecord(
                    episode=int(row["episode"]),
                    mean_step_reward=float(row["mean_step_reward"]),
                    collision=int(row["collision"]),
                    success_rate=float(row["success_rate"]),
                    mean_speed=float(row["mean_speed"]),
                    epsilon=float(row["epsilon"]),
                    loss_critic=float(row["loss_critic"]),
                    loss_actor=float(row["loss_actor"]),
                )
            )
    return records
