"""Experiment report structures and their serialized forms.

Reports are dual-emitted: JSON for machines, a delimited table for humans.
Both embed the full configuration echo. Wall-clock time is kept on the
in-memory report (and printed by the CLI) but deliberately left out of the
serialized forms so identical configurations produce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

TABLE_COLUMNS = ("epoch", "w", "mean_k", "train_loss", "val_loss", "test_map", "score")


@dataclass(frozen=True)
class EpochRow:
    epoch: int
    w: float
    mean_k: float
    train_loss: float
    val_loss: float
    test_map: float
    score: float


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    backend: str
    rows: tuple[EpochRow, ...]
    best_epoch: int | None
    best_score: float | None
    final_test_map: float
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": dict(self.config),
            "backend": self.backend,
            "epochs": [
                {
                    "epoch": r.epoch,
                    "w": r.w,
                    "mean_k": r.mean_k,
                    "train_loss": r.train_loss,
                    "val_loss": r.val_loss,
                    "test_map": r.test_map,
                    "score": r.score,
                }
                for r in self.rows
            ],
            "best_epoch": self.best_epoch,
            "best_score": self.best_score,
            "final_test_map": self.final_test_map,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        lines = ["\t".join(TABLE_COLUMNS)]
        for r in self.rows:
            lines.append(
                f"{r.epoch}\t{r.w:.6f}\t{r.mean_k:.6f}\t{r.train_loss:.6f}"
                f"\t{r.val_loss:.6f}\t{r.test_map:.6f}\t{r.score:.6f}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        data = json.loads(text)
        rows = tuple(
            EpochRow(
                int(e["epoch"]), float(e["w"]), float(e["mean_k"]),
                float(e["train_loss"]), float(e["val_loss"]),
                float(e["test_map"]), float(e["score"]),
            )
            for e in data["epochs"]
        )
        return cls(
            config=data.get("config", {}),
            backend=data.get("backend", "unknown"),
            rows=rows,
            best_epoch=data.get("best_epoch"),
            best_score=data.get("best_score"),
            final_test_map=float(data.get("final_test_map", 0.0)),
        )
