"""Per-state accuracy reports and the average incremental accuracy metric.

Accuracies are micro-averaged (per sample). Classes introduced in the
current state count as "new", everything seen earlier as "past"; the overall
top-1 of a state is exactly the count-weighted combination of the two.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ContractError

CSV_COLUMNS = ("state_idx", "seen_classes", "top1", "past_top1", "new_top1")


@dataclass(frozen=True)
class StateReport:
    state_idx: int
    seen_class_count: int
    top1: float
    past_top1: float | None
    new_top1: float
    per_class_correct: dict[int, tuple[int, int]]
    new_classes: tuple[int, ...]


def _micro(per_class: Mapping[int, tuple[int, int]], classes: Iterable[int]):
    correct = total = 0
    for c in classes:
        got, count = per_class[c]
        correct += got
        total += count
    return correct, total


def split_past_new(per_class_correct: Mapping[int, tuple[int, int]],
                   current_state_classes: Iterable[int]):
    """Micro-averaged accuracy over (past, new) partitions.

    past_top1 is None when no past classes exist (state 0).
    """
    new_set = set(current_state_classes)
    past_set = set(per_class_correct) - new_set
    if new_set - set(per_class_correct):
        raise ContractError("split_past_new: new classes missing from tallies")
    new_c, new_t = _micro(per_class_correct, sorted(new_set))
    new_top1 = new_c / new_t if new_t else 0.0
    if not past_set:
        return None, new_top1
    past_c, past_t = _micro(per_class_correct, sorted(past_set))
    return past_c / past_t, new_top1


def build_state_report(state_idx: int,
                       per_class_correct: Mapping[int, tuple[int, int]],
                       new_classes: Iterable[int]) -> StateReport:
    new_classes = tuple(sorted(new_classes))
    correct, total = _micro(per_class_correct, per_class_correct)
    if total == 0:
        raise ContractError("state report: no test samples")
    past_top1, new_top1 = split_past_new(per_class_correct, new_classes)
    return StateReport(state_idx=state_idx,
                       seen_class_count=len(per_class_correct),
                       top1=correct / total,
                       past_top1=past_top1,
                       new_top1=new_top1,
                       per_class_correct=dict(per_class_correct),
                       new_classes=new_classes)


def average_incremental_accuracy(reports: list[StateReport]) -> float:
    """Unweighted mean of per-state top-1 over all states, state 0 included."""
    if not reports:
        raise ContractError("average over empty report list")
    return sum(r.top1 for r in reports) / len(reports)


def write_states_csv(path, reports: list[StateReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow([
                r.state_idx, r.seen_class_count, repr(r.top1),
                "" if r.past_top1 is None else repr(r.past_top1),
                repr(r.new_top1),
            ])


def read_states_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "state_idx": int(row["state_idx"]),
                "seen_classes": int(row["seen_classes"]),
                "top1": float(row["top1"]),
                "past_top1": None if row["past_top1"] == "" else float(row["past_top1"]),
                "new_top1": float(row["new_top1"]),
            })
    return rows


def write_summary_json(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(summary, indent=2) + "\n")
