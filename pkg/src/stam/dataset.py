"""Demonstration datasets: records, the demo store, JSONL io and splits.

A demonstration is a sequence of (t, target pose, follower pose) records
sharing a demo id. Serialization uses one compact JSON object per line with
floats rendered by repr, so identical data always produces identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateDemo,
    EmptyData,
    EmptyStore,
    RangeViolation,
    UnknownDemo,
)
from .grid import Pose
from .regression import to_relative

SOURCES = ("scripted", "teleop")


@dataclass(frozen=True)
class DemonstrationRecord:
    """One sim tick of a demonstration: both robot poses at time t."""

    t: float
    target: Pose
    follower: Pose
    demo_id: int
    source: str = "scripted"

    def __post_init__(self) -> None:
        if not math.isfinite(self.t):
            raise ValueError(f"record time must be finite, got {self.t}")
        if int(self.demo_id) != self.demo_id or self.demo_id < 0:
            raise ValueError(f"demo_id must be a non-negative integer, got {self.demo_id}")
        object.__setattr__(self, "demo_id", int(self.demo_id))
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")


class DemoStore:
    """Completed demonstrations keyed by id, in insertion order."""

    def __init__(self) -> None:
        self._demos: dict[int, tuple[DemonstrationRecord, ...]] = {}

    def __len__(self) -> int:
        return len(self._demos)

    def __contains__(self, demo_id: int) -> bool:
        return demo_id in self._demos

    def demo_ids(self) -> list[int]:
        return list(self._demos)

    def demo(self, demo_id: int) -> list[DemonstrationRecord]:
        try:
            return list(self._demos[demo_id])
        except KeyError as e:
            raise UnknownDemo(f"demo {demo_id} not in store") from e

    def records(self, demo_ids=None) -> list[DemonstrationRecord]:
        """All records of the selected demos (default: every demo), demo by
        demo in the given (or insertion) order."""
        ids = self.demo_ids() if demo_ids is None else list(demo_ids)
        out: list[DemonstrationRecord] = []
        for demo_id in ids:
            out.extend(self.demo(demo_id))
        return out


def append_demo(store: DemoStore, records, demo_id: int) -> DemoStore:
    """Add a completed demonstration to the store.

    The id must be new, every record must carry it, and record times must be
    strictly increasing.
    """
    records = tuple(records)
    if not records:
        raise EmptyData(f"demo {demo_id} has no records")
    if demo_id in store:
        raise DuplicateDemo(f"demo {demo_id} already in store")
    for r in records:
        if r.demo_id != demo_id:
            raise ValueError(f"record demo_id {r.demo_id} != {demo_id}")
    ts = [r.t for r in records]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError(f"demo {demo_id} times are not strictly increasing")
    store._demos[demo_id] = records
    return store


def split(
    store: DemoStore, train_fraction: float = 0.7, seed: int = 0
) -> tuple[list[DemonstrationRecord], list[DemonstrationRecord]]:
    """Seeded train/eval split, stratified per demonstration.

    Each demo is shuffled with a generator seeded by (seed, demo_id) and cut
    at floor(n * train_fraction), so a demo's train subset does not depend on
    which other demos are in the store; cumulative stores therefore produce
    nested train sets.
    """
    if not 0.0 < train_fraction < 1.0:
        raise RangeViolation(f"train_fraction must be in (0, 1), got {train_fraction}")
    if len(store) == 0:
        raise EmptyStore("cannot split an empty store")
    train: list[DemonstrationRecord] = []
    evaluation: list[DemonstrationRecord] = []
    for demo_id in store.demo_ids():
        records = store.demo(demo_id)
        rng = np.random.default_rng(np.random.SeedSequence([seed, demo_id]))
        perm = rng.permutation(len(records))
        n_train = int(len(records) * train_fraction)
        train.extend(records[i] for i in sorted(perm[:n_train]))
        evaluation.extend(records[i] for i in sorted(perm[n_train:]))
    return train, evaluation


def relative_samples(records) -> np.ndarray:
    """Stack the records' follower-in-target-frame offsets as an (n, 3)
    array of (dx, dy, dalpha) training samples."""
    records = list(records)
    if not records:
        raise EmptyData("no records to convert")
    out = np.empty((len(records), 3))
    for i, r in enumerate(records):
        rel = to_relative(r.target, r.follower)
        out[i] = (rel.dx, rel.dy, rel.dalpha)
    return out


def _pose_to_json(p: Pose) -> dict:
    return {"x": p.x, "y": p.y, "alpha": p.alpha}


def record_to_json(r: DemonstrationRecord) -> dict:
    return {
        "t": r.t,
        "target": _pose_to_json(r.target),
        "follower": _pose_to_json(r.follower),
        "demo_id": r.demo_id,
        "source": r.source,
    }


def record_from_json(obj: dict) -> DemonstrationRecord:
    return DemonstrationRecord(
        t=float(obj["t"]),
        target=Pose(**obj["target"]),
        follower=Pose(**obj["follower"]),
        demo_id=int(obj["demo_id"]),
        source=str(obj["source"]),
    )


def record_to_line(r: DemonstrationRecord) -> str:
    return json.dumps(record_to_json(r), separators=(",", ":"))


def save_records(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(record_to_line(r) + "\n")


def load_records(path) -> list[DemonstrationRecord]:
    out: list[DemonstrationRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(record_from_json(json.loads(line)))
    return out


def save_store(store: DemoStore, path) -> None:
    save_records(store.records(), path)


def load_store(path) -> DemoStore:
    """Rebuild a store from a records file, grouping by demo id in first-seen
    order; inverse of :func:`save_store`."""
    store = DemoStore()
    groups: dict[int, list[DemonstrationRecord]] = {}
    for r in load_records(path):
        groups.setdefault(r.demo_id, []).append(r)
    for demo_id, records in groups.items():
        append_demo(store, records, demo_id)
    return store
