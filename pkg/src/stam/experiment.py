"""Incremental-demonstration experiments.

For each run: generate (or load) a few demonstrations, fit a relative-pose
model on the first k of them (train split only) for k = 1..demos, and score
the model's single best predicted pose against the held-out records. The
report aggregates mean/std of the per-run mean errors across runs.
"""

from __future__ import annotations

import io as _io
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path as FsPath

import numpy as np

from .dataset import (
    DemoStore,
    append_demo,
    load_records,
    relative_samples,
    split,
)
from .errors import EmptyEval, EmptyStore
from .grid import OccupancyGrid, bordered_room, wrap_angle
from .mixtures import MixtureModel, log_pdf_many
from .regression import condition, fit_relative_model, marginal
from .sim import SimConfig, run_scripted_demo


@dataclass(frozen=True)
class ReportRow:
    demos: int
    dist_mean: float
    dist_std: float
    ang_mean: float
    ang_std: float
    runs: int


@dataclass(frozen=True)
class ExperimentReport:
    rows: tuple[ReportRow, ...]

    def to_csv(self) -> str:
        buf = _io.StringIO()
        buf.write("demos,dist_mean,dist_std,ang_mean,ang_std,runs\n")
        for r in self.rows:
            buf.write(
                f"{r.demos},{r.dist_mean!r},{r.dist_std!r},{r.ang_mean!r},{r.ang_std!r},{r.runs}\n"
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentReport":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        rows = []
        for ln in lines[1:]:
            demos, dm, ds, am, as_, runs = ln.split(",")
            rows.append(
                ReportRow(int(demos), float(dm), float(ds), float(am), float(as_), int(runs))
            )
        return cls(tuple(rows))


@dataclass(frozen=True)
class ExperimentConfig:
    runs: int = 20
    demos: int = 3
    seed: int = 0
    train_fraction: float = 0.7
    k_max: int = 8
    demo_duration: float = 20.0
    records_dir: str | None = None
    room: tuple[float, float] = (18.0, 18.0)
    resolution: float = 0.1
    sim: SimConfig = dc_field(default_factory=SimConfig)


def predicted_relative_pose(
    model: MixtureModel, window: float = 8.0, resolution: float = 0.05
) -> tuple[float, float, float]:
    """The model's single best relative pose (dx, dy, dalpha).

    Position is the mode of the positional marginal found on a regular grid
    of ``resolution`` spacing covering a window x window square around the
    target; orientation is the moment-matched conditional mean there.
    """
    centers = np.arange(-window / 2 + resolution / 2, window / 2, resolution)
    dxs, dys = np.meshgrid(centers, centers)
    pts = np.column_stack([dxs.ravel(), dys.ravel()])
    logp = log_pdf_many(marginal(model, (0, 1)), pts)
    best = int(np.argmax(logp))
    dx, dy = float(pts[best, 0]), float(pts[best, 1])
    _, fused = condition(model, (0, 1), (2,), (dx, dy))
    return dx, dy, wrap_angle(float(fused.mean[0]))


def best_pose_error(
    model: MixtureModel, records, window: float = 8.0, resolution: float = 0.05
) -> tuple[np.ndarray, np.ndarray]:
    """Distance and orientation errors of the model's best pose against
    held-out records.

    For each record the prediction is anchored at the record's target pose;
    the distance error is the absolute difference between predicted and
    recorded follower distance to the target, the angle error the absolute
    wrapped difference of the relative orientations.
    """
    records = list(records)
    if not records:
        raise EmptyEval("no evaluation records")
    dx, dy, dalpha = predicted_relative_pose(model, window, resolution)
    pred_r = math.hypot(dx, dy)
    rels = relative_samples(records)
    rec_r = np.hypot(rels[:, 0], rels[:, 1])
    dist_err = np.abs(pred_r - rec_r)
    ang_err = np.abs(
        np.array([wrap_angle(dalpha - a) for a in rels[:, 2]])
    )
    return dist_err, ang_err


def _experiment_grid(config: ExperimentConfig) -> OccupancyGrid:
    return bordered_room(config.room[0], config.room[1], config.resolution)


def _load_demo_records(config: ExperimentConfig) -> dict[int, list]:
    """Demonstration files from records_dir (sorted), keyed 1..n."""
    paths = sorted(FsPath(config.records_dir).glob("*.jsonl"))
    demos: dict[int, list] = {}
    for i, p in enumerate(paths[: config.demos], start=1):
        records = load_records(p)
        demos[i] = [
            type(r)(t=r.t, target=r.target, follower=r.follower, demo_id=i, source=r.source)
            for r in records
        ]
    return demos


def run_experiment(config: ExperimentConfig = ExperimentConfig()) -> ExperimentReport:
    """Run the incremental-demonstration study and aggregate a report.

    Every run draws fresh demonstrations (unless ``records_dir`` supplies
    fixed ones), then for k = 1..demos fits on the cumulative train split of
    the first k demos and evaluates on their held-out records. Rows report
    mean and (population) std of the per-run mean errors.
    """
    if config.runs < 1 or config.demos < 1:
        raise ValueError("runs and demos must be >= 1")
    grid = _experiment_grid(config)
    fixed = _load_demo_records(config) if config.records_dir else None
    if fixed is not None and len(fixed) < config.demos:
        raise EmptyStore(
            f"records_dir has {len(fixed)} demos, need {config.demos}"
        )
    master = np.random.SeedSequence(config.seed)
    run_seeds = master.spawn(config.runs)
    dist_means = np.empty((config.runs, config.demos))
    ang_means = np.empty((config.runs, config.demos))
    for run, rs in enumerate(run_seeds):
        demo_seeds = rs.spawn(config.demos + 2)
        split_seed = int(demo_seeds[-2].generate_state(1)[0])
        fit_seed = int(demo_seeds[-1].generate_state(1)[0])
        store = DemoStore()
        try:
            for k in range(1, config.demos + 1):
                if fixed is not None:
                    records = fixed[k]
                else:
                    records = run_scripted_demo(
                        grid,
                        seed=int(demo_seeds[k - 1].generate_state(1)[0]),
                        duration=config.demo_duration,
                        demo_id=k,
                        config=config.sim,
                    )
                append_demo(store, records, k)
            # one split of the full dataset: every k is scored against the
            # same held-out records, only the training pool grows
            train, evaluation = split(store, config.train_fraction, split_seed)
            for k in range(1, config.demos + 1):
                train_k = [r for r in train if r.demo_id <= k]
                model, _ = fit_relative_model(
                    relative_samples(train_k), k_max=config.k_max, seed=fit_seed
                )
                dist_err, ang_err = best_pose_error(model, evaluation)
                dist_means[run, k - 1] = float(dist_err.mean())
                ang_means[run, k - 1] = float(ang_err.mean())
        except Exception as e:
            raise RuntimeError(f"run {run} (demos={len(store)}) failed: {e}") from e
    rows = tuple(
        ReportRow(
            demos=k + 1,
            dist_mean=float(dist_means[:, k].mean()),
            dist_std=float(dist_means[:, k].std()),
            ang_mean=float(ang_means[:, k].mean()),
            ang_std=float(ang_means[:, k].std()),
            runs=config.runs,
        )
        for k in range(config.demos)
    )
    return ExperimentReport(rows)


def write_report(report: ExperimentReport, path) -> None:
    path = FsPath(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.to_csv())
