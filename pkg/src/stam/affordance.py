"""Affordance maps: task descriptors, signature registry and composition.

An affordance map scores every grid cell in [0, 1] by how well the
environment state affords a task there. Each registered task pairs an
evaluator (state -> field) with a versioned signature holding the learned
parameters; evaluation produces per-task fields that compose into one map.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateTask,
    EmptyInput,
    EmptyTaskSet,
    GeometryMismatch,
    InvalidParams,
    UnknownTask,
)
from .grid import OccupancyGrid, Pose, ScalarField, field_like, same_geometry
from .mixtures import MixtureModel, model_from_json, model_to_json
from .regression import density_map


@dataclass(frozen=True)
class EnvState:
    """A sim snapshot handed to evaluators: time, named entity poses and the
    occupancy grid they live in."""

    t: float
    entities: Mapping[str, Pose]
    world: OccupancyGrid


@dataclass(frozen=True)
class Task:
    """A task descriptor: a unique id plus free-form string parameters."""

    id: str
    params: Mapping[str, str] = dc_field(default_factory=dict)


@dataclass(frozen=True)
class AffordanceSignature:
    """Versioned learned parameters for one task. ``version`` starts at 1 and
    increments by 1 on every accepted update."""

    task_id: str
    version: int
    params: MixtureModel
    meta: Mapping[str, object] = dc_field(default_factory=dict)


@dataclass(frozen=True)
class AffordanceMap:
    """A composed affordance field stamped with the evaluation time and the
    ids of the tasks that produced it."""

    field: ScalarField
    t: float
    tasks: tuple[str, ...]


Evaluator = Callable[[EnvState, Task, AffordanceSignature], ScalarField]


def follow_evaluator(state: EnvState, task: Task, signature: AffordanceSignature) -> ScalarField:
    """Spatial likelihood of the follow task: the signature's relative-pose
    model evaluated around the tracked entity (task param "target",
    defaulting to the entity named "target")."""
    name = task.params.get("target", "target")
    try:
        anchor = state.entities[name]
    except KeyError as e:
        raise UnknownTask(f"state has no entity {name!r} for task {task.id!r}") from e
    return density_map(signature.params, anchor, state.world)


def signature_to_json(signature: AffordanceSignature) -> dict:
    """Wire/file form of a signature: task id, version, model and metadata."""
    return {
        "task_id": signature.task_id,
        "version": signature.version,
        "model": model_to_json(signature.params),
        "meta": dict(signature.meta),
    }


def signature_from_json(obj: dict) -> AffordanceSignature:
    try:
        return AffordanceSignature(
            task_id=str(obj["task_id"]),
            version=int(obj["version"]),
            params=model_from_json(obj["model"]),
            meta=dict(obj.get("meta", {})),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidParams(f"malformed signature JSON: {e}") from e


@dataclass
class _Entry:
    task: Task
    evaluator: Evaluator
    signature: AffordanceSignature


class AffordanceRegistry:
    """One-writer/many-reader store of task evaluators and signatures.

    Signature updates swap the whole (immutable) signature object under a
    lock, so a concurrent reader sees entirely old or entirely new
    parameters, never a mix.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._entries: dict[str, _Entry] = {}

    def __contains__(self, task_id: str) -> bool:
        with self._lock:
            return task_id in self._entries

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def task_ids(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def _entry(self, task_id: str) -> _Entry:
        try:
            return self._entries[task_id]
        except KeyError as e:
            raise UnknownTask(f"task {task_id!r} is not registered") from e

    def register(self, task: Task, evaluator: Evaluator, params: MixtureModel,
                 meta: Mapping[str, object] | None = None) -> AffordanceSignature:
        """Register a task with initial parameters; its signature starts at
        version 1. Raises DuplicateTask for an already-registered id."""
        params = _validated_params(params)
        with self._lock:
            if task.id in self._entries:
                raise DuplicateTask(f"task {task.id!r} already registered")
            sig = AffordanceSignature(task.id, 1, params, dict(meta or {}))
            self._entries[task.id] = _Entry(task, evaluator, sig)
            return sig

    def update(self, task_id: str, params: MixtureModel,
               meta: Mapping[str, object] | None = None) -> AffordanceSignature:
        """Replace a task's parameters atomically; bumps version by 1."""
        params = _validated_params(params)
        with self._lock:
            entry = self._entry(task_id)
            old = entry.signature
            sig = AffordanceSignature(
                task_id,
                old.version + 1,
                params,
                dict(old.meta if meta is None else meta),
            )
            entry.signature = sig
            return sig

    def signature(self, task_id: str) -> AffordanceSignature:
        with self._lock:
            return self._entry(task_id).signature

    def task(self, task_id: str) -> Task:
        with self._lock:
            return self._entry(task_id).task

    def snapshot(self, task_id: str) -> tuple[Task, Evaluator, AffordanceSignature]:
        """A consistent (task, evaluator, signature) triple for evaluation."""
        with self._lock:
            entry = self._entry(task_id)
            return entry.task, entry.evaluator, entry.signature


def _validated_params(params) -> MixtureModel:
    if isinstance(params, MixtureModel):
        return params
    if isinstance(params, dict):
        try:
            return model_from_json(params)
        except Exception as e:
            raise InvalidParams(f"parameters failed validation: {e}") from e
    raise InvalidParams(f"unsupported parameter type {type(params).__name__}")


def register_descriptor(
    registry: AffordanceRegistry,
    task: Task,
    evaluator: Evaluator,
    params: MixtureModel,
    meta: Mapping[str, object] | None = None,
) -> AffordanceSignature:
    return registry.register(task, evaluator, params, meta)


def update_signature(
    registry: AffordanceRegistry,
    task_id: str,
    params: MixtureModel,
    meta: Mapping[str, object] | None = None,
) -> AffordanceSignature:
    return registry.update(task_id, params, meta)


def evaluate_sta(
    registry: AffordanceRegistry, state: EnvState, task_ids: Sequence[str]
) -> AffordanceMap:
    """Evaluate each requested task against ``state`` and compose the
    per-task fields into one affordance map stamped with ``state.t``."""
    ids = list(task_ids)
    if not ids:
        raise EmptyTaskSet("no tasks requested")
    maps = []
    for task_id in ids:
        task, evaluator, signature = registry.snapshot(task_id)
        fld = evaluator(state, task, signature)
        maps.append(AffordanceMap(fld, state.t, (task_id,)))
    return compose(maps)


def compose(maps: Sequence[AffordanceMap], weights: Sequence[float] | None = None,
            method: str = "geometric") -> AffordanceMap:
    """Fuse per-task affordance maps into one.

    ``geometric`` (default) multiplies per-cell values raised to their task
    weights, so any task scoring a cell 0 vetoes it; ``arithmetic`` takes the
    weighted mean instead. Either way the result is max-normalized back to
    [0, 1] (identity for a single already-normalized map). Weights default
    to 1 per map and must be positive.
    """
    maps = list(maps)
    if not maps:
        raise EmptyInput("compose needs at least one map")
    first = maps[0].field
    for m in maps[1:]:
        if not same_geometry(first, m.field):
            raise GeometryMismatch("affordance maps differ in geometry")
    if weights is None:
        w = [1.0] * len(maps)
    else:
        w = [float(v) for v in weights]
        if len(w) != len(maps):
            raise EmptyInput(f"{len(w)} weights for {len(maps)} maps")
        if any(v <= 0.0 for v in w):
            raise ValueError("compose weights must be positive")
    if method == "geometric":
        # unit weights skip the pow so a lone normalized map passes through
        # bit-exact
        def powed(values: np.ndarray, wi: float) -> np.ndarray:
            return values if wi == 1.0 else values**wi

        combined = powed(maps[0].field.values, w[0])
        for m, wi in zip(maps[1:], w[1:]):
            combined = combined * powed(m.field.values, wi)
    elif method == "arithmetic":
        combined = sum(m.field.values * wi for m, wi in zip(maps, w)) / sum(w)
    else:
        raise ValueError(f"unknown compose method {method!r}")
    peak = float(combined.max())
    if peak > 0.0 and peak != 1.0:
        combined = combined / peak
    tasks: list[str] = []
    for m in maps:
        for tid in m.tasks:
            if tid not in tasks:
                tasks.append(tid)
    t = max(m.t for m in maps)
    return AffordanceMap(field_like(first, combined), t, tuple(tasks))
