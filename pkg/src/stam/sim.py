"""Deterministic 2D two-robot simulator.

Both robots are unicycles integrated with an explicit Euler step. A step that
would land a robot in collision (or out of the map) keeps its position and
still applies the heading update. All randomness comes from numpy generators
spawned off a single run seed, so a whole run is reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .affordance import AffordanceRegistry, EnvState, Task, evaluate_sta
from .dataset import DemonstrationRecord
from .errors import BadBand, NoAffordantRegion, OutOfBounds, StamError, Unreachable
from .grid import (
    OccupancyGrid,
    Pose,
    cell_to_world,
    normalize_costmap,
    obstacle_distances,
    world_to_cell,
    wrap_angle,
)
from .planner import GoalStrategy, gainmap, plan_path, select_goal


@dataclass(frozen=True)
class Cmd:
    """A velocity command: forward speed v (m/s) and turn rate omega (rad/s)."""

    v: float
    omega: float


HOLD = Cmd(0.0, 0.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05
    v_max: float = 1.0
    omega_max: float = 2.0
    robot_radius: float = 0.15
    d_min: float = 1.0
    d_max: float = 3.0
    heading_gain: float = 2.0
    waypoint_tolerance: float = 0.2
    waypoint_timeout: float = 15.0
    expert_jitter: float = 0.05
    control_epoch: float = 0.5
    inflation_radius: float = 0.4
    lam: float = 0.5

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.v_max <= 0.0 or self.omega_max <= 0.0:
            raise ValueError("dt, v_max and omega_max must be positive")
        if not 0.0 < self.d_min < self.d_max:
            raise BadBand(f"need 0 < d_min < d_max, got [{self.d_min}, {self.d_max}]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class RobotState:
    """Pose plus the last commanded velocities (stored post-clamp)."""

    pose: Pose
    v: float = 0.0
    omega: float = 0.0
    radius: float = 0.15
    collided: bool = False


@dataclass(frozen=True, eq=False)
class SimWorld:
    grid: OccupancyGrid
    target: RobotState
    follower: RobotState
    t: float
    seed: int
    config: SimConfig
    # cached distance from each cell center to the nearest obstacle (m)
    clearance: np.ndarray = dc_field(repr=False)


def make_world(
    grid: OccupancyGrid,
    target: Pose,
    follower: Pose,
    config: SimConfig = SimConfig(),
    seed: int = 0,
) -> SimWorld:
    clearance = obstacle_distances(grid)
    world = SimWorld(
        grid=grid,
        target=RobotState(target, radius=config.robot_radius),
        follower=RobotState(follower, radius=config.robot_radius),
        t=0.0,
        seed=seed,
        config=config,
        clearance=clearance,
    )
    for name, state in (("target", world.target), ("follower", world.follower)):
        if not pose_is_free(world, state.pose.x, state.pose.y, state.radius):
            raise ValueError(f"{name} initial pose {state.pose} is in collision")
    return world


def pose_is_free(world: SimWorld, x: float, y: float, radius: float) -> bool:
    """True when (x, y) is inside the map and farther than ``radius`` from
    the nearest obstacle."""
    try:
        col, row = world_to_cell((x, y), world.grid)
    except OutOfBounds:
        return False
    return bool(world.clearance[row, col] > radius)


def _clamp(value: float, limit: float) -> float:
    return max(-limit, min(limit, value))


def _advance(world: SimWorld, state: RobotState, cmd: Cmd) -> RobotState:
    cfg = world.config
    v = _clamp(float(cmd.v), cfg.v_max)
    omega = _clamp(float(cmd.omega), cfg.omega_max)
    pose = state.pose
    nx = pose.x + v * math.cos(pose.alpha) * cfg.dt
    ny = pose.y + v * math.sin(pose.alpha) * cfg.dt
    nalpha = wrap_angle(pose.alpha + omega * cfg.dt)
    if pose_is_free(world, nx, ny, state.radius):
        return replace(state, pose=Pose(nx, ny, nalpha), v=v, omega=omega, collided=False)
    # reject the translation, keep the rotation
    return replace(
        state, pose=Pose(pose.x, pose.y, nalpha), v=v, omega=omega, collided=True
    )


def step(world: SimWorld, target_cmd: Cmd, follower_cmd: Cmd) -> SimWorld:
    """Advance both robots one dt. Commands are clamped to the configured
    velocity limits; collisions hold position but not heading."""
    return replace(
        world,
        target=_advance(world, world.target, target_cmd),
        follower=_advance(world, world.follower, follower_cmd),
        t=world.t + world.config.dt,
    )


def world_state(world: SimWorld) -> EnvState:
    return EnvState(
        t=world.t,
        entities={"target": world.target.pose, "follower": world.follower.pose},
        world=world.grid,
    )


def follow_distance(world: SimWorld) -> float:
    t, f = world.target.pose, world.follower.pose
    return math.hypot(f.x - t.x, f.y - t.y)


def _steer(pose: Pose, point: tuple[float, float], cfg: SimConfig) -> Cmd:
    """Drive toward a point: P-controlled turn, full speed once roughly
    aligned (heading error under pi/4), otherwise rotate in place."""
    err = wrap_angle(math.atan2(point[1] - pose.y, point[0] - pose.x) - pose.alpha)
    omega = _clamp(cfg.heading_gain * err, cfg.omega_max)
    v = cfg.v_max if abs(err) < math.pi / 4 else 0.0
    return Cmd(v, omega)


class TargetWanderer:
    """Waypoint-chasing target: pick a uniformly random reachable free cell,
    drive to it, resample on arrival (within ``waypoint_tolerance``) or after
    ``waypoint_timeout`` seconds."""

    def __init__(self, world: SimWorld, seed: int) -> None:
        cfg = world.config
        free = (~world.grid.occupied) & (world.clearance > cfg.robot_radius)
        rows, cols = np.nonzero(free)
        if rows.size == 0:
            raise ValueError("no free cells to wander between")
        self._cells = list(zip(cols.tolist(), rows.tolist()))
        self._rng = np.random.default_rng(seed)
        self._grid = world.grid
        self._waypoint: tuple[float, float] | None = None
        self._deadline = -math.inf

    def __call__(self, world: SimWorld) -> Cmd:
        cfg = world.config
        pose = world.target.pose
        if (
            self._waypoint is None
            or math.hypot(self._waypoint[0] - pose.x, self._waypoint[1] - pose.y)
            < cfg.waypoint_tolerance
            or world.t >= self._deadline
        ):
            cell = self._cells[int(self._rng.integers(len(self._cells)))]
            self._waypoint = cell_to_world(cell, self._grid)
            self._deadline = world.t + cfg.waypoint_timeout
        return _steer(pose, self._waypoint, cfg)


class ExpertFollower:
    """Scripted band-keeping expert.

    Farther than d_max: drive at the target at v_max. Closer than d_min: back
    away at v_max/2 holding heading. In the band: stop and rotate to face the
    target. Seeded Gaussian jitter on omega spreads the demonstrations over
    the band instead of a single closed curve.
    """

    def __init__(self, seed: int, d_min: float, d_max: float, jitter: float = 0.05) -> None:
        if not 0.0 < d_min < d_max:
            raise BadBand(f"need 0 < d_min < d_max, got [{d_min}, {d_max}]")
        self.d_min = d_min
        self.d_max = d_max
        self.jitter = jitter
        self._rng = np.random.default_rng(seed)

    def __call__(self, world: SimWorld) -> Cmd:
        cfg = world.config
        t, f = world.target.pose, world.follower.pose
        d = follow_distance(world)
        err = wrap_angle(math.atan2(t.y - f.y, t.x - f.x) - f.alpha)
        jit = float(self._rng.normal(0.0, self.jitter))
        if d > self.d_max:
            v, omega = cfg.v_max, cfg.heading_gain * err + jit
        elif d < self.d_min:
            v, omega = -cfg.v_max / 2.0, jit  # back straight out, hold heading
        else:
            v, omega = 0.0, cfg.heading_gain * err + jit
        return Cmd(v, _clamp(omega, cfg.omega_max))


class FollowController:
    """Learned follow policy.

    Every ``control_epoch`` seconds: evaluate the registered affordance
    tasks, fuse with the costmap into a gainmap, select a goal, plan a path
    and hand it to a pure-pursuit tracker. Planning failures
    (NoAffordantRegion / Unreachable / missing model) hold the robot still
    and append a diagnostic event instead of raising.
    """

    PASS_RADIUS = 0.25
    LOOKAHEAD_CELLS = 4

    def __init__(
        self,
        registry: AffordanceRegistry,
        task: Task | None = None,
        strategy: GoalStrategy = GoalStrategy(),
        lam: float | None = None,
    ) -> None:
        self.registry = registry
        self.task = task if task is not None else Task("follow", {"target": "target"})
        self.strategy = strategy
        self.lam = lam
        self.events: list[str] = []
        self._costmap = None
        self._waypoints: list[tuple[float, float]] = []
        self._anchor: tuple[float, float] = (0.0, 0.0)
        self._next_epoch = -math.inf
        self._holding = False

    def _replan(self, world: SimWorld) -> None:
        cfg = world.config
        if self._costmap is None or not (
            self._costmap.width == world.grid.width
            and self._costmap.height == world.grid.height
        ):
            self._costmap = normalize_costmap(world.grid, cfg.inflation_radius)
        amap = evaluate_sta(self.registry, world_state(world), [self.task.id])
        lam = cfg.lam if self.lam is None else self.lam
        gain = gainmap(self._costmap, amap.field, lam)
        goal_xy = select_goal(gain, world.follower.pose, self.strategy)
        start = world_to_cell((world.follower.pose.x, world.follower.pose.y), world.grid)
        goal = world_to_cell(goal_xy, world.grid)
        path = plan_path(gain, start, goal)
        self._waypoints = [cell_to_world(c, world.grid) for c in path.cells[1:]]
        if not self._waypoints:
            self._waypoints = [goal_xy]
        # the affordance field is target-relative, so the cached path is kept
        # anchored to the target position it was planned against
        self._anchor = (world.target.pose.x, world.target.pose.y)

    def _shift(self, world: SimWorld) -> tuple[float, float]:
        t = world.target.pose
        return t.x - self._anchor[0], t.y - self._anchor[1]

    def __call__(self, world: SimWorld) -> Cmd:
        cfg = world.config
        if world.t >= self._next_epoch:
            self._next_epoch = world.t + cfg.control_epoch
            try:
                self._replan(world)
                self._holding = False
            except StamError as e:
                self._waypoints = []
                self._holding = True
                self.events.append(f"t={world.t:.2f} replan failed: {e}")
        if self._holding:
            return HOLD
        pose = world.follower.pose
        d = follow_distance(world)
        t = world.target.pose
        face = wrap_angle(math.atan2(t.y - pose.y, t.x - pose.x) - pose.alpha)
        face_omega = _clamp(cfg.heading_gain * face, cfg.omega_max)
        if d < cfg.d_min:
            # too close: back off while keeping the target in view, the same
            # evasion the demonstrations exhibit (at full speed, so even a
            # head-on target cannot run the follower down)
            return Cmd(-cfg.v_max, face_omega)
        if d <= cfg.d_max:
            # in band the demonstrations stand and track the target by
            # heading only, so the learned controller does the same
            return Cmd(0.0, face_omega)
        # beyond the band: close in. The planned path is followed while it
        # agrees with closing; an equally fast receding target makes any
        # detour unrecoverable, so a carrot pointing elsewhere is dropped in
        # favour of the target itself until the gap is closed.
        sx, sy = self._shift(world)
        while self._waypoints and (
            math.hypot(self._waypoints[0][0] + sx - pose.x,
                       self._waypoints[0][1] + sy - pose.y)
            < self.PASS_RADIUS
        ):
            self._waypoints.pop(0)
        if self._waypoints:
            wp = self._waypoints[min(self.LOOKAHEAD_CELLS, len(self._waypoints) - 1)]
            ahead = (wp[0] + sx, wp[1] + sy)
            err = wrap_angle(math.atan2(ahead[1] - pose.y, ahead[0] - pose.x) - pose.alpha)
            if abs(wrap_angle(err - face)) <= math.pi / 6:
                v = cfg.v_max * max(0.0, math.cos(err))
                return Cmd(v, _clamp(cfg.heading_gain * err, cfg.omega_max))
        v = cfg.v_max * max(0.0, math.cos(face))
        return Cmd(v, face_omega)


class DemoRecorder:
    """Collects demonstration records while active."""

    def __init__(self) -> None:
        self.active = False
        self.demo_id: int | None = None
        self.source = "scripted"
        self.records: list[DemonstrationRecord] = []

    def start(self, demo_id: int, source: str = "scripted") -> None:
        self.active = True
        self.demo_id = demo_id
        self.source = source
        self.records = []

    def stop(self) -> list[DemonstrationRecord]:
        self.active = False
        return self.records


def record_tick(world: SimWorld, recorder: DemoRecorder) -> DemoRecorder:
    """Append the current tick to the recorder when it is active."""
    if recorder.active:
        recorder.records.append(
            DemonstrationRecord(
                t=world.t,
                target=world.target.pose,
                follower=world.follower.pose,
                demo_id=recorder.demo_id if recorder.demo_id is not None else 0,
                source=recorder.source,
            )
        )
    return recorder


def random_free_pose(
    world: SimWorld, rng: np.random.Generator, margin: float = 0.0
) -> Pose:
    """Uniformly random cell center among cells with clearance above the
    robot radius plus ``margin``; heading uniform in (-pi, pi]."""
    free = (~world.grid.occupied) & (
        world.clearance > world.config.robot_radius + margin
    )
    rows, cols = np.nonzero(free)
    if rows.size == 0:
        raise ValueError("no free cell satisfies the clearance margin")
    i = int(rng.integers(rows.size))
    x, y = cell_to_world((int(cols[i]), int(rows[i])), world.grid)
    return Pose(x, y, wrap_angle(float(rng.uniform(-math.pi, math.pi))))


def _place_pair(
    grid: OccupancyGrid,
    config: SimConfig,
    rng: np.random.Generator,
    distance_range: tuple[float, float],
) -> tuple[Pose, Pose]:
    """Target pose plus a follower pose a sampled distance away (facing the
    target), both collision-free."""
    clearance = obstacle_distances(grid)
    free = (~grid.occupied) & (clearance > config.robot_radius)
    rows, cols = np.nonzero(free)
    if rows.size == 0:
        raise ValueError("map has no free space")
    for _ in range(10000):
        i = int(rng.integers(rows.size))
        tx, ty = cell_to_world((int(cols[i]), int(rows[i])), grid)
        theta = float(rng.uniform(-math.pi, math.pi))
        d = float(rng.uniform(distance_range[0], distance_range[1]))
        fx, fy = tx + d * math.cos(theta), ty + d * math.sin(theta)
        try:
            col, row = world_to_cell((fx, fy), grid)
        except OutOfBounds:
            continue
        if clearance[row, col] > config.robot_radius:
            heading = math.atan2(ty - fy, tx - fx)
            t_heading = float(rng.uniform(-math.pi, math.pi))
            return Pose(tx, ty, t_heading), Pose(fx, fy, heading)
    raise ValueError(f"could not place robots {distance_range} apart on this map")


def run_scripted_demo(
    grid: OccupancyGrid,
    seed: int,
    duration: float,
    demo_id: int,
    config: SimConfig = SimConfig(),
) -> list[DemonstrationRecord]:
    """Run the wandering target + scripted expert for ``duration`` seconds
    and return one record per tick."""
    place_seed, wander_seed, expert_seed = np.random.SeedSequence(seed).spawn(3)
    target, follower = _place_pair(
        grid, config, np.random.default_rng(place_seed), (config.d_min, config.d_max)
    )
    world = make_world(grid, target, follower, config, seed)
    wander = TargetWanderer(world, wander_seed)
    expert = ExpertFollower(expert_seed, config.d_min, config.d_max, config.expert_jitter)
    recorder = DemoRecorder()
    recorder.start(demo_id, source="scripted")
    for _ in range(round(duration / config.dt)):
        world = step(world, wander(world), expert(world))
        record_tick(world, recorder)
    return recorder.stop()


@dataclass
class FollowRunResult:
    records: list[DemonstrationRecord]
    distances: np.ndarray
    collisions: int
    events: list[str]


def run_follow(
    grid: OccupancyGrid,
    seed: int,
    duration: float,
    registry: AffordanceRegistry,
    config: SimConfig = SimConfig(),
    strategy: GoalStrategy = GoalStrategy(),
    lam: float | None = None,
    start_distance: float = 6.0,
    demo_id: int = 0,
) -> FollowRunResult:
    """Run the wandering target with the learned follow controller, starting
    the follower ``start_distance`` away from the target."""
    place_seed, wander_seed = np.random.SeedSequence(seed).spawn(2)
    target, follower = _place_pair(
        grid, config, np.random.default_rng(place_seed), (start_distance, start_distance)
    )
    world = make_world(grid, target, follower, config, seed)
    wander = TargetWanderer(world, wander_seed)
    controller = FollowController(registry, strategy=strategy, lam=lam)
    recorder = DemoRecorder()
    recorder.start(demo_id, source="scripted")
    distances = []
    collisions = 0
    for _ in range(round(duration / config.dt)):
        world = step(world, wander(world), controller(world))
        record_tick(world, recorder)
        distances.append(follow_distance(world))
        collisions += int(world.follower.collided)
    return FollowRunResult(recorder.stop(), np.asarray(distances), collisions, controller.events)
