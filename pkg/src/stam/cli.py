"""Command line entry points.

    stam map make   write a bordered-room map file
    stam sim run    run the simulator headless (expert or learned follow)
    stam fit        fit a relative-pose model from recorded demos
    stam eval run   run the incremental-demonstration study
    stam serve      start the realtime teleop WebSocket service
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import click
import numpy as np

from .affordance import Task, AffordanceRegistry, follow_evaluator, signature_from_json, signature_to_json
from .dataset import load_records, relative_samples, save_records
from .errors import StamError
from .experiment import ExperimentConfig, run_experiment, write_report
from .grid import bordered_room, load_map, save_map
from .planner import GoalStrategy, GoalVariant
from .regression import fit_relative_model
from .sim import SimConfig, run_follow, run_scripted_demo


@click.group()
def main() -> None:
    """Learn where a follow task is afforded and drive a robot there."""


@main.group("map")
def map_group() -> None:
    """Map file helpers."""


@map_group.command("make")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--width", type=float, default=10.0, show_default=True, help="room width (m)")
@click.option("--height", type=float, default=10.0, show_default=True, help="room height (m)")
@click.option("--res", type=float, default=0.1, show_default=True, help="cell size (m)")
@click.option("--pillars", type=int, default=0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def map_make(out: str, width: float, height: float, res: float, pillars: int, seed: int) -> None:
    """Write a bordered rectangular room."""
    grid = bordered_room(width, height, res, pillars=pillars, seed=seed)
    save_map(grid, out)
    click.echo(f"wrote {grid.width}x{grid.height} map to {out}")


def _sim_config(dmin: float, dmax: float, lam: float, dt: float) -> SimConfig:
    try:
        return SimConfig(dt=dt, d_min=dmin, d_max=dmax, lam=lam)
    except (StamError, ValueError) as e:
        raise click.UsageError(str(e)) from e


def _load_signature(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if "model" in obj:
        return signature_from_json(obj)
    # bare mixture JSON: wrap it in a fresh version-1 signature
    from .affordance import AffordanceSignature
    from .mixtures import model_from_json

    return AffordanceSignature("follow", 1, model_from_json(obj), {})


@main.group("sim")
def sim_group() -> None:
    """Headless simulator runs."""


@sim_group.command("run")
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--policy", type=click.Choice(["expert", "follow", "teleop"]), default="expert", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--duration", type=float, default=30.0, show_default=True, help="seconds of sim time")
@click.option("--record", "record_path", type=click.Path(dir_okay=False), default=None, help="write records as JSONL")
@click.option("--demo-id", type=int, default=1, show_default=True)
@click.option("--dmin", type=float, default=1.0, show_default=True)
@click.option("--dmax", type=float, default=3.0, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.5, show_default=True)
@click.option("--dt", type=float, default=0.05, show_default=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="fitted signature JSON (required for --policy follow)")
@click.option("--strategy", type=click.Choice([v.value for v in GoalVariant]), default="top_score", show_default=True)
@click.option("--start-distance", type=float, default=6.0, show_default=True)
def sim_run(
    map_path: str,
    policy: str,
    seed: int,
    duration: float,
    record_path: str | None,
    demo_id: int,
    dmin: float,
    dmax: float,
    lam: float,
    dt: float,
    model_path: str | None,
    strategy: str,
    start_distance: float,
) -> None:
    """Run one seeded simulation and optionally record it."""
    if policy == "teleop":
        raise click.UsageError("teleop needs a live driver; start `stam serve` instead")
    grid = load_map(map_path)
    config = _sim_config(dmin, dmax, lam, dt)
    if policy == "expert":
        records = run_scripted_demo(grid, seed, duration, demo_id, config)
        events: list[str] = []
    else:
        if model_path is None:
            raise click.UsageError("--policy follow requires --model")
        signature = _load_signature(model_path)
        registry = AffordanceRegistry()
        registry.register(
            Task("follow", {"target": "target"}), follow_evaluator,
            signature.params, signature.meta,
        )
        result = run_follow(
            grid, seed, duration, registry, config,
            strategy=GoalStrategy(GoalVariant(strategy)),
            start_distance=start_distance, demo_id=demo_id,
        )
        records = result.records
        events = result.events
    if record_path:
        save_records(records, record_path)
    dists = [
        math.hypot(r.follower.x - r.target.x, r.follower.y - r.target.y) for r in records
    ]
    arr = np.asarray(dists)
    in_band = float(((arr >= dmin) & (arr <= dmax)).mean())
    click.echo(
        f"policy={policy} seed={seed} ticks={len(records)} "
        f"d_mean={arr.mean():.3f} d_final={arr[-1]:.3f} in_band={100 * in_band:.1f}%"
    )
    for event in events:
        click.echo(f"event: {event}")
    if record_path:
        click.echo(f"wrote {len(records)} records to {record_path}")


@main.command("fit")
@click.option("--records", "records_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--kmax", type=int, default=8, show_default=True)
def fit_cmd(records_dir: str, out: str, seed: int, kmax: int) -> None:
    """Fit a relative-pose model from every demo JSONL in a directory."""
    paths = sorted(Path(records_dir).glob("*.jsonl"))
    records = []
    for p in paths:
        records.extend(load_records(p))
    if not records:
        raise click.UsageError(f"no records found under {records_dir}")
    samples = relative_samples(records)
    model, scores = fit_relative_model(samples, k_max=kmax, seed=seed)
    from .affordance import AffordanceSignature

    signature = AffordanceSignature(
        "follow", 1, model,
        {"samples": len(records), "seed": seed, "files": [p.name for p in paths]},
    )
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(signature_to_json(signature), fh, separators=(",", ":"))
        fh.write("\n")
    click.echo(
        f"fitted k={model.k} on {len(records)} records "
        f"(bic {min(scores):.1f}); wrote {out}"
    )


@main.group("eval")
def eval_group() -> None:
    """Model quality studies."""


@eval_group.command("run")
@click.option("--runs", type=int, default=20, show_default=True)
@click.option("--demos", type=int, default=3, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--records", "records_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="reuse recorded demos instead of generating scripted ones")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--duration", type=float, default=20.0, show_default=True, help="scripted demo length (s)")
@click.option("--kmax", type=int, default=8, show_default=True)
@click.option("--dmin", type=float, default=1.0, show_default=True)
@click.option("--dmax", type=float, default=3.0, show_default=True)
def eval_run(
    runs: int,
    demos: int,
    out: str,
    records_dir: str | None,
    seed: int,
    duration: float,
    kmax: int,
    dmin: float,
    dmax: float,
) -> None:
    """Fit on 1..N demos across seeded runs and report pose-error stats."""
    config = ExperimentConfig(
        runs=runs,
        demos=demos,
        seed=seed,
        k_max=kmax,
        demo_duration=duration,
        records_dir=records_dir,
        sim=SimConfig(d_min=dmin, d_max=dmax),
    )
    report = run_experiment(config)
    write_report(report, out)
    click.echo(report.to_csv(), nl=False)
    click.echo(f"wrote {out}")


@main.command("serve")
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--records", "records_dir", type=click.Path(file_okay=False), default="records",
              show_default=True, help="directory demos are loaded from and saved to")
@click.option("--dmin", type=float, default=1.0, show_default=True)
@click.option("--dmax", type=float, default=3.0, show_default=True)
@click.option("--lambda", "lam", type=float, default=0.5, show_default=True)
@click.option("--dt", type=float, default=0.05, show_default=True)
@click.option("--realtime-factor", type=float, default=1.0, show_default=True,
              help="sim speed multiplier; <= 0 runs unthrottled")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="preload a fitted signature JSON")
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False), default=None,
              help="static directory for the browser console (defaults to the bundled frontend build)")
def serve(
    map_path: str,
    host: str,
    port: int,
    seed: int,
    records_dir: str,
    dmin: float,
    dmax: float,
    lam: float,
    dt: float,
    realtime_factor: float,
    model_path: str | None,
    ui_dir: str | None,
) -> None:
    """Serve the simulator over WebSocket (plus the browser console)."""
    import uvicorn

    from .service import ServeConfig, build_app

    grid = load_map(map_path)
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(bundled) if bundled.is_dir() else None
    config = ServeConfig(
        grid=grid,
        seed=seed,
        sim=_sim_config(dmin, dmax, lam, dt),
        records_dir=records_dir,
        realtime_factor=realtime_factor,
        ui_dir=ui_dir,
    )
    app = build_app(config)
    if model_path is not None:
        app.state.service.preload_signature(_load_signature(model_path))
    click.echo(f"listening on ws://{host}:{port}/ws")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except OSError as e:
        raise click.ClickException(f"could not bind {host}:{port}: {e}") from e


if __name__ == "__main__":
    main()
