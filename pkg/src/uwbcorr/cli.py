"""Experiment orchestration CLI.

Verbs: simulate, train-rl, train-supervised, adapt, evaluate, bench.
Every run writes its resolved config snapshot into the output directory;
identical seeds reproduce identical outputs (bench timings excluded).
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np
import torch

from . import agent as agentlib
from . import baselines, datasets, presets, reports, simulator
from .agent import AgentConfig, CorrectionAgent, TrainingData
from .config import ExperimentConfig, load_config, save_config


def _fail(exc: Exception):
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


def _prepare(config, seed, out, scale, **overrides) -> tuple:
    ov = {k: v for k, v in overrides.items() if v is not None}
    if seed is not None:
        ov["seed"] = seed
    if scale is not None:
        ov["scale"] = scale
    cfg = load_config(config, ov).resolve()
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, outdir / "config.yaml")
    return cfg, outdir


def _load_dataset(path) -> list:
    """One or more episode CSVs -> list of (measurements, anchors)."""
    p = Path(path)
    files = sorted(p.glob("episode_*.csv")) if p.is_dir() else [p]
    if not files:
        raise FileNotFoundError(f"no episode files under {path}")
    return [datasets.read_episode_csv(f) for f in files]


common_options = [
    click.option("--config", type=click.Path(exists=True), default=None,
                 help="YAML experiment config."),
    click.option("--seed", type=int, default=None),
    click.option("--out", type=click.Path(), default="out",
                 help="Output directory."),
    click.option("--scale", type=float, default=None,
                 help="Desk-scale knob: shrinks trajectory and network widths."),
]


def add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@click.group()
def main():
    """Self-supervised UWB ranging error correction experiments."""


@main.command()
@add_options(common_options)
@click.option("--env", "env_name", default=None, help="Environment preset (env1/env2).")
@click.option("--episodes", type=int, default=None, help="Episode files to generate.")
def simulate(config, seed, out, scale, env_name, episodes):
    """Generate dataset episode files and a manifest."""
    try:
        cfg, outdir = _prepare(config, seed, out, scale,
                               environment=env_name)
        n_episodes = episodes if episodes is not None else 10
        env = cfg.env(1)
        files, counts, fracs = [], [], []
        for i in range(n_episodes):
            rng = np.random.default_rng([cfg.seed, i])
            plan = cfg.plan(rng) if cfg.trajectory == "random" else cfg.plan()
            ep = simulator.generate_episode(env, plan, rng)
            name = f"episode_{i:03d}.csv"
            datasets.write_episode_csv(outdir / name, ep, {a.id: a for a in env.anchors})
            datasets.write_poses_csv(outdir / f"poses_{i:03d}.csv", ep)
            files.append(name)
            counts.append(len(ep.measurements))
            fracs.append(datasets.nlos_fraction(ep.measurements))
        manifest = datasets.write_manifest(
            outdir / "manifest.json", seed=cfg.seed, preset=cfg.environment,
            episodes=n_episodes, files=files, sample_counts=counts,
            nlos_fractions=fracs,
        )
        click.echo(f"wrote {n_episodes} episodes, {manifest['total_samples']} samples")
    except Exception as exc:  # noqa: BLE001 - single-line CLI error contract
        _fail(exc)


def _make_training_data(cfg: ExperimentConfig, dataset, which_env: int = 1) -> list:
    if dataset is not None:
        return _load_dataset(dataset)
    env = cfg.env(which_env)
    rng = np.random.default_rng([cfg.seed, 1000 + which_env])
    ep = simulator.generate_episode(env, cfg.plan(), rng)
    return [(ep.measurements, {a.id: a for a in env.anchors})]


def _train_loop(cfg, outdir, agent, episode_sets, n_episodes, metrics_path,
                checkpoint_every=100):
    header_written = metrics_path.exists()

    def on_episode_end(ag, row):
        nonlocal header_written
        reports.append_metrics_row(metrics_path, row, write_header=not header_written)
        header_written = True
        if (ag.episode % checkpoint_every) == 0:
            agentlib.save_checkpoint(ag, outdir / "checkpoint.pt")

    all_rows = []
    for _ in range(n_episodes):
        ms, anchors = episode_sets[agent.episode % len(episode_sets)]
        data = TrainingData(measurements=ms, anchors=anchors,
                            tag_height=cfg.env(1).tag_height)
        rows = agentlib.train(agent, data, cfg.ekf, 1, on_episode_end=on_episode_end)
        all_rows.extend(rows)
    return all_rows


@main.command("train-rl")
@add_options(common_options)
@click.option("--dataset", type=click.Path(exists=True), default=None,
              help="Episode CSV file or dataset directory; default: live simulator data.")
@click.option("--episodes", type=int, default=None)
@click.option("--resume", type=click.Path(exists=True), default=None,
              help="Checkpoint to resume from.")
def train_rl(config, seed, out, scale, dataset, episodes, resume):
    """Self-supervised RL training; writes metrics stream and checkpoints."""
    try:
        cfg, outdir = _prepare(config, seed, out, scale, episodes=episodes)
        episode_sets = _make_training_data(cfg, dataset)
        if resume:
            agent = agentlib.load_checkpoint(resume)
        else:
            agent = CorrectionAgent(cfg.agent, seed=cfg.seed)
        remaining = cfg.episodes - agent.episode
        rows = _train_loop(cfg, outdir, agent, episode_sets, remaining,
                           outdir / "metrics.csv")
        agentlib.save_checkpoint(agent, outdir / "checkpoint.pt")
        if rows:
            uncorr = baselines.evaluate(
                baselines.ZeroCorrector(), episode_sets[0][0]).mae_after
            reports.plot_learning_curve(outdir / "learning_curve.svg", rows,
                                        baseline_mae=uncorr)
        click.echo(f"trained {len(rows)} episodes; final val MAE "
                   f"{rows[-1].val_mae_mm:.1f} mm" if rows else "nothing to do")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command("train-supervised")
@add_options(common_options)
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--head", type=click.Choice(["linear", "tanh_scaled"]),
              default=None)
def train_supervised(config, seed, out, scale, dataset, head):
    """Supervised CNN baseline trained on true errors."""
    try:
        cfg, outdir = _prepare(config, seed, out, scale)
        if head is not None:
            cfg.supervised.head = head
        cfg.supervised.seed = cfg.seed
        ms, _anchors = _make_training_data(cfg, dataset)[0]
        model, history = baselines.train_supervised(ms, cfg.supervised)
        torch.save({"state_dict": model.net.state_dict(),
                    "head": cfg.supervised.head,
                    "width_scale": cfg.supervised.width_scale},
                   outdir / "supervised.pt")
        with (outdir / "history.csv").open("w") as fh:
            fh.write("epoch,train_loss,val_mae_mm\n")
            for i, (tl, vm) in enumerate(history):
                fh.write(f"{i},{tl:.9g},{vm:.9g}\n")
        click.echo(f"best val MAE {min(h[1] for h in history):.1f} mm")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@add_options(common_options)
@click.option("--dataset", type=click.Path(exists=True), default=None,
              help="Environment-1 dataset; env-2 data always comes from the simulator.")
@click.option("--episodes-env1", type=int, default=None)
@click.option("--episodes", type=int, default=None, help="Total episodes.")
def adapt(config, seed, out, scale, dataset, episodes_env1, episodes):
    """Environment-change experiment: train on env1, switch to env2 with
    learning-rate and exploration reset."""
    try:
        cfg, outdir = _prepare(config, seed, out, scale, episodes=episodes,
                               episodes_env1=episodes_env1)
        sets1 = _make_training_data(cfg, dataset, which_env=1)
        sets2 = _make_training_data(cfg, None, which_env=2)
        agent = CorrectionAgent(cfg.agent, seed=cfg.seed)
        metrics_path = outdir / "metrics.csv"
        rows = _train_loop(cfg, outdir, agent, sets1, cfg.episodes_env1, metrics_path)
        agentlib.reset_for_new_environment(agent, epsilon_max=cfg.adapt_epsilon_max)
        with (outdir / "switch.json").open("w") as fh:
            json.dump({"switch_episode": agent.episode,
                       "env1": cfg.environment, "env2": cfg.environment2}, fh)
        rows += _train_loop(cfg, outdir, agent, sets2,
                            cfg.episodes - cfg.episodes_env1, metrics_path)
        agentlib.save_checkpoint(agent, outdir / "checkpoint.pt")
        reports.plot_learning_curve(outdir / "learning_curve.svg", rows)
        click.echo(f"adaptation run complete; final val MAE {rows[-1].val_mae_mm:.1f} mm")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


@main.command()
@add_options(common_options)
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--split", type=click.Choice(["all", "nlos"]), default="all")
@click.option("--trajectory", "trajectory_kind", default=None,
              type=click.Choice(["reference", "random"]),
              help="Evaluate on a freshly simulated trajectory instead of a dataset.")
@click.option("--plots/--no-plots", default=True)
def evaluate(config, seed, out, scale, checkpoint, dataset, split,
             trajectory_kind, plots):
    """Evaluation report: residuals, summary, trajectory data, figures."""
    try:
        cfg, outdir = _prepare(config, seed, out, scale,
                               trajectory=trajectory_kind)
        agent = agentlib.load_checkpoint(checkpoint)
        if dataset is not None:
            ms, anchors = _load_dataset(dataset)[0]
            truth = None
        else:
            env = cfg.env(1)
            rng = np.random.default_rng([cfg.seed, 77])
            plan = cfg.plan(rng)
            ep = simulator.generate_episode(env, plan, rng)
            ms, anchors = ep.measurements, {a.id: a for a in env.anchors}
            truth = np.stack([p.position[:2] for p in ep.ground_truth_poses])
        report = baselines.evaluate(
            agent, ms, split="nlos_only" if split == "nlos" else "all")
        used = ms if split == "all" else [m for m in ms if not m._eval_meta.los]
        reports.write_residuals_csv(outdir / "residuals.csv", used, report)
        reports.write_summary_json(outdir / "summary.json", report.summary_dict())
        corr = agent.correct(np.stack([m.cir for m in ms]))
        tag_height = cfg.env(1).tag_height
        traj_un = reports.ekf_trajectory(ms, anchors, tag_height, cfg.ekf)
        traj_co = reports.ekf_trajectory(ms, anchors, tag_height, cfg.ekf, corr)
        reports.write_trajectory_csv(outdir / "trajectory.csv",
                                     [m.timestamp for m in ms], truth,
                                     traj_un, traj_co)
        if plots:
            reports.plot_residual_boxes(outdir / "residual_boxplot.svg", report,
                                        f"ranging error ({split})")
            reports.plot_trajectory(outdir / "trajectory.svg", truth,
                                    traj_un, traj_co)
        click.echo(f"MAE uncorrected {report.mae_before:.1f} mm -> "
                   f"corrected {report.mae_after:.1f} mm")
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


def run_benchmark(width_scale: float = 1.0, n_infer: int = 200,
                  n_batches: int = 20, sample_rate: float = 50.0,
                  batch_size: int = 50) -> dict:
    """Measure per-sample inference and per-batch training time."""
    torch.manual_seed(0)
    cfg = AgentConfig(width_scale=width_scale, batch_size=batch_size)
    agent = CorrectionAgent(cfg, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(max(batch_size * 2, 200)):
        agent.replay.push(rng.random(150, dtype=np.float32).astype(np.float32),
                          rng.uniform(-1000, 1000), rng.uniform(0.002, 0.5))
    cirs = rng.random((n_infer, 150)).astype(np.float32)
    agent.correct(cirs[:8])  # warm-up
    t0 = time.perf_counter()
    for i in range(n_infer):
        agent.correct(cirs[i])
    t_infer = (time.perf_counter() - t0) / n_infer
    agent.update_networks()  # warm-up
    t0 = time.perf_counter()
    for _ in range(n_batches):
        agent.update_networks()
    t_batch = (time.perf_counter() - t0) / n_batches
    # One second of data: sample_rate corrections plus one batch update.
    busy = sample_rate * t_infer + t_batch
    return {
        "width_scale": width_scale,
        "inference_s_per_sample": t_infer,
        "train_s_per_batch": t_batch,
        "sample_rate_hz": sample_rate,
        "real_time_ratio": busy,
        "real_time_ok": busy < 1.0,
    }


@main.command()
@add_options(common_options)
def bench(config, seed, out, scale, **_kw):
    """Timing harness: per-batch training and per-sample inference."""
    try:
        outdir = Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        result = run_benchmark(width_scale=scale if scale is not None else 1.0)
        with (outdir / "bench.json").open("w") as fh:
            json.dump(result, fh, indent=2)
        click.echo(
            f"inference {result['inference_s_per_sample']*1e3:.2f} ms/sample, "
            f"train {result['train_s_per_batch']*1e3:.1f} ms/batch-50, "
            f"real-time ratio {result['real_time_ratio']:.3f} "
            f"({'OK' if result['real_time_ok'] else 'TOO SLOW'})"
        )
    except Exception as exc:  # noqa: BLE001
        _fail(exc)


if __name__ == "__main__":
    main()
