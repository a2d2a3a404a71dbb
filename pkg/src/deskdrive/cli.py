"""Command-line entry points: train, eval, metrics, scenarios, rollout, and
the stdio bridge used by foreign-language bindings.

Exit codes: 0 success, 2 argument error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import env as env_mod
from .algos import ALGOS, Hyperparams, build_learner, train
from .algos.train import EpisodeRecord, TrainingLog
from .env import Env, make
from .metrics import CSV_HEADER, MetricsRecord, compute_metrics, export_metrics, read_metrics_csv
from .neural import Checkpoint
from .scenario import ScenarioError, list_scenarios

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3


def parse_overrides(pairs: list[str]) -> dict[str, object]:
    """``--set key=value`` pairs; values parse as JSON when possible so
    numbers and booleans come through typed."""
    out: dict[str, object] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ScenarioError(f"override {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _hyperparams(args: argparse.Namespace) -> Hyperparams:
    hp = Hyperparams()
    hp.episodes = args.episodes
    if getattr(args, "batch", None) is not None:
        hp.batch = args.batch
    if getattr(args, "lr", None) is not None:
        hp.lr = args.lr
    hp.validate()
    return hp


def save_checkpoints(out: Path, log: TrainingLog, hp: Hyperparams) -> list[str]:
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for name, params in log.learner.networks().items():  # type: ignore[union-attr]
        ck = Checkpoint(
            algo=log.algo,
            scenario=log.scenario,
            name=name,
            params=params,
            hyperparameters=asdict(hp),
            seed=log.seed,
        )
        path = ckpt_dir / f"{name}.json"
        path.write_text(json.dumps(ck.to_dict()) + "\n")
        names.append(path.name)
    return sorted(names)


def cmd_train(args: argparse.Namespace) -> int:
    overrides = parse_overrides(args.set)
    env = make(args.scenario, overrides)
    hp = _hyperparams(args)
    log = train(args.algo, env, hp, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = export_metrics(log, out / "metrics.csv")
    networks = save_checkpoints(out, log, hp)
    manifest = {
        "algo": log.algo,
        "scenario": log.scenario,
        "seed": log.seed,
        "overrides": overrides,
        "hyperparameters": asdict(hp),
        "artifacts": {"metrics": csv_path.name, "checkpoints": networks},
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    summary = compute_metrics(log.records)
    print(json.dumps(summary.to_dict()))
    return EXIT_OK


def load_trained_learner(ckpt_dir: Path) -> tuple[Env, object, dict]:
    manifest_path = ckpt_dir / "manifest.json"
    if not manifest_path.is_file():
        raise ScenarioError(f"no manifest.json under {ckpt_dir}")
    manifest = json.loads(manifest_path.read_text())
    env = make(manifest["scenario"], manifest.get("overrides") or {})
    hp = Hyperparams(**manifest["hyperparameters"])
    learner = build_learner(manifest["algo"], env, hp, np.random.default_rng(0))
    nets = {}
    for name in manifest["artifacts"]["checkpoints"]:
        doc = json.loads((ckpt_dir / "checkpoints" / name).read_text())
        ck = Checkpoint.from_dict(doc)
        nets[ck.name] = ck.params
    expected = set(learner.networks())
    if not expected <= set(nets):
        raise ScenarioError(f"checkpoint set {sorted(nets)} incompatible with algo {manifest['algo']}")
    learner.load_networks(nets)
    return env, learner, manifest


def run_eval(
    env: Env, learner, episodes: int, base_seed: int, replace_with_social: bool
) -> tuple[list[EpisodeRecord], list[int | None]]:
    """Greedy-policy evaluation episodes with seeds base_seed + index."""
    if replace_with_social:
        env.cfg.randomization.social_replacement_prob = 1.0
    records = []
    replaced: list[int | None] = []
    for i in range(episodes):
        obs = env.reset(base_seed + i)
        team_rewards: list[float] = []
        speeds: list[float] = []
        collided = False
        info: dict = {}
        done = False
        while not done:
            actions = learner.greedy(obs)
            obs, rewards, dones, info = env.step(actions)
            team_rewards.append(rewards.team_reward)
            speeds.append(float(np.mean(list(info["speeds"].values()))))
            if info["collisions"]:
                collided = True
            done = dones[0]
        eligible = env.cfg.success_eligible_ids()
        success = info.get("success", {})
        records.append(
            EpisodeRecord(
                episode=i,
                mean_step_reward=float(np.mean(team_rewards)),
                collision=1 if collided else 0,
                success_rate=float(np.mean([1.0 if success.get(r, False) else 0.0 for r in eligible])),
                mean_speed=float(np.mean(speeds)),
                epsilon=0.0,
                loss_critic=0.0,
                loss_actor=0.0,
            )
        )
        replaced.append(info.get("replaced_robot"))
        if replace_with_social and info.get("replaced_robot") is None:
            raise RuntimeError("social replacement was requested but no learner was replaced")
    return records, replaced


def cmd_eval(args: argparse.Namespace) -> int:
    env, learner, manifest = load_trained_learner(Path(args.checkpoints))
    records, replaced = run_eval(env, learner, args.episodes, args.seed, args.replace_with_social)
    summary = compute_metrics(records)
    payload = {
        "metrics": summary.to_dict(),
        "algo": manifest["algo"],
        "scenario": manifest["scenario"],
        "episodes": args.episodes,
        "base_seed": args.seed,
        "replace_with_social": args.replace_with_social,
        "replaced_robots": replaced,
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        log = TrainingLog(algo=manifest["algo"], scenario=manifest["scenario"], seed=args.seed, records=records)
        export_metrics(log, out / "eval.csv")
        (out / "eval_summary.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(json.dumps(payload))
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    records = read_metrics_csv(args.log)
    print(json.dumps(compute_metrics(records).to_dict()))
    return EXIT_OK


def cmd_scenarios(args: argparse.Namespace) -> int:
    for name in list_scenarios():
        print(name)
    return EXIT_OK


def cmd_rollout(args: argparse.Namespace) -> int:
    """Scripted rollout printed as JSON; the reference trajectory for the
    foreign-bindings equivalence check."""
    overrides = parse_overrides(args.set)
    env = make(args.scenario, overrides)
    if args.actions_file:
        script = json.loads(Path(args.actions_file).read_text())
    elif args.actions:
        script = json.loads(args.actions)
    else:
        script = [[env_mod.KEEP_LANE] * env.n_learners for _ in range(env.episode_length)]
    obs = env.reset(args.seed)
    steps = []
    for actions in script:
        o, rewards, dones, info = env.step([int(a) for a in actions])
        steps.append(
            {
                "obs": [x.tolist() for x in o],
                "rewards": {str(k): v for k, v in rewards.r_total.items()},
                "team_reward": rewards.team_reward,
                "dones": dones,
                "collisions": info["collisions"],
                "replaced_robot": info["replaced_robot"],
            }
        )
        if dones[0]:
            break
    print(json.dumps({"initial_obs": [x.tolist() for x in obs], "steps": steps}))
    return EXIT_OK


def cmd_bridge(args: argparse.Namespace) -> int:
    from .bridge import serve

    serve(sys.stdin, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deskdrive", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one algorithm on one scenario")
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--scenario", required=True)
    p.add_argument("--episodes", type=int, default=30_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="scenario config override (dotted path)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="greedy evaluation of trained checkpoints")
    p.add_argument("--checkpoints", required=True, help="run directory containing manifest.json")
    p.add_argument("--episodes", type=int, default=24)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replace-with-social", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("metrics", help="recompute summary metrics from a metrics.csv")
    p.add_argument("--log", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("scenarios", help="scenario utilities")
    scen_sub = p.add_subparsers(dest="scenarios_command", required=True)
    pl = scen_sub.add_parser("list", help="list shipped scenarios")
    pl.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("rollout", help="run a scripted rollout and print the trajectory as JSON")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--actions", default=None, help="JSON list of per-step action lists")
    p.add_argument("--actions-file", default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("bridge", help="serve make/reset/step over stdio JSON lines")
    p.set_defaults(func=cmd_bridge)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
