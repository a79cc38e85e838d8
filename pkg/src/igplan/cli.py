"""Command-line interface.

Subcommands: run, sweep, gen-scene, oracle, replay. Config files are YAML;
any field can be overridden with repeated --set dotted.key=value flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .grid import save_scene
from .infogain import (
    classification_mi,
    classification_mi_mc,
    detection_mi,
    detection_mi_enumerated,
    detection_mi_printed,
    printed_form_gap,
)
from .runner import (
    ExperimentConfig,
    ScenarioSpec,
    config_from_dict,
    generate_scenario,
    load_config,
    read_metrics_csv,
    replay,
    run_experiment,
    sweep,
)
from .seeding import SCENE_STREAM, rng_from_key


def _parse_set(values: list[str]) -> dict:
    """--set a.b=1 flags into a nested dict, values parsed as YAML scalars."""
    import yaml

    out: dict = {}
    for item in values:
        key, _, raw = item.partition("=")
        if not _:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = yaml.safe_load(raw)
    return out


def _config_from_args(args) -> ExperimentConfig:
    overrides = _parse_set(args.set or [])
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "policy", None):
        overrides["policy"] = args.policy
    if getattr(args, "n_actions", None):
        overrides["n_actions"] = args.n_actions
    if args.config:
        return load_config(args.config, overrides)
    return config_from_dict(overrides)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run_experiment(cfg, args.out)
    f = result.final
    print(
        f"run {cfg.run_label} seed={cfg.seed}: steps={f.step} pct_seen={f.pct_seen:.3f} "
        f"rho_det={f.rho_det:.3f} rho_class={f.rho_class:.3f} "
        f"sjsd_det={f.sjsd_det:.2f} sjsd_class={f.sjsd_class:.2f}"
    )
    if args.out:
        print(f"outputs in {args.out}")
    return 0


def cmd_sweep(args) -> int:
    overrides = _parse_set(args.set or [])
    base = load_config(args.config, overrides) if args.config else config_from_dict(overrides)
    configs = []
    for policy in args.policies:
        from dataclasses import replace

        configs.append(replace(base, policy=policy, label=policy))
    result = sweep(configs, args.seeds, args.out, jobs=args.jobs)
    print(result.table_text())
    if result.failures:
        for label, seed, status in result.failures:
            print(f"FAILED {label} seed={seed}: {status}", file=sys.stderr)
        return 1
    return 0


def cmd_gen_scene(args) -> int:
    spec = ScenarioSpec(
        n_rows=args.rows,
        n_cols=args.cols,
        cell_size=args.cell_size,
        n_clusters=args.clusters,
        targets_per_cluster=args.per_cluster,
        num_classes=args.classes,
    )
    scene = generate_scenario(spec, rng_from_key(args.seed, SCENE_STREAM))
    save_scene(scene, args.out)
    print(f"wrote {args.out}: {len(scene.occupied)} occupied cells, L={scene.num_classes}")
    return 0


def cmd_oracle(args) -> int:
    if args.kind == "detection":
        closed = detection_mi(args.p, args.p_d, args.p_fa)
        brute = detection_mi_enumerated(args.p, args.p_d, args.p_fa)
        printed = detection_mi_printed(args.p, args.p_d, args.p_fa)
        print(f"closed_form        = {closed:.12f} nats")
        print(f"joint_enumeration  = {brute:.12f} nats")
        print(f"|difference|       = {abs(closed - brute):.3e}")
        print(f"printed_form       = {float(printed):.12f} nats (|gap| = {abs(printed - brute):.3e})")
    elif args.kind == "classification":
        alpha = [float(v) for v in args.alpha.split(",")]
        closed = classification_mi(alpha)
        est, se = classification_mi_mc(alpha, args.samples, np.random.default_rng(args.seed))
        print(f"closed_form  = {closed:.9f} nats")
        print(f"monte_carlo  = {est:.9f} +- {se:.2e} nats ({args.samples} samples)")
        print(f"|difference| = {abs(closed - est):.3e} ({abs(closed - est) / se if se else 0:.2f} standard errors)")
    else:  # printed-gap
        gap = printed_form_gap(args.samples, args.seed)
        print(json.dumps(gap, indent=2))
    return 0


def cmd_replay(args) -> int:
    rows = replay(args.run_dir)
    stored = read_metrics_csv(Path(args.run_dir) / "metrics.csv")
    worst = 0.0
    for a, b in zip(rows, stored):
        for name in ("pct_seen", "rho_det", "rho_class", "sjsd_det", "sjsd_class"):
            worst = max(worst, abs(getattr(a, name) - getattr(b, name)))
    print(f"replayed {len(rows)} steps; max |replay - stored| = {worst:.3e}")
    if args.out:
        from .runner import write_metrics_csv

        write_metrics_csv(Path(args.out), rows, f"replay_of={args.run_dir}")
        print(f"wrote {args.out}")
    # the stored CSV quantizes to 10 significant digits; replay must agree
    # to that precision
    return 0 if worst < 1e-6 else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="igplan", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("-c", "--config", help="YAML config file")
    p.add_argument("-o", "--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--policy", choices=("lawnmower", "greedy", "rollout"))
    p.add_argument("--n-actions", type=int, dest="n_actions")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of policies x seeds")
    p.add_argument("-c", "--config", help="YAML base config")
    p.add_argument("-o", "--out", help="sweep output directory")
    p.add_argument("--policies", nargs="+", default=["lawnmower", "greedy", "rollout"])
    p.add_argument("--seeds", nargs="+", type=int, default=list(range(10)))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-scene", help="generate a synthetic target scene")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--rows", type=int, default=25)
    p.add_argument("--cols", type=int, default=25)
    p.add_argument("--cell-size", type=float, default=1.0)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--per-cluster", type=int, default=3)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("oracle", help="cross-check information-gain closed forms")
    osub = p.add_subparsers(dest="kind", required=True)
    o = osub.add_parser("detection")
    o.add_argument("--p", type=float, required=True, help="prior occupancy probability")
    o.add_argument("--p-d", type=float, required=True, dest="p_d")
    o.add_argument("--p-fa", type=float, required=True, dest="p_fa")
    o.set_defaults(func=cmd_oracle)
    o = osub.add_parser("classification")
    o.add_argument("--alpha", required=True, help="comma-separated Dirichlet parameters")
    o.add_argument("--samples", type=int, default=200_000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)
    o = osub.add_parser("printed-gap")
    o.add_argument("--samples", type=int, default=100_000)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle)

    p = sub.add_parser("replay", help="recompute metrics from a stored run")
    p.add_argument("run_dir")
    p.add_argument("-o", "--out", help="write replayed metrics CSV here")
    p.set_defaults(func=cmd_replay)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
