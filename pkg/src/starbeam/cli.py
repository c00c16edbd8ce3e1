"""Command-line driver.

Subcommands: run (single solve), experiment (spec-file driven batch),
grad-check (analytic-vs-finite-difference suite), time (per-epoch timing).

The optional JSON config file has three sections whose keys mirror the
config dataclasses; units are watts, meters, and radians:

    {
      "system":  {"M": 8, "N": 16, "K": 2, "p_max_w": 0.01,
                  "noise_power_w": 1e-14, "weights": [1.0, 1.0],
                  "user_sides": ["transmission", "reflection"]},
      "train":   {"n_epochs": 300, "n_outer": 1, "n_inner": 1,
                  "lr_w": 1e-3, "lr_a": 5e-3, "lr_theta": 5e-3,
                  "n1": 5, "n2": 1, "mode": "independent",
                  "rho_min": 0.3, "rho_max": 3000.0,
                  "regulator_gain_rad": 6.283185307179586, "seed": 0},
      "channel": {"rician_k_g": 10.0, "rician_k_h": 10.0,
                  "bs_pos_m": [0.0, 0.0], "ris_pos_m": [100.0, 0.0],
                  "center_t_m": [100.0, -15.0], "center_r_m": [100.0, 15.0],
                  "user_area_radius_m": 5.0, "pathloss_a_db": 35.6,
                  "pathloss_b_db_per_decade": 22.0, "los_mode": "ula",
                  "seed": 0}
    }

Missing sections/keys fall back to the selected scale's defaults.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .channels import (
    ChannelConfig,
    desk_scenario,
    default_scenario,
    generate_channels,
    save_channels,
)
from .experiments import (
    KIND_TIMING,
    SCHEME_GML_COUPLED,
    SCHEME_GML_INDEPENDENT,
    SCHEMES,
    ExperimentSpec,
    desk_train,
    grad_check_command,
    paper_train,
    run_experiment,
    run_scheme,
    timing_probe,
)
from .model import SystemConfig
from .training import MODE_COUPLED, MODE_INDEPENDENT, PenaltySchedule, TrainConfig


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _system_from_dict(d: dict, base: SystemConfig) -> SystemConfig:
    return SystemConfig(
        M=int(d.get("M", base.M)),
        N=int(d.get("N", base.N)),
        K=int(d.get("K", base.K)),
        p_max=float(d.get("p_max_w", base.p_max)),
        noise_power=float(d.get("noise_power_w", base.noise_power)),
        user_sides=tuple(d["user_sides"]) if "user_sides" in d else None,
        weights=np.asarray(d["weights"], float) if "weights" in d else None,
    )


def _train_from_dict(d: dict, base: TrainConfig) -> TrainConfig:
    penalty = PenaltySchedule(
        rho_min=float(d.get("rho_min", base.penalty.rho_min)),
        rho_max=float(d.get("rho_max", base.penalty.rho_max)),
    )
    return TrainConfig(
        n_epochs=int(d.get("n_epochs", base.n_epochs)),
        n_outer=int(d.get("n_outer", base.n_outer)),
        n_inner=int(d.get("n_inner", base.n_inner)),
        lr_w=float(d.get("lr_w", base.lr_w)),
        lr_a=float(d.get("lr_a", base.lr_a)),
        lr_theta=float(d.get("lr_theta", base.lr_theta)),
        n1=int(d.get("n1", base.n1)),
        n2=int(d.get("n2", base.n2)),
        mode=d.get("mode", base.mode),
        penalty=penalty,
        regulator_gain=float(d.get("regulator_gain_rad", base.regulator_gain)),
        seed=int(d.get("seed", base.seed)),
    )


def _channel_from_dict(d: dict, base: ChannelConfig) -> ChannelConfig:
    def pair(key, fallback):
        return tuple(float(v) for v in d[key]) if key in d else fallback

    return ChannelConfig(
        rician_k_g=float(d.get("rician_k_g", base.rician_k_g)),
        rician_k_h=float(d.get("rician_k_h", base.rician_k_h)),
        bs_pos=pair("bs_pos_m", base.bs_pos),
        ris_pos=pair("ris_pos_m", base.ris_pos),
        center_t=pair("center_t_m", base.center_t),
        center_r=pair("center_r_m", base.center_r),
        user_area_radius=float(d.get("user_area_radius_m", base.user_area_radius)),
        pathloss_a=float(d.get("pathloss_a_db", base.pathloss_a)),
        pathloss_b=float(d.get("pathloss_b_db_per_decade", base.pathloss_b)),
        los_mode=d.get("los_mode", base.los_mode),
        seed=int(d.get("seed", base.seed)),
    )


def _build_configs(args) -> tuple[SystemConfig, ChannelConfig, TrainConfig]:
    desk = not args.paper_scale
    if desk:
        sys_cfg, ch_cfg = desk_scenario()
        train = desk_train(mode=args.mode)
    else:
        sys_cfg, ch_cfg = default_scenario()
        train = paper_train(mode=args.mode)
    if args.config:
        raw = _load_json(args.config)
        sys_cfg = _system_from_dict(raw.get("system", {}), sys_cfg)
        train = _train_from_dict(raw.get("train", {}), train)
        ch_cfg = _channel_from_dict(raw.get("channel", {}), ch_cfg)
    if args.mode:
        train = dataclasses.replace(train, mode=args.mode)
    if args.seed is not None:
        train = dataclasses.replace(train, seed=args.seed)
        ch_cfg = dataclasses.replace(ch_cfg, seed=args.seed)
    return sys_cfg, ch_cfg, train


def _cmd_run(args) -> int:
    sys_cfg, ch_cfg, train = _build_configs(args)
    scheme = args.scheme
    if scheme is None:
        scheme = (
            SCHEME_GML_COUPLED if train.mode == MODE_COUPLED
            else SCHEME_GML_INDEPENDENT
        )
    ch = generate_channels(sys_cfg, ch_cfg, np.random.default_rng(ch_cfg.seed))
    sol = run_scheme(scheme, sys_cfg, ch, train)
    print(f"scheme:              {scheme}")
    print(f"mode:                {sol.mode}")
    print(f"WSR (reported):      {sol.wsr_opt:.6f} bit/s/Hz")
    if sol.mode == MODE_COUPLED:
        print(f"WSR (pre-projection): {sol.wsr_pre_projection:.6f} bit/s/Hz")
        print(f"coupled feasible:    {sol.feasible_coupled}")
    print(f"wall clock:          {sol.seconds:.2f} s")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        np.savez(
            os.path.join(args.out, "solution.npz"),
            W_re=sol.W_opt.real, W_im=sol.W_opt.imag,
            beta=sol.beta_opt, theta=sol.theta_opt,
        )
        summary = {
            "scheme": scheme,
            "mode": sol.mode,
            "wsr_opt": sol.wsr_opt,
            "wsr_pre_projection": sol.wsr_pre_projection,
            "feasible_coupled": sol.feasible_coupled,
            "seed": train.seed,
        }
        with open(os.path.join(args.out, "solution.json"), "w") as fh:
            json.dump(summary, fh, indent=2)
        if "wsr_best" in sol.traces:
            import csv as _csv

            with open(os.path.join(args.out, "convergence.csv"), "w",
                      newline="") as fh:
                w = _csv.writer(fh)
                w.writerow(["epoch", "wsr_best", "wsr_current", "penalty", "rho"])
                t = sol.traces
                for e in range(len(t["wsr_best"])):
                    w.writerow([
                        e, repr(float(t["wsr_best"][e])),
                        repr(float(t.get("wsr_current", t["wsr_best"])[e])),
                        repr(float(t["penalty"][e])) if "penalty" in t else "0.0",
                        repr(float(t["rho"][e])) if "rho" in t else "0.0",
                    ])
        save_channels(os.path.join(args.out, "channels.txt"), ch)
        print(f"artifacts written to {args.out}/")
    return 0


def _cmd_experiment(args) -> int:
    raw = _load_json(args.spec)
    grid = raw.get("grid", [None])
    if raw.get("kind") in ("sweep_mn", "timing"):
        grid = [tuple(g) for g in grid]
    spec = ExperimentSpec(
        kind=raw["kind"],
        schemes=tuple(raw.get("schemes", [SCHEME_GML_INDEPENDENT])),
        grid=tuple(grid),
        sample_count=int(raw.get("sample_count", 20)),
        out_dir=args.out or raw.get("out_dir", "results"),
        master_seed=args.seed if args.seed is not None
        else int(raw.get("master_seed", 0)),
        desk_scale=bool(raw.get("desk_scale", not args.paper_scale)),
        n_epochs=raw.get("n_epochs"),
        users=raw.get("users"),
    )
    report = run_experiment(spec)
    print(f"{len(report.records)} cells, {len(report.failures)} failures")
    for path in report.csv_paths:
        print(f"  wrote {path}")
    for msg in report.failures:
        print(f"  FAILED {msg}", file=sys.stderr)
    return 1 if report.failures else 0


def _cmd_grad_check(args) -> int:
    report = grad_check_command(
        n_instances=args.instances,
        seed_base=1000 + (args.seed or 0),
    )
    return 0 if report.passed else 1


def _cmd_time(args) -> int:
    sys_cfg, ch_cfg, train = _build_configs(args)
    train = dataclasses.replace(train, n_epochs=args.epochs)
    result = timing_probe(sys_cfg, train, repetitions=args.repetitions)
    print(f"M={sys_cfg.M} N={sys_cfg.N} K={sys_cfg.K}")
    print(f"median: {result.median_s_per_epoch * 1e3:.3f} ms/epoch")
    print(f"min:    {result.min_s_per_epoch * 1e3:.3f} ms/epoch")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="starbeam",
        description="Joint precoder / STAR surface coefficient optimization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file (see module docs)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--mode", choices=[MODE_INDEPENDENT, MODE_COUPLED],
                       default=None)
        p.add_argument("--out", help="output directory")
        scale = p.add_mutually_exclusive_group()
        scale.add_argument("--desk-scale", action="store_true", default=True,
                           help="small fast configuration (default)")
        scale.add_argument("--paper-scale", dest="paper_scale",
                           action="store_true", default=False,
                           help="full-scale configuration (64 antennas, "
                                "100 elements)")

    p_run = sub.add_parser("run", help="single solve; prints the WSR")
    common(p_run)
    p_run.add_argument("--scheme", choices=list(SCHEMES), default=None)
    p_run.set_defaults(func=_cmd_run)

    p_exp = sub.add_parser("experiment", help="run a spec-file experiment")
    common(p_exp)
    p_exp.add_argument("spec", help="JSON experiment spec file")
    p_exp.set_defaults(func=_cmd_experiment)

    p_gc = sub.add_parser("grad-check",
                          help="analytic vs finite-difference gradient suite")
    common(p_gc)
    p_gc.add_argument("--instances", type=int, default=50)
    p_gc.set_defaults(func=_cmd_grad_check)

    p_time = sub.add_parser("time", help="per-epoch wall-clock probe")
    common(p_time)
    p_time.add_argument("--repetitions", type=int, default=5)
    p_time.add_argument("--epochs", type=int, default=60)
    p_time.set_defaults(func=_cmd_time)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.mode is None and args.command in ("run", "time"):
        args.mode = MODE_INDEPENDENT
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
