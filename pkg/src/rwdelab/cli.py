"""Experiment runner: config in, CSV/JSON (and optional SVG) artifacts out.

Seeds derive hierarchically (master -> subcommand -> sample), so artifacts
are byte-identical across repeated runs and across --jobs settings, and
growing a run never perturbs existing samples.

Exit codes: 0 success, 2 invalid configuration or usage (message names the
key), 3 acceptance-check failure under --check, 4 resource budget
exceeded, 5 unknown subcommand.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from multiprocessing import get_context

import numpy as np

from . import renorm, rng, stattests
from .config import ConfigError, ExperimentConfig, schema_help
from .lattice import UsageError
from .regen import blocks_to_arrays, direct_run, estimate_limits, sample_blocks
from .report import histogram_plot, loglog_plot, write_csv, write_json, write_meta

VERSION = "0.1.0"

SUBCOMMANDS = ("blocks", "simulate", "renorm", "qk", "mj", "akh", "decouple", "rmp-test")
_SUB_TAG = {name: 100 + i for i, name in enumerate(SUBCOMMANDS)}

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_RESOURCE = 4
EXIT_UNKNOWN_SUB = 5


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in ("-h", "--help"):
        _print_help()
        return EXIT_OK
    if not argv:
        _print_help(sys.stderr)
        return EXIT_UNKNOWN_SUB
    sub = argv[0]
    if sub not in SUBCOMMANDS:
        print(f"unknown subcommand {sub!r}; choose one of {', '.join(SUBCOMMANDS)}",
              file=sys.stderr)
        return EXIT_UNKNOWN_SUB
    parser = argparse.ArgumentParser(prog=f"rwdelab {sub}")
    parser.add_argument("--config", required=True, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--check", action="store_true",
                        help="evaluate the subcommand's pass criteria; exit 3 on failure")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker processes for sample loops (identical artifacts)")
    parser.add_argument("--brute-force", action="store_true",
                        help="mj: cross-check the DP against exhaustive enumeration")
    parser.add_argument("--plots", action="store_true", help="emit SVG plots")
    args = parser.parse_args(argv[1:])

    try:
        cfg = ExperimentConfig.from_file(args.config)
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG

    seed = args.seed if args.seed is not None else cfg.seed()
    os.makedirs(args.out, exist_ok=True)
    started = time.time()
    try:
        summary = _RUNNERS[sub](cfg, seed, args)
    except renorm.ResourceError as err:
        print(f"resource budget exceeded: {err}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, UsageError) as err:
        print(f"invalid config: {err}", file=sys.stderr)
        return EXIT_CONFIG
    summary["seed"] = seed
    summary["subcommand"] = sub
    write_json(os.path.join(args.out, f"{sub.replace('-', '_')}_summary.json"), summary)
    write_meta(args.out, wall_clock=time.time() - started, config_digest=cfg.digest(),
               seed=seed, subcommand=sub, version=VERSION)
    if args.check:
        failed = [name for name, ok in summary.get("checks", {}).items() if not ok]
        if failed:
            print("check failed: " + ", ".join(failed), file=sys.stderr)
            return EXIT_CHECK
    return EXIT_OK


def _print_help(stream=sys.stdout) -> None:
    print(__doc__, file=stream)
    print("subcommands and their CSV schemas:", file=stream)
    for sub, schema in _CSV_SCHEMAS.items():
        print(f"  {sub}: {schema}", file=stream)
    print(file=stream)
    print(schema_help(), file=stream)


_CSV_SCHEMAS = {
    "blocks": "index,seed,duration,disp,censored,rejections",
    "simulate": "run,final,ratio",
    "renorm": "k,scale,n,hits,rate,ci_lo,ci_hi",
    "qk": "k,scale,n,hits,rate,ci_lo,ci_hi",
    "mj": "instance,J,H,R,n_traps,dp,brute,match",
    "akh": "k,scale,horizon,threshold,n,hits,rate,ci_lo,ci_hi",
    "decouple": "pair,r,h,sep,n,covariance,se,bound,passed",
    "rmp-test": "pair,statistic,p_value,n,method,inconclusive,rejected",
}


def _sub_seed(seed: int, sub: str) -> int:
    return rng.derive(seed, _SUB_TAG[sub])


def _chunks(n: int, jobs: int):
    size = max(1, -(-n // max(1, jobs)))
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


# each worker rebuilds its inputs from the config text to stay picklable
def _blocks_worker(payload):
    text, seed, lo, hi = payload
    cfg = ExperimentConfig.from_text(text)
    blocks = sample_blocks(cfg.env_config(), cfg.kernel(), seed, hi - lo, start=lo)
    return blocks_to_arrays(blocks)


def _void_worker(payload):
    text, seed, l_max, lo, hi = payload
    cfg = ExperimentConfig.from_text(text)
    return renorm.void_run_firsts(cfg.env_config(), l_max, hi - lo, seed, start=lo)


def _parallel(worker, payloads, jobs: int):
    if jobs <= 1 or len(payloads) <= 1:
        return [worker(p) for p in payloads]
    with get_context("spawn").Pool(jobs) as pool:
        return pool.map(worker, payloads)


def _run_blocks(cfg: ExperimentConfig, seed: int, args) -> dict:
    n = cfg.get("experiment.n", 1000)
    sub_seed = _sub_seed(seed, "blocks")
    payloads = [(cfg.to_text(), sub_seed, lo, hi) for lo, hi in _chunks(n, args.jobs)]
    parts = _parallel(_blocks_worker, payloads, args.jobs)
    t1 = np.concatenate([p[0] for p in parts])
    disp = np.concatenate([p[1] for p in parts])
    cens = np.concatenate([p[2] for p in parts])
    rej = np.concatenate([p[3] for p in parts])
    write_csv(os.path.join(args.out, "blocks_rows.csv"),
              _CSV_SCHEMAS["blocks"].split(","),
              [(i, rng.derive(sub_seed, i), int(t1[i]), int(disp[i, 0]),
                bool(cens[i]), int(rej[i])) for i in range(n)])
    from .regen import RegenerationBlock

    blocks = [RegenerationBlock(int(t1[i]), (int(disp[i, 0]),), bool(cens[i]),
                                int(rej[i]), sub_seed) for i in range(n)]
    est = estimate_limits(blocks, boot_seed=rng.derive(sub_seed, rng.TAG_BOOT))
    censored_fraction = float(cens.mean())
    max_censored = cfg.get("experiment.max_censored_fraction", 1.0)
    return {
        "n_blocks": n,
        "censored_fraction": censored_fraction,
        "mean_rejections": float(rej.mean()),
        "speed": est.speed.tolist(),
        "speed_ci": [est.speed_ci[0].tolist(), est.speed_ci[1].tolist()],
        "clt_cov": est.clt_cov.tolist(),
        "cov_ci": [est.cov_ci[0].tolist(), est.cov_ci[1].tolist()],
        "mean_duration": est.mean_duration,
        "checks": {"censored_fraction_ok": censored_fraction <= max_censored},
    }


def _run_simulate(cfg: ExperimentConfig, seed: int, args) -> dict:
    t_final = cfg.get("experiment.t_final", 1000)
    n_runs = cfg.get("experiment.n_runs", 50)
    result = direct_run(cfg.env_config(), cfg.kernel(), t_final, n_runs,
                        _sub_seed(seed, "simulate"))
    ratios = result.ratios()[:, 0]
    write_csv(os.path.join(args.out, "simulate_rows.csv"),
              _CSV_SCHEMAS["simulate"].split(","),
              [(i, float(result.finals[i, 0]), float(ratios[i])) for i in range(n_runs)])
    mean = float(ratios.mean())
    se = float(ratios.std(ddof=1) / np.sqrt(n_runs)) if n_runs > 1 else 0.0
    summary = {"t_final": t_final, "n_runs": n_runs, "mean_ratio": mean,
               "ratio_se": se, "checks": {}}
    if cfg.has("experiment.reference_speed"):
        ref = cfg.get("experiment.reference_speed")
        summary["reference_speed"] = ref
        summary["checks"]["reference_within_3se"] = bool(abs(mean - ref) <= 3 * se)
        if args.plots:
            z = (result.finals[:, 0] - t_final * ref) / np.sqrt(t_final)
            histogram_plot(os.path.join(args.out, "simulate_standardized.svg"), z,
                           title="standardized terminal displacements")
    return summary


def _run_void_ladder(cfg: ExperimentConfig, seed: int, args, sub: str) -> dict:
    if sub == "qk":
        k_min = k_max = cfg.get("experiment.k")
    else:
        k_min = cfg.get("experiment.k_min", 1)
        k_max = cfg.get("experiment.k_max", 4)
    n = cfg.get("experiment.n", 10_000)
    ladder = renorm.ScaleLadder(k_min, k_max)
    sub_seed = _sub_seed(seed, sub)
    l_max = ladder.scale(k_max)
    payloads = [(cfg.to_text(), sub_seed, l_max, lo, hi) for lo, hi in _chunks(n, args.jobs)]
    firsts = np.concatenate(_parallel(_void_worker, payloads, args.jobs))
    rows = renorm.estimate_void_runs(cfg.env_config(), ladder, n, sub_seed, firsts=firsts)
    write_csv(os.path.join(args.out, f"{sub}_rows.csv"), _CSV_SCHEMAS[sub].split(","),
              [(r.k, r.scale, r.n, r.hits, r.rate, r.ci_lo, r.ci_hi) for r in rows])
    summary = {"rows": [vars(r) for r in rows], "n": n, "checks": {}}
    alpha = cfg.get("experiment.alpha",
                    stattests.env_tail_exponent(cfg.env_config()))
    summary["alpha"] = alpha
    if sub == "renorm":
        positive = [(r.scale, r.rate) for r in rows if r.hits > 0]
        if len(positive) >= 3:
            slope, se = stattests.loglog_slope(positive)
            summary["slope"] = slope
            summary["slope_se"] = se
            slope_max = cfg.get("experiment.slope_max", -1.5)
            summary["checks"]["slope_ok"] = bool(slope <= slope_max)
        if len(rows) >= 3:
            rec = renorm.void_run_recursion_check(rows, alpha)
            summary["recursion"] = rec
            summary["checks"]["recursion_ok"] = bool(rec["all_passed"])
        if args.plots:
            loglog_plot(os.path.join(args.out, "renorm_decay.svg"),
                        [r.scale for r in rows], [max(r.rate, 0.0) for r in rows],
                        title="void-run rate vs scale", guide_slope=-alpha)
    return summary


def _run_mj(cfg: ExperimentConfig, seed: int, args) -> dict:
    J = cfg.get("experiment.J", 2)
    H = cfg.get("experiment.H", 2)
    R = cfg.get("kernel.R", 1)
    rows = []
    mismatches = 0
    run_brute = args.brute_force or args.check
    if cfg.has("experiment.traps"):
        traps = renorm.TrapSet.from_sites(
            (int(p.split(":")[0]), int(p.split(":")[1]))
            for p in cfg.get("experiment.traps").split(";") if p)
        instances = [(0, J, H, R, traps)]
    else:
        n_inst = cfg.get("experiment.n_instances", 100)
        gen = np.random.default_rng(_sub_seed(seed, "mj"))
        instances = []
        for i in range(n_inst):
            Ri = int(gen.integers(1, 3))
            Hi = int(gen.choice([1, 2, 4]))
            Ji = int(gen.integers(1, max(2, 8 // Hi) + 1))
            n_traps = int(gen.integers(0, 7))
            traps = renorm.TrapSet.from_sites(
                (int(gen.integers(-10, 11)), int(gen.integers(0, Ji * Hi + Hi + 1)))
                for _ in range(n_traps))
            instances.append((i, Ji, Hi, Ri, traps))
    for i, Ji, Hi, Ri, traps in instances:
        dp = renorm.min_threat_count(Ji, Hi, traps, (0, 0), Ri)
        brute = ""
        match = True
        if run_brute:
            brute = renorm.min_threat_count(Ji, Hi, traps, (0, 0), Ri, brute_force=True)
            match = dp == brute
            mismatches += 0 if match else 1
        rows.append((i, Ji, Hi, Ri, len(traps), dp, brute, match))
    write_csv(os.path.join(args.out, "mj_rows.csv"), _CSV_SCHEMAS["mj"].split(","), rows)
    return {
        "n_instances": len(rows),
        "brute_force": run_brute,
        "mismatches": mismatches,
        "checks": {"dp_matches_brute": mismatches == 0} if run_brute else {},
    }


def _run_akh(cfg: ExperimentConfig, seed: int, args) -> dict:
    k_min = cfg.get("experiment.k_min", 2)
    k_max = cfg.get("experiment.k_max", 4)
    n = cfg.get("experiment.n", 400)
    env = cfg.env_config()
    sub_seed = _sub_seed(seed, "akh")
    rows = []
    for k in range(k_min, k_max + 1):
        H = cfg.get("experiment.H", 0) or renorm.triggering_horizon(k)
        rows.append(renorm.estimate_low_threat_paths(k, H, env, n, rng.derive(sub_seed, k)))
    write_csv(os.path.join(args.out, "akh_rows.csv"), _CSV_SCHEMAS["akh"].split(","),
              [(r.k, r.scale, r.horizon, r.threshold, r.n, r.hits, r.rate,
                r.ci_lo, r.ci_hi) for r in rows])
    summary = {"rows": [vars(r) for r in rows], "checks": {}}
    positive = [(r.scale, r.rate) for r in rows if r.hits > 0]
    if len(positive) >= 3:
        slope, se = stattests.loglog_slope(positive)
        summary["slope"] = slope
        summary["slope_se"] = se
        summary["checks"]["slope_ok"] = bool(slope <= cfg.get("experiment.slope_max", -1.0))
    if args.plots:
        loglog_plot(os.path.join(args.out, "akh_decay.svg"),
                    [r.scale for r in rows], [r.rate for r in rows],
                    title="low-threat-path rate vs scale", guide_slope=-1.0)
    return summary


def _run_decouple(cfg: ExperimentConfig, seed: int, args) -> dict:
    n_pairs = cfg.get("experiment.n_pairs", 50)
    n_per_pair = cfg.get("experiment.n_per_pair", 8000)
    out = stattests.decoupling_battery(cfg.env_config(), n_pairs, n_per_pair,
                                       _sub_seed(seed, "decouple"))
    write_csv(os.path.join(args.out, "decouple_rows.csv"),
              _CSV_SCHEMAS["decouple"].split(","),
              [(i, r.geometry[0], r.geometry[1], r.geometry[2], r.n,
                r.covariance, r.se, r.bound, r.passed)
               for i, r in enumerate(out["results"])])
    min_passed = cfg.get("experiment.min_passed", max(0, n_pairs - 3))
    return {
        "n_pairs": n_pairs,
        "n_per_pair": n_per_pair,
        "c_constant": out["c_constant"],
        "n_passed": out["n_passed"],
        "checks": {"enough_pairs_passed": out["n_passed"] >= min_passed},
    }


def _run_rmp(cfg: ExperimentConfig, seed: int, args) -> dict:
    n_pairs = cfg.get("experiment.n_pairs", 100)
    n_per_pair = cfg.get("experiment.n_per_pair", 1500)
    level = cfg.get("experiment.level", 0.05)
    sub_seed = _sub_seed(seed, "rmp-test")
    battery = stattests.rmp_battery(cfg.env_config(), n_pairs, n_per_pair,
                                    sub_seed, level=level)
    rows = [(i, r.statistic, r.p_value, r.n, r.method, r.inconclusive,
             (not r.inconclusive) and r.p_value < level)
            for i, r in enumerate(battery.reports)]
    write_csv(os.path.join(args.out, "rmp_test_rows.csv"),
              _CSV_SCHEMAS["rmp-test"].split(","), rows)
    lo = cfg.get("experiment.band_lo", 0.02)
    hi = cfg.get("experiment.band_hi", 0.08)
    summary = {
        "n_pairs": n_pairs,
        "n_per_pair": n_per_pair,
        "level": level,
        "rejected_fraction": battery.rejected_fraction,
        "n_inconclusive": battery.n_inconclusive,
        "checks": {"rejected_fraction_in_band":
                   bool(lo <= battery.rejected_fraction <= hi)},
    }
    if cfg.get("experiment.positive_control", 0):
        control = stattests.rmp_positive_control(cfg.env_config(), 10_000,
                                                 rng.derive(sub_seed, 999))
        summary["positive_control"] = control
        summary["checks"]["positive_control_power"] = bool(control["power"] >= 0.9)
    return summary


_RUNNERS = {
    "blocks": _run_blocks,
    "simulate": _run_simulate,
    "renorm": lambda cfg, seed, args: _run_void_ladder(cfg, seed, args, "renorm"),
    "qk": lambda cfg, seed, args: _run_void_ladder(cfg, seed, args, "qk"),
    "mj": _run_mj,
    "akh": _run_akh,
    "decouple": _run_decouple,
    "rmp-test": _run_rmp,
}


if __name__ == "__main__":
    sys.exit(main())
