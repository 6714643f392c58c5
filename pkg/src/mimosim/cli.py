"""Command-line front end: ``mimosim ber | plan | validate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .analysis import plan_antenna_range, sinr_av_b_ub, spectral_efficiency, to_db
from .montecarlo import SimulationPlan, ber_confidence, run_sweep, validate_moments
from .phy import SystemConfig
from .turbo import TurboSpec

EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_VALIDATION = 3
MIN_DRAWS = 10_000

CONFIG_KEYS = {
    "n_t": int,
    "n_r": int,
    "n_tot": int,
    "n_rt": int,
    "sigma_h_sq": float,
    "sigma_w_sq": float,
    "snr_db": list,
    "frames": int,
    "seed": int,
    "workers": int,
    "num_iterations": int,
    "early_stop_errors": int,
    "eta_min": float,
    "draws": int,
    "out": str,
}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    """Render a number for CSV: integers verbatim, floats to 12 significant digits."""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}' in {path}")
        kind = CONFIG_KEYS[key]
        if kind is list:
            if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
            ):
                raise ConfigError(f"config key '{key}' must be a list of numbers")
            out[key] = [float(v) for v in value]
        elif kind is int:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"config key '{key}' must be an integer, got {value!r}")
            out[key] = value
        elif kind is float:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"config key '{key}' must be a number, got {value!r}")
            out[key] = float(value)
        else:
            if not isinstance(value, str):
                raise ConfigError(f"config key '{key}' must be a string, got {value!r}")
            out[key] = value
    return out


def merge(config: dict, args: argparse.Namespace, keys) -> dict:
    """Command-line values win over the config file."""
    merged = dict(config)
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def resolve_antennas(conf: dict) -> tuple[int, int]:
    n_t, n_r, n_tot = conf.get("n_t"), conf.get("n_r"), conf.get("n_tot")
    if n_tot is not None:
        if n_t is None and n_r is None:
            raise ConfigError("'n_tot' needs an explicit split: give 'n_t' or 'n_r' as well")
        if n_t is None:
            n_t = n_tot - n_r
        elif n_r is None:
            n_r = n_tot - n_t
        elif n_t + n_r != n_tot:
            raise ConfigError(f"'n_tot'={n_tot} disagrees with n_t={n_t} + n_r={n_r}")
    if n_t is None:
        raise ConfigError("missing config key 'n_t'")
    if n_r is None:
        raise ConfigError("missing config key 'n_r'")
    if n_t < 1:
        raise ConfigError(f"config key 'n_t' must be positive, got {n_t}")
    if n_r < 1:
        raise ConfigError(f"config key 'n_r' must be positive, got {n_r}")
    return n_t, n_r


def default_seed() -> int:
    env = os.environ.get("MIMOSIM_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MIMOSIM_SEED must be an integer, got {env!r}") from None


@dataclass
class BerJob:
    plan: SimulationPlan
    out: str | None


def build_ber_job(conf: dict) -> BerJob:
    n_t, n_r = resolve_antennas(conf)
    snr = conf.get("snr_db")
    if not snr:
        raise ConfigError("missing config key 'snr_db'")
    for key in ("n_rt", "frames", "workers", "num_iterations", "early_stop_errors"):
        if key in conf and conf[key] < 1:
            raise ConfigError(f"config key '{key}' must be positive, got {conf[key]}")
    if conf.get("sigma_h_sq", 0.5) <= 0:
        raise ConfigError("config key 'sigma_h_sq' must be positive")
    seed = conf["seed"] if "seed" in conf else default_seed()
    if not 0 <= seed < 2**64:
        raise ConfigError(f"config key 'seed' must be a 64-bit unsigned integer, got {seed}")
    cfg = SystemConfig(n_t, n_r, conf.get("n_rt", 1), conf.get("sigma_h_sq", 0.5))
    turbo = TurboSpec.for_receive_antennas(n_r, num_iterations=conf.get("num_iterations", 8))
    plan = SimulationPlan(
        cfg=cfg,
        snr_points_db=tuple(snr),
        frames=conf.get("frames", 1000),
        master_seed=seed,
        workers=conf.get("workers", 1),
        turbo=turbo,
        early_stop_errors=conf.get("early_stop_errors"),
    )
    return BerJob(plan, conf.get("out"))


BER_COLUMNS = ["snr_db", "frames", "bits", "errors", "ber", "ci_low", "ci_high", "eta_p", "sinr_ub_db"]


def ber_rows(plan: SimulationPlan, records) -> list[list[str]]:
    cfg = plan.cfg
    eta = spectral_efficiency(cfg.n_r, cfg.n_rt)
    ub_db = to_db(sinr_av_b_ub(cfg.n_t, cfg.n_r, cfg.n_rt))
    rows = []
    for r in records:
        lo, hi = ber_confidence(r)
        rows.append([fmt(r.snr_db), fmt(r.frames), fmt(r.bits_sent), fmt(r.bit_errors),
                     fmt(r.ber), fmt(lo), fmt(hi), fmt(eta), fmt(ub_db)])
    return rows


def write_csv(rows, header, path: str | None, footer=()) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    for line in footer:
        buf.write(line + "\n")
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    return text


def cmd_ber(args) -> int:
    conf = load_config(args.config)
    conf = merge(conf, args, ("frames", "seed", "workers", "out"))
    job = build_ber_job(conf)
    try:
        records = run_sweep(job.plan)
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: simulation failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    rows = ber_rows(job.plan, records)
    text = write_csv(rows, BER_COLUMNS, job.out)
    if job.out:
        cfg = job.plan.cfg
        print(f"N_t={cfg.n_t} N_r={cfg.n_r} N_rt={cfg.n_rt} L_d1={job.plan.data_length} "
              f"seed={job.plan.master_seed}")
        print(f"{'snr_db':>8} {'frames':>7} {'errors':>8} {'ber':>11}  95% CI")
        for r in records:
            lo, hi = ber_confidence(r)
            print(f"{r.snr_db:8.2f} {r.frames:7d} {r.bit_errors:8d} {r.ber:11.3e}  [{lo:.2e}, {hi:.2e}]")
        print(f"wrote {job.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_plan(args) -> int:
    conf = load_config(args.config) if args.config else {}
    conf = merge(conf, args, ("n_tot", "n_rt", "eta_min", "out"))
    for key in ("n_tot", "n_rt", "eta_min"):
        if key not in conf:
            raise ConfigError(f"missing value for '{key}'")
    if conf["n_tot"] < 3:
        raise ConfigError(f"'n_tot' must be at least 3, got {conf['n_tot']}")
    if conf["n_rt"] < 1:
        raise ConfigError(f"'n_rt' must be positive, got {conf['n_rt']}")
    if not conf["eta_min"] > 0:
        raise ConfigError(f"'eta_min' must be positive, got {conf['eta_min']}")
    res = plan_antenna_range(conf["n_tot"], conf["n_rt"], conf["eta_min"])
    rows = [[fmt(int(n)), fmt(s), fmt(e), fmt(f)]
            for n, s, e, f in zip(res.n_t, res.sinr_ub_db, res.eta_p, res.f)]
    footer = [f"# stationary_n_t={fmt(res.stationary_n_t)}"]
    if res.empty:
        footer += ["# range=EMPTY"]
    else:
        footer += [f"# n_t_min={res.n_t_min}", f"# n_t_max={res.n_t_max}"]
    footer.append(f"# feasible={fmt(res.feasible)}")
    text = write_csv(rows, ["n_t", "sinr_ub_db", "eta_p", "f"], conf.get("out"), footer)
    if conf.get("out"):
        print("\n".join(footer))
    else:
        sys.stdout.write(text)
    return 0


def cmd_validate(args, parser) -> int:
    conf = load_config(args.config) if args.config else {}
    conf = merge(conf, args, ("n_t", "n_r", "n_rt", "sigma_h_sq", "sigma_w_sq", "draws", "seed"))
    n_t, n_r = resolve_antennas(conf)
    draws = conf.get("draws", 100_000)
    if draws < MIN_DRAWS:
        parser.error(f"--draws must be at least {MIN_DRAWS} to resolve 4 standard errors")
    cfg = SystemConfig(n_t, n_r, conf.get("n_rt", 1), conf.get("sigma_h_sq", 0.5),
                       conf.get("sigma_w_sq", 1.0))
    analytic = None
    if args.analytic_sigma_h2 is not None:
        analytic = SystemConfig(n_t, n_r, cfg.n_rt, args.analytic_sigma_h2, cfg.sigma_w_sq)
    seed = conf["seed"] if "seed" in conf else default_seed()
    report = validate_moments(cfg, draws, seed=seed, analytic_cfg=analytic)
    print(f"N_t={n_t} N_r={n_r} N_rt={cfg.n_rt} sigma_H^2={cfg.sigma_h_sq} "
          f"sigma_W^2={cfg.sigma_w_sq} draws={draws}")
    print(f"{'moment':<18} {'analytic':>12} {'estimate':>12} {'stderr':>10} {'z':>7}  result")
    for c in report.checks:
        print(f"{c.name:<18} {c.analytic:12.6g} {c.estimate:12.6g} {c.stderr:10.3g} "
              f"{c.z_score:7.2f}  {'PASS' if c.passed else 'FAIL'}")
    return 0 if report.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimosim", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", help="Monte Carlo BER sweep")
    ber.add_argument("--config", required=True, help="JSON run configuration")
    ber.add_argument("--frames", type=int)
    ber.add_argument("--seed", type=int)
    ber.add_argument("--workers", type=int)
    ber.add_argument("--out", help="CSV output path (stdout if omitted)")

    plan = sub.add_parser("plan", help="SINR bound / spectral efficiency trade-off over N_t")
    plan.add_argument("--config")
    plan.add_argument("--ntot", dest="n_tot", type=int)
    plan.add_argument("--nrt", dest="n_rt", type=int)
    plan.add_argument("--eta-min", dest="eta_min", type=float)
    plan.add_argument("--out")

    val = sub.add_parser("validate", help="Monte Carlo check of the closed-form moments")
    val.add_argument("--config")
    val.add_argument("--nt", dest="n_t", type=int)
    val.add_argument("--nr", dest="n_r", type=int)
    val.add_argument("--nrt", dest="n_rt", type=int)
    val.add_argument("--sigma-h2", dest="sigma_h_sq", type=float)
    val.add_argument("--sigma-w2", dest="sigma_w_sq", type=float)
    val.add_argument("--draws", type=int)
    val.add_argument("--seed", type=int)
    val.add_argument("--analytic-sigma-h2", type=float, help=argparse.SUPPRESS)
    val.set_defaults(subparser=val)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )
    try:
        if args.command == "ber":
            return cmd_ber(args)
        if args.command == "plan":
            return cmd_plan(args)
        return cmd_validate(args, args.subparser)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
