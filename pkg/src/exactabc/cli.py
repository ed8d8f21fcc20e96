"""Command-line harness: run, sweep, and oracle subcommands.

Standard output carries machine-readable results only; progress and error
text go to standard error.  Exit codes: 0 success, 2 configuration error,
3 numerical failure, 4 resource cap exceeded.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import backend, streams
from .config import FORMATS, RunRecord, build_config, config_hash, parse_config_file
from .debias import TruncationSchedule, calibrate_nrep
from .errors import (
    CalibrationError,
    ConfigError,
    NonpositiveMarginalError,
    ResourceLimitError,
)
from .is2 import PHI_REGISTRY, NormalImportance, PriorImportance, run_is2
from .ising import ising_model_from_seed, posterior_oracle
from .models import CountingModel, ParamPoint, gaussian_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_RESOURCE = 4


def make_model(cfg):
    """Instantiate the configured model."""
    if cfg.model == "gaussian":
        return gaussian_model()
    if cfg.model == "ising":
        model, _ = ising_model_from_seed(
            cfg.rows, cfg.cols, cfg.obs_seed, obs_theta=cfg.obs_theta, sweeps=cfg.sweeps
        )
        return model
    raise ConfigError(f"config key 'model': unknown model {cfg.model!r}")


def make_importance(cfg, model):
    """Instantiate the configured importance density."""
    spec = cfg.importance
    if spec is None:
        spec = "normal:0,2" if cfg.model == "gaussian" else "prior"
    if spec == "prior":
        return PriorImportance(model)
    if spec.startswith("normal:"):
        body = spec[len("normal:"):]
        parts = body.split(",")
        if len(parts) != 2:
            raise ConfigError(
                f"config key 'importance': expected normal:MEAN,VAR, got {spec!r}"
            )
        try:
            mean, var = float(parts[0]), float(parts[1])
        except ValueError:
            raise ConfigError(
                f"config key 'importance': non-numeric mean/variance in {spec!r}"
            ) from None
        if var <= 0:
            raise ConfigError(f"config key 'importance': variance must be positive, got {var}")
        return NormalImportance(mean, var)
    raise ConfigError(f"config key 'importance': unknown importance density {spec!r}")


def make_schedule(cfg, model):
    return TruncationSchedule(
        rho=cfg.rho,
        tau=cfg.tau,
        dim=model.summary_dim,
        max_level=cfg.max_level,
        cap_action=cfg.cap_action,
        max_sims=cfg.max_sims,
    )


def resolve_phis(cfg):
    unknown = [name for name in cfg.phis if name not in PHI_REGISTRY]
    if unknown:
        raise ConfigError(
            f"config key 'phis': unknown test function(s) {', '.join(unknown)}; "
            f"available: {', '.join(sorted(PHI_REGISTRY))}"
        )
    return {name: PHI_REGISTRY[name] for name in cfg.phis}


def _pilot_point(cfg, model):
    if cfg.theta_bar is not None:
        return ParamPoint(theta=np.array([cfg.theta_bar]), log_prior=0.0)
    prior_mean = getattr(model, "prior_mean", None)
    if prior_mean is None:
        raise ConfigError(
            "config key 'theta_bar' is required for n_rep=auto on this model "
            "(its flat prior has no mean to default to)"
        )
    return ParamPoint(theta=np.array([prior_mean]), log_prior=0.0)


def resolve_n_rep(cfg, model, sched):
    """Fixed n_rep from the config, or the auto-calibrated value.

    Returns (n_rep, calibration_simulations).
    """
    if cfg.n_rep != "auto":
        return int(cfg.n_rep), 0
    counting = CountingModel(model)
    rng = streams.derive(cfg.seed, streams.STREAM_CALIBRATION)
    n_rep = calibrate_nrep(
        counting,
        _pilot_point(cfg, model),
        sched,
        target_var=cfg.target_var,
        rng=rng,
        pilot=cfg.pilot,
    )
    return n_rep, counting.simulations


def run_from_config(cfg):
    """Execute one configured run and return its record."""
    if cfg.m is None:
        raise ConfigError("config key 'm' is required for run")
    if cfg.seed is None:
        raise ConfigError("config key 'seed' is required (or pass --seed)")
    model = make_model(cfg)
    sched = make_schedule(cfg, model)
    g = make_importance(cfg, model)
    phis = resolve_phis(cfg)
    start = time.perf_counter()
    n_rep, calib_sims = resolve_n_rep(cfg, model, sched)
    result = run_is2(
        model,
        g,
        phis,
        cfg.m,
        sched,
        n_rep,
        cfg.seed,
        workers=cfg.workers,
        progress=_progress,
    )
    wall = time.perf_counter() - start
    phi_stats = {
        name: {
            "estimate": float(result.estimates[j]),
            "standard_error": float(result.standard_errors[j]),
            "asymptotic_variance": float(result.asymptotic_variances[j]),
        }
        for j, name in enumerate(result.phi_names)
    }
    return RunRecord(
        config=cfg.echo(),
        config_hash=config_hash(cfg),
        seed=cfg.seed,
        backend=backend.BACKEND,
        m=cfg.m,
        n_rep=n_rep,
        phi_stats=phi_stats,
        marginal=result.marginal,
        marginal_se=result.marginal_se,
        negative_weight_fraction=result.negative_weight_fraction,
        total_simulations=result.total_simulations + calib_sims,
        wall_time_s=wall,
    )


def sweep_seed(master_seed, index):
    """Per-run seed for sweep entry ``index`` under ``master_seed``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(streams.STREAM_SWEEP, index))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def sweep(cfg, m_list=None):
    """One run per M with per-run seeds derived from the master seed."""
    if m_list is None:
        m_list = cfg.m_grid
    if not m_list:
        raise ConfigError("config key 'm_grid' is required for sweep")
    if cfg.seed is None:
        raise ConfigError("config key 'seed' is required (or pass --seed)")
    records = []
    for idx, m in enumerate(m_list):
        run_cfg = cfg.replace(m=int(m), seed=sweep_seed(cfg.seed, idx))
        records.append(run_from_config(run_cfg))
    return records


def _progress(done, total):
    print(f"progress: block {done}/{total}", file=sys.stderr, flush=True)


_TABLE_COLUMNS = (
    "model",
    "m",
    "seed",
    "n_rep",
    "phi",
    "estimate",
    "standard_error",
    "marginal",
    "marginal_se",
    "neg_weight_frac",
    "simulations",
)


def format_table(records):
    """Flat aligned table, one row per (record, test function)."""
    rows = [_TABLE_COLUMNS]
    for rec in records:
        for name, stats in rec.phi_stats.items():
            rows.append(
                (
                    rec.config["model"],
                    str(rec.m),
                    str(rec.seed),
                    str(rec.n_rep),
                    name,
                    f"{stats['estimate']:.6f}",
                    f"{stats['standard_error']:.6f}",
                    f"{rec.marginal:.6f}",
                    f"{rec.marginal_se:.6f}",
                    f"{rec.negative_weight_fraction:.4f}",
                    str(rec.total_simulations),
                )
            )
    widths = [max(len(row[i]) for row in rows) for i in range(len(_TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


def emit(records, fmt, out_path):
    if fmt == "table":
        text = format_table(records)
    else:
        text = "".join(rec.to_json() + "\n" for rec in records)
    if out_path:
        try:
            with open(out_path, "w") as fh:
                fh.write(text)
        except OSError as exc:
            raise ConfigError(f"config key 'out': cannot write {out_path}: {exc}") from exc
    else:
        sys.stdout.write(text)


def _load_config(args):
    raw = parse_config_file(args.config) if args.config else {}
    overrides = {
        "seed": args.seed,
        "workers": args.workers,
        "out": args.out,
        "format": args.format,
    }
    return build_config(raw, overrides)


def cmd_run(args):
    cfg = _load_config(args)
    record = run_from_config(cfg)
    emit([record], cfg.format, cfg.out)
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_config(args)
    m_list = args.m_grid if args.m_grid else cfg.m_grid
    records = sweep(cfg, m_list)
    emit(records, cfg.format, cfg.out)
    return EXIT_OK


def cmd_oracle(args):
    cfg = _load_config(args)
    if cfg.model != "ising":
        raise ConfigError("config key 'model': the oracle subcommand needs an ising config")
    for key in ("rows", "cols", "obs_seed"):
        if getattr(cfg, key) is None:
            raise ConfigError(f"config key {key!r} is required for the ising oracle")
    model, lattice = ising_model_from_seed(
        cfg.rows, cfg.cols, cfg.obs_seed, obs_theta=cfg.obs_theta, sweeps=cfg.sweeps
    )
    s_obs = int(model.observed[0])
    mean, marginal = posterior_oracle(cfg.rows, cfg.cols, s_obs, cfg.quad_points)
    payload = {
        "rows": cfg.rows,
        "cols": cfg.cols,
        "obs_seed": cfg.obs_seed,
        "obs_theta": cfg.obs_theta,
        "sweeps": cfg.sweeps,
        "s_obs": s_obs,
        "observed_lattice": lattice.render(),
        "quad_points": cfg.quad_points,
        "posterior_mean": mean,
        "marginal": marginal,
    }
    text = json.dumps(payload, sort_keys=True) + "\n"
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="exactabc",
        description="Debiased-ABC importance sampling experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, handler, extra in (
        ("run", cmd_run, False),
        ("sweep", cmd_sweep, True),
        ("oracle", cmd_oracle, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to a key=value config file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--workers", type=int, help="worker processes (overrides config)")
        p.add_argument("--out", help="output path (overrides config; default stdout)")
        p.add_argument("--format", choices=FORMATS, help="output format")
        if extra:
            p.add_argument(
                "--m-grid",
                type=lambda s: tuple(int(x) for x in s.split(",") if x),
                help="comma-separated M values (overrides config m_grid)",
            )
        p.set_defaults(handler=handler)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NonpositiveMarginalError, CalibrationError, ValueError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
