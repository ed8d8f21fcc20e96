"""Run configuration: flat key-value files, validation, and run records.

Config files are plain ``key = value`` lines; blank lines and ``#`` comments
are ignored.  Keys (all optional unless noted):

    model        gaussian | ising (required)
    rho          truncation success probability, in (0,1)      [default 0.4]
    tau          schedule base, in (0,1)                       [default 0.2]
    max_level    level cap for the truncation draw             [default 50]
    cap_action   raise | truncate (behavior at the cap)        [default raise]
    max_sims     per-replication simulation budget             [default 1e8]
    m            importance-sample count (required for `run`)
    m_grid       comma-separated M values (required for `sweep`)
    n_rep        auto | positive integer                       [default auto]
    theta_bar    pilot point for auto replication calibration
                 (required for auto on models without a proper prior mean)
    target_var   calibration target for V(log|p-hat|)          [default 1.0]
    pilot        calibration pilot size                        [default 200]
    seed         master seed (required unless --seed is given)
    workers      worker process count                          [default 1]
    phis         comma list of test functions: theta, theta2   [default theta2]
    importance   prior | normal:MEAN,VAR   [default: normal:0,2 for gaussian,
                 prior for ising]
    out          output path (default: stdout)
    format       records | table                               [default records]
    rows, cols   ising lattice size (required for ising)
    sweeps       ising Gibbs sweeps per simulation             [default 200]
    obs_seed     ising observed-data seed (required for ising)
    obs_theta    ising observed-data interaction               [default 0.5]
    quad_points  oracle quadrature intervals                   [default 512]
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError

FORMATS = ("records", "table")
CAP_ACTIONS = ("raise", "truncate")
MODELS = ("gaussian", "ising")


@dataclass(frozen=True)
class RunConfig:
    model: str
    rho: float = 0.4
    tau: float = 0.2
    max_level: int = 50
    cap_action: str = "raise"
    max_sims: int = 100_000_000
    m: Optional[int] = None
    m_grid: Optional[tuple] = None
    n_rep: object = "auto"
    theta_bar: Optional[float] = None
    target_var: float = 1.0
    pilot: int = 200
    seed: Optional[int] = None
    workers: int = 1
    phis: tuple = ("theta2",)
    importance: Optional[str] = None
    out: Optional[str] = None
    format: str = "records"
    rows: Optional[int] = None
    cols: Optional[int] = None
    sweeps: int = 200
    obs_seed: Optional[int] = None
    obs_theta: float = 0.5
    quad_points: int = 512

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def echo(self):
        """Plain-dict echo of every knob, for the run record."""
        d = dataclasses.asdict(self)
        d["phis"] = list(self.phis)
        d["m_grid"] = list(self.m_grid) if self.m_grid is not None else None
        return d


def parse_config_file(path):
    """Read a flat key-value file into a raw string dict."""
    raw = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.strip()
        if key in raw:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _conv_int(key, s):
    try:
        return int(s)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: expected an integer, got {s!r}") from None


def _conv_float(key, s):
    try:
        return float(s)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r}: expected a number, got {s!r}") from None


def _conv_choice(key, s, choices):
    if s not in choices:
        raise ConfigError(f"config key {key!r}: must be one of {', '.join(choices)}, got {s!r}")
    return s


def _conv_n_rep(key, s):
    if s == "auto":
        return "auto"
    n = _conv_int(key, s)
    if n < 1:
        raise ConfigError(f"config key {key!r}: must be 'auto' or a positive integer, got {s!r}")
    return n


def _conv_int_list(key, s):
    parts = [p.strip() for p in str(s).split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"config key {key!r}: expected a comma-separated list of integers")
    return tuple(_conv_int(key, p) for p in parts)


def _conv_str_list(key, s):
    parts = tuple(p.strip() for p in str(s).split(",") if p.strip())
    if not parts:
        raise ConfigError(f"config key {key!r}: expected a comma-separated list")
    return parts


_CONVERTERS = {
    "model": lambda k, s: _conv_choice(k, s, MODELS),
    "rho": _conv_float,
    "tau": _conv_float,
    "max_level": _conv_int,
    "cap_action": lambda k, s: _conv_choice(k, s, CAP_ACTIONS),
    "max_sims": _conv_int,
    "m": _conv_int,
    "m_grid": _conv_int_list,
    "n_rep": _conv_n_rep,
    "theta_bar": _conv_float,
    "target_var": _conv_float,
    "pilot": _conv_int,
    "seed": _conv_int,
    "workers": _conv_int,
    "phis": _conv_str_list,
    "importance": lambda k, s: s,
    "out": lambda k, s: s,
    "format": lambda k, s: _conv_choice(k, s, FORMATS),
    "rows": _conv_int,
    "cols": _conv_int,
    "sweeps": _conv_int,
    "obs_seed": _conv_int,
    "obs_theta": _conv_float,
    "quad_points": _conv_int,
}


def build_config(raw, overrides=None):
    """Convert raw strings (plus CLI overrides) into a validated RunConfig."""
    values = {}
    for key, s in raw.items():
        if key not in _CONVERTERS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _CONVERTERS[key](key, s)
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    if "model" not in values:
        raise ConfigError("config key 'model' is required")
    cfg = RunConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    if not 0.0 < cfg.rho < 1.0:
        raise ConfigError(f"config key 'rho': must lie in (0,1), got {cfg.rho}")
    if not 0.0 < cfg.tau < 1.0:
        raise ConfigError(f"config key 'tau': must lie in (0,1), got {cfg.tau}")
    if cfg.max_level < 0:
        raise ConfigError(f"config key 'max_level': must be >= 0, got {cfg.max_level}")
    if cfg.max_sims < 1:
        raise ConfigError(f"config key 'max_sims': must be >= 1, got {cfg.max_sims}")
    if cfg.m is not None and cfg.m < 2:
        raise ConfigError(f"config key 'm': must be >= 2, got {cfg.m}")
    if cfg.m_grid is not None and any(m < 2 for m in cfg.m_grid):
        raise ConfigError(f"config key 'm_grid': every M must be >= 2, got {cfg.m_grid}")
    if cfg.workers < 1:
        raise ConfigError(f"config key 'workers': must be >= 1, got {cfg.workers}")
    if cfg.pilot < 2:
        raise ConfigError(f"config key 'pilot': must be >= 2, got {cfg.pilot}")
    if cfg.target_var <= 0:
        raise ConfigError(f"config key 'target_var': must be positive, got {cfg.target_var}")
    if cfg.sweeps < 1:
        raise ConfigError(f"config key 'sweeps': must be >= 1, got {cfg.sweeps}")
    if cfg.quad_points < 64:
        raise ConfigError(f"config key 'quad_points': must be >= 64, got {cfg.quad_points}")
    if cfg.model == "ising":
        for key in ("rows", "cols", "obs_seed"):
            if getattr(cfg, key) is None:
                raise ConfigError(f"config key {key!r} is required for the ising model")
        if cfg.rows < 1 or cfg.cols < 1:
            raise ConfigError(
                f"config keys 'rows'/'cols': must be positive, got {cfg.rows}x{cfg.cols}"
            )


_NON_NUMERICAL_KEYS = ("workers", "out", "format")


def config_hash(cfg):
    """Short stable hash of every knob that affects the numbers.

    Worker count and output destination are excluded: they change how and
    where results are produced, never what they are.
    """
    echo = cfg.echo()
    for key in _NON_NUMERICAL_KEYS:
        echo.pop(key)
    blob = json.dumps(echo, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RunRecord:
    """Serialized outcome of one run: config echo plus all estimates."""

    config: dict
    config_hash: str
    seed: int
    backend: str
    m: int
    n_rep: int
    phi_stats: dict  # name -> {"estimate", "standard_error", "asymptotic_variance"}
    marginal: float
    marginal_se: float
    negative_weight_fraction: float
    total_simulations: int
    wall_time_s: float

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))

    def core_dict(self):
        """Record minus wall time, worker count, and output destination: the
        fields that must be identical for identical (config, seed) at any
        parallelism."""
        d = self.to_dict()
        d.pop("wall_time_s")
        d["config"] = dict(d["config"])
        for key in _NON_NUMERICAL_KEYS:
            d["config"].pop(key)
        return d
