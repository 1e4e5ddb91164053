"""Flat ``key = value`` experiment configuration.

Lines are ``key = value``; ``#`` starts a comment. Command-line flags
override file values. Every key is parsed and validated before any
computation starts, and keys a command does not know are rejected.

Distribution keys:

* ``dist = gaussian`` with ``mean = 0, 0`` and ``cov = 2, 0, 0, 1`` (row-major);
* ``dist = gmm`` with ``components = w : mean : cov ; w : mean : cov ...``
  where mean and cov are comma-separated lists (e.g. ``0.5:-4:1 ; 0.5:4:1``);
* ``dist = swissroll`` with ``n``, ``noise`` and the shared ``seed``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .measures import GaussianMeasure, GaussianMixture


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _int(text):
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None
    if value != int(value):
        raise ConfigError(f"expected an integer, got {text!r}")
    return int(value)


def _floats(text):
    parts = [p for p in str(text).replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ConfigError("expected a comma-separated list of numbers")
    return [_float(p) for p in parts]


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _choice(*options):
    def parse(text):
        text = str(text).strip()
        if text not in options:
            raise ConfigError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


def _str(text):
    return str(text).strip()


_DIST_KEYS = {
    "dist": (_choice("gaussian", "gmm", "swissroll"), "gaussian"),
    "mean": (_floats, [0.0]),
    "cov": (_floats, [1.0]),
    "components": (_str, None),
    "n": (_int, 2000),
    "noise": (_float, 0.02),
}

_COMMON = {
    "seed": (_int, 0),
    "out": (_str, None),
}

SCHEMAS = {
    "orbit": {
        **_COMMON,
        **_DIST_KEYS,
        "mode": (_choice("continuous", "ordinary", "composed"), "continuous"),
        "tau": (_float, 0.2),
        "t_max": (_float, 0.4),
        "dt": (_float, 1e-3),
        "grid_lo": (_float, -2.0),
        "grid_hi": (_float, 2.0),
        "grid_n": (_int, 5),
        "n_samples": (_int, 200),
        "n_particles": (_int, 2000),
    },
    "variance-decay": {
        **_COMMON,
        "var0": (_float, 1.0),
        "taus": (_floats, [0.2, 0.1, 0.05]),
        "t_max": (_float, 1.0),
        "dt": (_float, 0.01),
        "train": (_bool, False),
        "tau": (_float, 0.2),
        "train_n": (_int, 1000),
        "train_J": (_int, 16),
        "train_epochs": (_int, 600),
        "train_lr": (_float, 0.02),
    },
    "entropy": {
        **_COMMON,
        **_DIST_KEYS,
        "t_max": (_float, 0.4),
        "dt": (_float, 0.01),
    },
    "ridgelet": {
        **_COMMON,
        "target": (_choice("bump", "zero"), "bump"),
        "J": (_int, 2000),
    },
    "swissroll": {
        **_COMMON,
        "n": (_int, 2000),
        "noise": (_float, 0.02),
        "J0": (_int, 64),
        "J1": (_int, 64),
        "t0": (_float, 0.01),
        "t1": (_float, 0.005),
        "epochs": (_int, 3000),
        "lr": (_float, 0.02),
    },
    "verify": {
        **_COMMON,
    },
}


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)


def parse_config_text(text):
    """Return the raw ``{key: value}`` strings of a config file body."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def build_config(command, raw, overrides=None):
    """Merge file values and overrides, then parse every key against the command schema."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    schema = SCHEMAS[command]
    merged = dict(raw)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    values = {}
    for key, (parse, default) in schema.items():
        if key in merged:
            value = merged[key]
            try:
                values[key] = value if not isinstance(value, str) else parse(value)
            except ConfigError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            values[key] = default
    cfg = ExperimentConfig(command, values)
    _validate(cfg)
    return cfg


def load_config(command, path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return build_config(command, raw, overrides)


def _positive(cfg, *keys):
    for key in keys:
        if key in cfg.values and not cfg[key] > 0:
            raise ConfigError(f"{key} must be positive, got {cfg[key]}")


def _validate(cfg):
    _positive(cfg, "tau", "dt", "var0", "n", "n_particles", "J", "J0", "J1", "t0", "t1", "epochs", "lr")
    _positive(cfg, "train_n", "train_J", "train_epochs", "train_lr")
    for key in ("t_max", "noise", "n_samples", "grid_n"):
        if key in cfg.values and cfg[key] < 0:
            raise ConfigError(f"{key} must be nonnegative, got {cfg[key]}")
    if "taus" in cfg.values and any(t <= 0 for t in cfg["taus"]):
        raise ConfigError("taus must all be positive")
    if "grid_lo" in cfg.values and cfg["grid_hi"] < cfg["grid_lo"]:
        raise ConfigError("grid_hi must not be below grid_lo")
    if "dist" in cfg.values:
        if cfg.command in ("orbit", "entropy") and cfg["dist"] == "swissroll":
            raise ConfigError(f"{cfg.command} needs a gaussian or gmm distribution")
        cfg.values["measure"] = distribution(cfg) if cfg["dist"] != "swissroll" else None


def distribution(cfg):
    """Build the Gaussian or mixture named by the ``dist`` keys."""
    try:
        if cfg["dist"] == "gaussian":
            return _gaussian(cfg["mean"], cfg["cov"])
        if cfg["dist"] == "gmm":
            if not cfg["components"]:
                raise ConfigError("dist = gmm needs a components entry")
            comps = []
            for chunk in cfg["components"].split(";"):
                fields = chunk.split(":")
                if len(fields) != 3:
                    raise ConfigError(f"component {chunk.strip()!r} must read 'weight : mean : cov'")
                comps.append((_float(fields[0]), _gaussian(_floats(fields[1]), _floats(fields[2]))))
            return GaussianMixture.from_components(comps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unsupported distribution {cfg['dist']!r}")


def _gaussian(mean, cov):
    mean = np.asarray(mean, dtype=float)
    m = mean.size
    cov = np.asarray(cov, dtype=float)
    if cov.size == 1 and m > 1:
        raise ConfigError(f"cov must list {m * m} entries (row-major) for a {m}-dimensional mean")
    if cov.size != m * m:
        raise ConfigError(f"cov has {cov.size} entries; expected {m * m} for a {m}-dimensional mean")
    return GaussianMeasure(mean, cov.reshape(m, m))
