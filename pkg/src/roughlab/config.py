"""INI experiment configuration with constraint revalidation.

Sections: [experiment], [model], [metric], [sweep], [rde].  Every key has a
default; unknown sections or keys are rejected.  Lists are comma separated.
"""
from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass

from . import capacity
from .fbm import MAX_LEVEL, CovarianceModel, HurstRangeError
from .variation import ConstraintError, MetricParams

KINDS = ("converge", "l2rates", "ldp1d", "tailrates", "expgood", "rde-wz")

# key -> (type, default); "list:int" etc. are comma-separated lists
SCHEMA = {
    "experiment": {
        "kind": ("str", ""),
        "seed": ("int", 0),
        "samples": ("int", 64),
        "output": ("str", ""),
        "threads": ("int", 1),
    },
    "model": {
        "h": ("float", 0.5),
        "d": ("int", 2),
        "scale": ("float", 1.0),
        "level": ("int", 0),  # sample level M; 0 picks the smallest sufficient level
    },
    "metric": {
        "p": ("float", 2.5),
        "gamma": ("float", 2.0),
        "theta": ("str", "auto"),
        "n_max": ("int", 8),
        "hl_constant": ("float", 1.0),
    },
    "sweep": {
        "m": ("list:int", "2,3,4,5,6,7"),
        "n": ("list:int", ""),
        "levels": ("list:int", "1"),
        "eps": ("list:float", "0.2,0.1,0.05,0.025"),
        "lam": ("list:float", "1.0"),
        "b": ("list:float", "1.0"),
        "q": ("list:float", "3.0"),
        "N": ("int", 3),
        "N_tilde": ("str", "auto"),
        "C1": ("float", 1.0),
        "C2": ("float", 1.0),
    },
    "rde": {
        "N": ("int", 2),
        "x0": ("list:float", "1.0,0.0"),
        "constant": ("list:float", ""),
        "linear": ("list:float", "0.0,0.8,-0.8,0.0,0.4,0.0,0.0,-0.4"),
        "quadratic": ("list:float", ""),
        "cubic": ("list:float", ""),
        "substeps": ("int", 16),
        "bound": ("float", 1e8),
        "smooth_level": ("int", 10),
    },
}


class ConfigError(ValueError):
    pass


def _convert(kind, raw, where):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw.strip()
        item = int if kind == "list:int" else float
        return tuple(item(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict

    def __getitem__(self, key):
        section, name = key.split(".")
        return self.values[section][name]

    @property
    def kind(self) -> str:
        return self["experiment.kind"]

    @property
    def model(self) -> CovarianceModel:
        return CovarianceModel(self["model.h"], "fbm", self["model.scale"])

    @property
    def metric(self) -> MetricParams:
        return MetricParams(self["metric.p"], self["metric.gamma"], self["metric.n_max"], self["metric.hl_constant"])

    @property
    def theta(self) -> float:
        raw = self["metric.theta"]
        if raw == "auto":
            lo, hi = capacity.theta_interval(self["model.h"], self["metric.p"])
            return 0.5 * (lo + hi)
        return float(raw)

    def n_tilde(self, N: int | None = None) -> int:
        N = self["sweep.N"] if N is None else N
        raw = self["sweep.N_tilde"]
        if raw == "auto":
            return capacity.smallest_n_tilde(self["model.h"], self["metric.p"], self.theta, N)
        return int(raw)

    def canonical(self) -> str:
        """Canonical JSON of every setting that affects results."""
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["experiment"].pop("output")
        vals["experiment"].pop("threads")
        return json.dumps(vals, sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_kind(self, kind: str) -> "ExperimentConfig":
        vals = {s: dict(v) for s, v in self.values.items()}
        vals["experiment"]["kind"] = kind
        return ExperimentConfig(vals)


def parse(text: str, kind: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep N vs n distinct
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        given = dict(cp[section]) if cp.has_section(section) else {}
        unknown = set(given) - set(keys)
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
        values[section] = {k: _convert(t, given.get(k, str(default)), f"[{section}] {k}")
                           for k, (t, default) in keys.items()}
    if kind is not None:
        declared = values["experiment"]["kind"]
        compatible = {kind} | ({"tailrates", "expgood"} if kind in ("tailrates", "expgood") else set())
        if declared and declared not in compatible:
            raise ConfigError(f"config declares kind={declared!r} but {kind!r} was requested")
        values["experiment"]["kind"] = kind
    cfg = ExperimentConfig(values)
    validate(cfg)
    return cfg


def load(path, kind: str | None = None) -> ExperimentConfig:
    with open(path) as f:
        return parse(f.read(), kind)


def required_level(cfg: ExperimentConfig) -> int:
    kind = cfg.kind
    if kind == "l2rates":
        n = cfg["sweep.n"] or ()
        return max(max(cfg["sweep.m"]) + 1, max(n, default=0))
    return max(cfg["sweep.m"]) + 1


def sample_level(cfg: ExperimentConfig) -> int:
    return cfg["model.level"] or required_level(cfg)


def validate(cfg: ExperimentConfig) -> None:
    """Recheck every standing assumption; the violated constraint is named."""
    kind = cfg.kind
    if kind and kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}")
    h, p = cfg["model.h"], cfg["metric.p"]
    try:
        cfg.model
    except HurstRangeError as exc:
        raise ConfigError(f"h > 1/4 violated: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        params = cfg.metric
        params.check_hurst(h)
    except ConstraintError as exc:
        raise ConfigError(str(exc)) from exc
    lo, hi = capacity.theta_interval(h, p)
    theta = cfg.theta
    if not lo < theta < hi:
        raise ConfigError(f"theta-interval violated: theta={theta} not in ({lo}, {hi})")
    N = cfg["sweep.N"]
    if N < 0:
        raise ConfigError("N >= 0 violated")
    floor = capacity.n_tilde_floor(h, p, theta, N)
    if cfg["sweep.N_tilde"] != "auto":
        try:
            nt = int(cfg["sweep.N_tilde"])
        except ValueError as exc:
            raise ConfigError("N_tilde must be an integer or 'auto'") from exc
        if not nt > floor:
            raise ConfigError(f"N_tilde bound violated: N_tilde={nt} must exceed {floor}")
    if cfg["model.d"] < 1:
        raise ConfigError("d >= 1 violated")
    if cfg["experiment.samples"] < 1 or cfg["experiment.threads"] < 1:
        raise ConfigError("samples and threads must be positive")
    if not 0 <= cfg["experiment.seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if not cfg["sweep.m"] or min(cfg["sweep.m"]) < 0:
        raise ConfigError("m list must be nonempty and nonnegative")
    if kind in ("ldp1d", "tailrates", "expgood"):
        if any(not q > 2 for q in cfg["sweep.q"]):
            raise ConfigError("q > 2 violated")
        if any(not e > 0 for e in cfg["sweep.eps"]) or any(not b > 0 for b in cfg["sweep.b"]):
            raise ConfigError("eps > 0 and b > 0 violated")
        if any(not v > 0 for v in cfg["sweep.lam"]):
            raise ConfigError("lambda > 0 violated")
    if kind == "ldp1d" and len(cfg["sweep.b"]) != len(cfg["sweep.q"]):
        raise ConfigError("b and q lists must pair up (same length)")
    if any(i not in (1, 2, 3) for i in cfg["sweep.levels"]):
        raise ConfigError("levels must be among 1, 2, 3")
    M = sample_level(cfg)
    if kind in ("converge", "l2rates", "expgood", "tailrates", "rde-wz"):
        if not required_level(cfg) <= M <= MAX_LEVEL:
            raise ConfigError(f"sample level {M} must lie in [{required_level(cfg)}, {MAX_LEVEL}]")
    if kind == "converge" and max(cfg["sweep.m"]) + 1 > 11:
        raise ConfigError("grid level m+1 over budget (max 11)")
    if kind == "rde-wz":
        r = cfg.values["rde"]
        if len(r["x0"]) != r["N"]:
            raise ConfigError(f"x0 has {len(r['x0'])} entries, N={r['N']}")
        if r["substeps"] < 1:
            raise ConfigError("substeps >= 1 violated")
        try:
            fields(cfg)
        except ValueError as exc:
            raise ConfigError(f"[rde] {exc}") from exc


def fields(cfg: ExperimentConfig):
    from .rde import VectorFieldSet

    r = cfg.values["rde"]
    tables = {k: (r[k] or None) for k in ("constant", "linear", "quadratic", "cubic")}
    return VectorFieldSet.from_config(cfg["model.d"], r["N"], **tables)
