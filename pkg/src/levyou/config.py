"""Run configuration: TOML (or JSON) with sections process, engine, experiment, output.

Example::

    [process]
    family = "OU-NTS"
    b = 0.2162
    alpha = 0.2
    sigma = 0.201
    kappa = 0.256
    theta = 0.0

    [engine]
    M = 16

    [experiment]
    n_paths = 1000000
    seed = 12345
    dt = 0.0833333333333333

    [output]
    csv = "report.csv"

Tempered stable families take ``alpha`` (both sides) or ``alpha_p``/``alpha_n``
plus ``beta_p, beta_n, c_p, c_n, gamma_c``. Unknown keys are rejected.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, LevyOuError
from .models import Family, GaussParams, NtsParams, OuProcessSpec, TsParams

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

__all__ = ["RunConfig", "EngineConfig", "ExperimentConfig", "load_config", "parse_config",
           "build_spec"]

_TS_KEYS = {"alpha", "alpha_p", "alpha_n", "beta_p", "beta_n", "c_p", "c_n", "gamma_c"}
_NTS_KEYS = {"alpha", "sigma", "kappa", "theta"}
_GAUSS_KEYS = {"sigma"}
_ENGINE_KEYS = {"M", "eps_disc", "a", "h"}
_EXPERIMENT_KEYS = {"n_paths", "seed", "dt", "T", "Q", "dates", "chi", "n_chi", "kind", "threads",
                    "x0", "oracle_points", "ks_samples", "rmse_threshold_bp", "target_price",
                    "target_band_bp", "fix_t0"}
_OUTPUT_KEYS = {"csv", "cdf_csv", "paths_csv"}
_SECTIONS = {"process", "engine", "experiment", "output"}


@dataclass
class EngineConfig:
    M: int = 16
    eps_disc: float = 1e-12
    a: float | None = None
    h: float | None = None


@dataclass
class ExperimentConfig:
    n_paths: int = 1_000_000
    seed: int = 12345
    dt: float = 1.0 / 12.0
    T: float | None = None
    Q: int | None = None
    dates: list | None = None
    chi: list | None = None
    n_chi: int = 30
    kind: str | None = None
    threads: int = 1
    x0: float = 0.0
    oracle_points: int = 64
    ks_samples: int = 100_000
    rmse_threshold_bp: float | None = None
    target_price: float | None = None
    target_band_bp: float | None = None
    fix_t0: bool = False


@dataclass
class RunConfig:
    spec: OuProcessSpec
    engine: EngineConfig = field(default_factory=EngineConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: dict = field(default_factory=dict)
    source: str = "<memory>"


def _unknown(section: str, keys, allowed, source: str):
    extra = sorted(set(keys) - set(allowed))
    if extra:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(section + '.' + k for k in extra)}; "
                          f"allowed: {', '.join(sorted(allowed))}")


def _num(section: str, key: str, v, source: str, kind=float):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{source}: {section}.{key} must be a number, got {v!r}")
    if kind is int:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{source}: {section}.{key} must be an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{source}: {section}.{key} must be finite")
    return float(v)


def build_spec(proc: dict, source: str = "<memory>") -> OuProcessSpec:
    """Process block to :class:`OuProcessSpec`, with key-level diagnostics."""
    proc = dict(proc)
    if "family" not in proc or "b" not in proc:
        raise ConfigError(f"{source}: [process] needs 'family' and 'b'")
    try:
        fam = Family.parse(proc.pop("family"))
    except LevyOuError as exc:
        raise ConfigError(f"{source}: process.family: {exc}") from None
    b = _num("process", "b", proc.pop("b"), source)
    vals = {k: _num("process", k, v, source) for k, v in proc.items()}
    try:
        if fam in (Family.OU_TS, Family.TS_OU):
            _unknown("process", vals, _TS_KEYS, source)
            if "alpha" in vals:
                if "alpha_p" in vals or "alpha_n" in vals:
                    raise ConfigError(f"{source}: give either process.alpha or alpha_p/alpha_n")
                a = vals.pop("alpha")
                vals["alpha_p"] = vals["alpha_n"] = a
            missing = {"alpha_p", "alpha_n", "beta_p", "beta_n", "c_p", "c_n"} - set(vals)
            if missing:
                raise ConfigError(f"{source}: process block missing {', '.join(sorted(missing))}")
            params = TsParams(**vals)
        elif fam in (Family.OU_NTS, Family.NTS_OU):
            _unknown("process", vals, _NTS_KEYS, source)
            missing = {"alpha", "sigma", "kappa"} - set(vals)
            if missing:
                raise ConfigError(f"{source}: process block missing {', '.join(sorted(missing))}")
            params = NtsParams(**vals)
        else:
            _unknown("process", vals, _GAUSS_KEYS, source)
            if "sigma" not in vals:
                raise ConfigError(f"{source}: process block missing sigma")
            params = GaussParams(**vals)
        return OuProcessSpec(fam, b, params)
    except ConfigError:
        raise
    except LevyOuError as exc:
        raise ConfigError(f"{source}: [process] {exc}") from None


def parse_config(doc: dict, source: str = "<memory>") -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be a table")
    _unknown("", doc.keys(), _SECTIONS, source)
    if "process" not in doc:
        raise ConfigError(f"{source}: missing [process] section")
    spec = build_spec(doc["process"], source)

    eng = dict(doc.get("engine", {}))
    _unknown("engine", eng, _ENGINE_KEYS, source)
    engine = EngineConfig()
    if "M" in eng:
        engine.M = _num("engine", "M", eng["M"], source, int)
    for k in ("eps_disc", "a", "h"):
        if k in eng:
            setattr(engine, k, _num("engine", k, eng[k], source))

    exp = dict(doc.get("experiment", {}))
    _unknown("experiment", exp, _EXPERIMENT_KEYS, source)
    ex = ExperimentConfig()
    for k in ("n_paths", "seed", "Q", "n_chi", "threads", "oracle_points", "ks_samples"):
        if k in exp:
            setattr(ex, k, _num("experiment", k, exp[k], source, int))
    for k in ("dt", "T", "x0", "rmse_threshold_bp", "target_price", "target_band_bp"):
        if k in exp:
            setattr(ex, k, _num("experiment", k, exp[k], source))
    for k in ("dates", "chi"):
        if k in exp:
            v = exp[k]
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{source}: experiment.{k} must be a non-empty list")
            setattr(ex, k, [_num("experiment", k, x, source) for x in v])
    if "fix_t0" in exp:
        if not isinstance(exp["fix_t0"], bool):
            raise ConfigError(f"{source}: experiment.fix_t0 must be a boolean")
        ex.fix_t0 = exp["fix_t0"]
    if "kind" in exp:
        if exp["kind"] not in ("european", "asian"):
            raise ConfigError(f"{source}: experiment.kind must be 'european' or 'asian'")
        ex.kind = exp["kind"]
    if ex.seed < 0 or ex.seed >= 2 ** 64:
        raise ConfigError(f"{source}: experiment.seed must be an unsigned 64-bit integer")
    if ex.dt <= 0:
        raise ConfigError(f"{source}: experiment.dt must be > 0")

    out = dict(doc.get("output", {}))
    _unknown("output", out, _OUTPUT_KEYS, source)
    for k, v in out.items():
        if not isinstance(v, str):
            raise ConfigError(f"{source}: output.{k} must be a path string")
    return RunConfig(spec=spec, engine=engine, experiment=ex, output=out, source=source)


def load_config(path) -> RunConfig:
    """Read a ``.json`` file as JSON and anything else as TOML."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = tomllib.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, str(path))
