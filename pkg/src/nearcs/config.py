"""Line-oriented ``key = value`` experiment configs with ``[section]`` headers.

Sections and keys::

    [system]      N N_sub K M d S_taps g snr_db f_m f_s C grid_mode d_sub q_model
    [experiment]  sweep_axis sweep_values trials master_seed theta estimators
                  common_random_numbers
    [estimator]   d D_mode K_rule literal_Y_correlation d_schedule
    [manifest]    version out command   (run manifests only)

Lists are comma separated; ``none`` clears an optional value. Lines starting
with ``#`` or ``;`` are comments. Unknown sections or keys are rejected with
their line number.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, fields

from .channel import SystemParams
from .estimators import BLOCK_KINDS, EstimatorConfig
from .harness import ExperimentConfig
from .numerics import ParameterError

SYSTEM_KEYS = tuple(f.name for f in fields(SystemParams))
EXPERIMENT_KEYS = ("sweep_axis", "sweep_values", "trials", "master_seed", "theta", "estimators",
                   "common_random_numbers")
ESTIMATOR_KEYS = ("d", "D_mode", "K_rule", "literal_Y_correlation", "d_schedule")
MANIFEST_KEYS = ("version", "out", "command")
SECTIONS = {"system": SYSTEM_KEYS, "experiment": EXPERIMENT_KEYS, "estimator": ESTIMATOR_KEYS,
            "manifest": MANIFEST_KEYS}

DEFAULT_ESTIMATORS = ("omp", "bomp", "cslw_omp", "cslw_bomp", "ls", "genie")
DEFAULT_SNR_GRID = tuple(range(0, 21, 2))


class ConfigError(ParameterError):
    def __init__(self, message: str, path: str = "<config>", line: int | None = None):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass(frozen=True)
class Manifest:
    version: str | None = None
    out: str | None = None
    command: str | None = None


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                  inline_comment_prefixes=("#",), strict=True)
    p.optionxform = str  # keys are case-sensitive (D_mode, K_rule)
    return p


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` line, by (section, key)."""
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out.setdefault((section, ""), i)
        elif "=" in line or ":" in line:
            key = line.split("=", 1)[0] if "=" in line else line.split(":", 1)[0]
            out.setdefault((section, key.strip()), i)
    return out


def _or(v, default):
    return default if v is None else v


def _is_none(v: str) -> bool:
    return v.strip().lower() in ("none", "")


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _list(v: str, conv):
    return tuple(conv(x.strip()) for x in v.split(",") if x.strip())


def _number(v: str):
    f = float(v)
    return int(f) if f.is_integer() and "." not in v and "e" not in v.lower() else f


_SYSTEM_CONV = {f.name: f.type for f in fields(SystemParams)}


def _system_value(key: str, v: str):
    t = str(_SYSTEM_CONV[key])
    if key == "d_sub":
        return None if _is_none(v) else int(v)
    if "int" in t:
        return int(v)
    if "float" in t:
        return float(v)
    return v.strip()


def parse_config(text: str, path: str = "<config>") -> tuple[ExperimentConfig, Manifest]:
    lines = _key_lines(text)
    p = _parser()
    try:
        p.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", path, exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"unparseable line {exc.errors[0][1] if exc.errors else ''}", path, line) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], path, getattr(exc, "lineno", None)) from exc

    for section in p.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]", path, lines.get((section, "")))
        for key in p[section]:
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", path, lines.get((section, key)))

    def get(section, key):
        return p[section][key] if p.has_section(section) and key in p[section] else None

    def convert(section, key, conv):
        raw = get(section, key)
        if raw is None:
            return None
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", path, lines.get((section, key))) from exc

    try:
        sys_kw = {k: convert("system", k, lambda v, k=k: _system_value(k, v)) for k in SYSTEM_KEYS}
        base = SystemParams(**{k: v for k, v in sys_kw.items() if v is not None or k == "d_sub"})
    except ParameterError as exc:
        raise ConfigError(str(exc), path) from exc

    est_kw = {
        "d": convert("estimator", "d", int),
        "D_mode": convert("estimator", "D_mode", str.strip),
        "K_rule": convert("estimator", "K_rule", str.strip),
        "literal_Y_correlation": convert("estimator", "literal_Y_correlation", _bool),
        "d_schedule": convert("estimator", "d_schedule", lambda v: None if _is_none(v) else _list(v, int)),
    }
    kinds = convert("experiment", "estimators", lambda v: _list(v, str)) or DEFAULT_ESTIMATORS
    block_d = est_kw["d"] if est_kw["d"] is not None else base.d
    try:
        ests = tuple(EstimatorConfig(
            kind=k, stop_S_taps=0, d=block_d if k in BLOCK_KINDS else 1,
            D_mode=est_kw["D_mode"] or "exact", K_rule=est_kw["K_rule"] or "paper_literal",
            literal_Y_correlation=bool(est_kw["literal_Y_correlation"]),
            d_schedule=est_kw["d_schedule"] if k in BLOCK_KINDS else None) for k in kinds)
        axis = convert("experiment", "sweep_axis", str.strip) or "snr"
        values = convert("experiment", "sweep_values", lambda v: _list(v, _number))
        if values is None:
            values = DEFAULT_SNR_GRID if axis == "snr" else None
        if values is None:
            raise ParameterError(f"sweep_values required for sweep_axis={axis}")
        exp = ExperimentConfig(
            base=base, estimators=ests, sweep_axis=axis, sweep_values=values,
            trials=_or(convert("experiment", "trials", int), 1000),
            master_seed=_or(convert("experiment", "master_seed", int), 0),
            theta=_or(convert("experiment", "theta", float), 1e-2),
            common_random_numbers=(True if get("experiment", "common_random_numbers") is None
                                   else convert("experiment", "common_random_numbers", _bool)))
    except ParameterError as exc:
        raise ConfigError(str(exc), path) from exc
    manifest = Manifest(**{k: None if get("manifest", k) is None or _is_none(get("manifest", k))
                           else get("manifest", k).strip() for k in MANIFEST_KEYS})
    return exp, manifest


def load_config(path: str) -> ExperimentConfig:
    return load_config_with_manifest(path)[0]


def load_config_with_manifest(path: str) -> tuple[ExperimentConfig, Manifest]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path) from exc
    return parse_config(text, path)


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig, manifest: Manifest | None = None) -> str:
    """Canonical text form; ``parse_config(dump_config(c))`` reproduces ``c``."""
    buf = io.StringIO()
    buf.write("[system]\n")
    for k in SYSTEM_KEYS:
        buf.write(f"{k} = {_fmt(getattr(cfg.base, k))}\n")
    buf.write("\n[experiment]\n")
    exp = {"sweep_axis": cfg.sweep_axis, "sweep_values": cfg.sweep_values, "trials": cfg.trials,
           "master_seed": cfg.master_seed, "theta": cfg.theta,
           "estimators": tuple(e.kind for e in cfg.estimators),
           "common_random_numbers": cfg.common_random_numbers}
    for k in EXPERIMENT_KEYS:
        buf.write(f"{k} = {_fmt(exp[k])}\n")
    block = next((e for e in cfg.estimators if e.kind in BLOCK_KINDS), None)
    first = cfg.estimators[0]
    buf.write("\n[estimator]\n")
    est = {"d": block.d if block else cfg.base.d, "D_mode": first.D_mode, "K_rule": first.K_rule,
           "literal_Y_correlation": first.literal_Y_correlation,
           "d_schedule": block.d_schedule if block else None}
    for k in ESTIMATOR_KEYS:
        buf.write(f"{k} = {_fmt(est[k])}\n")
    if manifest is not None:
        buf.write("\n[manifest]\n")
        for k in MANIFEST_KEYS:
            buf.write(f"{k} = {_fmt(getattr(manifest, k))}\n")
    return buf.getvalue()


def normalize(text: str) -> str:
    cfg, manifest = parse_config(text)
    has_manifest = any(v is not None for v in dataclasses.astuple(manifest))
    return dump_config(cfg, manifest if has_manifest else None)
