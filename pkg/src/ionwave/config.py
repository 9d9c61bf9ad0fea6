"""Run configuration: a flat TOML document, parsed strictly.

See ``docs/config.md`` for the accepted grammar and every key.
"""

from __future__ import annotations

import difflib
import math
import re
from dataclasses import dataclass, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .experiments import KINDS, Scenario
from .integrate import METHODS, IntegratorSettings
from .model import ChainParams, ConfigurationError

EXPERIMENTS = ("single_ion", "chain", "phase_sweep", "blockade_sweep")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None,
                 column: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line
        self.column = column


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "chain"
    scenario: str = "auto"
    n_ions: int = 100
    hop: float = 1.0
    coupling: float = 1.0
    phase: float = math.pi
    alpha0: complex = 1.0 + 0.0j
    driven_site: int = 0
    jt_max: float = 30.0
    gt_max: float = 10.0
    samples: int = 2001
    rtol: float = 1e-9
    atol: float = 1e-11
    method: str = "explicit_rk54"
    output: str = "run.csv"
    emit_plot: bool = False
    wide: bool = False
    n_phases: int = 64
    ratio_min: float = 0.1
    ratio_max: float = 100.0
    n_ratios: int = 16
    sweep_samples: int = 601

    def chain_params(self) -> ChainParams:
        return ChainParams(n_ions=self.n_ions, hop=self.hop, coupling=self.coupling,
                           phase=self.phase, alpha0=self.alpha0,
                           driven_site=self.driven_site or None)

    def settings(self) -> IntegratorSettings:
        return IntegratorSettings(rtol=self.rtol, atol=self.atol, method=self.method)

    def resolved_scenario(self) -> Scenario:
        """``auto`` means a tracking carrier at ``phase`` (pi gives DI, 0 gives CI)."""
        if self.scenario in ("auto", "custom"):
            return Scenario.custom(self.phase % (2 * math.pi))
        return Scenario(self.scenario)


FIELD_HELP = {
    "experiment": f"one of {', '.join(EXPERIMENTS)}",
    "scenario": f"auto or one of {', '.join(KINDS)}",
    "n_ions": "number of ions N",
    "hop": "hopping J (sets the time unit)",
    "coupling": "JC coupling g in units of J",
    "phase": "interference phase in radians; strings like 'pi', '3pi/2' accepted",
    "alpha0": "initial coherent amplitude of ion 1: number or [re, im]",
    "driven_site": "1-based driven ion; 0 means floor((N+1)/2)",
    "jt_max": "chain run length in units of 1/J",
    "gt_max": "single-ion run length in units of 1/g",
    "samples": "number of uniform output samples",
    "rtol": "relative tolerance",
    "atol": "absolute tolerance",
    "method": f"one of {', '.join(METHODS)}",
    "output": "CSV output path",
    "emit_plot": "also write an SVG next to the CSV",
    "wide": "also write per-site amplitudes to <output>.sites.csv",
    "n_phases": "phase sweep grid size over [0, 2pi)",
    "ratio_min": "smallest g/J in the blockade sweep",
    "ratio_max": "largest g/J in the blockade sweep",
    "n_ratios": "number of log-spaced g/J values",
    "sweep_samples": "samples per sweep point",
}

_PHASE_RE = re.compile(
    r"^\s*(?P<sign>[-+]?)\s*(?P<num>\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*(?P<pi>pi)?"
    r"\s*(?:/\s*(?P<den>\d*\.?\d+))?\s*$"
)


def parse_phase(value) -> float:
    """Radians from a number or a string such as ``pi``, ``-pi/2``, ``1.5pi``."""
    if isinstance(value, bool):
        raise ValueError("phase must be numeric")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower().replace("π", "pi")
    match = _PHASE_RE.match(text)
    if not match or not (match["num"] or match["pi"]):
        raise ValueError(f"cannot parse phase {value!r}")
    num = float(match["num"]) if match["num"] else 1.0
    out = num * (math.pi if match["pi"] else 1.0)
    if match["den"]:
        out /= float(match["den"])
    return -out if match["sign"] == "-" else out


def parse_complex(value) -> complex:
    if isinstance(value, bool):
        raise ValueError("expected a number")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j"))
    raise ValueError(f"expected a number, [re, im] or a complex string, got {value!r}")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    kind = _TYPES[key]
    try:
        if key == "phase":
            return parse_phase(value)
        if key == "alpha0":
            return parse_complex(value)
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError("expected true or false")
            return value
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError("expected an integer")
            return value
        if kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError("expected a number")
            return float(value)
        if not isinstance(value, str):
            raise ValueError("expected a string")
        return value
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}", field=key) from None


def _unknown_key(key: str) -> ConfigError:
    close = difflib.get_close_matches(key, list(_TYPES), n=1, cutoff=0.6)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return ConfigError(f"unknown key {key!r}{hint}", field=key)


def build_config(values: dict, base: RunConfig | None = None) -> RunConfig:
    """Apply ``values`` on top of ``base`` and validate."""
    updates = {}
    for key, value in values.items():
        if key not in _TYPES:
            raise _unknown_key(key)
        updates[key] = _coerce(key, value)
    cfg = replace(base or RunConfig(), **updates)
    validate(cfg)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse a configuration document; every absent key takes its default."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m[1]), int(m[2])) if m else (None, None)
        raise ConfigError(f"syntax error: {exc}", line=line, column=col) from None
    for key, value in doc.items():
        if isinstance(value, dict):
            raise ConfigError(f"tables are not allowed (found [{key}])", field=key)
    return build_config(doc)


def validate(cfg: RunConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}",
                          field="experiment")
    if cfg.scenario not in ("auto",) + KINDS:
        raise ConfigError(f"scenario must be auto or one of {KINDS}, got {cfg.scenario!r}",
                          field="scenario")
    for key in ("samples", "sweep_samples"):
        if getattr(cfg, key) < 2:
            raise ConfigError(f"{key} must be >= 2", field=key)
    for key in ("n_phases", "n_ratios"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1", field=key)
    for key in ("jt_max", "gt_max", "ratio_min", "ratio_max"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive", field=key)
    if cfg.ratio_min > cfg.ratio_max:
        raise ConfigError("ratio_min must not exceed ratio_max", field="ratio_min")
    if cfg.driven_site < 0:
        raise ConfigError("driven_site must be >= 0", field="driven_site")
    try:
        cfg.chain_params()
    except ConfigurationError as exc:
        raise ConfigError(str(exc), field=str(exc).split()[0]) from None
    try:
        cfg.settings()
    except ValueError as exc:
        raise ConfigError(str(exc), field=str(exc).split()[0]) from None
