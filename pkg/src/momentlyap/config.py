"""INI-style experiment configuration.

Sections: ``[model]``, ``[mc]``, ``[spectral]``, ``[bounds]``, ``[analysis]`` and
``[output]``.  Every key has a default except the model name.  Errors carry
the file name and line number of the offending entry.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

SECTIONS = ("model", "mc", "spectral", "bounds", "analysis", "output")


class ConfigError(ValueError):
    pass


def parse_list(text) -> list:
    """``"1, 2, 3"``, ``"1 2 3"`` or ``"linspace(-1, 1, 9)"`` / ``"geomspace(...)"``."""
    if isinstance(text, (list, tuple, np.ndarray)):
        return [float(v) for v in text]
    text = str(text).strip()
    m = re.fullmatch(r"(linspace|geomspace)\(([^)]*)\)", text)
    if m:
        args = [float(v) for v in m.group(2).split(",")]
        if len(args) != 3:
            raise ValueError(f"{m.group(1)} needs start, stop, count")
        fn = np.linspace if m.group(1) == "linspace" else np.geomspace
        return [float(v) for v in fn(args[0], args[1], int(args[2]))]
    return [float(v) for v in text.replace(",", " ").split()]


@dataclass
class McConfig:
    t: float = 30.0
    n_paths: int = 100_000
    n_steps: int = 3000
    seed: int = 20240101
    p_grid: list = field(default_factory=lambda: [0.0, 0.375])
    x0: list = field(default_factory=lambda: [0.0])
    scheme: str = "euler"
    beta_exp: float = 0.75


@dataclass
class SpectralConfig:
    x_max: float = 6.0
    n: int = 1200
    weight: str = "auto"
    weight_param: float = 0.0
    tol: float = 1e-9
    p_grid: Optional[list] = None
    dump_eigenfunction: bool = False


@dataclass
class BoundsConfig:
    p_ladder: list = field(default_factory=lambda: [10.0, 30.0, 100.0, 300.0])
    A_grid: Optional[list] = None
    family: str = "exp_quadratic"


@dataclass
class AnalysisConfig:
    s_grid: list = field(default_factory=lambda: [0.25, 0.5, 0.75, 1.0, 1.5])
    p_grid: list = field(default_factory=lambda: list(np.linspace(-1.0, 0.45, 59)))


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "svg"])


@dataclass
class ExperimentConfig:
    model: dict
    mc: McConfig = field(default_factory=McConfig)
    spectral: SpectralConfig = field(default_factory=SpectralConfig)
    bounds: BoundsConfig = field(default_factory=BoundsConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str = "<defaults>"

    def resolved(self) -> dict:
        d = asdict(self)
        d.pop("source")
        return d


_TYPES = {
    "mc": McConfig, "spectral": SpectralConfig, "bounds": BoundsConfig,
    "analysis": AnalysisConfig, "output": OutputConfig,
}
_LIST_KEYS = {"p_grid", "x0", "p_ladder", "A_grid", "s_grid"}


def _convert(section: str, key: str, raw: str, where: str):
    cls = _TYPES[section]
    fields = cls.__dataclass_fields__
    if key not in fields:
        raise ConfigError(f"{where}: unknown key {key!r} in [{section}]; "
                          f"expected one of {', '.join(fields)}")
    try:
        if key in _LIST_KEYS:
            return parse_list(raw)
        if key == "formats":
            return [v for v in raw.replace(",", " ").split() if v]
        default = fields[key].default
        if isinstance(default, bool):
            if raw.strip().lower() not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(f"not a boolean: {raw!r}")
            return raw.strip().lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(float(raw)) if float(raw).is_integer() else int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value for {section}.{key}: {exc}") from None


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` plus ``(section, None)`` for headers."""
    out = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = no
            continue
        if section and ("=" in s or ":" in s):
            key = re.split(r"[=:]", s, 1)[0].strip().lower()
            out[(section, key)] = no
    return out


def validate(cfg: ExperimentConfig, lines: Optional[dict] = None):
    lines = lines or {}

    def where(section, key=None):
        no = lines.get((section, key)) or lines.get((section, None))
        return f"{cfg.source}:{no}" if no else cfg.source

    if not cfg.model.get("model"):
        raise ConfigError(f"{where('model')}: [model] needs a 'model' entry")
    mc = cfg.mc
    if not mc.t > 0:
        raise ConfigError(f"{where('mc', 't')}: mc.t must be positive")
    if mc.n_paths < 2:
        raise ConfigError(f"{where('mc', 'n_paths')}: mc.n_paths must be >= 2")
    if mc.n_steps < 1:
        raise ConfigError(f"{where('mc', 'n_steps')}: mc.n_steps must be >= 1")
    if mc.scheme not in ("euler", "heun"):
        raise ConfigError(f"{where('mc', 'scheme')}: mc.scheme must be euler or heun")
    if not 0.5 < mc.beta_exp < 1:
        raise ConfigError(f"{where('mc', 'beta_exp')}: mc.beta_exp must lie in (1/2, 1)")
    if cfg.spectral.n < 16:
        raise ConfigError(f"{where('spectral', 'n')}: spectral.n must be >= 16")
    if not cfg.spectral.x_max > 0:
        raise ConfigError(f"{where('spectral', 'x_max')}: spectral.x_max must be positive")
    if "rho" in cfg.model:
        try:
            rho = float(cfg.model["rho"])
        except ValueError:
            raise ConfigError(f"{where('model', 'rho')}: rho is not a number") from None
        if not -1 <= rho <= 1:
            raise ConfigError(f"{where('model', 'rho')}: rho must lie in [-1, 1]")
    for key in ("a", "b", "sigma", "beta"):
        if key in cfg.model:
            try:
                float(cfg.model[key])
            except ValueError:
                raise ConfigError(f"{where('model', key)}: {key} is not a number") from None


def load_config(path, required: tuple = ("model",)) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(path), required)


def parse_config(text: str, source: str = "<string>", required: tuple = ("model",)) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        raise ConfigError(f"{source}:{line}: {msg}" if line else f"{source}: {msg}") from None
    lines = _line_index(text)
    for sec in cp.sections():
        if sec not in SECTIONS:
            raise ConfigError(f"{source}:{lines.get((sec, None), '?')}: unknown section [{sec}]")
    for sec in required:
        if not cp.has_section(sec):
            raise ConfigError(f"{source}:1: missing required section [{sec}]")
    kwargs = {}
    for sec in _TYPES:
        if cp.has_section(sec):
            vals = {k: _convert(sec, k, v, f"{source}:{lines.get((sec, k), '?')}")
                    for k, v in cp.items(sec)}
            kwargs[sec] = _TYPES[sec](**vals)
    model = dict(cp.items("model")) if cp.has_section("model") else {}
    cfg = ExperimentConfig(model=model, source=source, **kwargs)
    validate(cfg, lines)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: list) -> ExperimentConfig:
    """Apply ``key=value`` or ``section.key=value`` overrides.

    A bare ``p`` sets every p grid at once; other bare keys go to the model
    section unless they name a key of exactly one other section.
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if "." in key:
            sec, k = key.split(".", 1)
            if sec == "model":
                cfg.model[k] = value
                continue
            if sec not in _TYPES:
                raise ConfigError(f"override {item!r}: unknown section {sec!r}")
            setattr(getattr(cfg, sec), k, _convert(sec, k, value, f"override {item!r}"))
            continue
        if key == "p":
            grid = parse_list(value)
            cfg.mc.p_grid = grid
            cfg.spectral.p_grid = grid
            cfg.bounds.p_ladder = grid
            continue
        owners = [s for s, cls in _TYPES.items() if key in cls.__dataclass_fields__]
        if len(owners) == 1:
            setattr(getattr(cfg, owners[0]), key,
                    _convert(owners[0], key, value, f"override {item!r}"))
        else:
            cfg.model[key] = value
    validate(cfg)
    return cfg
