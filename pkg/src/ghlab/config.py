"""Line-oriented configuration files (INI sections, key = value).

Sections and keys::

    [end]                      [grid]            [experiment]       [output]
    kind = ALF                 n_rho = 33        name = indicial    dir = out
    c = 1.0                    n_ang1 = 16       delta = -0.5
    k = 2                      n_ang2 = 12       delta_lo = -2.5
    eps = 0.5                  n_fiber = 16      delta_hi = 1.5
    eps_list = 0.5, 0.25                         delta_step = 0.05
    rho_min = 1.0                                n_list = 0, 1, -1
    rho_max = 21.0                               samples = 100
                                                 seed = 0
                                                 eps_max = 0.5
                                                 threads = 1

Unknown sections or keys are rejected; numeric preconditions are validated
before any computation and violations name the constraint.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .errors import ConfigError, DomainError, GhlabError
from .geometry import EndKind, ModelEnd

_KNOWN = {
    "end": {"kind", "c", "k", "eps", "eps_list", "rho_min", "rho_max"},
    "grid": {"n_rho", "n_ang1", "n_ang2", "n_fiber"},
    "experiment": {"name", "delta", "delta_lo", "delta_hi", "delta_step",
                   "n_list", "samples", "seed", "eps_max", "threads"},
    "output": {"dir"},
}

EXPERIMENTS = ("geometry-check", "harmonic", "poincare", "indicial",
               "uniformity", "kernel", "adjoint", "commutator", "all")


@dataclass
class Config:
    kind: EndKind = EndKind.ALF
    c: float = 1.0
    k: int = 2
    eps: float = 0.5
    eps_list: tuple = ()
    rho_min: float = 1.0
    rho_max: float = 21.0
    n_rho: int = 33
    n_ang1: int = 16
    n_ang2: int = 12
    n_fiber: int = 16
    name: str = "all"
    delta: float = -0.5
    delta_lo: float = -2.5
    delta_hi: float = 1.5
    delta_step: float = 0.05
    n_list: tuple = (0, 1, -1)
    samples: int = 100
    seed: int = 0
    eps_max: float = 0.5
    threads: int = 1
    out_dir: str = "out"

    def model_end(self) -> ModelEnd:
        return ModelEnd(self.kind, c=self.c, k=self.k, eps=self.eps,
                        rho_min=self.rho_min, rho_max=self.rho_max)


def _parse_float_list(text):
    return tuple(float(tok.strip()) for tok in text.split(",") if tok.strip())


def _parse_int_list(text):
    return tuple(int(tok.strip()) for tok in text.split(",") if tok.strip())


def parse_config(text: str) -> Config:
    """Parse and validate configuration text; raises :class:`ConfigError`
    with a line number on syntax errors and the violated precondition on
    semantic ones."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        where = f" (line {lineno})" if lineno else ""
        raise ConfigError(f"parse error{where}: {exc.message}") from exc

    cfg = Config()
    for section in parser.sections():
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _KNOWN[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            try:
                _apply(cfg, section, key, raw)
            except (ValueError, KeyError) as exc:
                raise ConfigError(
                    f"bad value for {section}.{key}: {raw!r} ({exc})") from exc

    _validate(cfg)
    return cfg


def _apply(cfg: Config, section: str, key: str, raw: str):
    if section == "end":
        if key == "kind":
            cfg.kind = EndKind[raw.strip()]
        elif key == "k":
            cfg.k = int(raw)
        elif key == "eps_list":
            cfg.eps_list = _parse_float_list(raw)
        else:
            setattr(cfg, key, float(raw))
    elif section == "grid":
        setattr(cfg, key, int(raw))
    elif section == "experiment":
        if key == "name":
            cfg.name = raw.strip()
        elif key == "n_list":
            cfg.n_list = _parse_int_list(raw)
        elif key in ("samples", "seed", "threads"):
            setattr(cfg, key, int(raw))
        else:
            setattr(cfg, key, float(raw))
    else:
        cfg.out_dir = raw.strip()


def _validate(cfg: Config):
    if not 0.0 < cfg.eps < 1.0:
        raise ConfigError(f"eps must lie in (0,1), got {cfg.eps}")
    for e in cfg.eps_list:
        if not 0.0 < e < 1.0:
            raise ConfigError(f"eps_list entries must lie in (0,1), got {e}")
    if cfg.name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {cfg.name!r}; choose from {EXPERIMENTS}")
    if cfg.samples < 1:
        raise ConfigError("samples must be positive")
    if cfg.threads < 1:
        raise ConfigError("threads must be positive")
    if cfg.delta_step <= 0:
        raise ConfigError("delta_step must be positive")
    try:
        cfg.model_end()
    except (DomainError, GhlabError) as exc:
        raise ConfigError(f"invalid end parameters: {exc}") from exc
