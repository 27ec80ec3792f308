"""Flat ``key = value`` run configuration.

Lines are ``key = value``; ``#`` starts a comment.  Lists are comma
separated.  Unknown keys are rejected.  ``docs/config-keys.md`` lists every
key with its default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .heisenberg import AnalyticFunction, Preset
from .solver import STEP_POLICIES


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


_PARSERS = {"float": float, "int": int, "str": str.strip, "bool": _bool, "floats": _floats,
            "ints": _ints, "opt_float": _opt_float}


def _fmt(kind, value):
    if kind in ("floats", "ints"):
        return ", ".join(repr(v) for v in value)
    if kind == "bool":
        return "true" if value else "false"
    if kind == "opt_float":
        return "auto" if value is None else repr(value)
    if kind == "float":
        return repr(value)
    return str(value)


def _key(kind, default, doc):
    return field(default=default, metadata={"kind": kind, "doc": doc})


@dataclass(frozen=True)
class RunConfig:
    psi: str = _key("str", "valley", "obstacle preset id")
    psi_params: tuple = _key("floats", (0.5, 2.0), "obstacle preset parameters")
    u_star: str = _key("str", "constant", "boundary datum preset id")
    u_star_params: tuple = _key("floats", (0.0,), "boundary datum preset parameters")
    box_lower: tuple = _key("floats", (-1.0, -1.0, -1.0), "lower corner (x, y, t) of the box")
    box_upper: tuple = _key("floats", (1.0, 1.0, 1.0), "upper corner (x, y, t) of the box")
    resolution: tuple = _key("ints", (33, 33, 33), "nodes per axis (one value or three)")
    p: float = _key("float", 2.0, "energy exponent, p in (1, inf)")
    eps: float = _key("float", 0.0, "regularisation eps >= 0 for solve, penalize and ls-check")
    eps_list: tuple = _key("floats", (1e-1, 1e-2, 1e-3, 1e-4),
                           "strictly decreasing eps values for eps-sweep")
    eta_list: tuple = _key("floats", (0.1, 0.05), "penalisation parameters, each in (0, 1)")
    R: float = _key("float", 0.5, "radius of the gauge ball for eps-sweep")
    seed: int = _key("int", 0, "seed for every random draw")
    tol: float = _key("float", 1e-8, "solver tolerance on the (projected) gradient norm")
    max_iter: int = _key("int", 200_000, "solver iteration budget")
    step_policy: str = _key("str", "abb", "trial step rule: abb, bb1, bb2 or fixed")
    penalized_method: str = _key("str", "gradient", "penalised solver: gradient or lbfgs")
    ls_tol: float | None = _key("opt_float", None,
                                "ls-check tolerance; auto = max(1e-6, 10 tol / cell weight)")
    sandwich_tol: float = _key("float", 1e-4, "tolerance of the penalisation sandwich checks")
    min_shrink: float = _key("float", 1.5, "required shrink of sup|u_eta - u| between successive eta")
    vi_trials: int = _key("int", 20, "random admissible directions probed after solve")
    trials: int = _key("int", 100_000, "random trials per lemma (the suite runs twice as many)")
    min_trials: int = _key("int", 100_000, "smallest accepted trials value for lemmas")
    consistency_preset: str = _key("str", "horizontal-paraboloid", "preset for the consistency study")
    consistency_params: tuple = _key("floats", (0.0, 1.0), "its parameters")
    consistency_resolutions: tuple = _key("ints", (17, 33, 65), "cube resolutions to compare")
    negative_control: bool = _key("bool", False, "ls-check: perturb the solution before checking")
    out: str = _key("str", "out", "output directory")

    def __post_init__(self):
        res = tuple(self.resolution)
        if len(res) == 1:
            object.__setattr__(self, "resolution", res * 3)
        validate(self)

    def psi_function(self) -> AnalyticFunction:
        return AnalyticFunction(self.psi, self.psi_params)

    def u_star_function(self) -> AnalyticFunction:
        return AnalyticFunction(self.u_star, self.u_star_params)

    def consistency_function(self) -> AnalyticFunction:
        return AnalyticFunction(self.consistency_preset, self.consistency_params)

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **kw)


KEYS = {f.name: f for f in fields(RunConfig)}


def _check(cond, key, msg):
    if not cond:
        raise ConfigError(f"{key}: {msg}")


def validate(cfg: RunConfig) -> None:
    for key in ("psi", "u_star", "consistency_preset"):
        _check(getattr(cfg, key) in {p.value for p in Preset}, key,
               f"unknown preset {getattr(cfg, key)!r}")
    for key, pkey in (("psi", "psi_params"), ("u_star", "u_star_params"),
                      ("consistency_preset", "consistency_params")):
        try:
            AnalyticFunction(getattr(cfg, key), getattr(cfg, pkey))
        except ValueError as exc:
            raise ConfigError(f"{pkey}: {exc}") from None
    _check(len(cfg.box_lower) == 3, "box_lower", "needs three values")
    _check(len(cfg.box_upper) == 3, "box_upper", "needs three values")
    _check(all(b > a for a, b in zip(cfg.box_lower, cfg.box_upper)), "box_upper",
           "must exceed box_lower on every axis")
    _check(len(cfg.resolution) == 3 and min(cfg.resolution) >= 3, "resolution",
           "needs one or three values, each >= 3")
    _check(cfg.p > 1 and math.isfinite(cfg.p), "p", f"must lie in (1, inf), got {cfg.p}")
    _check(cfg.eps >= 0 and math.isfinite(cfg.eps), "eps", f"must be finite and >= 0, got {cfg.eps}")
    _check(len(cfg.eps_list) >= 2 and all(e > 0 for e in cfg.eps_list), "eps_list",
           "needs at least two positive values")
    _check(all(b < a for a, b in zip(cfg.eps_list, cfg.eps_list[1:])), "eps_list",
           f"must be strictly decreasing, got {cfg.eps_list}")
    _check(len(cfg.eta_list) >= 1 and all(0 < e < 1 for e in cfg.eta_list), "eta_list",
           "values must lie in (0, 1)")
    _check(cfg.R > 0, "R", "must be positive")
    _check(cfg.seed >= 0, "seed", "must be nonnegative")
    _check(cfg.tol > 0, "tol", "must be positive")
    _check(cfg.max_iter >= 1, "max_iter", "must be at least 1")
    _check(cfg.step_policy in STEP_POLICIES, "step_policy", f"must be one of {STEP_POLICIES}")
    _check(cfg.penalized_method in ("gradient", "lbfgs"), "penalized_method", "must be gradient or lbfgs")
    _check(cfg.ls_tol is None or cfg.ls_tol > 0, "ls_tol", "must be positive or auto")
    _check(cfg.sandwich_tol > 0, "sandwich_tol", "must be positive")
    _check(cfg.min_shrink >= 1, "min_shrink", "must be at least 1")
    _check(cfg.vi_trials >= 1, "vi_trials", "must be at least 1")
    _check(cfg.trials >= 1, "trials", "must be at least 1")
    _check(cfg.min_trials >= 1, "min_trials", "must be at least 1")
    _check(len(cfg.consistency_resolutions) >= 2 and min(cfg.consistency_resolutions) >= 5,
           "consistency_resolutions", "needs at least two values, each >= 5")
    _check(bool(cfg.out), "out", "must not be empty")


def parse_value(key: str, text: str):
    if key not in KEYS:
        raise ConfigError(f"{key}: unknown key")
    kind = KEYS[key].metadata["kind"]
    try:
        return _PARSERS[kind](text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot read {text!r} as {kind} ({exc})") from None


def parse_text(text: str, overrides: dict | None = None) -> RunConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        values[key] = parse_value(key, val)
    values.update(overrides or {})
    for key in values:
        if key not in KEYS:
            raise ConfigError(f"{key}: unknown key")
    return RunConfig(**values)


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a config file (or start from defaults) and apply ``overrides``; overrides win."""
    if path is None:
        return parse_text("", overrides)
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from None
    return parse_text(text, overrides)


def dump(cfg: RunConfig) -> str:
    lines = []
    for name, f in KEYS.items():
        lines.append(f"{name} = {_fmt(f.metadata['kind'], getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def key_table() -> str:
    """Markdown table of every key, its default and meaning."""
    out = ["| key | default | meaning |", "| --- | --- | --- |"]
    default = RunConfig()
    for name, f in KEYS.items():
        out.append(f"| `{name}` | `{_fmt(f.metadata['kind'], getattr(default, name))}` | "
                   f"{f.metadata['doc']} |")
    return "\n".join(out) + "\n"
