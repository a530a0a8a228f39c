"""Experiment config files (INI grammar, parsed with configparser).

Grammar, version 1::

    [experiment]
    name = tagged_clt              ; required
    initial_law = bernoulli_star   ; bernoulli | bernoulli_star
    replicas = 2000
    master_seed = 20240601
    checkpoints = 0.5, 1.0         ; macroscopic times, increasing, <= t_max

    [params]
    p = 1.0
    alpha = 0.5
    N = 1000
    L = auto                       ; integer, or auto = smallest valid ring
    gamma = 0                      ; optional, default 0
    time_scale = hyperbolic        ; hyperbolic | longer | diffusive
    t_max = 1.0

    [observable X]                 ; one section per observable, id after the space
    kind = tagged                  ; tagged | current | moving_current | field |
                                   ; field_increment | bg | tagged_gap | current_gap
    scale = clt                    ; raw | lln | clt (tagged, currents)
    site = -1                      ; currents and current_gap
    function = bump:0,1,unit       ; fields and bg; see parse_function
    frame = static                 ; static | comoving
    b = 0.2                        ; bg prefactor exponent

    [covariance Zcov]              ; optional paired statistic
    a = Z@0.5                      ; observable@checkpoint
    b = Z@1.0

    [expect tagged_var]            ; optional acceptance entry
    target = X@1.0                 ; observable@checkpoint, or a covariance id
    stat = var                     ; mean | var | skewness | kurtosis |
                                   ; second_moment | cov | ks_pvalue
    value = 0.5                    ; expected constant
    rel_tol = 0.07                 ; and/or abs_tol; or ci = true, or min/max bounds

Keys are case-sensitive. Unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Optional

from .experiments import Experiment, ExperimentError, ObsSpec
from .lattice import LAWS, TIME_SCALES, SimParams, min_ring_size, validate_params
from .testfunctions import TestFunctionError, parse_function

GRAMMAR_VERSION = 1
STATS = ("mean", "var", "skewness", "kurtosis", "second_moment", "cov", "ks_pvalue")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class CovSpec:
    id: str
    a: tuple
    b: tuple


@dataclass(frozen=True)
class Expectation:
    name: str
    target: str
    stat: str
    value: Optional[float] = None
    rel_tol: Optional[float] = None
    abs_tol: Optional[float] = None
    ci: bool = False
    min: Optional[float] = None
    max: Optional[float] = None

    @property
    def tolerance(self) -> dict:
        return {k: getattr(self, k) for k in ("rel_tol", "abs_tol", "min", "max")
                if getattr(self, k) is not None} | ({"ci": True} if self.ci else {})

    def passes(self, measured: float, ci=None) -> bool:
        ok = True
        if self.value is not None:
            if self.rel_tol is not None:
                ok &= abs(measured - self.value) <= self.rel_tol * abs(self.value)
            if self.abs_tol is not None:
                ok &= abs(measured - self.value) <= self.abs_tol
            if self.ci:
                ok &= ci is not None and ci[0] <= self.value <= ci[1]
        if self.min is not None:
            ok &= measured > self.min
        if self.max is not None:
            ok &= measured < self.max
        return bool(ok)


@dataclass
class ExperimentConfig:
    experiment: Experiment
    replicas: int
    master_seed: int
    covariances: list = field(default_factory=list)
    expectations: list = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.experiment.name


_PARAM_KEYS = {"p", "alpha", "N", "L", "gamma", "time_scale", "t_max"}
_EXP_KEYS = {"name", "initial_law", "replicas", "master_seed", "checkpoints"}
_OBS_KEYS = {"kind", "scale", "site", "function", "frame", "b"}


def _get(section, key, conv, default=None, where=None):
    where = where or key
    if key not in section:
        if default is None:
            raise ConfigError(where, "missing required key")
        return default
    raw = section[key].strip()
    try:
        return conv(raw)
    except (ValueError, TestFunctionError) as exc:
        raise ConfigError(where, f"bad value {raw!r} ({exc})") from None


def _check_keys(section, allowed, prefix):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{prefix}.{key}", "unknown key")


def _ref(text: str, where: str) -> tuple:
    name, sep, t = text.partition("@")
    if not sep:
        raise ConfigError(where, f"expected observable@checkpoint, got {text!r}")
    try:
        return name.strip(), float(t)
    except ValueError:
        raise ConfigError(where, f"bad checkpoint in {text!r}") from None


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def parse_config(text: str, seed: Optional[int] = None,
                 replicas: Optional[int] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None

    for required in ("experiment", "params"):
        if not cp.has_section(required):
            raise ConfigError(required, "missing section")
    ex, pr = cp["experiment"], cp["params"]
    _check_keys(ex, _EXP_KEYS, "experiment")
    _check_keys(pr, _PARAM_KEYS, "params")

    name = _get(ex, "name", str)
    law = _get(ex, "initial_law", str, "bernoulli")
    if law not in LAWS:
        raise ConfigError("initial_law", f"must be one of {LAWS}")
    n_rep = replicas if replicas is not None else _get(ex, "replicas", int)
    master = seed if seed is not None else _get(ex, "master_seed", int)
    checkpoints = _get(ex, "checkpoints", lambda s: tuple(float(x) for x in s.split(",")))

    p = _get(pr, "p", float)
    alpha = _get(pr, "alpha", float)
    N = _get(pr, "N", int)
    gamma = _get(pr, "gamma", float, 0.0)
    time_scale = _get(pr, "time_scale", str, "hyperbolic")
    if time_scale not in TIME_SCALES:
        raise ConfigError("time_scale", f"must be one of {TIME_SCALES}")
    t_max = _get(pr, "t_max", float)
    L_raw = _get(pr, "L", str, "auto")
    if L_raw == "auto":
        L = min_ring_size(N, time_scale, t_max, gamma)
    else:
        L = _get(pr, "L", int)
    params = SimParams(p=p, alpha=alpha, N=N, L=L, gamma=gamma,
                       time_scale=time_scale, t_max=t_max)
    problems = validate_params(params)
    if problems:
        raise ConfigError("params", "; ".join(problems))

    specs, covs, expects = [], [], []
    for sec in cp.sections():
        kind, _, ident = sec.partition(" ")
        ident = ident.strip()
        if kind in ("experiment", "params"):
            continue
        if not ident:
            raise ConfigError(sec, "section needs an id, e.g. [observable X]")
        body = cp[sec]
        if kind == "observable":
            _check_keys(body, _OBS_KEYS, sec)
            opts = {}
            for key, conv in (("scale", str), ("site", int), ("frame", str), ("b", float)):
                if key in body:
                    opts[key] = _get(body, key, conv, where=f"{sec}.{key}")
            if "function" in body:
                opts["function"] = _get(body, "function", parse_function, where=f"{sec}.function")
            try:
                specs.append(ObsSpec.build(ident, _get(body, "kind", str, where=f"{sec}.kind"),
                                           **opts))
            except ExperimentError as exc:
                raise ConfigError(sec, str(exc)) from None
        elif kind == "covariance":
            _check_keys(body, {"a", "b"}, sec)
            covs.append(CovSpec(ident, _ref(_get(body, "a", str, where=f"{sec}.a"), f"{sec}.a"),
                                _ref(_get(body, "b", str, where=f"{sec}.b"), f"{sec}.b")))
        elif kind == "expect":
            _check_keys(body, {"target", "stat", "value", "rel_tol", "abs_tol", "ci",
                               "min", "max"}, sec)
            stat = _get(body, "stat", str, where=f"{sec}.stat")
            if stat not in STATS:
                raise ConfigError(f"{sec}.stat", f"must be one of {STATS}")
            opt = {k: _get(body, k, float, where=f"{sec}.{k}")
                   for k in ("value", "rel_tol", "abs_tol", "min", "max") if k in body}
            if "ci" in body:
                opt["ci"] = _get(body, "ci", _bool, where=f"{sec}.ci")
            expects.append(Expectation(ident, _get(body, "target", str, where=f"{sec}.target"),
                                       stat, **opt))
        else:
            raise ConfigError(sec, "unknown section")

    try:
        experiment = Experiment(name, params, law, checkpoints, specs)
    except ExperimentError as exc:
        raise ConfigError("checkpoints" if "checkpoint" in str(exc) else "observable",
                          str(exc)) from None

    ids = {s.id for s in specs}
    cov_ids = {c.id for c in covs}
    for c in covs:
        for ref, k in ((c.a, "a"), (c.b, "b")):
            _check_ref(ref, ids, experiment.checkpoints, f"covariance {c.id}.{k}")
    for e in expects:
        if e.stat == "cov":
            if e.target not in cov_ids:
                raise ConfigError(f"expect {e.name}.target", f"unknown covariance {e.target!r}")
        else:
            _check_ref(_ref(e.target, f"expect {e.name}.target"), ids, experiment.checkpoints,
                       f"expect {e.name}.target")
    if n_rep < 1:
        raise ConfigError("replicas", "must be >= 1")
    return ExperimentConfig(experiment, n_rep, master, covs, expects)


def _check_ref(ref, ids, checkpoints, where):
    name, t = ref
    if name not in ids:
        raise ConfigError(where, f"unknown observable {name!r}")
    if not any(abs(t - c) < 1e-12 for c in checkpoints):
        raise ConfigError(where, f"{t} is not a checkpoint")


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), **overrides)
