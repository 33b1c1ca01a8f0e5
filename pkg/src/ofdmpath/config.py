"""
TOML run configuration with strict parsing.

Units are part of every dimensional key name (``T_us``, ``tau_max_ns``,
``nu_min_hz``); unknown keys and sections are rejected.

Example::

    [ofdm]
    preset = "ieee80211"
    L = 512

    [channel.scenario]
    pdp_db = [0, -10, -20]
    tau_min_ns = 0
    tau_max_ns = 200
    nu_min_hz = -500
    nu_max_hz = 500
    dtau_min_ns = 66.67
    dnu_min_hz = 333.33

    [estimator]
    P = 3
    refine_iterations = 20

    [sim]
    trials = 500
    snr_grid_db = [10, 20, 30]
    seed = 1

    [output]
    directory = "out"
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import tomli

from .estimator import EstimatorOptions, SearchRegion
from .montecarlo import ScenarioSpec
from .signal_model import MultipathChannel, OfdmConfig, ieee80211


class ConfigError(ValueError):
    pass


_SECTIONS = {"ofdm", "channel", "estimator", "sim", "output", "ambiguity", "validate"}


def _check_keys(section: str, table: dict, allowed) -> None:
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}]: unknown key(s) {', '.join(unknown)}")


def _num(section, table, key, default=None, kind=float):
    if key not in table:
        if default is ...:
            raise ConfigError(f"[{section}]: missing required key {key!r}")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"[{section}].{key}: expected a number, got {v!r}")
    if kind is int:
        if float(v) != int(v):
            raise ConfigError(f"[{section}].{key}: expected an integer, got {v!r}")
        return int(v)
    return float(v)


def _numlist(section, table, key, default=None):
    if key not in table:
        return default
    v = table[key]
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise ConfigError(f"[{section}].{key}: expected a list of numbers")
    return [float(x) for x in v]


def _str(section, table, key, default, choices=None):
    v = table.get(key, default)
    if v is not None and not isinstance(v, str):
        raise ConfigError(f"[{section}].{key}: expected a string")
    if choices is not None and v not in choices:
        names = sorted(c for c in choices if c is not None)
        raise ConfigError(f"[{section}].{key}: must be one of {names}")
    return v


def parse_ofdm(t: dict) -> OfdmConfig:
    _check_keys("ofdm", t, {"preset", "K", "L", "T_us", "Tcp_us", "null_subcarriers"})
    preset = _str("ofdm", t, "preset", None, {"ieee80211", None})
    if preset == "ieee80211":
        base = ieee80211(L=128)
        K, T_us, Tcp_us, nulls = base.K, base.T * 1e6, base.Tcp * 1e6, sorted(base.null_set)
        L = _num("ofdm", t, "L", 128, int)
    else:
        K = _num("ofdm", t, "K", ..., int)
        L = _num("ofdm", t, "L", ..., int)
        T_us = _num("ofdm", t, "T_us", ...)
        Tcp_us = _num("ofdm", t, "Tcp_us", ...)
        nulls = []
    K = _num("ofdm", t, "K", K, int)
    T_us = _num("ofdm", t, "T_us", T_us)
    Tcp_us = _num("ofdm", t, "Tcp_us", Tcp_us)
    if "null_subcarriers" in t:
        v = t["null_subcarriers"]
        if not isinstance(v, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            raise ConfigError("[ofdm].null_subcarriers: expected a list of integers")
        nulls = v
    try:
        return OfdmConfig.from_durations(K=K, L=L, T=T_us * 1e-6, Tcp=Tcp_us * 1e-6, null_set=nulls)
    except ValueError as exc:
        raise ConfigError(f"[ofdm]: {exc}") from exc


_TAP_KEYS = {"gain_db", "phase_deg", "tau_ns", "nu_hz"}
_SCENARIO_KEYS = {"pdp_db", "tau_min_ns", "tau_max_ns", "nu_min_hz", "nu_max_hz", "dtau_min_ns", "dnu_min_hz"}


def parse_taps(taps) -> MultipathChannel:
    if not isinstance(taps, list) or not taps:
        raise ConfigError("[channel].taps: expected a nonempty list of tables")
    a, tau, nu = [], [], []
    for i, tap in enumerate(taps):
        name = f"channel.taps[{i}]"
        if not isinstance(tap, dict):
            raise ConfigError(f"[{name}]: expected a table")
        _check_keys(name, tap, _TAP_KEYS)
        g = _num(name, tap, "gain_db", 0.0)
        ph = _num(name, tap, "phase_deg", 0.0)
        a.append(10 ** (g / 20) * np.exp(1j * math.radians(ph)))
        tau.append(_num(name, tap, "tau_ns", ...) * 1e-9)
        nu.append(_num(name, tap, "nu_hz", ...))
    try:
        return MultipathChannel(np.array(a), np.array(tau), np.array(nu))
    except ValueError as exc:
        raise ConfigError(f"[channel]: {exc}") from exc


@dataclass(frozen=True)
class SimConfig:
    trials: int = 500
    snr_db: Optional[float] = None
    snr_grid_db: Tuple[float, ...] = tuple(range(0, 45, 5))
    seed: int = 0
    constellation: str = "ones"
    psk_order: int = 4
    threads: int = 1
    L_values: Tuple[int, ...] = ()


def parse_sim(t: dict) -> SimConfig:
    _check_keys("sim", t, {"trials", "snr_db", "snr_grid_db", "seed", "constellation", "psk_order", "threads", "L_values"})
    d = SimConfig()
    grid = _numlist("sim", t, "snr_grid_db", None)
    Ls = _numlist("sim", t, "L_values", None)
    cfg = SimConfig(
        trials=_num("sim", t, "trials", d.trials, int),
        snr_db=_num("sim", t, "snr_db", None),
        snr_grid_db=tuple(grid) if grid is not None else d.snr_grid_db,
        seed=_num("sim", t, "seed", d.seed, int),
        constellation=_str("sim", t, "constellation", "ones", {"ones", "psk"}),
        psk_order=_num("sim", t, "psk_order", 4, int),
        threads=_num("sim", t, "threads", 1, int),
        L_values=tuple(int(x) for x in Ls) if Ls is not None else (),
    )
    if cfg.trials < 0 or cfg.threads < 1:
        raise ConfigError("[sim]: trials must be >= 0 and threads >= 1")
    return cfg


def parse_estimator(t: dict):
    keys = {
        "P", "refine_iterations", "gamma", "domain", "early_stop_tol",
        "tau_min_ns", "tau_max_ns", "nu_min_hz", "nu_max_hz",
        "M", "N", "beta", "n_bisect", "eps_tau_ns", "eps_nu_hz",
    }
    _check_keys("estimator", t, keys)
    s = "estimator"
    try:
        opts = EstimatorOptions(
            P=_num(s, t, "P", ..., int),
            refine_iterations=_num(s, t, "refine_iterations", 20, int),
            gamma=_num(s, t, "gamma", None),
            domain=_str(s, t, "domain", "matched", {"matched", "zero_forcing"}),
            early_stop_tol=_num(s, t, "early_stop_tol", None),
        )
        region = SearchRegion(
            tau_min=_num(s, t, "tau_min_ns", 0.0) * 1e-9,
            tau_max=_num(s, t, "tau_max_ns", 200.0) * 1e-9,
            nu_min=_num(s, t, "nu_min_hz", -500.0),
            nu_max=_num(s, t, "nu_max_hz", 500.0),
            M=_num(s, t, "M", 16, int),
            N=_num(s, t, "N", 16, int),
            beta=_num(s, t, "beta", 1.0),
            n_bisect=_num(s, t, "n_bisect", 8, int),
            eps_tau=_num(s, t, "eps_tau_ns", 0.01) * 1e-9,
            eps_nu=_num(s, t, "eps_nu_hz", 1e-3),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[estimator]: {exc}") from exc
    return opts, region


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    format: str = "csv"


@dataclass(frozen=True)
class AmbiguityConfig:
    tau_min_ns: float = -400.0
    tau_max_ns: float = 400.0
    n_tau: int = 161
    nu_min_hz: float = -4000.0
    nu_max_hz: float = 4000.0
    n_nu: int = 161
    formula: str = "approx"

    def axes(self):
        return (np.linspace(self.tau_min_ns, self.tau_max_ns, self.n_tau) * 1e-9,
                np.linspace(self.nu_min_hz, self.nu_max_hz, self.n_nu))


def parse_ambiguity(t: dict) -> AmbiguityConfig:
    _check_keys("ambiguity", t, {"tau_min_ns", "tau_max_ns", "n_tau", "nu_min_hz", "nu_max_hz", "n_nu", "formula"})
    d = AmbiguityConfig()
    c = AmbiguityConfig(
        tau_min_ns=_num("ambiguity", t, "tau_min_ns", d.tau_min_ns),
        tau_max_ns=_num("ambiguity", t, "tau_max_ns", d.tau_max_ns),
        n_tau=_num("ambiguity", t, "n_tau", d.n_tau, int),
        nu_min_hz=_num("ambiguity", t, "nu_min_hz", d.nu_min_hz),
        nu_max_hz=_num("ambiguity", t, "nu_max_hz", d.nu_max_hz),
        n_nu=_num("ambiguity", t, "n_nu", d.n_nu, int),
        formula=_str("ambiguity", t, "formula", "approx", {"approx", "psk", "psk_null_dc"}),
    )
    if c.n_tau < 1 or c.n_nu < 1 or c.tau_min_ns > c.tau_max_ns or c.nu_min_hz > c.nu_max_hz:
        raise ConfigError("[ambiguity]: invalid grid extents")
    return c


@dataclass(frozen=True)
class ValidateConfig:
    oversample: int = 16
    coarse_oversample: int = 4
    tap_tau_ns: float = 800.0
    tap_nu_hz: float = 625.0
    violation_tau_ns: float = 2400.0
    seed: int = 0


def parse_validate(t: dict) -> ValidateConfig:
    keys = {"oversample", "coarse_oversample", "tap_tau_ns", "tap_nu_hz", "violation_tau_ns", "seed"}
    _check_keys("validate", t, keys)
    d = ValidateConfig()
    return ValidateConfig(
        oversample=_num("validate", t, "oversample", d.oversample, int),
        coarse_oversample=_num("validate", t, "coarse_oversample", d.coarse_oversample, int),
        tap_tau_ns=_num("validate", t, "tap_tau_ns", d.tap_tau_ns),
        tap_nu_hz=_num("validate", t, "tap_nu_hz", d.tap_nu_hz),
        violation_tau_ns=_num("validate", t, "violation_tau_ns", d.violation_tau_ns),
        seed=_num("validate", t, "seed", d.seed, int),
    )


@dataclass(frozen=True)
class RunConfig:
    ofdm: OfdmConfig
    channel: Optional[MultipathChannel] = None
    scenario: Optional[dict] = None
    options: Optional[EstimatorOptions] = None
    region: Optional[SearchRegion] = None
    sim: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    ambiguity: AmbiguityConfig = field(default_factory=AmbiguityConfig)
    validate: ValidateConfig = field(default_factory=ValidateConfig)

    def scenario_spec(self, **overrides) -> ScenarioSpec:
        if self.scenario is None:
            raise ConfigError("[channel.scenario] is required for this command")
        s = self.scenario
        kw = dict(
            P=len(s["pdp_db"]), pdp_db=tuple(s["pdp_db"]),
            tau_range=(s["tau_min_ns"] * 1e-9, s["tau_max_ns"] * 1e-9),
            nu_range=(s["nu_min_hz"], s["nu_max_hz"]),
            dtau_min=s["dtau_min_ns"] * 1e-9, dnu_min=s["dnu_min_hz"],
            snr_grid_db=self.sim.snr_grid_db, trials=self.sim.trials, seed=self.sim.seed,
        )
        kw.update(overrides)
        try:
            return ScenarioSpec(**kw)
        except ValueError as exc:
            raise ConfigError(f"[channel.scenario]: {exc}") from exc

    def tap_powers(self) -> np.ndarray:
        if self.channel is not None:
            return np.abs(self.channel.a) ** 2
        if self.scenario is not None:
            return 10 ** (np.asarray(self.scenario["pdp_db"]) / 10)
        raise ConfigError("a [channel] section is required for this command")


def parse_config(data: dict) -> RunConfig:
    unknown = sorted(set(data) - _SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if "ofdm" not in data:
        raise ConfigError("missing [ofdm] section")
    ofdm = parse_ofdm(data["ofdm"])
    channel = scenario = None
    if "channel" in data:
        ch = data["channel"]
        _check_keys("channel", ch, {"taps", "scenario"})
        if "taps" in ch:
            channel = parse_taps(ch["taps"])
        if "scenario" in ch:
            sc = ch["scenario"]
            _check_keys("channel.scenario", sc, _SCENARIO_KEYS)
            scenario = {k: _num("channel.scenario", sc, k, ...) for k in _SCENARIO_KEYS - {"pdp_db"}}
            pdp = _numlist("channel.scenario", sc, "pdp_db", None)
            if not pdp:
                raise ConfigError("[channel.scenario]: pdp_db is required")
            scenario["pdp_db"] = pdp
    options = region = None
    if "estimator" in data:
        options, region = parse_estimator(data["estimator"])
    out = data.get("output", {})
    _check_keys("output", out, {"directory", "format"})
    output = OutputConfig(
        directory=_str("output", out, "directory", "out"),
        format=_str("output", out, "format", "csv", {"csv"}),
    )
    return RunConfig(
        ofdm=ofdm, channel=channel, scenario=scenario, options=options, region=region,
        sim=parse_sim(data.get("sim", {})), output=output,
        ambiguity=parse_ambiguity(data.get("ambiguity", {})),
        validate=parse_validate(data.get("validate", {})),
    )


def load_config(path) -> RunConfig:
    try:
        with open(Path(path), "rb") as fh:
            data = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(data)
