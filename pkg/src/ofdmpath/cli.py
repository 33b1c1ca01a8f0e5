"""
Command-line front end.

    ofdmpath ambiguity  --config run.toml [--out surface.csv]
    ofdmpath estimate   --config run.toml (--synthetic | --input Y.csv [--symbols X.csv]) [--out est.csv]
    ofdmpath montecarlo --config run.toml [--out DIR] [--trials N] [--threads N] [--seed S]
    ofdmpath validate   --config run.toml
    ofdmpath crlb       --config run.toml

``OFDMPATH_OUTPUT_DIR`` overrides ``[output].directory``.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .ambiguity import ambiguity_grid
from .config import ConfigError, RunConfig, load_config
from .estimator import NearSingularError, crlb_std, estimate
from .montecarlo import run_trials
from .signal_model import (
    MultipathChannel,
    NoiseSpec,
    apply_channel,
    channel_coeffs,
    generate_symbols,
)
from .waveform import (
    WaveformConfig,
    apply_ct_channel,
    matched_filter,
    matched_filter_single_tap,
    model_residual,
    synth_tx,
    window_ambiguity,
)

log = logging.getLogger("ofdmpath")

ENV_OUTPUT_DIR = "OFDMPATH_OUTPUT_DIR"

EXIT_OK = 0
EXIT_ESTIMATION = 1
EXIT_CONFIG = 2
EXIT_LOOPBACK = 3
EXIT_IN_CP = 4
EXIT_CP_VIOLATION = 5

LOOPBACK_TOL = 1e-6
IN_CP_TOL = 1e-2
GAIN_TOL = 0.05


def _output_dir(cfg: RunConfig) -> Path:
    return Path(os.environ.get(ENV_OUTPUT_DIR) or cfg.output.directory)


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    sim = cfg.sim
    if getattr(args, "seed", None) is not None:
        sim = replace(sim, seed=args.seed)
    if getattr(args, "trials", None) is not None:
        sim = replace(sim, trials=args.trials)
    if getattr(args, "threads", None) is not None:
        sim = replace(sim, threads=args.threads)
    return replace(cfg, sim=sim)


def _symbols(cfg: RunConfig):
    return generate_symbols(cfg.ofdm, cfg.sim.constellation, cfg.sim.psk_order, seed=cfg.sim.seed)


def cmd_ambiguity(cfg: RunConfig, out: Path = None) -> Path:
    ofdm = cfg.ofdm
    out = Path(out) if out else _output_dir(cfg) / f"ambiguity_K{ofdm.K}_L{ofdm.L}.csv"
    taus, nus = cfg.ambiguity.axes()
    grid = ambiguity_grid(ofdm, generate_symbols(ofdm, "ones"), taus, nus, cfg.ambiguity.formula)
    io.write_ambiguity_csv(out, grid)
    return out


def cmd_estimate(cfg: RunConfig, out: Path = None, input_path=None, symbols_path=None, synthetic=False) -> Path:
    if cfg.options is None:
        raise ConfigError("an [estimator] section is required")
    ofdm = cfg.ofdm
    out = Path(out) if out else _output_dir(cfg) / "estimates.csv"
    if synthetic:
        if cfg.channel is None:
            raise ConfigError("--synthetic needs explicit [channel].taps")
        X = _symbols(cfg)
        snr_db = cfg.sim.snr_db
        noise = (NoiseSpec.noiseless() if snr_db is None
                 else NoiseSpec.from_snr_db(ofdm, snr_db, seed=cfg.sim.seed))
        Y = apply_channel(X, channel_coeffs(ofdm, cfg.channel), noise)
    else:
        if input_path is None:
            raise ConfigError("either --synthetic or --input is required")
        try:
            Y = io.read_grid_csv(input_path, ofdm.L, ofdm.K)
            X = io.read_grid_csv(symbols_path, ofdm.L, ofdm.K) if symbols_path else _symbols(cfg)
        except (OSError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    init, ref = estimate(ofdm, Y, X, cfg.options, cfg.region)
    io.write_estimates_csv(out, init, ref)
    return out


def cmd_montecarlo(cfg: RunConfig, out_dir: Path = None) -> list:
    if cfg.options is None:
        raise ConfigError("an [estimator] section is required")
    out_dir = Path(out_dir) if out_dir else _output_dir(cfg)
    Ls = cfg.sim.L_values or (cfg.ofdm.L,)
    written = []
    summary = []
    for L in Ls:
        ofdm = cfg.ofdm.with_L(L)
        spec = cfg.scenario_spec()
        stats = run_trials(ofdm, spec, cfg.options, cfg.region, workers=cfg.sim.threads)
        path = out_dir / f"montecarlo_L{L}.csv"
        io.write_trialstats_csv(path, stats)
        written.append(path)
        if cfg.options.refine_iterations > 0:
            path0 = out_dir / f"montecarlo_L{L}_initial.csv"
            io.write_trialstats_csv(path0, stats.initial)
            written.append(path0)
        for s, snr in enumerate(stats.snr_db if stats.n_trials else ()):
            for p in range(stats.P):
                summary.append((
                    L, snr, p + 1,
                    stats.initial.rms_tau[s, p] / stats.crlb_std_tau[s, p],
                    stats.rms_tau[s, p] / stats.crlb_std_tau[s, p],
                    stats.initial.rms_nu[s, p] / stats.crlb_std_nu[s, p],
                    stats.rms_nu[s, p] / stats.crlb_std_nu[s, p],
                    stats.miss_rate[s],
                ))
    path = out_dir / "summary.csv"
    io.write_csv(path, ["L", "snr_db", "tap_index", "initial_tau_over_crlb", "refined_tau_over_crlb",
                        "initial_nu_over_crlb", "refined_nu_over_crlb", "miss_rate"], summary)
    written.append(path)
    return written


def validation_cases(cfg: RunConfig):
    """Loopback, in-CP tap and CP-violating tap through the sampled link.

    Returns a list of ``(name, value, tolerance, passed, exit_code)``.
    Raises ConfigError for unusable settings.
    """
    ofdm, v = cfg.ofdm, cfg.validate
    tau_in = v.tap_tau_ns * 1e-9
    tau_out = v.violation_tau_ns * 1e-9
    if not 0 <= tau_in <= ofdm.Tcp:
        raise ConfigError(f"[validate].tap_tau_ns={v.tap_tau_ns} is outside the cyclic prefix")
    if not tau_out > ofdm.Tcp:
        raise ConfigError(f"[validate].violation_tau_ns={v.violation_tau_ns} must exceed the cyclic prefix")
    try:
        wcfg = WaveformConfig(v.oversample)
        coarse = WaveformConfig(v.coarse_oversample)
        X = generate_symbols(ofdm, "psk", 4, seed=v.seed)
        dt = ofdm.T / (ofdm.K * v.oversample)
        for tau in (tau_in, tau_out):
            if abs(tau / dt - round(tau / dt)) > 1e-6:
                raise ConfigError(f"delay {tau:g} s is not on the sample grid (dt={dt:g} s)")
        tx = synth_tx(ofdm, X, wcfg)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"[validate]: {exc}") from exc

    cases = []
    Y = matched_filter(tx, ofdm, wcfg)
    loop = float(np.linalg.norm(Y - X) / np.linalg.norm(X))
    cases.append(("loopback", loop, LOOPBACK_TOL, loop <= LOOPBACK_TOL, EXIT_LOOPBACK))

    a = 1.0 + 0.0j
    tap = MultipathChannel([a], [tau_in], [v.tap_nu_hz])
    Y_in = matched_filter(apply_ct_channel(tx, tap, ofdm), ofdm, wcfg)
    c, res_in = model_residual(Y_in, channel_coeffs(ofdm, tap) * X)
    cases.append(("in_cp_residual", res_in, IN_CP_TOL, res_in <= IN_CP_TOL, EXIT_IN_CP))
    predicted = abs(window_ambiguity(ofdm, tau_in, v.tap_nu_hz)) / (ofdm.T / ofdm.Td)
    gain_err = abs(abs(c) - predicted) / predicted
    cases.append(("in_cp_gain", gain_err, GAIN_TOL, gain_err <= GAIN_TOL, EXIT_IN_CP))

    bad = MultipathChannel([a], [tau_out], [v.tap_nu_hz])
    Y_out = matched_filter(apply_ct_channel(tx, bad, ofdm), ofdm, wcfg)
    _, res_out = model_residual(Y_out, channel_coeffs(ofdm, bad) * X)
    cases.append(("cp_violation_residual", res_out, res_in, res_out > res_in, EXIT_CP_VIOLATION))

    # discretisation error against the closed-form continuous-time output
    ref = matched_filter_single_tap(ofdm, X, a, tau_in, v.tap_nu_hz)
    for name, w in (("discretisation_fine", wcfg), ("discretisation_coarse", coarse)):
        if abs((tau_in * ofdm.K * w.oversample / ofdm.T) % 1) > 1e-6:
            continue
        Yw = matched_filter(apply_ct_channel(synth_tx(ofdm, X, w), tap, ofdm), ofdm, w)
        err = float(np.linalg.norm(Yw - ref) / np.linalg.norm(ref))
        cases.append((f"{name}_os{w.oversample}", err, math.nan, True, EXIT_OK))
    return cases


def cmd_validate(cfg: RunConfig, stream=None) -> int:
    stream = stream or sys.stdout
    cases = validation_cases(cfg)
    code = EXIT_OK
    for name, value, tol, ok, fail_code in cases:
        tol_s = "report" if math.isnan(tol) else f"{tol:.3g}"
        print(f"{name:28s} {value:.3e}  tol {tol_s:>9s}  {'PASS' if ok else 'FAIL'}", file=stream)
        if not ok and code == EXIT_OK:
            code = fail_code
    return code


def cmd_crlb(cfg: RunConfig, stream=None) -> None:
    stream = stream or sys.stdout
    powers = cfg.tap_powers()
    grid = cfg.sim.snr_grid_db if cfg.sim.snr_db is None else (cfg.sim.snr_db,)
    print("snr_db,tap_index,tap_power_db,crlb_std_tau_ns,crlb_std_nu_hz", file=stream)
    for snr in grid:
        sigma2 = NoiseSpec.from_snr_db(cfg.ofdm, snr).sigma2
        for p, pw in enumerate(powers):
            st, sn = crlb_std(cfg.ofdm, sigma2, pw)
            print(",".join(io.fmt(x) for x in (snr, p + 1, 10 * np.log10(pw), st * 1e9, sn)), file=stream)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ofdmpath", description=__doc__.split("\n\n")[0].strip() or None)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        return p

    common(sub.add_parser("ambiguity", help="write an ambiguity-function magnitude grid"))
    est = common(sub.add_parser("estimate", help="estimate taps from one packet"))
    src = est.add_mutually_exclusive_group(required=True)
    src.add_argument("--synthetic", action="store_true")
    src.add_argument("--input", type=Path)
    est.add_argument("--symbols", type=Path, default=None)
    common(sub.add_parser("montecarlo", help="Monte Carlo sweep over SNR"))
    common(sub.add_parser("validate", help="check the frequency-domain model against the sampled waveform"))
    common(sub.add_parser("crlb", help="print CRLB standard deviations"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "ambiguity":
            print(cmd_ambiguity(cfg, args.out))
        elif args.command == "estimate":
            print(cmd_estimate(cfg, args.out, args.input, args.symbols, args.synthetic))
        elif args.command == "montecarlo":
            for p in cmd_montecarlo(cfg, args.out):
                print(p)
        elif args.command == "validate":
            return cmd_validate(cfg)
        elif args.command == "crlb":
            cmd_crlb(cfg)
    except ConfigError as exc:
        print(f"ofdmpath: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ofdmpath: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NearSingularError as exc:
        print(f"ofdmpath: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    return EXIT_OK


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
