"""
Monte Carlo evaluation of the estimator on randomly drawn multipath channels.

Each trial draws taps with a guaranteed minimum pairwise separation in delay
and in Doppler, simulates a packet with all-ones symbols, runs successive
cancellation followed by refinement, and matches estimates to true taps.
A trial is a *miss* unless every true tap has a distinct nearest estimate;
missed trials count toward the miss rate and are excluded from the RMS
errors.

Distances for matching are measured in resolution cells: delay in units of
``T/K`` and Doppler in units of ``1/(L Td)``.

The complex-gain RMS ``|a_hat - a|`` is an extra diagnostic; the delay and
Doppler RMS are the quantities compared against the CRLB.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .estimator import (
    EstimateSet,
    EstimatorOptions,
    NearSingularError,
    SearchRegion,
    crlb_std,
    estimate,
)
from .signal_model import (
    MultipathChannel,
    NoiseSpec,
    OfdmConfig,
    apply_channel,
    channel_coeffs,
    generate_symbols,
)

log = logging.getLogger(__name__)

REJECTION_BUDGET = 100_000


class InfeasibleSeparationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    P: int
    pdp_db: Tuple[float, ...]
    tau_range: Tuple[float, float]
    nu_range: Tuple[float, float]
    dtau_min: float
    dnu_min: float
    snr_grid_db: Tuple[float, ...] = tuple(range(0, 45, 5))
    trials: int = 500
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pdp_db", tuple(float(v) for v in self.pdp_db))
        object.__setattr__(self, "snr_grid_db", tuple(float(v) for v in self.snr_grid_db))
        if self.P < 1 or len(self.pdp_db) != self.P:
            raise ValueError("pdp_db needs one entry per tap")
        t0, t1 = self.tau_range
        n0, n1 = self.nu_range
        if not (t0 < t1 and n0 < n1):
            raise ValueError("empty tau or nu range")
        if t0 < 0:
            raise ValueError("delays must be nonnegative")
        # tiny slack so that e.g. 66.67 ns on (0, 200) ns is accepted
        if self.dtau_min > (t1 - t0) / self.P * (1 + 1e-3) or self.dnu_min > (n1 - n0) / self.P * (1 + 1e-3):
            raise ValueError("minimum separation exceeds range/P")
        if self.trials < 0:
            raise ValueError("trials must be >= 0")

    @classmethod
    def vehicular(cls, **kw) -> "ScenarioSpec":
        """Three taps at 0/-10/-20 dB on 0..200 ns and +-500 Hz, separated by
        at least 66.67 ns and 333.33 Hz."""
        base = dict(
            P=3, pdp_db=(0.0, -10.0, -20.0), tau_range=(0.0, 200e-9), nu_range=(-500.0, 500.0),
            dtau_min=66.67e-9, dnu_min=333.33,
        )
        base.update(kw)
        return cls(**base)

    @property
    def tap_power(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.pdp_db) / 10.0)


def _separated_draw(rng, P, lo, hi, gap, what):
    for _ in range(REJECTION_BUDGET):
        v = rng.uniform(lo, hi, size=P)
        if P == 1 or np.min(np.diff(np.sort(v))) > gap:
            return v
    raise InfeasibleSeparationError(
        f"no {what} draw with pairwise gap > {gap:g} on ({lo:g}, {hi:g}) after {REJECTION_BUDGET} tries"
    )


def sample_taps(spec: ScenarioSpec, trial_seed) -> MultipathChannel:
    """Draw one channel: sorted delays and unsorted Dopplers, each by
    rejection until all pairwise gaps exceed the minimum, fixed magnitudes
    from the power profile and uniform phases."""
    rng = np.random.default_rng(trial_seed)
    tau = np.sort(_separated_draw(rng, spec.P, *spec.tau_range, spec.dtau_min, "delay"))
    nu = _separated_draw(rng, spec.P, *spec.nu_range, spec.dnu_min, "Doppler")
    phase = rng.uniform(0.0, 2 * np.pi, size=spec.P)
    a = np.sqrt(spec.tap_power) * np.exp(1j * phase)
    return MultipathChannel(a, tau, nu)


def match_estimates(cfg: OfdmConfig, truth: MultipathChannel, est: EstimateSet) -> Optional[np.ndarray]:
    """Index of the nearest estimate for every true tap, or ``None`` (miss)
    unless that map is one-to-one onto the estimates."""
    if est.P != truth.P:
        return None
    dt = (truth.tau[:, None] - np.asarray(est.tau)[None, :]) / cfg.delay_cell
    dn = (truth.nu[:, None] - np.asarray(est.nu)[None, :]) / cfg.doppler_cell
    nearest = np.argmin(np.hypot(dt, dn), axis=1)
    if np.unique(nearest).size != truth.P:
        return None
    return nearest


@dataclass
class TrialStats:
    """Per-SNR aggregates; per-tap arrays have shape ``(n_snr, P)``."""

    snr_db: np.ndarray
    miss_rate: np.ndarray
    n_detected: np.ndarray
    n_trials: int
    n_errors: np.ndarray
    rms_tau: np.ndarray
    rms_nu: np.ndarray
    rms_gain: np.ndarray
    crlb_std_tau: np.ndarray
    crlb_std_nu: np.ndarray
    stage: str = "refined"
    initial: Optional["TrialStats"] = None

    @property
    def P(self) -> int:
        return self.rms_tau.shape[1]

    def at(self, snr_db: float) -> int:
        idx = np.flatnonzero(np.isclose(self.snr_db, snr_db))
        if idx.size == 0:
            raise KeyError(snr_db)
        return int(idx[0])


def trial_seed(base_seed: int, snr_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), int(snr_index), int(trial)])


def _one_trial(args):
    cfg, spec, opts, region, snr_index, trial = args
    ss = trial_seed(spec.seed, snr_index, trial)
    tap_ss, noise_ss = ss.spawn(2)
    truth = sample_taps(spec, tap_ss)
    X = generate_symbols(cfg, "ones")
    noise = NoiseSpec.from_snr_db(cfg, spec.snr_grid_db[snr_index], seed=noise_ss)
    Y = apply_channel(X, channel_coeffs(cfg, truth), noise)
    try:
        init, ref = estimate(cfg, Y, X, opts, region)
    except NearSingularError as exc:
        log.debug("trial %d at snr index %d: %s", trial, snr_index, exc)
        return truth, None, None
    return truth, init, ref


def _aggregate(cfg, spec, results, stage) -> TrialStats:
    S, P = len(spec.snr_grid_db), spec.P
    se_tau = np.zeros((S, P))
    se_nu = np.zeros((S, P))
    se_gain = np.zeros((S, P))
    n_det = np.zeros(S, dtype=int)
    n_err = np.zeros(S, dtype=int)
    for s in range(S):
        for truth, init, ref in results[s]:
            est = init if stage == "initial" else ref
            if est is None:
                n_err[s] += 1
                continue
            idx = match_estimates(cfg, truth, est)
            if idx is None:
                continue
            n_det[s] += 1
            se_tau[s] += (np.asarray(est.tau)[idx] - truth.tau) ** 2
            se_nu[s] += (np.asarray(est.nu)[idx] - truth.nu) ** 2
            se_gain[s] += np.abs(np.asarray(est.a)[idx] - truth.a) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        denom = np.where(n_det > 0, n_det, np.nan)[:, None]
        rms_tau = np.sqrt(se_tau / denom)
        rms_nu = np.sqrt(se_nu / denom)
        rms_gain = np.sqrt(se_gain / denom)
        miss = np.where(spec.trials > 0, 1.0 - n_det / max(spec.trials, 1), np.nan)
    crlb_tau = np.zeros((S, P))
    crlb_nu = np.zeros((S, P))
    for s, snr_db in enumerate(spec.snr_grid_db):
        sigma2 = NoiseSpec.from_snr_db(cfg, snr_db).sigma2
        for p, pw in enumerate(spec.tap_power):
            crlb_tau[s, p], crlb_nu[s, p] = crlb_std(cfg, sigma2, pw)
    return TrialStats(
        snr_db=np.asarray(spec.snr_grid_db, float), miss_rate=np.asarray(miss, float),
        n_detected=n_det, n_trials=spec.trials, n_errors=n_err,
        rms_tau=rms_tau, rms_nu=rms_nu, rms_gain=rms_gain,
        crlb_std_tau=crlb_tau, crlb_std_nu=crlb_nu, stage=stage,
    )


def run_trials(
    cfg: OfdmConfig,
    spec: ScenarioSpec,
    opts: EstimatorOptions,
    region: SearchRegion,
    workers: int = 1,
) -> TrialStats:
    """Run ``spec.trials`` trials at every SNR in ``spec.snr_grid_db``.

    Returns the statistics of the final (refined) estimates; the statistics
    of the successive-cancellation stage alone, over the same trials, are in
    ``.initial``. Trials are seeded from ``(spec.seed, snr_index, trial)``,
    so results do not depend on ``workers``. Estimator failures (colliding
    taps) are counted as misses and tallied in ``n_errors``.
    """
    if opts.P != spec.P:
        raise ValueError(f"estimator P={opts.P} does not match scenario P={spec.P}")
    S = len(spec.snr_grid_db)
    jobs = [(cfg, spec, opts, region, s, i) for s in range(S) for i in range(spec.trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_one_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        flat = [_one_trial(j) for j in jobs]
    results = [flat[s * spec.trials:(s + 1) * spec.trials] for s in range(S)]
    stats = _aggregate(cfg, spec, results, "refined")
    stats.initial = _aggregate(cfg, spec, results, "initial")
    return stats
