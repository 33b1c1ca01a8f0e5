"""
Multipath delay/Doppler/gain estimation.

The estimator works on the ``L x K`` received grid ``Y`` with known symbols
``X``:

1. :func:`initial_estimate` -- successive cancellation. Each stage locates
   the strongest remaining 2-D periodogram peak with :func:`bisection_peak`,
   re-solves all gains found so far by least squares, and subtracts the
   reconstruction from ``Y``.
2. :func:`refine` -- parallel cancellation. Every sweep re-locates each tap
   after removing all other taps (previous-sweep values), then re-solves the
   gains.

Both stages can run on the zero-forcing grid ``Y conj(X) / |X|`` instead of
``Y`` (``domain="zero_forcing"``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .ambiguity import AmbiguityLookup, correlation_vector, gram_matrix
from .signal_model import OfdmConfig, steering_delay, steering_doppler, synthesize

log = logging.getLogger(__name__)

MATCHED = "matched"
ZERO_FORCING = "zero_forcing"
_DOMAINS = (MATCHED, ZERO_FORCING)

COND_LIMIT = 1e12


class NearSingularError(np.linalg.LinAlgError):
    """Gram matrix too ill-conditioned: two taps (nearly) coincide in
    delay/Doppler. ``pair`` holds the most strongly coupled tap indices."""

    def __init__(self, cond: float, pair):
        self.cond = cond
        self.pair = pair
        super().__init__(f"Gram matrix condition number {cond:.3g} exceeds {COND_LIMIT:g}; taps {pair} collide")


@dataclass(frozen=True)
class SearchRegion:
    """Prior delay/Doppler box and 2-D bisection settings.

    ``M`` x ``N`` grid points per iteration, windows shrink to a half-width of
    ``beta`` bins around the previous peak, at most ``n_bisect`` iterations,
    early exit once both bin spacings fall below ``eps_tau`` and ``eps_nu``.
    """

    tau_min: float
    tau_max: float
    nu_min: float
    nu_max: float
    M: int = 16
    N: int = 16
    beta: float = 1.0
    n_bisect: int = 8
    eps_tau: float = 1e-11
    eps_nu: float = 1e-3

    def __post_init__(self):
        if not (self.tau_min < self.tau_max and self.nu_min < self.nu_max):
            raise ValueError("search region must have tau_min < tau_max and nu_min < nu_max")
        if self.M < 3 or self.N < 3:
            raise ValueError("M and N must be >= 3")
        if self.beta < 0.5:
            raise ValueError("beta must be >= 1/2")
        if self.n_bisect < 1:
            raise ValueError("n_bisect must be >= 1")
        if self.eps_tau < 0 or self.eps_nu < 0:
            raise ValueError("eps_tau and eps_nu must be nonnegative")

    @classmethod
    def vehicular(cls, **kw) -> "SearchRegion":
        """0..200 ns delay, +-500 Hz Doppler."""
        return cls(0.0, 200e-9, -500.0, 500.0, **kw)

    def final_resolution(self, iterations: Optional[int] = None):
        """Bin spacing of the last iteration when no window is clamped."""
        n = self.n_bisect if iterations is None else iterations
        shrink_t = (2 * self.beta / self.M) ** (n - 1)
        shrink_n = (2 * self.beta / self.N) ** (n - 1)
        return ((self.tau_max - self.tau_min) * shrink_t / self.M,
                (self.nu_max - self.nu_min) * shrink_n / self.N)


@dataclass(frozen=True)
class EstimatorOptions:
    P: int
    refine_iterations: int = 20
    gamma: Optional[float] = None
    domain: str = MATCHED
    early_stop_tol: Optional[float] = None

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be >= 1")
        if self.refine_iterations < 0:
            raise ValueError("refine_iterations must be >= 0")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.domain not in _DOMAINS:
            raise ValueError(f"domain must be one of {_DOMAINS}")


@dataclass
class EstimateSet:
    a: np.ndarray
    tau: np.ndarray
    nu: np.ndarray
    residual_energy: list = field(default_factory=list)
    refine_iters_used: int = 0
    stage: str = "initial"

    @property
    def P(self) -> int:
        return int(np.size(self.a))

    def __len__(self):
        return self.P


class Peak(NamedTuple):
    tau: float
    nu: float
    value: complex
    dtau: float
    dnu: float
    iterations: int
    densified: bool


def zero_forcing(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """``Y conj(X) / |X|`` with zeros where ``X = 0``."""
    X = np.asarray(X)
    mag = np.abs(X)
    out = np.zeros(np.shape(Y), dtype=complex)
    nz = mag > 0
    out[nz] = np.asarray(Y)[nz] * X[nz].conj() / mag[nz]
    return out


def _matched(E, X):
    E = np.asarray(E)
    if X is None:
        return E
    X = np.asarray(X)
    if X.shape != E.shape:
        raise ValueError(f"shape mismatch: {E.shape} vs {X.shape}")
    return E * X.conj()


def periodogram(cfg: OfdmConfig, E: np.ndarray, X: Optional[np.ndarray], tau, nu):
    """``psi(nu)^H (E * conj(X)) phi(tau)``; ``X=None`` skips the product
    with ``conj(X)`` (zero-forcing domain). Its squared magnitude is the 2-D
    periodogram."""
    E = np.asarray(E)
    if E.shape != (cfg.L, cfg.K):
        raise ValueError(f"grid has shape {E.shape}, expected {(cfg.L, cfg.K)}")
    B = _matched(E, X)
    tau, nu = np.broadcast_arrays(np.asarray(tau, float), np.asarray(nu, float))
    vals = np.einsum("ln,lk,kn->n", steering_doppler(cfg, nu.ravel()).conj(), B,
                     steering_delay(cfg, tau.ravel()))
    return vals[0] if tau.ndim == 0 else vals.reshape(tau.shape)


def periodogram_grid(cfg: OfdmConfig, B: np.ndarray, taus, nus) -> np.ndarray:
    """``Psi(nus)^H B Phi(taus)``; rows follow ``nus``."""
    Phi = steering_delay(cfg, taus)
    Psi = steering_doppler(cfg, nus)
    return Psi.conj().T @ (B @ Phi)


def bisection_peak(cfg: OfdmConfig, E: np.ndarray, X: Optional[np.ndarray], region: SearchRegion) -> Peak:
    """Coarse-to-fine search for the largest 2-D periodogram value in ``region``.

    Grids are ``lo + m * span / M`` for ``m = 0..M-1`` (upper edge excluded).
    Each new window spans ``+- beta`` bins around the previous argmax and is
    clamped to the original region. Ties go to the lowest ``(n, m)`` index.
    If the first-iteration spacing exceeds half the ambiguity main lobe
    (``T/(2K)``, ``1/(2 L Td)``) the first grid is densified.
    """
    B = _matched(E, X)
    if B.shape != (cfg.L, cfg.K):
        raise ValueError(f"grid has shape {B.shape}, expected {(cfg.L, cfg.K)}")
    t_lo, t_hi = region.tau_min, region.tau_max
    n_lo, n_hi = region.nu_min, region.nu_max
    M = max(region.M, math.ceil((t_hi - t_lo) / (0.5 * cfg.delay_cell)))
    N = max(region.N, math.ceil((n_hi - n_lo) / (0.5 * cfg.doppler_cell)))
    densified = (M, N) != (region.M, region.N)
    if densified:
        log.debug("bisection: first grid densified to %dx%d", M, N)
    tau_hat = nu_hat = float("nan")
    value = 0j
    for it in range(1, region.n_bisect + 1):
        dtau = (t_hi - t_lo) / M
        dnu = (n_hi - n_lo) / N
        taus = t_lo + np.arange(M) * dtau
        nus = n_lo + np.arange(N) * dnu
        ups = periodogram_grid(cfg, B, taus, nus)
        n_idx, m_idx = np.unravel_index(np.argmax(np.abs(ups) ** 2), ups.shape)
        tau_hat, nu_hat = float(taus[m_idx]), float(nus[n_idx])
        value = complex(ups[n_idx, m_idx])
        if dtau < region.eps_tau and dnu < region.eps_nu:
            break
        t_lo = max(region.tau_min, tau_hat - region.beta * dtau)
        t_hi = min(region.tau_max, tau_hat + region.beta * dtau)
        n_lo = max(region.nu_min, nu_hat - region.beta * dnu)
        n_hi = min(region.nu_max, nu_hat + region.beta * dnu)
        M, N = region.M, region.N
    return Peak(tau_hat, nu_hat, value, dtau, dnu, it, densified)


def ls_amplitudes(R: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Solve ``R a = w`` for the tap gains.

    Raises :class:`NearSingularError` when ``cond(R) > 1e12``.
    """
    R = np.asarray(R, dtype=complex)
    w = np.asarray(w, dtype=complex)
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        d = np.sqrt(np.abs(np.diag(R)))
        C = np.abs(R) / np.outer(d, d)
        np.fill_diagonal(C, -np.inf)
        i, j = np.unravel_index(np.argmax(C), C.shape)
        raise NearSingularError(cond, (int(min(i, j)), int(max(i, j))))
    return np.linalg.solve(R, w)


def reconstruct(cfg: OfdmConfig, a, taus, nus, X: Optional[np.ndarray] = None) -> np.ndarray:
    """``[Psi(nu) diag(a) Phi(tau)^H] * X``; with ``X=None`` the bare channel grid."""
    if np.size(a) == 0:
        return np.zeros((cfg.L, cfg.K), dtype=complex)
    H = synthesize(cfg, a, taus, nus)
    return H if X is None else H * X


class _Problem:
    """Observation prepared for one domain: the grid the algorithms subtract
    from, the symbol weights used for correlation/reconstruction, and the
    Gram-matrix lookup."""

    def __init__(self, cfg, Y, X, domain):
        Y = np.asarray(Y)
        X = np.asarray(X)
        if Y.shape != (cfg.L, cfg.K) or X.shape != Y.shape:
            raise ValueError(f"Y {Y.shape} and X {X.shape} must both be {(cfg.L, cfg.K)}")
        self.cfg = cfg
        if domain == MATCHED:
            self.base = Y
            self.X = X
            self.recon_weight = X
        else:
            self.base = zero_forcing(Y, X)
            self.X = None
            self.recon_weight = (np.abs(X) > 0).astype(float)
        self.lookup = AmbiguityLookup(cfg, self.recon_weight)

    def amplitudes(self, taus, nus):
        R = gram_matrix(self.cfg, None, taus, nus, lookup=self.lookup)
        w = correlation_vector(self.cfg, self.base, self.X, taus, nus)
        return ls_amplitudes(R, w)

    def residual(self, a, taus, nus):
        return self.base - reconstruct(self.cfg, a, taus, nus, self.recon_weight)


def _energy(E) -> float:
    return float(np.vdot(E, E).real)


def initial_estimate(cfg: OfdmConfig, Y, X, opts: EstimatorOptions, region: SearchRegion) -> EstimateSet:
    """Successive-cancellation estimate of ``opts.P`` taps.

    With ``opts.gamma`` set, extraction stops at the first tap whose
    re-solved gain magnitude is below ``gamma``; that tap is discarded.
    """
    prob = _Problem(cfg, Y, X, opts.domain)
    E = prob.base
    taus, nus = [], []
    a = np.zeros(0, dtype=complex)
    trace = [_energy(E)]
    for _ in range(opts.P):
        pk = bisection_peak(cfg, E, prob.X, region)
        trial_t, trial_n = taus + [pk.tau], nus + [pk.nu]
        a_new = prob.amplitudes(trial_t, trial_n)
        if opts.gamma is not None and abs(a_new[-1]) < opts.gamma:
            break
        taus, nus, a = trial_t, trial_n, a_new
        E = prob.residual(a, taus, nus)
        trace.append(_energy(E))
    return EstimateSet(a, np.array(taus, float), np.array(nus, float), trace, 0, "initial")


def refine(cfg: OfdmConfig, Y, X, initial: EstimateSet, opts: EstimatorOptions, region: SearchRegion) -> EstimateSet:
    """Parallel-cancellation refinement for ``opts.refine_iterations`` sweeps.

    Within a sweep every tap is re-located against ``Y`` minus all other
    taps at their previous-sweep values; gains are re-solved once per sweep.
    With ``opts.early_stop_tol`` set, iteration stops when ``||E||^2``
    improves by less than that fraction, and the best iterate is returned.
    """
    a = np.array(initial.a, dtype=complex)
    taus = np.array(initial.tau, float)
    nus = np.array(initial.nu, float)
    trace = list(initial.residual_energy)
    if opts.refine_iterations == 0 or a.size == 0:
        return EstimateSet(a, taus, nus, trace, 0, "refined")
    prob = _Problem(cfg, Y, X, opts.domain)
    P = a.size
    best = (a, taus, nus)
    best_res = _energy(prob.residual(a, taus, nus))
    used = 0
    for _ in range(opts.refine_iterations):
        new_t, new_n = taus.copy(), nus.copy()
        for p in range(P):
            keep = np.arange(P) != p
            E = prob.residual(a[keep], taus[keep], nus[keep])
            pk = bisection_peak(cfg, E, prob.X, region)
            new_t[p], new_n[p] = pk.tau, pk.nu
        a = prob.amplitudes(new_t, new_n)
        taus, nus = new_t, new_n
        used += 1
        res = _energy(prob.residual(a, taus, nus))
        trace.append(res)
        if opts.early_stop_tol is None:
            continue
        if res < best_res:
            improved = (best_res - res) / best_res if best_res > 0 else 0.0
            best, best_res = (a, taus, nus), res
            if improved < opts.early_stop_tol:
                break
        else:
            break
    if opts.early_stop_tol is not None:
        a, taus, nus = best
    return EstimateSet(a, taus, nus, trace, used, "refined")


def estimate(cfg: OfdmConfig, Y, X, opts: EstimatorOptions, region: SearchRegion):
    """Run both stages; returns ``(initial, refined)``."""
    init = initial_estimate(cfg, Y, X, opts, region)
    return init, refine(cfg, Y, X, init, opts, region)


def crlb_single_tap(cfg: OfdmConfig, sigma2: float, a_mag2: float):
    """Cramer-Rao bounds for one 2-D sinusoid in white noise.

    Returns ``(var[nu_hat * Td], var[tau_hat / T])`` lower bounds.
    """
    if a_mag2 <= 0:
        raise ValueError("tap power must be positive")
    K, L = cfg.K, cfg.L
    scale = sigma2 / a_mag2 / (4 * np.pi**2)
    return 6.0 / (K * L * (L**2 - 1)) * scale, 6.0 / (K * L * (K**2 - 1)) * scale


def crlb_std(cfg: OfdmConfig, sigma2: float, a_mag2: float):
    """CRLB standard deviations in physical units: ``(std_tau [s], std_nu [Hz])``."""
    var_nu, var_tau = crlb_single_tap(cfg, sigma2, a_mag2)
    return math.sqrt(var_tau) * cfg.T, math.sqrt(var_nu) / cfg.Td
