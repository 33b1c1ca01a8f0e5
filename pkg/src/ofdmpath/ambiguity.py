"""
Transmit ambiguity function of an OFDM packet.

Four evaluations are provided:

* :func:`ambiguity_exact` -- the full quadruple sum over symbol/subcarrier
  pairs using the rectangular window's ambiguity function. Reference scale
  only.
* :func:`ambiguity_approx` -- the ISI/ICI-free form
  ``(1/KL) sum_{l,k} |X_lk|^2 exp(-j 2 pi (l-1) nu Td) exp(j 2 pi c_k tau / T)``.
  This is exact for Gram matrices of the frequency-domain model.
* :func:`ambiguity_psk_closed` / :func:`ambiguity_psk_null_dc` -- the sinc
  approximations for unit-modulus symbols without / with a DC null.
  These replace Dirichlet kernels by sincs and drop a linear phase, so they
  match :func:`ambiguity_approx` only in magnitude and only near the origin.
  :func:`ambiguity_uniform` is the exact geometric-sum form.

The estimator's Gram matrix ``R = Omega^H Omega`` and correlation vector
``w = Omega^H y`` are assembled here from ambiguity values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._special import sinc
from .signal_model import OfdmConfig, steering_delay, steering_doppler
from .waveform import rect_window_ambiguity

EXACT_MAX_KL = 4096


class ReferenceOnlyError(ValueError):
    """Raised when a reference-only evaluation is asked for a large instance."""


def _dirichlet(x, n):
    """``sum_{m=0}^{n-1} exp(j m x)``, stable at ``x = 2 pi k``."""
    x = np.asarray(x, dtype=float)
    half = x / 2.0
    s = np.sin(half)
    m = np.round(x / (2 * np.pi))
    near = np.abs(x - 2 * np.pi * m) < 1e-9
    ratio = np.where(near, n * np.where((m * (n - 1)) % 2 == 0, 1.0, -1.0),
                     np.sin(n * half) / np.where(near, 1.0, s))
    # at the singular points the phase factor below times the sign above is 1
    return np.exp(1j * (n - 1) * half) * ratio


def ambiguity_uniform(cfg: OfdmConfig, tau, nu):
    """Exact closed form of :func:`ambiguity_approx` when ``|X_lk| = 1`` on
    every subcarrier (product of two Dirichlet kernels)."""
    tau, nu = np.broadcast_arrays(np.asarray(tau, float), np.asarray(nu, float))
    delay = np.exp(-2j * np.pi * (cfg.K // 2) * tau / cfg.T) * _dirichlet(2 * np.pi * tau / cfg.T, cfg.K)
    doppler = _dirichlet(-2 * np.pi * nu * cfg.Td, cfg.L)
    out = delay * doppler / (cfg.K * cfg.L)
    return out[()] if out.ndim == 0 else out


def ambiguity_approx(cfg: OfdmConfig, X: np.ndarray, tau, nu):
    """Ambiguity function with ISI/ICI terms dropped (see module docstring).

    ``tau`` and ``nu`` broadcast against each other; the result has their
    broadcast shape.
    """
    power = np.abs(np.asarray(X)) ** 2
    tau, nu = np.broadcast_arrays(np.asarray(tau, float), np.asarray(nu, float))
    Psi = steering_doppler(cfg, nu.ravel())
    Phi = steering_delay(cfg, tau.ravel())
    vals = np.einsum("ln,lk,kn->n", Psi, power, Phi) / (cfg.K * cfg.L)
    return vals.reshape(tau.shape)[()] if tau.ndim == 0 else vals.reshape(tau.shape)


def ambiguity_surface(cfg: OfdmConfig, X: np.ndarray, taus, nus) -> np.ndarray:
    """:func:`ambiguity_approx` on the outer grid; rows follow ``nus``."""
    power = np.abs(np.asarray(X)) ** 2
    Psi = steering_doppler(cfg, np.asarray(nus, float))
    Phi = steering_delay(cfg, np.asarray(taus, float))
    return Psi.T @ power @ Phi / (cfg.K * cfg.L)


def ambiguity_psk_closed(cfg: OfdmConfig, tau, nu):
    """``exp(-j pi K tau/T) sinc(pi K tau/T) sinc(pi L nu Td)``."""
    tau = np.asarray(tau, float)
    nu = np.asarray(nu, float)
    x = tau / cfg.T
    return np.exp(-1j * np.pi * cfg.K * x) * sinc(np.pi * cfg.K * x) * sinc(np.pi * cfg.L * nu * cfg.Td)


def ambiguity_psk_null_dc(cfg: OfdmConfig, tau, nu):
    """``exp(-j pi K tau/T) cos(pi (K/2 + 1) tau/T) sinc(pi tau K/(2T)) sinc(pi nu Td L)``.

    Evaluated as written; it does not coincide with the ISI/ICI-free sum for
    a DC-nulled grid (that sum is ``(K-1)/K`` at the origin, this is 1).
    """
    tau = np.asarray(tau, float)
    nu = np.asarray(nu, float)
    x = tau / cfg.T
    K = cfg.K
    return (
        np.exp(-1j * np.pi * K * x)
        * np.cos(np.pi * (K / 2 + 1) * x)
        * sinc(np.pi * x * K / 2)
        * sinc(np.pi * nu * cfg.Td * cfg.L)
    )


def ambiguity_exact(cfg: OfdmConfig, X: np.ndarray, tau: float, nu: float) -> complex:
    """Full ambiguity function of the continuous-time packet.

    Direct summation over ``(l, k, l', k')`` with the rectangular window's
    ambiguity function; symbol pairs whose windows do not overlap at this
    delay are skipped. Raises :class:`ReferenceOnlyError` for ``K L > 4096``.
    """
    if cfg.K * cfg.L > EXACT_MAX_KL:
        raise ReferenceOnlyError(
            f"ambiguity_exact is reference-only (K*L={cfg.K * cfg.L} > {EXACT_MAX_KL})"
        )
    X = np.asarray(X)
    K, L, T, Td = cfg.K, cfg.L, cfg.T, cfg.Td
    k = np.arange(K)
    dk = k[:, None] - k[None, :]  # k - k'
    # terms independent of l, l'
    base = np.exp(-2j * np.pi * dk * cfg.Tcp / T) * np.exp(2j * np.pi * k[None, :] * tau / T)
    total = 0.0 + 0.0j
    for l in range(L):
        sym_phase = np.exp(-2j * np.pi * Td * l * (nu - dk / T))
        for lp in range(L):
            shift = tau + (lp - l) * Td
            if abs(shift) >= Td:
                continue
            Aw = rect_window_ambiguity(cfg, shift, nu - dk / T)
            XX = np.outer(X[l], X[lp].conj())
            total += np.sum(XX * base * sym_phase * Aw)
    return complex(np.exp(-2j * np.pi * (K // 2) * tau / T) * total / (K * L))


@dataclass(frozen=True)
class AmbiguityGrid:
    """Sampled ambiguity surface; ``values[i, j]`` is at ``(tau_axis[j], nu_axis[i])``."""

    tau_axis: np.ndarray
    nu_axis: np.ndarray
    values: np.ndarray

    def rows(self):
        for i, nu in enumerate(self.nu_axis):
            for j, tau in enumerate(self.tau_axis):
                v = self.values[i, j]
                yield (tau, nu, v.real, v.imag, abs(v))


def ambiguity_grid(cfg: OfdmConfig, X: np.ndarray, taus, nus, formula: str = "approx") -> AmbiguityGrid:
    taus = np.asarray(taus, float)
    nus = np.asarray(nus, float)
    if formula == "approx":
        values = ambiguity_surface(cfg, X, taus, nus)
    elif formula == "psk":
        values = ambiguity_psk_closed(cfg, taus[None, :], nus[:, None])
    elif formula == "psk_null_dc":
        values = ambiguity_psk_null_dc(cfg, taus[None, :], nus[:, None])
    else:
        raise ValueError(f"unknown formula {formula!r}")
    return AmbiguityGrid(taus, nus, np.asarray(values, dtype=complex))


class AmbiguityLookup:
    """Memoised ``A(dtau, dnu)`` for one symbol-energy profile ``|X|^2``.

    Uniform profiles use :func:`ambiguity_uniform`; profiles whose rows are
    identical (e.g. all-ones with null subcarriers) use a separable sum;
    anything else falls back to the full double sum.
    """

    def __init__(self, cfg: OfdmConfig, X: np.ndarray):
        self.cfg = cfg
        power = np.abs(np.asarray(X)) ** 2
        if power.shape != (cfg.L, cfg.K):
            raise ValueError(f"profile has shape {power.shape}, expected {(cfg.L, cfg.K)}")
        self._power = power
        if np.all(power == 1.0):
            self.kind = "uniform"
        elif np.all(power == power[0]):
            self.kind = "separable"
            self._row = power[0]
        else:
            self.kind = "general"
        self._cache = {}

    def __call__(self, dtau: float, dnu: float) -> complex:
        key = (float(dtau), float(dnu))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        cfg = self.cfg
        if self.kind == "uniform":
            val = complex(ambiguity_uniform(cfg, dtau, dnu))
        elif self.kind == "separable":
            doppler = _dirichlet(-2 * np.pi * dnu * cfg.Td, cfg.L)
            delay = self._row @ steering_delay(cfg, dtau)
            val = complex(doppler * delay / (cfg.K * cfg.L))
        else:
            val = complex(steering_doppler(cfg, dnu) @ self._power @ steering_delay(cfg, dtau)) / (cfg.K * cfg.L)
        self._cache[key] = val
        return val


def gram_matrix(cfg: OfdmConfig, X: np.ndarray, taus, nus, lookup: AmbiguityLookup = None) -> np.ndarray:
    """``R_ij = K L A(tau_i - tau_j, nu_j - nu_i)``, equal to ``Omega^H Omega``.

    Only ``|X|^2`` enters. Pass a shared ``lookup`` to reuse cached values
    across calls with the same symbol grid.
    """
    taus = np.atleast_1d(np.asarray(taus, float))
    nus = np.atleast_1d(np.asarray(nus, float))
    if lookup is None:
        lookup = AmbiguityLookup(cfg, X)
    P = taus.size
    KL = cfg.K * cfg.L
    R = np.empty((P, P), dtype=complex)
    for i in range(P):
        R[i, i] = KL * lookup(0.0, 0.0).real
        for j in range(i + 1, P):
            R[i, j] = KL * lookup(taus[i] - taus[j], nus[j] - nus[i])
            R[j, i] = np.conj(R[i, j])
    return R


def correlation_vector(cfg: OfdmConfig, Y: np.ndarray, X: np.ndarray, taus, nus) -> np.ndarray:
    """``w_i = psi(nu_i)^H (Y * conj(X)) phi(tau_i)``, equal to ``Omega^H vec(Y)``.

    Pass ``X=None`` to correlate ``Y`` directly (zero-forcing domain).
    """
    Y = np.asarray(Y)
    if Y.shape != (cfg.L, cfg.K):
        raise ValueError(f"grid has shape {Y.shape}, expected {(cfg.L, cfg.K)}")
    B = Y if X is None else _match(Y, X)
    Psi = steering_doppler(cfg, np.atleast_1d(nus))
    Phi = steering_delay(cfg, np.atleast_1d(taus))
    return np.einsum("lp,lk,kp->p", Psi.conj(), B, Phi)


def _match(Y, X):
    X = np.asarray(X)
    if X.shape != Y.shape:
        raise ValueError(f"shape mismatch: {Y.shape} vs {X.shape}")
    return Y * X.conj()
