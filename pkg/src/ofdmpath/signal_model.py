"""
Frequency-domain OFDM packet model for doubly dispersive channels.

A packet is an ``L x K`` complex grid (symbol index ``l`` along rows,
subcarrier index ``k`` along columns). The same array role is used for the
transmitted symbols ``X``, the channel coefficients ``H``, the received
symbols ``Y = H * X + Z`` and all residual grids inside the estimator.

Subcarrier indices are 1-based wherever they appear in the public API
(``null_set``), matching the usual ``k = 1..K`` convention; arrays are
stored 0-based.

Vectorisation follows column stacking: ``vec(Y) = (Y[0,0], ..., Y[L-1,0],
Y[0,1], ...)``, i.e. the symbol index runs fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np

ArrayLike = Union[float, Sequence[float], np.ndarray]

_RELTOL_TD = 1e-12


@dataclass(frozen=True)
class OfdmConfig:
    """Static OFDM system parameters.

    Parameters
    ----------
    K : int
        Number of subcarriers.
    L : int
        Number of OFDM symbols per packet.
    T : float
        Inverse subcarrier spacing (s).
    Td : float
        OFDM symbol duration including the cyclic prefix (s).
    Tcp : float
        Cyclic prefix duration (s). Must satisfy ``Td = T + Tcp``.
    null_set : frozenset of int
        1-based indices of null subcarriers.
    """

    K: int
    L: int
    T: float
    Td: float
    Tcp: float
    null_set: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        nulls = list(self.null_set)
        if len(set(nulls)) != len(nulls):
            raise ValueError("null_set contains duplicates")
        object.__setattr__(self, "null_set", frozenset(int(k) for k in nulls))
        if self.K < 2 or self.L < 2:
            raise ValueError(f"need K >= 2 and L >= 2, got K={self.K}, L={self.L}")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.Tcp < 0:
            raise ValueError("Tcp must be nonnegative")
        if abs(self.Td - (self.T + self.Tcp)) > _RELTOL_TD * self.Td:
            raise ValueError(
                f"Td={self.Td!r} does not equal T + Tcp = {self.T + self.Tcp!r}"
            )
        bad = [k for k in self.null_set if not 1 <= k <= self.K]
        if bad:
            raise ValueError(f"null subcarrier indices out of range 1..{self.K}: {bad}")

    @classmethod
    def from_durations(cls, K, L, T, Tcp, null_set=()):
        return cls(K=K, L=L, T=T, Td=T + Tcp, Tcp=Tcp, null_set=frozenset(null_set))

    @property
    def n_active(self) -> int:
        """Number of non-null subcarriers, ``K - |null_set|``."""
        return self.K - len(self.null_set)

    @property
    def subcarrier_offsets(self) -> np.ndarray:
        """Baseband frequency index ``k - 1 - floor(K/2)`` for ``k = 1..K``."""
        return np.arange(self.K) - self.K // 2

    @property
    def active_mask(self) -> np.ndarray:
        mask = np.ones(self.K, dtype=bool)
        for k in self.null_set:
            mask[k - 1] = False
        return mask

    @property
    def delay_cell(self) -> float:
        """Delay resolution cell ``T/K`` (s)."""
        return self.T / self.K

    @property
    def doppler_cell(self) -> float:
        """Doppler resolution cell ``1/(L Td)`` (Hz)."""
        return 1.0 / (self.L * self.Td)

    def with_L(self, L: int) -> "OfdmConfig":
        return OfdmConfig(self.K, L, self.T, self.Td, self.Tcp, self.null_set)


def ieee80211(L: int, dc_null: bool = True) -> OfdmConfig:
    """802.11a/p-like preset: 52 subcarriers, T = 6.4 us, Td = 8 us.

    The DC subcarrier ``k = floor(K/2) + 1`` is nulled by default. The
    standard itself has 53 subcarrier slots including DC; here ``K = 52`` with
    one of them nulled, which is the layout of the reference figures.
    """
    K = 52
    nulls = {K // 2 + 1} if dc_null else set()
    return OfdmConfig.from_durations(K=K, L=L, T=6.4e-6, Tcp=1.6e-6, null_set=nulls)


@dataclass(frozen=True)
class MultipathChannel:
    """A set of ``P`` taps with complex gain ``a``, delay ``tau`` (s) and
    Doppler offset ``nu`` (Hz)."""

    a: np.ndarray
    tau: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=complex)).copy()
        tau = np.atleast_1d(np.asarray(self.tau, dtype=float)).copy()
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float)).copy()
        if not (a.ndim == tau.ndim == nu.ndim == 1 and a.size == tau.size == nu.size):
            raise ValueError("a, tau and nu must be 1-D arrays of equal length")
        if a.size < 1:
            raise ValueError("a channel needs at least one tap")
        if np.any(tau < 0):
            raise ValueError("delays must be nonnegative")
        for arr in (a, tau, nu):
            arr.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "nu", nu)

    @classmethod
    def from_taps(cls, taps: Iterable[tuple]) -> "MultipathChannel":
        a, tau, nu = zip(*taps)
        return cls(np.array(a), np.array(tau), np.array(nu))

    @property
    def P(self) -> int:
        return self.a.size

    def model_warnings(self, cfg: OfdmConfig) -> list:
        """Violations of the no-ISI/ICI assumptions (delay inside the cyclic
        prefix, Doppler below the subcarrier spacing). Empty if the
        frequency-domain model is expected to hold."""
        out = []
        if self.tau.max() >= cfg.Tcp:
            out.append(f"max delay {self.tau.max():.4g} s reaches the cyclic prefix {cfg.Tcp:.4g} s")
        if np.abs(self.nu).max() >= 1.0 / cfg.T:
            out.append(f"max |Doppler| {np.abs(self.nu).max():.4g} Hz reaches 1/T")
        return out


@dataclass(frozen=True)
class NoiseSpec:
    """Per-entry complex noise variance tied to the packet SNR,
    ``sigma2 = (K - |null_set|) / snr``."""

    sigma2: float
    snr: float
    seed: Optional[int] = None

    @classmethod
    def from_snr(cls, cfg: OfdmConfig, snr: float, seed=None) -> "NoiseSpec":
        if snr <= 0:
            raise ValueError("snr must be positive")
        sigma2 = 0.0 if math.isinf(snr) else cfg.n_active / snr
        return cls(sigma2=sigma2, snr=snr, seed=seed)

    @classmethod
    def from_snr_db(cls, cfg: OfdmConfig, snr_db: float, seed=None) -> "NoiseSpec":
        return cls.from_snr(cfg, 10.0 ** (snr_db / 10.0), seed)

    @classmethod
    def noiseless(cls) -> "NoiseSpec":
        return cls(sigma2=0.0, snr=math.inf, seed=None)


def generate_symbols(cfg: OfdmConfig, constellation: str = "ones", order: int = 4, seed=None) -> np.ndarray:
    """Transmit grid ``X`` (``L x K``) with zeros on the null subcarriers.

    ``constellation="ones"`` sets every active entry to 1; ``"psk"`` draws
    i.i.d. uniform ``order``-PSK points ``exp(j 2 pi m / order)``.
    """
    X = np.zeros((cfg.L, cfg.K), dtype=complex)
    mask = cfg.active_mask
    if constellation == "ones":
        X[:, mask] = 1.0
    elif constellation == "psk":
        if order < 2:
            raise ValueError("PSK order must be >= 2")
        rng = np.random.default_rng(seed)
        m = rng.integers(0, order, size=(cfg.L, int(mask.sum())))
        X[:, mask] = np.exp(2j * np.pi * m / order)
    else:
        raise ValueError(f"unknown constellation {constellation!r}")
    return X


def steering_doppler(cfg: OfdmConfig, nu: ArrayLike) -> np.ndarray:
    """Doppler steering vector ``psi_l(nu) = exp(-j 2 pi (l-1) nu Td)``.

    Scalar ``nu`` gives a length-``L`` vector; a vector of ``N`` Dopplers gives
    an ``L x N`` matrix with one steering vector per column.
    """
    nu = np.asarray(nu, dtype=float)
    l = np.arange(cfg.L).reshape((-1,) + (1,) * nu.ndim)
    return np.exp(-2j * np.pi * cfg.Td * l * nu)


def steering_delay(cfg: OfdmConfig, tau: ArrayLike) -> np.ndarray:
    """Delay steering vector ``phi_k(tau) = exp(+j 2 pi (k-1-floor(K/2)) tau / T)``.

    Shape conventions as in :func:`steering_doppler` (``K`` rows).
    """
    tau = np.asarray(tau, dtype=float)
    c = cfg.subcarrier_offsets.reshape((-1,) + (1,) * tau.ndim)
    return np.exp(2j * np.pi * c * (tau / cfg.T))


def synthesize(cfg: OfdmConfig, a, tau, nu) -> np.ndarray:
    """``Psi(nu) diag(a) Phi(tau)^H`` for parameter arrays of length ``P``."""
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    Psi = steering_doppler(cfg, np.atleast_1d(nu))
    Phi = steering_delay(cfg, np.atleast_1d(tau))
    return (Psi * a) @ Phi.conj().T


def channel_coeffs(cfg: OfdmConfig, chan: MultipathChannel, method: str = "matrix") -> np.ndarray:
    """Frequency-domain channel grid ``H`` (``L x K``).

    ``method="matrix"`` uses the factorisation ``Psi(nu) diag(a) Phi^H(tau)``;
    ``method="direct"`` evaluates the tap sum entry by entry and serves as a
    cross-check.
    """
    if method == "matrix":
        return synthesize(cfg, chan.a, chan.tau, chan.nu)
    if method == "direct":
        l = np.arange(cfg.L)[:, None]
        c = cfg.subcarrier_offsets[None, :]
        H = np.zeros((cfg.L, cfg.K), dtype=complex)
        for a, tau, nu in zip(chan.a, chan.tau, chan.nu):
            H += a * np.exp(-2j * np.pi * nu * cfg.Td * l) * np.exp(-2j * np.pi * c * tau / cfg.T)
        return H
    raise ValueError(f"unknown method {method!r}")


def complex_noise(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Circular complex Gaussian samples with ``E|z|^2 = sigma2``."""
    s = math.sqrt(sigma2 / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(X: np.ndarray, H: np.ndarray, noise: NoiseSpec) -> np.ndarray:
    """Received grid ``Y = H * X + Z`` (Hadamard product plus AWGN)."""
    X = np.asarray(X)
    H = np.asarray(H)
    if X.shape != H.shape:
        raise ValueError(f"shape mismatch: X {X.shape} vs H {H.shape}")
    Y = H * X
    if noise.sigma2 > 0:
        rng = np.random.default_rng(noise.seed)
        Y = Y + complex_noise(Y.shape, noise.sigma2, rng)
    return Y


def vec(G: np.ndarray) -> np.ndarray:
    """Column-stacking vectorisation (symbol index fastest)."""
    return np.asarray(G).ravel(order="F")


def unvec(v: np.ndarray, L: int, K: int) -> np.ndarray:
    return np.asarray(v).reshape((L, K), order="F")


def omega_matrix(cfg: OfdmConfig, X: np.ndarray, taus, nus) -> np.ndarray:
    """``KL x P`` model matrix with ``vec(Y) = Omega a + vec(Z)``.

    Column ``p`` is ``vec(X * psi(nu_p) phi(tau_p)^H)``.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    if taus.size < 1 or taus.shape != nus.shape:
        raise ValueError("taus and nus must be nonempty and of equal length")
    Psi = steering_doppler(cfg, nus)  # L x P
    Phi = steering_delay(cfg, taus)  # K x P
    cols = np.asarray(X)[:, :, None] * Psi[:, None, :] * Phi.conj()[None, :, :]
    return cols.reshape(cfg.L * cfg.K, -1, order="F")
