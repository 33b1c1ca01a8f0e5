"""
Oversampled continuous-time reference for the OFDM link.

Used only to check the frequency-domain model: a packet is synthesised in
continuous time (rectangular window, cyclic prefix), passed through a
multipath channel with per-tap delay and Doppler, and matched filtered
symbol by symbol. Integrals use the midpoint rule on a grid of
``oversample`` samples per ``T/K`` interval; sample ``n`` sits at
``t = (n + 1/2) dt``.

Delays are applied as whole-sample shifts, so test delays should be
multiples of ``dt``. Transmit and receive filters are taken as ideal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._special import sinc
from .signal_model import MultipathChannel, NoiseSpec, OfdmConfig, complex_noise

MAX_SAMPLES = 2**24


class SampleBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class WaveformConfig:
    oversample: int = 16
    window: str = "rect"
    filter: str = "ideal"

    def __post_init__(self):
        if self.oversample < 4:
            raise ValueError("oversample must be >= 4")
        if self.window != "rect":
            raise ValueError("only the rectangular window is supported")
        if self.filter != "ideal":
            raise ValueError("only ideal filters are supported")


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    dt: float

    @property
    def t(self) -> np.ndarray:
        return (np.arange(self.samples.size) + 0.5) * self.dt

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.dt)


def _grid(cfg: OfdmConfig, wcfg: WaveformConfig):
    """Sample spacing and per-symbol / per-CP sample counts."""
    n_T = cfg.K * wcfg.oversample
    dt = cfg.T / n_T
    n_cp_f = cfg.Tcp / dt
    n_cp = int(round(n_cp_f))
    if abs(n_cp - n_cp_f) > 1e-6:
        raise ValueError(
            f"cyclic prefix {cfg.Tcp:g} s is not a whole number of samples (dt={dt:g} s)"
        )
    total = cfg.L * (n_T + n_cp)
    if total > MAX_SAMPLES:
        raise SampleBudgetError(f"{total} samples exceeds the reference budget {MAX_SAMPLES}")
    return dt, n_T, n_cp


def synth_tx(cfg: OfdmConfig, X: np.ndarray, wcfg: WaveformConfig = WaveformConfig()) -> Waveform:
    """Sampled transmit signal.

    Symbol ``l`` occupies ``[(l-1) Td, l Td)`` and carries
    ``sum_k X[l,k] exp(j 2 pi c_k (t - Tcp)/T) / sqrt(K L Td)`` where
    ``c_k = k - 1 - floor(K/2)``. The phase reference ``t - Tcp`` is global,
    so the first ``Tcp`` of each symbol repeats its last ``Tcp``.
    """
    X = np.asarray(X)
    if X.shape != (cfg.L, cfg.K):
        raise ValueError(f"X has shape {X.shape}, expected {(cfg.L, cfg.K)}")
    dt, n_T, n_cp = _grid(cfg, wcfg)
    n_sym = n_T + n_cp
    t = (np.arange(cfg.L * n_sym) + 0.5) * dt
    c = cfg.subcarrier_offsets
    out = np.empty(t.size, dtype=complex)
    norm = 1.0 / np.sqrt(cfg.K * cfg.L * cfg.Td)
    for l in range(cfg.L):
        seg = slice(l * n_sym, (l + 1) * n_sym)
        E = np.exp(2j * np.pi * np.outer(t[seg] - cfg.Tcp, c) / cfg.T)
        out[seg] = norm * (E @ X[l])
    return Waveform(out, dt)


def apply_ct_channel(
    wave: Waveform,
    chan: MultipathChannel,
    cfg: OfdmConfig,
    noise: NoiseSpec = None,
) -> Waveform:
    """``y(t) = sum_p a_p exp(-j 2 pi nu_p t) x(t - tau_p) + z(t)``.

    ``tau_p`` is rounded to the nearest sample. If ``noise`` is given, white
    noise is added at the level that yields per-entry variance
    ``noise.sigma2`` after :func:`matched_filter`.
    """
    x = wave.samples
    t = wave.t
    y = np.zeros_like(x)
    for a, tau, nu in zip(chan.a, chan.tau, chan.nu):
        d = int(round(tau / wave.dt))
        if d >= x.size:
            raise SampleBudgetError(f"delay {tau:g} s lies beyond the sampled packet")
        shifted = np.zeros_like(x)
        shifted[d:] = x[: x.size - d]
        y += a * np.exp(-2j * np.pi * nu * t) * shifted
    if noise is not None and noise.sigma2 > 0:
        s2 = noise.sigma2 * cfg.T / (cfg.K * cfg.L * cfg.Td * wave.dt)
        y = y + complex_noise(y.shape, s2, np.random.default_rng(noise.seed))
    return Waveform(y, wave.dt)


def matched_filter(wave: Waveform, cfg: OfdmConfig, wcfg: WaveformConfig = WaveformConfig()) -> np.ndarray:
    """Per-symbol correlation with each subcarrier after discarding the CP.

    Output is scaled by ``K L Td / T``, the inverse of the loopback gain
    ``|A_w(0,0)| / (K L)``, so an ideal channel returns ``X`` itself.
    """
    dt, n_T, n_cp = _grid(cfg, wcfg)
    if abs(dt - wave.dt) > 1e-12 * dt:
        raise ValueError("waveform sample spacing does not match the configuration")
    n_sym = n_T + n_cp
    y = wave.samples
    t = wave.t
    c = cfg.subcarrier_offsets
    scale = np.sqrt(cfg.K * cfg.L * cfg.Td) / cfg.T * dt
    Y = np.empty((cfg.L, cfg.K), dtype=complex)
    for l in range(cfg.L):
        seg = slice(l * n_sym + n_cp, (l + 1) * n_sym)
        E = np.exp(-2j * np.pi * np.outer(c, t[seg] - cfg.Tcp) / cfg.T)
        Y[l] = scale * (E @ y[seg])
    return Y


def _rect_overlap(lo, hi, nu, Td):
    # (1/Td) * integral_lo^hi exp(-j 2 pi nu t) dt, zero for empty intervals
    width = np.maximum(hi - lo, 0.0)
    return (width / Td) * np.exp(-1j * np.pi * nu * (lo + hi)) * sinc(np.pi * nu * width)


def window_ambiguity(cfg: OfdmConfig, tau, nu):
    """``integral_{Tcp}^{Td} w(t - tau) w*(t) exp(-j 2 pi nu t) dt`` for the
    rectangular window ``w = 1/sqrt(Td)`` on ``[0, Td]``.

    This is the receiver-side quantity (the CP is excluded by the
    integration limits); its value at the origin is ``T/Td``.
    """
    tau, nu = np.broadcast_arrays(np.asarray(tau, float), np.asarray(nu, float))
    lo = np.maximum(cfg.Tcp, tau)
    hi = np.minimum(cfg.Td, tau + cfg.Td)
    out = _rect_overlap(lo, hi, nu, cfg.Td)
    return out[()] if out.ndim == 0 else out


def rect_window_ambiguity(cfg: OfdmConfig, tau, nu):
    """Ambiguity function ``integral w(t) w*(t - tau) exp(-j 2 pi nu t) dt`` of
    the full rectangular window (unit energy, so 1 at the origin)."""
    tau, nu = np.broadcast_arrays(np.asarray(tau, float), np.asarray(nu, float))
    lo = np.maximum(0.0, tau)
    hi = np.minimum(cfg.Td, cfg.Td + tau)
    out = _rect_overlap(lo, hi, nu, cfg.Td)
    return out[()] if out.ndim == 0 else out


def model_residual(Y: np.ndarray, HX: np.ndarray):
    """Fit ``Y ~ c * HX`` by least squares over one complex scalar ``c``.

    Returns ``(c, relative Frobenius residual)``.
    """
    HX = np.asarray(HX)
    c = np.vdot(HX, Y) / np.vdot(HX, HX)
    return c, float(np.linalg.norm(Y - c * HX) / np.linalg.norm(HX))


def matched_filter_single_tap(cfg: OfdmConfig, X: np.ndarray, a: complex, tau: float, nu: float) -> np.ndarray:
    """Continuous-time matched-filter output for one tap with ``0 <= tau <= Tcp``,
    in closed form (ICI included, same scaling as :func:`matched_filter`).

    Reference for the discretisation error of the sampled path.
    """
    if not 0 <= tau <= cfg.Tcp:
        raise ValueError("closed form requires 0 <= tau <= Tcp")
    X = np.asarray(X)
    l = np.arange(cfg.L)[:, None, None]
    k = np.arange(cfg.K)
    dk = k[None, None, :] - k[None, :, None]  # [., k, k'] -> k' - k
    f = dk - nu * cfg.T
    kern = (
        np.exp(-2j * np.pi * nu * (l * cfg.Td + cfg.Tcp))
        * np.exp(2j * np.pi * dk * l * cfg.Td / cfg.T)
        * np.exp(1j * np.pi * f)
        * sinc(np.pi * f)
    )
    src = X * np.exp(-2j * np.pi * cfg.subcarrier_offsets * tau / cfg.T)[None, :]
    return a * np.einsum("lkj,lj->lk", kern, src)
