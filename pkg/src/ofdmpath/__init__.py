"""Delay/Doppler estimation of multipath taps from OFDM packets."""

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
    ieee80211,
    omega_matrix,
    steering_delay,
    steering_doppler,
)

__version__ = "0.1.0"
