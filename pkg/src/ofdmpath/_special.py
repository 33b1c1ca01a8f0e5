import numpy as np

_SERIES_CUTOFF = 1e-8


def sinc(x):
    """Unnormalised sinc, ``sin(x)/x``, with ``sinc(0) = 1``.

    Uses ``1 - x**2/6`` for ``|x| < 1e-8``.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
    return out[()] if out.ndim == 0 else out
