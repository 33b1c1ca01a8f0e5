"""CSV serialisation with atomic writes; floats carry 12 significant digits."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np

AMBIGUITY_HEADER = ["tau_sec", "nu_hz", "re", "im", "abs"]
ESTIMATE_HEADER = ["p", "re_a", "im_a", "abs_a_db", "tau_ns", "nu_hz", "stage"]
TRIALSTATS_HEADER = [
    "snr_db", "tap_index", "rms_tau_ns", "rms_nu_hz", "rms_gain",
    "crlb_std_tau_ns", "crlb_std_nu_hz", "miss_rate", "n_detected",
]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return "%.12g" % float(x)


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory and rename it into
    place, so a failure never leaves a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write_text(path, csv_text(header, list(rows)))


def write_ambiguity_csv(path, grid) -> None:
    write_csv(path, AMBIGUITY_HEADER, grid.rows())


def estimate_rows(est):
    for p in range(est.P):
        a = complex(est.a[p])
        db = 20 * np.log10(abs(a)) if a != 0 else -np.inf
        yield (p + 1, a.real, a.imag, db, est.tau[p] * 1e9, est.nu[p], est.stage)


def write_estimates_csv(path, *sets) -> None:
    rows = [r for est in sets for r in estimate_rows(est)]
    write_csv(path, ESTIMATE_HEADER, rows)


def trialstats_rows(stats):
    """One row per (SNR, tap); nothing for an empty sweep."""
    if stats.n_trials == 0:
        return
    for s, snr in enumerate(stats.snr_db):
        for p in range(stats.P):
            yield (
                snr, p + 1,
                stats.rms_tau[s, p] * 1e9, stats.rms_nu[s, p], stats.rms_gain[s, p],
                stats.crlb_std_tau[s, p] * 1e9, stats.crlb_std_nu[s, p],
                stats.miss_rate[s], stats.n_detected[s],
            )


def write_trialstats_csv(path, stats) -> None:
    write_csv(path, TRIALSTATS_HEADER, trialstats_rows(stats))


def read_grid_csv(path, L: int, K: int) -> np.ndarray:
    """Read an ``L x K`` complex grid stored as ``L`` rows of ``2K`` numbers
    (``re_1, im_1, ..., re_K, im_K``). No header."""
    rows = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2 * K:
                raise ValueError(f"{path}: row {i + 1} has {len(row)} columns, expected {2 * K}")
            rows.append([float(c) for c in row])
    if len(rows) != L:
        raise ValueError(f"{path}: {len(rows)} rows, expected {L}")
    arr = np.array(rows)
    return arr[:, 0::2] + 1j * arr[:, 1::2]


def grid_csv_text(G: np.ndarray) -> str:
    G = np.asarray(G)
    inter = np.empty((G.shape[0], 2 * G.shape[1]))
    inter[:, 0::2] = G.real
    inter[:, 1::2] = G.imag
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    for row in inter:
        wr.writerow([fmt(v) for v in row])
    return buf.getvalue()
