"""Ambiguity-function magnitude surfaces for the 802.11 preset at L=90 and L=242.

    python scripts/ambiguity_surfaces.py [--out DIR] [--formula approx|psk|psk_null_dc]

Writes one CSV per L and prints the first Doppler null and the delay dip.
"""

import argparse
from dataclasses import replace
from pathlib import Path

import numpy as np

from ofdmpath.ambiguity import ambiguity_approx
from ofdmpath.cli import cmd_ambiguity
from ofdmpath.config import AmbiguityConfig, OutputConfig, RunConfig
from ofdmpath.signal_model import generate_symbols, ieee80211


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/ambiguity"))
    ap.add_argument("--formula", default="approx", choices=["approx", "psk", "psk_null_dc"])
    ap.add_argument("--n", type=int, default=161, help="grid points per axis")
    args = ap.parse_args()

    amb = replace(AmbiguityConfig(), n_tau=args.n, n_nu=args.n, formula=args.formula)
    for L in (90, 242):
        ofdm = ieee80211(L)
        run = RunConfig(ofdm=ofdm, ambiguity=amb, output=OutputConfig(str(args.out)))
        path = cmd_ambiguity(run)
        X = generate_symbols(ofdm)
        nu0 = 1 / (L * ofdm.Td)
        dip = abs(ambiguity_approx(ofdm, X, ofdm.T / ofdm.K, 0.0))
        print(f"L={L:3d}  {path}  Doppler null {nu0:7.1f} Hz "
              f"(|A|={abs(ambiguity_approx(ofdm, X, 0.0, nu0)):.1e})  "
              f"|A(T/K, 0)|={dip:.4f}  |A(0,0)|={abs(ambiguity_approx(ofdm, X, 0.0, 0.0)):.4f}")


if __name__ == "__main__":
    np.set_printoptions(precision=4)
    main()
