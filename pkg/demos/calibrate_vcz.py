"""Derive the speckle-size constants and check them against generated speckle.

The FWHM of the intensity autocovariance, in units of lambda z / D0, is twice
the lag at which |mu|^2 falls to one half, where mu is the normalised field
coherence of the source: the Airy pattern for a disk, sinc for a slit.

    python demos/calibrate_vcz.py [--frames 200]
"""

import argparse
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import j1

from ghostsim import Grid, IntensityMap, SpeckleSourceConfig, autocorrelation_width, generate_speckle_batch
from ghostsim.speckle import DISK_FWHM_FACTOR, SLIT_FWHM_FACTOR, expected_fwhm


def airy2(r):
    return (2 * j1(math.pi * r) / (math.pi * r)) ** 2


def sinc2(r):
    return np.sinc(r) ** 2


def half_max_lag(f):
    return brentq(lambda r: f(r) - 0.5, 1e-6, 0.99, xtol=1e-15)


def measure(dims, frames, D0=10e-3):
    n = 8192 if dims == 1 else 256
    g = Grid(n, 3e-6, dims)
    cfg = SpeckleSourceConfig(D0=D0)
    maps = []
    for start in range(0, frames, 20):
        E = generate_speckle_batch(cfg, g, 1234, range(start, min(start + 20, frames)))
        maps += [IntensityMap(g, np.abs(e) ** 2) for e in E]
    return autocorrelation_width(maps), expected_fwhm(cfg, dims)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=200)
    args = ap.parse_args()

    disk = 2 * half_max_lag(airy2)
    slit = 2 * half_max_lag(sinc2)
    print(f"disk: root-found {disk:.15f}, stored {DISK_FWHM_FACTOR:.15f}, diff {disk - DISK_FWHM_FACTOR:.1e}")
    print(f"slit: root-found {slit:.15f}, stored {SLIT_FWHM_FACTOR:.15f}, diff {slit - SLIT_FWHM_FACTOR:.1e}")

    for dims, frames in ((1, args.frames), (2, max(4, args.frames // 20))):
        w, e = measure(dims, frames)
        print(f"{dims}D speckle, {frames} frames: measured FWHM {w * 1e6:.2f} um, expected {e * 1e6:.2f} um ({w / e - 1:+.1%})")


if __name__ == "__main__":
    main()
