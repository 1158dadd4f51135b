"""Unit conventions: ns, m, rad/ns. Rates are entered as f/(2 pi) in MHz."""

import math

TWO_PI = 2.0 * math.pi
C_LIGHT = 0.299792458  # m/ns
WR90_WIDTH = 0.02286  # m


def mhz_to_rad_ns(f_mhz):
    """kappa/(2 pi) in MHz -> kappa in rad/ns."""
    return TWO_PI * f_mhz * 1e-3


def rad_ns_to_mhz(w):
    return w / TWO_PI * 1e3


def ghz_to_rad_ns(f_ghz):
    return TWO_PI * f_ghz
