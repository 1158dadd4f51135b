"""Waveguide mode grid, dispersion laws and resonator-waveguide couplings.

Internal units are ns, m and rad/ns. Decay rates enter as kappa/(2 pi) in MHz
at the configuration boundary and are converted once (see ``qlink.units``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .units import C_LIGHT, WR90_WIDTH


class LinkConfigError(ValueError):
    """Inconsistent grid / dispersion / coupling configuration."""


@dataclass(frozen=True)
class LinearDispersion:
    """omega(k) = omega0 + v_g k."""

    group_velocity: float
    omega0: float = 0.0

    def omega(self, k):
        return self.omega0 + self.group_velocity * np.asarray(k, dtype=float)

    def d1(self, k):
        return np.full_like(np.asarray(k, dtype=float), self.group_velocity)

    def d2(self, k):
        return np.zeros_like(np.asarray(k, dtype=float))


@dataclass(frozen=True)
class QuadraticDispersion:
    """Second-order expansion about ``k_center``."""

    omega_c: float
    group_velocity: float
    curvature: float
    k_center: float

    def omega(self, k):
        dk = np.asarray(k, dtype=float) - self.k_center
        return self.omega_c + self.group_velocity * dk + 0.5 * self.curvature * dk**2

    def d1(self, k):
        dk = np.asarray(k, dtype=float) - self.k_center
        return self.group_velocity + self.curvature * dk

    def d2(self, k):
        return np.full_like(np.asarray(k, dtype=float), self.curvature)


@dataclass(frozen=True)
class RectangularGuideDispersion:
    """TE10 branch of a rectangular guide: omega = c sqrt((pi/l1)^2 + k^2)."""

    c_light: float = C_LIGHT
    width: float = WR90_WIDTH

    @property
    def cutoff(self):
        return self.c_light * math.pi / self.width

    def omega(self, k):
        k = np.asarray(k, dtype=float)
        return self.c_light * np.sqrt((math.pi / self.width) ** 2 + k**2)

    def d1(self, k):
        k = np.asarray(k, dtype=float)
        return self.c_light**2 * k / self.omega(k)

    def d2(self, k):
        k = np.asarray(k, dtype=float)
        w = self.omega(k)
        return self.c_light**2 / w - self.c_light**4 * k**2 / w**3


Dispersion = Union[LinearDispersion, QuadraticDispersion, RectangularGuideDispersion]


def wavenumber_for_frequency(disp: Dispersion, omega: float, k_hi: float = 1e4) -> float:
    """Invert a monotone dispersion law for k >= 0."""
    if isinstance(disp, LinearDispersion):
        return (omega - disp.omega0) / disp.group_velocity
    if isinstance(disp, RectangularGuideDispersion):
        if omega <= disp.cutoff:
            raise LinkConfigError(f"frequency {omega} rad/ns is below the guide cutoff")
        return math.sqrt((omega / disp.c_light) ** 2 - (math.pi / disp.width) ** 2)
    if isinstance(disp, QuadraticDispersion):
        k = float(wavenumbers_for_frequencies(disp, omega))
        if not math.isfinite(k):
            raise LinkConfigError(f"frequency {omega} rad/ns lies beyond the quadratic band edge")
        return k
    f = lambda k: float(disp.omega(k)) - omega
    return brentq(f, 0.0, k_hi, xtol=1e-14)


def wavenumbers_for_frequencies(disp: Dispersion, omega) -> np.ndarray:
    """Vectorized inverse of the dispersion law; NaN where no propagating k >= 0 exists."""
    w = np.asarray(omega, dtype=float)
    if isinstance(disp, LinearDispersion):
        return (w - disp.omega0) / disp.group_velocity
    if isinstance(disp, RectangularGuideDispersion):
        arg = (w / disp.c_light) ** 2 - (math.pi / disp.width) ** 2
        with np.errstate(invalid="ignore"):
            return np.where(arg >= 0, np.sqrt(np.where(arg >= 0, arg, 0.0)), np.nan)
    dw = w - disp.omega_c
    disc = disp.group_velocity**2 + 2.0 * disp.curvature * dw
    with np.errstate(invalid="ignore"):
        root = np.sqrt(np.where(disc >= 0, disc, np.nan))
    # branch continuous with the linear solution at w = omega_c (v_g > 0),
    # rationalized so that a vanishing curvature does not cancel
    return disp.k_center + 2.0 * dw / (disp.group_velocity + root)


@dataclass(frozen=True)
class ModeGrid:
    """Consecutive standing-wave modes k_m = m pi / L, m in [m_min, m_max]."""

    length: float
    m_min: int
    m_max: int
    carrier_index: int

    def __post_init__(self):
        if self.m_min < 1 or self.m_max <= self.m_min:
            raise LinkConfigError("mode range must be 1 <= m_min < m_max")
        if not 0 < self.carrier_index < self.n_modes - 1:
            raise LinkConfigError("carrier mode must lie strictly inside the grid")

    @property
    def n_modes(self) -> int:
        return self.m_max - self.m_min + 1

    @property
    def mode_indices(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.mode_indices * math.pi / self.length

    @property
    def k_carrier(self) -> float:
        return float(self.wavenumbers[self.carrier_index])

    @property
    def m_carrier(self) -> int:
        return int(self.m_min + self.carrier_index)

    @classmethod
    def centered(cls, length: float, n_modes: int, disp: Dispersion, carrier_frequency: float):
        """``n_modes`` consecutive modes centred on the mode nearest ``carrier_frequency``."""
        if n_modes < 3:
            raise LinkConfigError("need at least 3 modes")
        k0 = wavenumber_for_frequency(disp, carrier_frequency)
        m_guess = int(round(k0 * length / math.pi))
        cands = np.arange(max(1, m_guess - 2), m_guess + 3)
        w = disp.omega(cands * math.pi / length)
        m_c = int(cands[np.argmin(np.abs(w - carrier_frequency))])
        m_min = m_c - n_modes // 2
        if m_min < 1:
            raise LinkConfigError("mode window extends below m = 1; reduce n_modes or raise the carrier")
        return cls(length, m_min, m_min + n_modes - 1, m_c - m_min)

    def free_spectral_range(self, disp: Dispersion) -> float:
        """Mode spacing at the carrier, v_g pi / L."""
        return float(group_velocity(disp, self.k_carrier)) * math.pi / self.length


def mode_frequencies(grid: ModeGrid, disp: Dispersion) -> np.ndarray:
    w = np.asarray(disp.omega(grid.wavenumbers), dtype=float)
    if np.any(w <= 0):
        raise LinkConfigError("non-positive mode frequency on the grid")
    if np.any(np.diff(w) <= 0):
        raise LinkConfigError("mode frequencies are not increasing (grid spans a band edge)")
    return w


def group_velocity(disp: Dispersion, k0: float) -> float:
    return float(disp.d1(k0))


def curvature_d2(disp: Dispersion, k0: float) -> float:
    return float(disp.d2(k0))


def nonlinear_residual(disp: Dispersion, k, k0: float):
    """omega_NL(k) = omega(k) - omega(k0) - v_g (k - k0)."""
    k = np.asarray(k, dtype=float)
    return disp.omega(k) - disp.omega(k0) - group_velocity(disp, k0) * (k - k0)


def travel_time(disp: Dispersion, k0: float, x_a: float, x_b: float) -> float:
    vg = group_velocity(disp, k0)
    if vg <= 0:
        raise LinkConfigError("cutoff carrier: zero group velocity")
    return abs(x_b - x_a) / vg


@dataclass(frozen=True)
class NodeCoupling:
    node: int
    kappa: float
    omega_r: float
    delta: float
    couplings: np.ndarray = field(repr=False)

    @property
    def lamb_shift(self) -> float:
        return self.delta - self.omega_r


@dataclass(frozen=True)
class CouplingSet:
    nodes: tuple

    def node(self, j: int) -> NodeCoupling:
        return self.nodes[j - 1]

    def with_lamb_shift(self, lamb_shift: float) -> "CouplingSet":
        """Re-tune every qubit to Omega_R + lamb_shift."""
        return CouplingSet(tuple(replace(n, delta=n.omega_r + lamb_shift) for n in self.nodes))

    def decoupled(self, j: int) -> "CouplingSet":
        """Zero the waveguide couplings of node ``j`` (single-node studies)."""
        nodes = list(self.nodes)
        n = nodes[j - 1]
        nodes[j - 1] = replace(n, couplings=np.zeros_like(n.couplings))
        return CouplingSet(tuple(nodes))


def couplings_from_kappa(grid: ModeGrid, disp: Dispersion, kappa: float, omega_r: float,
                         node: int, law: str = "sqrt_omega", lamb_shift: float = 0.0) -> NodeCoupling:
    """G_{m,j} = (-1)^{m (j-1)} sqrt(kappa v_g omega(k_m) / (2 Omega_R L)).

    ``law="flat"`` drops the omega(k_m)/Omega_R factor (constant |G|).
    """
    if kappa <= 0:
        raise LinkConfigError("kappa must be positive")
    if node not in (1, 2):
        raise LinkConfigError("node must be 1 or 2")
    vg = group_velocity(disp, grid.k_carrier)
    w = mode_frequencies(grid, disp)
    if law == "sqrt_omega":
        mag = np.sqrt(kappa * vg * w / (2.0 * omega_r * grid.length))
    elif law == "flat":
        mag = np.full(grid.n_modes, math.sqrt(kappa * vg / (2.0 * grid.length)))
    else:
        raise LinkConfigError(f"unknown coupling law {law!r}")
    sign = np.where((grid.mode_indices * (node - 1)) % 2 == 0, 1.0, -1.0)
    return NodeCoupling(node, kappa, omega_r, omega_r + lamb_shift, sign * mag)


@dataclass(frozen=True)
class Link:
    """Grid + dispersion + two-node couplings; the full physical link."""

    grid: ModeGrid
    disp: Dispersion
    couplings: CouplingSet

    @property
    def frequencies(self) -> np.ndarray:
        return mode_frequencies(self.grid, self.disp)

    @property
    def carrier_frequency(self) -> float:
        return float(self.disp.omega(self.grid.k_carrier))

    @property
    def group_velocity(self) -> float:
        return group_velocity(self.disp, self.grid.k_carrier)


def build_link(length: float, n_modes: int, disp: Dispersion, carrier_frequency: float,
               kappa, law: str = "sqrt_omega", omega_r=None) -> Link:
    """Two identical-geometry nodes at x=0 and x=L; ``kappa`` may be a pair."""
    grid = ModeGrid.centered(length, n_modes, disp, carrier_frequency)
    kap = (kappa, kappa) if np.isscalar(kappa) else tuple(kappa)
    w_r = float(disp.omega(grid.k_carrier)) if omega_r is None else omega_r
    nodes = tuple(couplings_from_kappa(grid, disp, kap[j - 1], w_r, j, law) for j in (1, 2))
    return Link(grid, disp, CouplingSet(nodes))
