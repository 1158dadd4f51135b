"""Photon wavepackets on the mode grid: targets, predistortion, fields, overlaps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .linkmodel import (Dispersion, ModeGrid, curvature_d2, group_velocity,
                        mode_frequencies, nonlinear_residual, wavenumber_for_frequency,
                        wavenumbers_for_frequencies)

EDGE_GUARD = 1e-6


class PhotonTooBroadband(ValueError):
    """Spectral amplitudes do not decay before the grid edges."""


@dataclass(frozen=True)
class SpectralWavepacket:
    """Normalized amplitudes psi_k over the grid, in the frame rotating at ``frame_frequency``.

    ``center_frequency`` is the photon carrier; ``k_center`` the (continuous)
    wavenumber with omega(k_center) = center_frequency, used as expansion point.
    """

    grid: ModeGrid
    disp: Dispersion = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)
    frame_frequency: float
    center_frequency: float
    k_center: float

    @property
    def frequencies(self):
        return mode_frequencies(self.grid, self.disp)

    @property
    def detunings(self):
        return self.frequencies - self.frame_frequency

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def with_amplitudes(self, amplitudes) -> "SpectralWavepacket":
        return replace(self, amplitudes=np.asarray(amplitudes, dtype=complex))

    def shifted(self, tau: float) -> "SpectralWavepacket":
        """Delay the packet by ``tau`` (xi(x, t) -> xi(x, t - tau))."""
        return self.with_amplitudes(self.amplitudes * np.exp(1j * self.detunings * tau))


@dataclass(frozen=True)
class TimeTrace:
    """Uniformly sampled complex signal; ``derivative`` is optional and exact when given."""

    times: np.ndarray
    values: np.ndarray
    derivative: Optional[np.ndarray] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise ValueError("time grid needs at least two samples")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * abs(dt[0]) * t.size:
            raise ValueError("time grid must be uniform and increasing")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def l2_norm_sq(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dt)

    def time_derivative(self) -> np.ndarray:
        if self.derivative is not None:
            return np.asarray(self.derivative)
        return np.gradient(self.values, self.dt, edge_order=2)


def _check_edges(amplitudes):
    a = np.abs(amplitudes)
    peak = a.max()
    if peak == 0:
        raise ValueError("empty wavepacket")
    if a[0] > EDGE_GUARD * peak or a[-1] > EDGE_GUARD * peak:
        raise PhotonTooBroadband("photon too broadband for this link: amplitude reaches the band edge")


def sech_target(kappa: float, grid: ModeGrid, disp: Dispersion, center_frequency=None,
                frame_frequency=None, guard: bool = True) -> SpectralWavepacket:
    """psi_k proportional to sech(pi (omega_k - omega_0) / kappa), renormalized on the grid.

    In the continuum limit the field at the source is sqrt(kappa/4) sech(kappa t/2).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    w = mode_frequencies(grid, disp)
    w0 = float(disp.omega(grid.k_carrier)) if center_frequency is None else float(center_frequency)
    frame = w0 if frame_frequency is None else float(frame_frequency)
    amp = 1.0 / np.cosh(np.pi * (w - w0) / kappa)
    amp = amp / math.sqrt(np.sum(amp**2))
    if guard:
        _check_edges(amp)
    k0 = wavenumber_for_frequency(disp, w0)
    return SpectralWavepacket(grid, disp, amp.astype(complex), frame, w0, k0)


def predistort(wp: SpectralWavepacket, t_ab: float, share: float = 1.0, order: str = "exact",
               k0=None) -> SpectralWavepacket:
    """Multiply by exp(+i omega_NL(k) t_ab share).

    ``order="quadratic"`` uses the truncation 1/2 D2 (k - k0)^2 instead of the
    full nonlinear residual.
    """
    k0 = wp.k_center if k0 is None else k0
    k = wp.grid.wavenumbers
    if order == "exact":
        wnl = nonlinear_residual(wp.disp, k, k0)
    elif order == "quadratic":
        wnl = 0.5 * curvature_d2(wp.disp, k0) * (k - k0) ** 2
    else:
        raise ValueError(f"unknown predistortion order {order!r}")
    return wp.with_amplitudes(wp.amplitudes * np.exp(1j * wnl * t_ab * share))


def field_at(wp: SpectralWavepacket, x: float, times, derivative: bool = True,
             chunk: int = 512) -> TimeTrace:
    """xi(x, t) = sqrt(Delta/2pi) sum_k psi_k exp(i k x - i (omega_k - frame) t).

    Delta is the free spectral range at the carrier, so |xi|^2 is a photon flux
    (integrates to sum |psi_k|^2 over one revival period on a linear grid).
    """
    if not 0.0 <= x <= wp.grid.length:
        raise ValueError("position outside the waveguide")
    times = np.asarray(times, dtype=float)
    scale = math.sqrt(wp.grid.free_spectral_range(wp.disp) / (2.0 * math.pi))
    amp = wp.amplitudes * np.exp(1j * wp.grid.wavenumbers * x) * scale
    nu = wp.detunings
    vals = np.empty(times.size, dtype=complex)
    dvals = np.empty(times.size, dtype=complex) if derivative else None
    for s in range(0, times.size, chunk):
        ph = np.exp(-1j * np.outer(times[s:s + chunk], nu))
        vals[s:s + chunk] = ph @ amp
        if derivative:
            dvals[s:s + chunk] = ph @ (-1j * nu * amp)
    return TimeTrace(times, vals, dvals)


def pulse_fidelity(a, b) -> float:
    """|<a|b>|^2 of the normalized inputs (no time-shift search)."""
    if isinstance(a, SpectralWavepacket):
        va, vb = a.amplitudes, b.amplitudes
    elif isinstance(a, TimeTrace):
        if a.values.shape != b.values.shape or not np.allclose(a.times, b.times):
            raise ValueError("traces must share a time grid")
        va, vb = a.values, b.values
    else:
        va, vb = np.asarray(a), np.asarray(b)
    na, nb = np.vdot(va, va).real, np.vdot(vb, vb).real
    if na == 0 or nb == 0:
        raise ValueError("zero-norm input")
    f = abs(np.vdot(va, vb)) ** 2 / (na * nb)
    return float(min(f, 1.0))


def distortion_parameter(disp: Dispersion, k0: float, t_ab: float) -> float:
    """D = D2 t_ab / (2 v_g^2), in ns^2."""
    vg = group_velocity(disp, k0)
    if vg <= 0:
        raise ValueError("zero group velocity")
    return curvature_d2(disp, k0) * t_ab / (2.0 * vg**2)


def analytic_overlap_series(D: float, kappa: float) -> float:
    return 1.0 - D**2 * kappa**4 / 45.0


def distorted_overlap(D: float, kappa: float) -> float:
    """|<xi(0)|xi(D)>|^2 for the chirped sech spectrum, by adaptive quadrature."""
    a = D * kappa**2 / math.pi**2
    # density 1/2 sech^2(u) over u = pi omega / kappa
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
    re = quad(lambda u: np.cos(a * u * u) / np.cosh(u) ** 2, 0.0, 60.0, **opts)[0]
    im = quad(lambda u: np.sin(a * u * u) / np.cosh(u) ** 2, 0.0, 60.0, **opts)[0]
    return re * re + im * im


def spectral_sech_field(times, kappa: float, spectral_phase=None, span: float = 20.0,
                        n_freq: int = 2001, delay: float = 0.0) -> TimeTrace:
    """Continuum photon xi(t) = (2 pi)^-1/2 int f(nu) e^{-i nu (t - delay)} d nu.

    f(nu) = sqrt(pi/2kappa) sech(pi nu/kappa) exp(i phi(nu)) with phi given by
    ``spectral_phase`` (detuning in rad/ns -> rad). No phase gives
    sqrt(kappa/4) sech(kappa (t - delay)/2). The frequency grid is refined
    automatically so that its aliasing period exceeds three times the largest
    |t - delay| requested.
    """
    times = np.asarray(times, dtype=float)
    reach = float(np.max(np.abs(times - delay))) if times.size else 0.0
    n_needed = int(math.ceil(2 * span * kappa * 3 * reach / (2 * math.pi))) + 1
    n = max(n_freq, n_needed)
    w = np.linspace(-span * kappa, span * kappa, n)
    dw = w[1] - w[0]
    f = math.sqrt(math.pi / (2 * kappa)) / np.cosh(np.pi * w / kappa)
    if spectral_phase is not None:
        phi = np.nan_to_num(np.asarray(spectral_phase(w), dtype=float), nan=0.0)
        f = f * np.exp(1j * phi)
    f = f * dw / math.sqrt(2 * math.pi)
    tau = times - delay
    vals = np.empty(times.size, dtype=complex)
    dvals = np.empty(times.size, dtype=complex)
    for s in range(0, times.size, 512):
        ph = np.exp(-1j * np.outer(tau[s:s + 512], w))
        vals[s:s + 512] = ph @ f
        dvals[s:s + 512] = ph @ (-1j * w * f)
    return TimeTrace(times, vals, dvals)


def chirped_sech_field(times, kappa: float, D: float, span: float = 20.0,
                       n_freq: int = 2001) -> TimeTrace:
    """Chirped photon f(omega, D) = sqrt(pi/2kappa) sech(pi omega/kappa) exp(-i omega^2 D)."""
    return spectral_sech_field(times, kappa, lambda w: -w * w * D, span, n_freq)


def predistortion_phase(disp: Dispersion, center_frequency: float, t_ab: float, share: float = 1.0,
                        order: str = "exact"):
    """Spectral phase nu -> share * t_ab * omega_NL(k(center + nu)) for continuum targets.

    Zero below the band (where the sech amplitude is negligible anyway).
    """
    k0 = wavenumber_for_frequency(disp, center_frequency)
    vg = group_velocity(disp, k0)
    if order == "quadratic":
        d2 = curvature_d2(disp, k0)

        def phase(nu):
            k = wavenumbers_for_frequencies(disp, center_frequency + nu)
            return share * t_ab * 0.5 * d2 * (k - k0) ** 2
    elif order == "exact":
        def phase(nu):
            k = wavenumbers_for_frequencies(disp, center_frequency + nu)
            return share * t_ab * (nu - vg * (k - k0))
    else:
        raise ValueError(f"unknown predistortion order {order!r}")
    return phase


def sech_field(times, kappa: float, width=None) -> TimeTrace:
    """sqrt(kappa/4) sech(a t/2) with exact derivative; a defaults to kappa."""
    a = kappa if width is None else width
    t = np.asarray(times, dtype=float)
    s = 1.0 / np.cosh(a * t / 2)
    v = math.sqrt(kappa / 4) * s
    dv = -v * (a / 2) * np.tanh(a * t / 2)
    return TimeTrace(t, v.astype(complex), dv.astype(complex))
