"""Inversion of the effective qubit-cavity model: from a target field to a complex control.

Effective model (resonant frame, output field xi = sqrt(kappa) d, d = -i c)::

    dq/dt = g d
    (1 - N) dd/dt = -g* q - kappa d / 2

N = 0 is the Markovian limit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.special import expit

from .wavepacket import TimeTrace, chirped_sech_field

FEASIBILITY_TOL = 1e-9
GUARD_D = 1e-8
# |q|^2 below this many ulps of the accumulated rate magnitude is roundoff
ROUNDOFF_FACTOR = 16.0
REFILL_TOL = 1e-6


class InfeasiblePulse(ValueError):
    """Target needs |q(t)|^2 outside [0, 1]."""


class DenominatorVanishes(ArithmeticError):
    """The qubit population reaches zero while the field is still being emitted."""


@dataclass(frozen=True)
class EffectiveModelParams:
    kappa: float
    lamb_shift: float = 0.0
    non_markov: complex = 0j

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not abs(self.non_markov) < 1:
            raise ValueError("|N| must be below 1")

    @property
    def nm_modulus(self) -> float:
        return abs(self.non_markov)

    @property
    def nm_phase(self) -> float:
        return math.atan2(complex(self.non_markov).imag, complex(self.non_markov).real)


@dataclass(frozen=True)
class ControlPulse:
    """Sampled complex coupling g(t) in rad/ns; zero outside its window."""

    times: np.ndarray
    values: np.ndarray
    provenance: str
    params: Optional[EffectiveModelParams] = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("control has non-finite samples")

    @cached_property
    def _splines(self):
        return (CubicSpline(self.times, self.values.real), CubicSpline(self.times, self.values.imag))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        sr, si = self._splines
        out = sr(t) + 1j * si(t)
        inside = (t >= self.times[0]) & (t <= self.times[-1])
        return np.where(inside, out, 0.0)

    @property
    def window(self):
        return float(self.times[0]), float(self.times[-1])

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ns", "re_g", "im_g"])
            for t, g in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(g.real)), repr(float(g.imag))])

    @classmethod
    def from_csv(cls, path, provenance="file"):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1] + 1j * data[:, 2], provenance)


@dataclass(frozen=True)
class QubitCavityTrace:
    times: np.ndarray
    q: np.ndarray
    d: np.ndarray
    population: np.ndarray = field(repr=False)

    @property
    def c(self):
        return 1j * self.d

    @property
    def r(self):
        return np.log(np.abs(self.d))

    @property
    def theta(self):
        return -np.unwrap(np.angle(self.d))

    @property
    def x(self):
        return 0.5 * np.log(self.population)

    @property
    def sigma(self):
        return -np.unwrap(np.angle(self.q))


def cavity_from_field(xi: TimeTrace, kappa: float) -> np.ndarray:
    """d(t) = xi(t) / sqrt(kappa)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return np.asarray(xi.values) / math.sqrt(kappa)


def _population_rate(xi: TimeTrace, params: EffectiveModelParams) -> np.ndarray:
    """-d|q|^2/dt = |xi|^2 + (2/kappa) Re[(1 - N) xi* dxi/dt]."""
    v = np.asarray(xi.values)
    dv = xi.time_derivative()
    one_m_n = 1.0 - complex(params.non_markov)
    return np.abs(v) ** 2 + (2.0 / params.kappa) * np.real(one_m_n * np.conj(v) * dv)


def _reverse_cumulative(y, t):
    """int_t^{t_end} y, accumulated from the end so that tails keep relative accuracy."""
    rev = cumulative_simpson(y[::-1], x=-t[::-1], initial=0.0)
    return rev[::-1]


def qubit_population(xi: TimeTrace, params: EffectiveModelParams, q0_sq: float = 1.0,
                     final_sq=None, check: bool = True) -> np.ndarray:
    """|q(t)|^2 implied by emitting ``xi`` from a qubit starting at ``q0_sq``.

    The population is accumulated backwards from the window end; the end value
    is q0_sq minus the emitted total, or ``final_sq`` when given. A residual end
    value below the feasibility tolerance is treated as full depletion.
    """
    if not 0.0 <= q0_sq <= 1.0:
        raise ValueError("q0_sq must lie in [0, 1]")
    t = np.asarray(xi.times, dtype=float)
    rate = _population_rate(xi, params)
    tail = _reverse_cumulative(rate, t)
    if final_sq is None:
        final_sq = q0_sq - tail[0]
        if abs(final_sq) < FEASIBILITY_TOL:
            final_sq = 0.0
    pop = final_sq + tail
    if check:
        lo, hi = pop.min(), pop.max()
        if lo < -FEASIBILITY_TOL or hi > 1.0 + FEASIBILITY_TOL:
            bad = int(np.argmin(pop)) if lo < -FEASIBILITY_TOL else int(np.argmax(pop))
            raise InfeasiblePulse(
                f"|q|^2 = {pop[bad]:.3e} at t = {t[bad]:.4g} ns is outside [0, 1]")
    return pop


def control_from_field(xi: TimeTrace, params: EffectiveModelParams, q0_sq: float = 1.0,
                       final_sq=None, guard: float = GUARD_D):
    """Complex control g(t) whose effective model emits ``xi``.

    Returns ``(ControlPulse, QubitCavityTrace)``. The global phase is fixed so
    that g starts real and positive (sigma(t0) = theta(t0) - pi); a real sech
    target then yields the standard (kappa/2) sech(kappa t/2).

    When Re 1/(1 - N) < 1 the bare cavity rings down more slowly than a sech
    tail, so the exact control grows without bound late in the window.
    """
    t = np.asarray(xi.times, dtype=float)
    kappa = params.kappa
    one_m_n = 1.0 - complex(params.non_markov)
    d = cavity_from_field(xi, kappa)
    dd = xi.time_derivative() / math.sqrt(kappa)
    pop = qubit_population(xi, params, q0_sq, final_sq)

    active = np.abs(d) >= guard * np.abs(d).max()
    rate = _population_rate(xi, params)
    # d/dt log|q| and d/dt sigma; both carry 1/|q|^2
    cross = one_m_n * np.conj(d) * dd
    with np.errstate(divide="ignore", invalid="ignore"):
        xdot = -0.5 * rate / pop
        sdot = -np.imag(cross) / pop
    # an emptied qubit leaves the resonator to ring down on its own, which makes
    # the control irrelevant; the inversion is only singular if the target
    # later needs to refill the qubit
    v = np.asarray(xi.values)
    scale = np.abs(v) ** 2 + (2.0 / kappa) * abs(one_m_n) * np.abs(v) * np.abs(xi.time_derivative())
    noise = ROUNDOFF_FACTOR * np.finfo(float).eps * (_reverse_cumulative(scale, t) + abs(pop[-1]))
    dead = pop <= noise
    if np.any(dead & active):
        first = int(np.argmax(dead & active))
        refill = float(pop[first:].max())
        if refill > REFILL_TOL:
            raise DenominatorVanishes(
                f"qubit population vanishes at t = {t[first]:.4g} ns and must later return to {refill:.2e}")
        active &= ~dead
    xdot = np.where(active, xdot, 0.0)
    sdot = np.where(active, sdot, 0.0)

    theta0 = -float(np.angle(d[0])) if abs(d[0]) > 0 else 0.0
    sigma = theta0 - math.pi + cumulative_simpson(sdot, x=t, initial=0.0)
    q = np.sqrt(np.clip(pop, 0.0, None)) * np.exp(-1j * sigma)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = (xdot - 1j * sdot) * q / d
    g = np.where(active, g, 0.0)

    provenance = "markovian" if params.non_markov == 0 else "non_markovian"
    pulse = ControlPulse(t, g, provenance, params)
    return pulse, QubitCavityTrace(t, q, d, pop)


def analytic_sech_control(kappa: float, non_markov: float, times) -> ControlPulse:
    """Closed-form real control for a real sech emission with real N in [0, 1).

    g(t) = kappa e^{a t/2} u^2 / sqrt(N + (1 - N) u^2), u = 1/(1 + e^{a t}),
    a = kappa / (1 - N). It emits sqrt(kappa/4) sech(a t/2) (norm 1 - N) and
    leaves |q(inf)|^2 = N in the effective model.
    """
    n = float(np.real(non_markov))
    if not 0.0 <= n < 1.0 or np.imag(non_markov) != 0:
        raise ValueError("analytic control needs real N in [0, 1)")
    t = np.asarray(times, dtype=float)
    a = kappa / (1.0 - n)
    u = expit(-a * t)
    half_sech = 0.5 / np.cosh(np.clip(a * t / 2, -700, 700))
    g = kappa * half_sech * u / np.sqrt(n + (1.0 - n) * u * u)
    return ControlPulse(t, g.astype(complex), "analytic_sech", EffectiveModelParams(kappa, 0.0, n))


def integrate_effective_model(pulse: ControlPulse, params: EffectiveModelParams, q0: complex = 1.0,
                              d0: complex = 0.0, times=None):
    """Classical RK4 on the (q, d) effective model over the pulse grid.

    Returns ``(times, q, d)``; the emitted field is sqrt(kappa) d.
    """
    t = pulse.times if times is None else np.asarray(times, dtype=float)
    kappa = params.kappa
    inv = 1.0 / (1.0 - complex(params.non_markov))

    def rhs(tt, y):
        g = complex(pulse(tt))
        q, d = y
        return np.array([g * d, inv * (-np.conj(g) * q - 0.5 * kappa * d)])

    y = np.array([q0, d0], dtype=complex)
    out = np.empty((t.size, 2), dtype=complex)
    out[0] = y
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        k1 = rhs(t[i], y)
        k2 = rhs(t[i] + h / 2, y + h / 2 * k1)
        k3 = rhs(t[i] + h / 2, y + h / 2 * k2)
        k4 = rhs(t[i + 1], y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = y
    return t, out[:, 0], out[:, 1]


def chirped_packet_feasible(kappa: float, D: float, window: float = 40.0, n_times: int = 4001) -> bool:
    """True when the chirped sech photon f(omega, D) passes the |q|^2 in [0, 1] test."""
    t = np.linspace(-window / kappa, window / kappa, n_times)
    xi = chirped_sech_field(t, kappa, D)
    try:
        qubit_population(xi, EffectiveModelParams(kappa))
    except InfeasiblePulse:
        return False
    return True


def max_correctable_distortion(kappa: float, method: str = "closed_form", rel_tol: float = 1e-3,
                               **scan_kw) -> float:
    """Largest |D| (ns^2) a physical control can imprint on a sech photon."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    closed = 3.0 / (2.0 * math.sqrt(5.0) * kappa**2)
    if method == "closed_form":
        return closed
    if method != "scan":
        raise ValueError(f"unknown method {method!r}")
    lo, hi = 0.0, closed
    while chirped_packet_feasible(kappa, hi, **scan_kw):
        lo, hi = hi, 2.0 * hi
        if hi > 64 * closed:
            return math.inf
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if chirped_packet_feasible(kappa, mid, **scan_kw):
            lo = mid
        else:
            hi = mid
    return lo


def receiver_control(emit: ControlPulse, rtol: float = 1e-9) -> ControlPulse:
    """Time-reversed absorber: g2(t) = conj(g1(-t)) on a window symmetric about 0."""
    t = emit.times
    span = t[-1] - t[0]
    if not np.allclose(t, -t[::-1], atol=rtol * span, rtol=0):
        raise ValueError("receiver control needs a time grid symmetric about t = 0")
    return ControlPulse(t.copy(), np.conj(emit.values[::-1]), "receiver:" + emit.provenance, emit.params)
