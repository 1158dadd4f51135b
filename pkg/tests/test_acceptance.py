"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``. The transfer sweeps dominate the cost:
roughly a minute for the 5 m link and several for the 60 m one.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from qlink.expcli import calibration_report, run_point, run_scenario
from qlink.pulseshaper import (EffectiveModelParams, analytic_sech_control, control_from_field,
                               max_correctable_distortion)
from qlink.scenario import load
from qlink.simulator import effective_series, estimate_params_from_series
from qlink.units import mhz_to_rad_ns
from qlink.wavepacket import analytic_overlap_series, distorted_overlap, sech_field

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
REPORT: list = []


@dataclass
class Verdict:
    number: int
    title: str
    passed: bool
    detail: str
    runtime_s: float = math.nan
    budget_s: float = math.inf
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.passed and not self.runtime_s > self.budget_s

    def line(self) -> str:
        tag = "PASS" if self.ok else "FAIL"
        t = "" if math.isnan(self.runtime_s) else f"  [{self.runtime_s:.1f} s"
        if t:
            t += "]" if math.isinf(self.budget_s) else f" / {self.budget_s:g} s]"
        return f"{tag}  {self.number}. {self.title}: {self.detail}{t}"


def record(v: Verdict) -> Verdict:
    REPORT[:] = [r for r in REPORT if r.number != v.number] + [v]
    print(v.line())
    return v


@dataclass
class TimedPoint:
    records: list
    wall_s: float


@lru_cache(maxsize=None)
def sweep(name: str) -> tuple:
    cfg = load(CONFIGS / name)
    out = []
    for k in cfg.kappa_points:
        t0 = time.perf_counter()
        recs = run_point(cfg.with_kappa(k))
        out.append(TimedPoint(recs, time.perf_counter() - t0))
    return tuple(out)


def by_strategy(recs) -> dict:
    return {r.strategy: r for r in recs}


# 1 ----------------------------------------------------------------------

def criterion_1() -> Verdict:
    kappa = mhz_to_rad_ns(100.0)
    t = np.linspace(-40 / kappa, 40 / kappa, 8001)
    t0 = time.perf_counter()
    pulse, _ = control_from_field(sech_field(t, kappa), EffectiveModelParams(kappa))
    dt = time.perf_counter() - t0
    ref = 0.5 * kappa / np.cosh(kappa * t / 2)
    err = float(np.max(np.abs(pulse.values - ref)) / ref.max())
    return Verdict(1, "standard pulse recovery", err < 1e-6, f"sup rel err {err:.2e} (< 1e-6)", dt, 1.0)


# 2 ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def linear_emission():
    cfg = load(CONFIGS / "pulse_sweep_linear.json").with_kappa(200.0)
    t0 = time.perf_counter()
    recs = run_scenario(cfg)
    return by_strategy(recs), time.perf_counter() - t0


def criterion_2() -> Verdict:
    recs, dt = linear_emission()
    m = 1 - recs["markov_corrected"].f_pulse
    n = 1 - recs["nonmarkov_corrected"].f_pulse
    ratio = m / n if n > 0 else math.inf
    return Verdict(2, "N-corrected pulse beats Markov", ratio >= 5.0,
                   f"1-F markov {m:.2e}, nonmarkov {n:.2e}, ratio {ratio:.0f} (>= 5)", dt, 30.0)


# 3 ----------------------------------------------------------------------

SYNTHETIC_TRUTHS = [(200.0, 0.03, complex(0.05, 0.01)), (100.0, -0.02, complex(0.12, -0.04)),
                    (350.0, 0.05, complex(0.2, 0.06))]


def criterion_3() -> Verdict:
    t0 = time.perf_counter()
    worst = 0.0
    for kmhz, dw_k, nm in SYNTHETIC_TRUTHS:
        k = mhz_to_rad_ns(kmhz)
        truth = EffectiveModelParams(k, dw_k * k, nm)
        t = np.linspace(-12 / k, 12 / k, 3001)
        _, c, cdot, gamma = effective_series(analytic_sech_control(k, 0.0, t), truth, t)
        est, _ = estimate_params_from_series(t, c, cdot, gamma)
        worst = max(worst, abs(est.kappa / k - 1), abs(est.lamb_shift / truth.lamb_shift - 1),
                    abs(complex(est.non_markov) - nm) / abs(nm))
    cfg = load(CONFIGS / "calibration_linear.json")
    _, diag = calibration_report(cfg)
    dt = time.perf_counter() - t0
    k = mhz_to_rad_ns(cfg.nodes.kappa_mhz)
    shift = abs(diag.lamb_avg) / k
    re_dev = abs(diag.kappa_avg / k - 1)
    ok = worst < 0.02 and shift < 0.02 and re_dev < 0.05
    return Verdict(3, "parameter extraction", ok,
                   f"synthetic worst rel err {worst:.1e} (< 2%); linear link |dw|/kappa {shift:.1e} "
                   f"(< 0.02), Re(Gamma/c)/(kappa/2)-1 {re_dev:.1e} (< 5%)", dt, 60.0)


# 4 ----------------------------------------------------------------------

def criterion_4() -> Verdict:
    stds = {}
    t0 = time.perf_counter()
    for name in ("calibration_linear.json", "calibration_wr90.json"):
        _, diag = calibration_report(load(CONFIGS / name))
        stds[name.split("_")[-1].removesuffix(".json")] = diag.nm_rel_std
    dt = time.perf_counter() - t0
    detail = ", ".join(f"{k} {v:.3f}" for k, v in stds.items())
    return Verdict(4, "N(t) plateau", all(v < 0.3 for v in stds.values()),
                   f"rel std {detail} (< 0.3)", dt / len(stds), 60.0)


# 5 ----------------------------------------------------------------------

def criterion_5() -> Verdict:
    t0 = time.perf_counter()
    worst = 0.0
    for kmhz in (25.0, 50.0, 100.0, 200.0, 400.0):
        k = mhz_to_rad_ns(kmhz)
        worst = max(worst, abs(max_correctable_distortion(k, "scan") / max_correctable_distortion(k) - 1))
    dt = time.perf_counter() - t0
    return Verdict(5, "D_max scan vs closed form", worst < 0.15, f"worst rel diff {worst:.2%} (< 15%)", dt, 120.0)


# 6 ----------------------------------------------------------------------

def criterion_6() -> Verdict:
    t0 = time.perf_counter()
    kappa = 1.0
    x = np.geomspace(0.05, 0.5, 12)
    resid = [abs(distorted_overlap(v, kappa) - analytic_overlap_series(v, kappa)) for v in x]
    slope = float(np.polyfit(np.log(x), np.log(resid), 1)[0])
    dt = time.perf_counter() - t0
    return Verdict(6, "overlap series residual", abs(slope - 4) <= 0.2, f"log-log slope {slope:.3f} (4 +- 0.2)",
                   dt, 10.0)


# 7 ----------------------------------------------------------------------

def criterion_7() -> Verdict:
    parts, ok, wall = [], True, 0.0
    for label, name in (("5 m", "transfer_wr90_5m.json"), ("60 m", "transfer_wr90_60m.json")):
        point = sweep(name)[-1]
        r = by_strategy(point.records)
        blue = r["ideal_sech"].infidelity
        green = r["nonmarkov_corrected"].infidelity
        ratio = blue / green if green > 0 else math.inf
        ok &= blue >= 1e-2 and ratio >= 100 and r["ideal_sech"].ok and r["nonmarkov_corrected"].ok
        parts.append(f"{label} @ {r['ideal_sech'].kappa_mhz:g} MHz sech {blue:.2e} vs corrected {green:.2e} "
                     f"(x{ratio:.0f})")
        wall += point.wall_s
    return Verdict(7, "end-to-end distortion correction", ok, "; ".join(parts), wall, 600.0)


# 8 ----------------------------------------------------------------------

def criterion_8() -> Verdict:
    bad, checked = [], 0
    for name in ("transfer_wr90_5m.json", "transfer_wr90_60m.json"):
        for point in sweep(name):
            r = by_strategy(point.records)
            if not all(x.feasible and x.ok for x in r.values()):
                continue
            checked += 1
            b, o, g = (r[s].infidelity for s in ("ideal_sech", "markov_corrected", "nonmarkov_corrected"))
            if not (g <= 1.1 * o and o <= 1.1 * b):
                bad.append(f"{r['ideal_sech'].kappa_mhz:g} MHz")
    ok = checked > 0 and not bad
    detail = f"{checked} points ordered" if ok else f"violations at {', '.join(bad) or 'no feasible point'}"
    return Verdict(8, "strategy ordering", ok, detail)


# 9 ----------------------------------------------------------------------

def all_records() -> list:
    recs = [r for name in ("transfer_wr90_5m.json", "transfer_wr90_60m.json") for p in sweep(name) for r in p.records]
    return recs + list(linear_emission()[0].values())


def criterion_9() -> Verdict:
    recs = [r for r in all_records() if r.ok]
    drift = max(r.norm_drift for r in recs)
    delta = max(r.step_doubling_delta for r in recs)
    cfg = load(CONFIGS / "transfer_wr90_5m.json")
    first = sweep("transfer_wr90_5m.json")[0].records
    again = run_point(cfg.with_kappa(cfg.kappa_points[0]))
    same = [r.row() for r in first] == [r.row() for r in again]
    ok = drift < 1e-9 and delta < 1e-6 and same and len(recs) == len(all_records())
    return Verdict(9, "numerical hygiene", ok,
                   f"max norm drift {drift:.1e} (< 1e-9), max step-doubling change {delta:.1e} (< 1e-6), "
                   f"rerun {'identical' if same else 'DIFFERS'}, {len(recs)}/{len(all_records())} records ok")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(criterion):
    v = record(criterion())
    assert v.ok, v.line()


if __name__ == "__main__":
    verdicts = [record(c()) for c in CRITERIA]
    sys.exit(0 if all(v.ok for v in verdicts) else 1)
