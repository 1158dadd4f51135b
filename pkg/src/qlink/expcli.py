"""Scenario runner, kappa sweeps and the ``qlink`` command line.

Every transfer point follows the same pipeline: build the link, run a pilot
emission to calibrate (kappa, dw, N), retune both qubits to Omega_R + dw,
synthesize the node-1 control for each strategy, mirror it for node 2, run the
full model and record fidelities with their integrator diagnostics.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .linkmodel import Link, LinkConfigError, group_velocity, wavenumber_for_frequency
from .pulseshaper import (ControlPulse, DenominatorVanishes, EffectiveModelParams, InfeasiblePulse,
                          analytic_sech_control, control_from_field, max_correctable_distortion,
                          receiver_control)
from .scenario import ConfigError, ScenarioConfig, load, resolved_kappa
from .simulator import (ConsistencyError, InsufficientData, IntegrationFailure, LinkPropagator,
                        SimConfig, estimate_params, reconstruct_at, run_emission, simulate,
                        transfer_fidelity)
from .units import mhz_to_rad_ns, rad_ns_to_mhz
from .wavepacket import (PhotonTooBroadband, distortion_parameter, predistortion_phase,
                         pulse_fidelity, sech_field, spectral_sech_field)

RESULT_COLUMNS = (
    "scenario_id", "kappa_mhz", "strategy", "feasible", "f_pulse", "f_transfer", "infidelity",
    "kappa_est_mhz", "lamb_shift_mhz", "nm_re", "nm_im", "nm_abs", "nm_phase",
    "d_ns2", "d_share_ns2", "d_max_ns2", "steps", "norm_drift", "step_doubling_delta", "status",
)
TIMING_COLUMNS = ("scenario_id", "kappa_mhz", "strategy", "wall_time_s")
CALIBRATION_COLUMNS = ("t_ns", "t_kappa", "re_2gamma_over_kappa_c", "im_2gamma_over_kappa_c",
                       "abs_nm", "phase_nm", "c_mask", "cdot_mask")
# pilot half-window as a fraction of half the round trip 2 L / v_g
PILOT_ECHO_MARGIN = 0.9
# sech(pi nu / kappa) at nu = 8 kappa is 2e-11: wide enough for every target
TARGET_SPAN = 8.0
NUMERICAL_ERRORS = (IntegrationFailure, ConsistencyError, InsufficientData, FloatingPointError,
                    np.linalg.LinAlgError)
SYNTHESIS_ERRORS = (InfeasiblePulse, DenominatorVanishes, PhotonTooBroadband)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class ResultRecord:
    scenario_id: str
    kappa_mhz: float
    strategy: str
    feasible: bool = True
    f_pulse: float = math.nan
    f_transfer: float = math.nan
    infidelity: float = math.nan
    kappa_est_mhz: float = math.nan
    lamb_shift_mhz: float = math.nan
    nm_re: float = math.nan
    nm_im: float = math.nan
    nm_abs: float = math.nan
    nm_phase: float = math.nan
    d_ns2: float = math.nan
    d_share_ns2: float = math.nan
    d_max_ns2: float = math.nan
    steps: int = 0
    norm_drift: float = math.nan
    step_doubling_delta: float = math.nan
    status: str = "ok"
    wall_time_s: float = field(default=0.0, compare=False)

    def __post_init__(self):
        for name in ("f_pulse", "f_transfer"):
            v = getattr(self, name)
            if not math.isnan(v) and not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name} = {v} outside [0, 1]")

    def row(self):
        return [_fmt(getattr(self, c)) for c in RESULT_COLUMNS]

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class Calibration:
    params: EffectiveModelParams
    diagnostics: object = None
    pilot: object = None

    @property
    def lamb_shift(self) -> float:
        return self.params.lamb_shift


@dataclass
class PointSetup:
    """Everything shared by the strategies of one kappa point."""

    cfg: ScenarioConfig
    kappa: float
    link: Link
    sim_link: Link
    propagator: LinkPropagator
    calibration: Calibration
    delta: float
    t_link: float
    d_total: float

    @property
    def couplings(self):
        return self.sim_link.couplings.with_lamb_shift(self.calibration.lamb_shift)

    def control_times(self) -> np.ndarray:
        w = self.cfg.protocol.window_kappa / self.kappa
        return np.linspace(-w, w, self.cfg.protocol.control_samples)

    def sim_config(self, steps: Optional[int] = None) -> SimConfig:
        p = self.cfg.protocol
        return SimConfig.in_kappa_units(self.kappa, -p.window_kappa, p.window_kappa,
                                        steps or p.steps, frame_frequency=self.delta,
                                        snapshot_times=(0.0,))


def pilot_half_window(cfg: ScenarioConfig, link: Link) -> float:
    """Pilot half-width in ns: the configured span, shortened so that no part of
    the emitted field can return from the far end before the window closes."""
    kappa = resolved_kappa(cfg)
    omega_r = link.couplings.node(1).omega_r
    vg = group_velocity(link.disp, wavenumber_for_frequency(link.disp, omega_r))
    revival = 2.0 * cfg.link.length_m / vg
    return min(cfg.protocol.pilot_window_kappa / kappa, PILOT_ECHO_MARGIN * revival / 2.0)


def calibrate(cfg: ScenarioConfig, link: Link, propagator: LinkPropagator) -> Calibration:
    """Pilot emission with the Markovian sech control; qubit left at Omega_R."""
    p = cfg.protocol
    kappa = resolved_kappa(cfg)
    if p.calibration == "none":
        dw = 0.0 if p.lamb_shift_mhz is None else mhz_to_rad_ns(p.lamb_shift_mhz)
        nm = 0j if p.non_markov is None else complex(*p.non_markov)
        return Calibration(EffectiveModelParams(kappa, dw, nm))
    omega_r = link.couplings.node(1).omega_r
    half = pilot_half_window(cfg, link)
    sc = SimConfig(-half, half, p.pilot_steps, frame_frequency=omega_r)
    pulse = analytic_sech_control(kappa, 0.0, sc.times)
    traj = run_emission(sc, link, pulse, propagator=propagator.with_frame(omega_r))
    params, diag = estimate_params(traj, c_threshold=p.c_threshold, cdot_threshold=p.cdot_threshold,
                                   method=p.estimator)
    if p.non_markov is not None:
        params = EffectiveModelParams(params.kappa, params.lamb_shift, complex(*p.non_markov))
    if p.lamb_shift_mhz is not None:
        params = EffectiveModelParams(params.kappa, mhz_to_rad_ns(p.lamb_shift_mhz), params.non_markov)
    return Calibration(params, diag, traj)


def prepare_point(cfg: ScenarioConfig, propagator: Optional[LinkPropagator] = None) -> PointSetup:
    kappa = resolved_kappa(cfg)
    link = cfg.build_link()
    if cfg.kind == "emission":
        sim_link = Link(link.grid, link.disp, link.couplings.decoupled(2))
    else:
        sim_link = link
    prop = propagator if propagator is not None else LinkPropagator(sim_link)
    cal = calibrate(cfg, sim_link, prop)
    delta = link.couplings.node(1).omega_r + cal.lamb_shift
    k_delta = wavenumber_for_frequency(link.disp, delta)
    vg = group_velocity(link.disp, k_delta)
    if vg <= 0:
        raise LinkConfigError("cutoff carrier: zero group velocity at the qubit frequency")
    t_link = cfg.link.length_m / vg
    d_total = distortion_parameter(link.disp, k_delta, t_link)
    return PointSetup(cfg, kappa, link, sim_link, prop.with_frame(delta), cal, delta, t_link, d_total)


def emission_target(setup: PointSetup, times=None):
    """Continuum node-1 target: sech photon leaving x=0 at -t_link/2, partially predistorted."""
    p = setup.cfg.protocol
    times = setup.control_times() if times is None else times
    phase = predistortion_phase(setup.link.disp, setup.delta, setup.t_link, p.distortion_share,
                                p.predistortion_order)
    return spectral_sech_field(times, setup.kappa, phase, span=TARGET_SPAN, delay=-setup.t_link / 2)


def synthesize(setup: PointSetup, strategy: str) -> ControlPulse:
    tc = setup.control_times()
    k = setup.kappa
    cal = setup.calibration.params
    if strategy == "ideal_sech":
        g = analytic_sech_control(k, 0.0, tc + setup.t_link / 2)
        return ControlPulse(tc, g.values, "analytic_sech", EffectiveModelParams(k, cal.lamb_shift))
    if strategy == "markov_corrected":
        params = EffectiveModelParams(k, cal.lamb_shift, 0j)
    elif strategy == "nonmarkov_corrected":
        params = cal
    else:
        raise ConfigError(f"unknown strategy {strategy!r}")
    pulse, _ = control_from_field(emission_target(setup, tc), params)
    return pulse


def _midlink_reference(setup: PointSetup):
    p = setup.cfg.protocol
    ts = np.linspace(-p.field_window_kappa / setup.kappa, p.field_window_kappa / setup.kappa,
                     p.field_samples)
    return ts, sech_field(ts, setup.kappa)


def _pulse_fidelity(setup: PointSetup, traj) -> float:
    """Overlap of the field at L/2 with the ideal sech arriving there at t = 0.

    Modes are taken from the snapshot nearest t = 0, while the photon is in
    flight: later snapshots can include its echo off the far wall re-entering
    node 1, which free back-propagation would not undo.
    """
    ts, ref = _midlink_reference(setup)
    snap = int(np.argmin(np.abs(traj.mode_times)))
    got = reconstruct_at(traj, setup.cfg.link.length_m / 2, ts, snapshot=snap)
    return pulse_fidelity(ref, got)


def _simulate(setup: PointSetup, g1: ControlPulse, steps: Optional[int] = None):
    sc = setup.sim_config(steps)
    g2 = receiver_control(g1) if setup.cfg.kind == "transfer" else None
    return simulate(sc, setup.sim_link, g1, g2, propagator=setup.propagator, couplings=setup.couplings)


def _fidelities(setup: PointSetup, traj) -> tuple:
    """Every fidelity a record reports for this trajectory."""
    if setup.cfg.kind == "transfer":
        return _pulse_fidelity(setup, traj), transfer_fidelity(traj)
    return (_pulse_fidelity(setup, traj),)


def run_strategy(setup: PointSetup, strategy: str, out_dir: Optional[Path] = None) -> ResultRecord:
    cfg, p = setup.cfg, setup.cfg.protocol
    cal = setup.calibration.params
    nm = complex(cal.non_markov) if strategy == "nonmarkov_corrected" else 0j
    kappa_used = cal.kappa if strategy == "nonmarkov_corrected" else setup.kappa
    share = 0.0 if strategy == "ideal_sech" else p.distortion_share
    rec = ResultRecord(
        cfg.id, cfg.nodes.kappa_mhz, strategy,
        kappa_est_mhz=rad_ns_to_mhz(kappa_used), lamb_shift_mhz=rad_ns_to_mhz(cal.lamb_shift),
        nm_re=nm.real, nm_im=nm.imag, nm_abs=abs(nm), nm_phase=math.atan2(nm.imag, nm.real),
        d_ns2=setup.d_total, d_share_ns2=setup.d_total * share,
        d_max_ns2=max_correctable_distortion(setup.kappa))
    t0 = time.perf_counter()
    try:
        g1 = synthesize(setup, strategy)
    except SYNTHESIS_ERRORS as exc:
        rec.feasible = False
        rec.status = f"infeasible: {exc}"
        rec.wall_time_s = time.perf_counter() - t0
        return rec
    steps = p.steps
    traj = _simulate(setup, g1, steps)
    drift = traj.norm_drift
    if p.step_doubling:
        # halve dt until doubling the step count moves no reported fidelity by
        # more than the tolerance; the coarser run of the accepted pair is reported
        for attempt in range(p.max_doublings + 1):
            fine = _simulate(setup, g1, 2 * steps)
            drift = max(drift, fine.norm_drift)
            delta = max(abs(a - b) for a, b in zip(_fidelities(setup, fine), _fidelities(setup, traj)))
            if delta < p.doubling_tol or attempt == p.max_doublings:
                break
            traj, steps = fine, 2 * steps
        rec.step_doubling_delta = delta
        if delta >= p.doubling_tol:
            rec.status = f"unconverged: step doubling moves the fidelity by {delta:.2e} at {steps} steps"
    rec.steps = steps
    rec.norm_drift = drift
    rec.f_pulse = _pulse_fidelity(setup, traj)
    if cfg.kind == "transfer":
        rec.f_transfer = transfer_fidelity(traj)
        rec.infidelity = 1.0 - rec.f_transfer
    else:
        rec.infidelity = 1.0 - rec.f_pulse
    if out_dir is not None:
        tag = f"{cfg.id}_k{cfg.nodes.kappa_mhz:g}_{strategy}"
        if cfg.outputs.controls_csv:
            g1.to_csv(out_dir / f"control_{tag}_node1.csv")
            if cfg.kind == "transfer":
                receiver_control(g1).to_csv(out_dir / f"control_{tag}_node2.csv")
        if cfg.outputs.trajectory_csv:
            traj.write_csv(out_dir / f"trajectory_{tag}.csv")
    rec.wall_time_s = time.perf_counter() - t0
    return rec


def write_calibration_csv(path, cal: Calibration, kappa: float) -> None:
    diag = cal.diagnostics
    ratio = 2.0 * diag.ratio / kappa
    nm = diag.nm_trace
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CALIBRATION_COLUMNS)
        for i, t in enumerate(diag.times):
            w.writerow([_fmt(t), _fmt(t * kappa), _fmt(ratio[i].real), _fmt(ratio[i].imag),
                        _fmt(abs(nm[i])), _fmt(math.atan2(nm[i].imag, nm[i].real)),
                        _fmt(bool(diag.c_mask[i])), _fmt(bool(diag.cdot_mask[i]))])


def _calibration_summary(cfg: ScenarioConfig, cal: Calibration) -> dict:
    pr = cal.params
    out = {"scenario_id": cfg.id, "kappa_mhz": cfg.nodes.kappa_mhz,
           "kappa_est_mhz": rad_ns_to_mhz(pr.kappa), "lamb_shift_mhz": rad_ns_to_mhz(pr.lamb_shift),
           "nm_re": complex(pr.non_markov).real, "nm_im": complex(pr.non_markov).imag,
           "nm_abs": pr.nm_modulus, "nm_phase": pr.nm_phase}
    if cal.diagnostics is not None:
        d = cal.diagnostics
        out.update({"stage_one_kappa_mhz": rad_ns_to_mhz(d.kappa_avg),
                    "stage_one_lamb_shift_mhz": rad_ns_to_mhz(d.lamb_avg),
                    "nm_trace_mean_re": d.nm_avg.real, "nm_trace_mean_im": d.nm_avg.imag,
                    "nm_trace_rel_std": d.nm_rel_std,
                    "unmasked_samples": int(d.cdot_mask.sum()), "samples": int(d.times.size)})
    return out


def calibration_report(cfg: ScenarioConfig, out_dir=None):
    """Pilot emission on node 1 alone; returns (params, diagnostics) and writes the traces."""
    if cfg.protocol.calibration != "pilot":
        raise ConfigError("calibration_report needs protocol.calibration = 'pilot'")
    link = cfg.build_link()
    single = Link(link.grid, link.disp, link.couplings.decoupled(2))
    cal = calibrate(cfg, single, LinkPropagator(single))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = f"calibration_{cfg.id}_k{cfg.nodes.kappa_mhz:g}"
        write_calibration_csv(out_dir / f"{stem}.csv", cal, resolved_kappa(cfg))
        (out_dir / f"{stem}.json").write_text(
            json.dumps(_calibration_summary(cfg, cal), indent=2, sort_keys=True))
    return cal.params, cal.diagnostics


def _error_records(cfg: ScenarioConfig, exc: Exception) -> list:
    msg = f"error: {type(exc).__name__}: {exc}"
    return [ResultRecord(cfg.id, cfg.nodes.kappa_mhz, s, feasible=False, status=msg)
            for s in cfg.protocol.strategies]


def run_point(cfg: ScenarioConfig, out_dir=None) -> list:
    """All strategies at the config's kappa; numerical failures become error records."""
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    try:
        setup = prepare_point(cfg)
        if out_dir is not None and cfg.outputs.calibration_csv and setup.calibration.diagnostics is not None:
            stem = f"calibration_{cfg.id}_k{cfg.nodes.kappa_mhz:g}"
            write_calibration_csv(out_dir / f"{stem}.csv", setup.calibration, setup.kappa)
        return [run_strategy(setup, s, out_dir) for s in cfg.protocol.strategies]
    except NUMERICAL_ERRORS as exc:
        return _error_records(cfg, exc)


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> list:
    return run_point(cfg.with_kappa(cfg.nodes.kappa_mhz), out_dir)


def _point_job(doc: dict, kappa_mhz: float, out_dir):
    from .scenario import from_dict
    return run_point(from_dict(doc).with_kappa(kappa_mhz), out_dir)


def write_results(out_dir, cfg: ScenarioConfig, records, name: str = "results") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in records:
            w.writerow(r.row())
    sidecar = {"schema_version": cfg.schema_version, "config": cfg.to_dict(),
               "columns": list(RESULT_COLUMNS), "records": len(records)}
    (out_dir / f"{name}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    with (out_dir / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_COLUMNS)
        for r in records:
            w.writerow([r.scenario_id, _fmt(r.kappa_mhz), r.strategy, f"{r.wall_time_s:.3f}"])
    return path


def sweep_kappa(cfg: ScenarioConfig, out_dir=None, workers: int = 1) -> list:
    """One record per (kappa, strategy) in config order, whatever the completion order.

    Finished points are appended to ``results.stream.csv`` as they arrive (a
    progress log); the ordered table is written at the end.
    """
    kappas = cfg.kappa_points
    if len(cfg.sweep_kappa_mhz) < 2:
        raise ConfigError("sweep needs at least two kappa values")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    out_dir = Path(out_dir) if out_dir is not None else None
    stream = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        stream = (out_dir / "results.stream.csv").open("w", newline="")
        csv.writer(stream, lineterminator="\n").writerow(RESULT_COLUMNS)
        stream.flush()
    done = {}

    def emit(i, recs):
        done[i] = recs
        if stream is not None:
            w = csv.writer(stream, lineterminator="\n")
            for r in recs:
                w.writerow(r.row())
            stream.flush()

    try:
        if workers == 1:
            for i, k in enumerate(kappas):
                emit(i, run_point(cfg.with_kappa(k), out_dir))
        else:
            doc = cfg.to_dict()
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futs = {pool.submit(_point_job, doc, k, out_dir): i for i, k in enumerate(kappas)}
                for fut in as_completed(futs):
                    emit(futs[fut], fut.result())
    finally:
        if stream is not None:
            stream.close()
    records = [r for i in range(len(kappas)) for r in done[i]]
    if out_dir is not None:
        write_results(out_dir, cfg, records)
    return records


def dmax_table(cfg: ScenarioConfig, out_dir=None) -> list:
    rows = []
    for kmhz in cfg.kappa_points:
        k = mhz_to_rad_ns(kmhz)
        scan = max_correctable_distortion(k, "scan")
        closed = max_correctable_distortion(k)
        rows.append({"kappa_mhz": kmhz, "d_max_scan_ns2": scan, "d_max_closed_ns2": closed,
                     "rel_diff": scan / closed - 1.0})
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with (out_dir / "dmax.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(rows[0]))
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
    return rows


def pulse_table(cfg: ScenarioConfig, out_dir=None) -> list:
    """Synthesize (and optionally dump) node-1 controls for every strategy and kappa."""
    rows = []
    for kmhz in cfg.kappa_points:
        c = cfg.with_kappa(kmhz)
        setup = prepare_point(c)
        for s in c.protocol.strategies:
            row = {"kappa_mhz": kmhz, "strategy": s, "feasible": True, "peak_abs_g": math.nan,
                   "status": "ok"}
            try:
                g = synthesize(setup, s)
                row["peak_abs_g"] = float(np.abs(g.values).max())
                if out_dir is not None:
                    Path(out_dir).mkdir(parents=True, exist_ok=True)
                    g.to_csv(Path(out_dir) / f"control_{c.id}_k{kmhz:g}_{s}_node1.csv")
                    if c.kind == "transfer":
                        receiver_control(g).to_csv(Path(out_dir) / f"control_{c.id}_k{kmhz:g}_{s}_node2.csv")
            except SYNTHESIS_ERRORS as exc:
                row.update(feasible=False, status=f"infeasible: {exc}")
            rows.append(row)
    if out_dir is not None:
        with (Path(out_dir) / "pulses.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kappa_mhz", "strategy", "feasible", "peak_abs_g", "status"])
            for r in rows:
                w.writerow([_fmt(v) for v in r.values()])
    return rows


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlink", description="Pulse design and verification for waveguide state transfer.")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb, text in [("pulse", "synthesize and dump node controls"),
                       ("emit", "single-node emission with calibration report"),
                       ("transfer", "full pitch-and-catch protocol at one kappa"),
                       ("sweep", "all strategies over the configured kappa grid"),
                       ("dmax", "maximum correctable distortion: scan vs closed form")]:
        sp = sub.add_parser(verb, help=text)
        sp.add_argument("--config", required=True, help="scenario JSON document")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--steps", type=int, default=None, help="override protocol.steps")
        sp.add_argument("--workers", type=int, default=1, help="parallel sweep points")
    return ap


def _any_errors(records) -> bool:
    return any(r.status.startswith("error") for r in records)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load(args.config)
        if args.steps is not None:
            cfg = cfg.with_steps(args.steps)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.verb == "dmax":
            for r in dmax_table(cfg, out):
                print(f"kappa/2pi={r['kappa_mhz']:g} MHz  D_max scan={r['d_max_scan_ns2']:.5g} ns^2  "
                      f"closed={r['d_max_closed_ns2']:.5g} ns^2  rel={r['rel_diff']:+.3%}")
            return 0
        if args.verb == "pulse":
            rows = pulse_table(cfg, out)
            for r in rows:
                print(f"kappa/2pi={r['kappa_mhz']:g} MHz  {r['strategy']:<20} {r['status']}")
            return 0
        if args.verb == "emit":
            from dataclasses import replace
            ecfg = replace(cfg, kind="emission")
            params, diag = calibration_report(ecfg, out)
            print(f"kappa/2pi={rad_ns_to_mhz(params.kappa):.6g} MHz  dw/2pi={rad_ns_to_mhz(params.lamb_shift):.6g} MHz  "
                  f"N={complex(params.non_markov):.5g}  N(t) rel std={diag.nm_rel_std:.3g}")
            records = run_scenario(ecfg, out)
            write_results(out, ecfg, records)
        elif args.verb == "transfer":
            records = run_scenario(cfg, out)
            write_results(out, cfg, records)
        else:
            records = sweep_kappa(cfg, out, args.workers)
        for r in records:
            print(f"kappa/2pi={r.kappa_mhz:g} MHz  {r.strategy:<20} 1-F={r.infidelity:.3e}  {r.status}")
        return 3 if _any_errors(records) else 0
    except (ConfigError, LinkConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS + SYNTHESIS_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
