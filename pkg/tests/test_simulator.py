import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp
from scipy.linalg import expm

from qlink.linkmodel import LinearDispersion, Link, RectangularGuideDispersion, build_link
from qlink.pulseshaper import EffectiveModelParams, analytic_sech_control
from qlink.simulator import (COMPOSITIONS, FullState, InsufficientData, LinkPropagator, SimConfig,
                             effective_series, estimate_params, estimate_params_from_series,
                             gamma_extract, kernel_integrals, residual_populations, run_emission,
                             simulate, step)
from qlink.units import ghz_to_rad_ns, mhz_to_rad_ns

KAPPA = mhz_to_rad_ns(200.0)


def small_link(n=41, length=2.0, disp=None, law="sqrt_omega"):
    disp = disp or RectangularGuideDispersion()
    return build_link(length, n, disp, ghz_to_rad_ns(8.6), KAPPA, law)


def dense_hamiltonian(link, frame, deltas, g1, g2):
    """Full (q1, q2, c1, c2, psi) Hamiltonian at fixed controls, written out term by term."""
    nodes = link.couplings.nodes
    n = link.grid.n_modes
    h = np.zeros((n + 4, n + 4), complex)
    for j, g in enumerate((g1, g2)):
        h[j, j] = deltas[j] - frame
        h[2 + j, 2 + j] = nodes[j].omega_r - frame
        h[j, 2 + j] = g
        h[2 + j, j] = np.conj(g)
        h[2 + j, 4:] = nodes[j].couplings
        h[4:, 2 + j] = nodes[j].couplings
    h[np.arange(4, n + 4), np.arange(4, n + 4)] = link.frequencies - frame
    return h


def control(t):
    return 0.4 * KAPPA * np.exp(-((KAPPA * t) ** 2) / 8) * np.exp(0.3j * KAPPA * t)


def control2(t):
    return 0.3 * KAPPA / np.cosh(KAPPA * (t - 2 / KAPPA) / 2)


def test_composition_weights_are_consistent():
    for order, w in COMPOSITIONS.items():
        assert sum(w) == pytest.approx(1.0, abs=1e-14)
        assert len(w) == 3 ** ((order - 2) // 2)
        assert np.allclose(w, w[::-1])


def test_isolated_node_rabi_oscillation():
    link = small_link()
    isolated = Link(link.grid, link.disp, link.couplings.decoupled(1).decoupled(2))
    w_r = link.couplings.node(1).omega_r
    g = 0.7 * np.exp(0.4j)
    cfg = SimConfig(0.0, 12.0, 600, frame_frequency=w_r)
    traj = simulate(cfg, isolated, lambda t: g)
    t = traj.times
    assert np.max(np.abs(traj.q[:, 0] - np.cos(abs(g) * t))) < 1e-12
    expected_c = -1j * np.conj(g) / abs(g) * np.sin(abs(g) * t)
    assert np.max(np.abs(traj.c[:, 0] - expected_c)) < 1e-12


def test_static_block_matches_matrix_exponential():
    link = small_link()
    frame = link.carrier_frequency
    state = FullState(np.zeros(2, complex), np.array([1.0, 0.0], complex), np.zeros(link.grid.n_modes, complex))
    cfg = SimConfig(0.0, 5.0, 10, frame_frequency=frame)
    traj = simulate(cfg, link, initial=state)
    deltas = [n.delta for n in link.couplings.nodes]
    y0 = np.concatenate([state.q, state.c, state.psi])
    y = expm(-1j * dense_hamiltonian(link, frame, deltas, 0, 0) * 5.0) @ y0
    fin = traj.final_state()
    assert np.max(np.abs(np.concatenate([fin.q, fin.c, fin.psi]) - y)) < 1e-12


def reference_solution(link, frame, t_end, g1, g2):
    deltas = [n.delta for n in link.couplings.nodes]
    h0 = dense_hamiltonian(link, frame, deltas, 0, 0)

    def rhs(t, y):
        h = h0.copy()
        for j, g in enumerate((g1(t), g2(t))):
            h[j, 2 + j] = g
            h[2 + j, j] = np.conj(g)
        return -1j * (h @ y)

    y0 = np.zeros(link.grid.n_modes + 4, complex)
    y0[0] = 1.0
    sol = solve_ivp(rhs, (-4 / KAPPA, t_end), y0, method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1]


@pytest.mark.parametrize("order,steps,tol", [(4, 400, 1e-7), (6, 200, 1e-7)])
def test_full_model_against_an_independent_ode_solver(order, steps, tol):
    link = small_link()
    frame = link.carrier_frequency
    t_end = 8 / KAPPA
    ref = reference_solution(link, frame, t_end, control, control2)
    cfg = SimConfig(-4 / KAPPA, t_end, steps, frame_frequency=frame, order=order)
    fin = simulate(cfg, link, control, control2).final_state()
    got = np.concatenate([fin.q, fin.c, fin.psi])
    assert np.max(np.abs(got - ref)) < tol


@pytest.mark.parametrize("order", [2, 4, 6])
def test_convergence_order(order):
    link = small_link(n=21)
    frame = link.carrier_frequency

    def final(steps):
        cfg = SimConfig(-4 / KAPPA, 4 / KAPPA, steps, frame_frequency=frame, order=order)
        f = simulate(cfg, link, control, control2).final_state()
        return np.concatenate([f.q, f.c, f.psi])

    ref = final(1600)
    e1 = np.max(np.abs(final(50) - ref))
    e2 = np.max(np.abs(final(100) - ref))
    assert math.log2(e1 / e2) == pytest.approx(order, abs=0.5)


@given(st.floats(min_value=0.1, max_value=2.0), st.floats(min_value=-math.pi, max_value=math.pi))
@settings(max_examples=10, deadline=None)
def test_norm_is_conserved(amp, phase):
    link = small_link()
    g = lambda t: amp * KAPPA * np.exp(1j * phase) / np.cosh(KAPPA * t)
    traj = simulate(SimConfig(-10 / KAPPA, 10 / KAPPA, 300), link, g, g)
    assert traj.norm_drift < 1e-12
    pops = residual_populations(traj)
    assert sum(pops.values()) == pytest.approx(1.0, abs=1e-12)


def test_single_step_matches_simulate():
    link = small_link()
    prop = LinkPropagator(link)
    cfg = SimConfig(0.0, 0.5, 2, frame_frequency=prop.frame)
    traj = simulate(cfg, link, control, None, propagator=prop)
    out = step(FullState.excited_qubit(link.grid.n_modes), 0.0, 0.25, prop, control)
    out = step(out, 0.25, 0.25, prop, control)
    assert np.allclose(out.q, traj.q[-1], atol=1e-14)
    assert np.allclose(out.c, traj.c[-1], atol=1e-14)
    with pytest.raises(ValueError):
        step(out, 0.0, -1.0, prop)


def test_changing_frame_only_changes_phases():
    link = small_link()
    a = LinkPropagator(link)
    other = a.frame + 0.37
    b = a.with_frame(other)
    c = LinkPropagator(link, other)
    assert np.allclose(np.sort(b.energies), np.sort(c.energies), atol=1e-10)
    cfg = SimConfig(-4 / KAPPA, 4 / KAPPA, 200, frame_frequency=other)
    ta = simulate(cfg, link, control, propagator=a)
    tc = simulate(cfg, link, control, propagator=c)
    assert np.allclose(ta.q, tc.q, atol=1e-10)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 1)
    with pytest.raises(ValueError):
        SimConfig(1.0, 1.0, 10)
    with pytest.raises(ValueError):
        SimConfig(0.0, 1.0, 10, order=3)
    cfg = SimConfig.in_kappa_units(2.0, -4, 4, 8)
    assert cfg.t_start == -2.0 and cfg.dt == pytest.approx(0.5)
    assert cfg.times.size == 9


def test_snapshots_include_requested_times():
    link = small_link()
    cfg = SimConfig(-1.0, 1.3, 23, record_modes_every=100, snapshot_times=(0.0,))
    traj = simulate(cfg, link, control)
    assert np.min(np.abs(traj.mode_times)) <= cfg.dt / 2
    assert traj.mode_times[-1] == traj.times[-1]


def test_gamma_two_ways_and_csv(tmp_path):
    link = small_link()
    traj = run_emission(SimConfig(-6 / KAPPA, 6 / KAPPA, 300), link,
                        analytic_sech_control(KAPPA, 0.0, np.linspace(-6 / KAPPA, 6 / KAPPA, 601)))
    gamma_extract(traj, 1, check=True, tol=1e-10)
    path = tmp_path / "traj.csv"
    traj.write_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0][:3] == ["t_ns", "re_q1", "im_q1"] and len(rows) == traj.times.size + 1
    traj.write_modes_csv(tmp_path / "modes.csv")


def test_kernel_integrals_against_quadrature():
    link = small_link()
    nd = link.couplings.node(1)
    nu = link.frequencies - nd.omega_r - 0.05
    g2 = nd.couplings**2

    def kern(s):
        return np.sum(g2 * np.exp(-1j * nu * s))

    def cquad(f, s):
        opts = dict(limit=400, epsabs=0.0, epsrel=1e-11)
        return quad(lambda u: f(u).real, 0, s, **opts)[0] + 1j * quad(lambda u: f(u).imag, 0, s, **opts)[0]

    for s in (1e-4, 0.3, 2.0):
        k1, k2 = kernel_integrals(link, 1, s, 0.05)
        r1 = cquad(kern, s)
        # nested int_{t0}^t dtau int_{t0}^tau K(t - tau') reduces to int_0^s u K(u) du
        r2 = cquad(lambda u: u * kern(u), s)
        assert k1 == pytest.approx(r1, rel=1e-8, abs=1e-14)
        assert k2 == pytest.approx(r2, rel=1e-8, abs=1e-14)


@given(st.floats(min_value=50.0, max_value=400.0), st.floats(min_value=-0.05, max_value=0.05),
       st.floats(min_value=-0.05, max_value=0.1), st.floats(min_value=-0.05, max_value=0.05))
@settings(max_examples=8, deadline=None)
def test_estimator_recovers_effective_model_parameters(kappa_mhz, dw_kappa, n_re, n_im):
    k = mhz_to_rad_ns(kappa_mhz)
    truth = EffectiveModelParams(k, dw_kappa * k, complex(n_re, n_im))
    t = np.linspace(-12 / k, 12 / k, 3001)
    pulse = analytic_sech_control(k, 0.0, t)
    q, c, cdot, gamma = effective_series(pulse, truth, t)
    est, diag = estimate_params_from_series(t, c, cdot, gamma)
    assert est.kappa == pytest.approx(k, rel=1e-6)
    assert est.lamb_shift == pytest.approx(truth.lamb_shift, abs=1e-6 * k)
    assert abs(complex(est.non_markov) - truth.non_markov) < 1e-6
    assert diag.nm_rel_std < 1e-3 or abs(truth.non_markov) < 1e-3


def test_average_estimator_is_the_stage_one_mean():
    k = KAPPA
    truth = EffectiveModelParams(k, 0.0, 0j)
    t = np.linspace(-12 / k, 12 / k, 3001)
    q, c, cdot, gamma = effective_series(analytic_sech_control(k, 0.0, t), truth, t)
    est, diag = estimate_params_from_series(t, c, cdot, gamma, method="average")
    assert est.kappa == pytest.approx(diag.kappa_avg) and est.lamb_shift == pytest.approx(diag.lamb_avg)
    assert est.kappa == pytest.approx(k, rel=1e-6)
    with pytest.raises(ValueError):
        estimate_params_from_series(t, c, cdot, gamma, method="median")


def test_estimator_needs_data():
    t = np.linspace(0, 1, 20)
    c = np.zeros(20, complex)
    c[3] = 1.0
    with pytest.raises(InsufficientData):
        estimate_params_from_series(t, c, c, c)


def test_markov_limit_on_a_linear_flat_link():
    # dense long link: Gamma/c averages kappa/2 and the shift vanishes
    link = build_link(5.0, 351, LinearDispersion(0.2), ghz_to_rad_ns(8.0), KAPPA, "flat")
    w_r = link.couplings.node(1).omega_r
    cfg = SimConfig.in_kappa_units(KAPPA, -12, 12, 3000, frame_frequency=w_r)
    traj = run_emission(cfg, link, analytic_sech_control(KAPPA, 0.0, cfg.times))
    est, _ = estimate_params(traj)
    assert est.kappa == pytest.approx(KAPPA, rel=1e-3)
    assert abs(est.lamb_shift) < 1e-3 * KAPPA
