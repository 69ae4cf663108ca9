import dataclasses
import math

import numpy as np
import pytest

from resonlab import reduced, spectra
from resonlab.model import AlphaProfile, PartitionFn, adiabatic_epsilon, level_energy
from resonlab.spectra import ResonanceTrajectory, Resonance

from conftest import (chi_of, left_alpha, left_params, pulse_alpha, pulse_params,
                      right_params, window_of)


def make_traj(P, al, t_out, n_per_unit=400):
    return reduced.dense_trajectory(P, al, t_out, n_per_unit=n_per_unit)


@pytest.fixture(scope="module")
def left_setup():
    P = left_params()
    al = left_alpha(P)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 41)
    traj = make_traj(P, al, t_out)
    return P, al, g, t_out, traj


def test_frozen_alpha_fixed_point():
    P = left_params()
    al = left_alpha(P, frozen=True)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 21)
    traj = make_traj(P, al, t_out, n_per_unit=100)
    a_rk4, a_closed, diff = reduced.solve_reduced(traj, g, P)
    a0 = float(g(math.sqrt(level_energy(P, al.value(0.0)))))
    # the fixed point is exact up to the cumulative-quadrature fill of the
    # reporting nodes (solver tolerance 1e-8)
    assert np.max(np.abs(a_rk4 - a0)) < 1e-8
    assert np.max(np.abs(a_closed - a0)) < 1e-8
    assert diff < 1e-10


def test_zero_width_keeps_initial_value():
    # artificial Gamma = 0 trajectory: no relaxation at all
    P = left_params()
    al = left_alpha(P)
    g = window_of(P, al)
    t = np.linspace(0.0, P.T, 201)
    res = [Resonance(E=complex(0.6, 0.0), alpha=al.value(ti), residual=0.0,
                     iterations=0) for ti in t]
    traj = ResonanceTrajectory(times=t, resonances=res, alpha=al, params=P)
    a_rk4, a_closed, diff = reduced.solve_reduced(traj, g, P)
    assert np.max(np.abs(a_rk4 - a_rk4[0])) == 0.0
    assert np.max(np.abs(a_closed - a_closed[0])) < 1e-14


def test_rk4_vs_closed_form(left_setup):
    P, al, g, t_out, traj = left_setup
    _, _, diff = reduced.solve_reduced(traj, g, P)
    assert diff < 1e-8


def test_long_time_limit_with_late_freeze():
    # freeze the ramp after T/2 (pulse of the smoothstep already completed):
    # a(t) then relaxes toward the frozen target at rate 2*Gamma/eps
    P = left_params(T=6.0)
    al = AlphaProfile(alpha0=-1.3, amplitude=2.0 * P.h / 3.0, T=2.0,
                      kind="smoothstep")   # constant for t >= 2
    g = window_of(P, al)
    t_out = np.linspace(0.0, 6.0, 61)
    traj = make_traj(P, al, t_out, n_per_unit=200)
    a_rk4, _, _ = reduced.solve_reduced(traj, g, P)
    eps = adiabatic_epsilon(P, al)
    lamT = level_energy(P, al.value(6.0))
    target = abs(al.value(6.0) / al.value(0.0)) ** 3 * float(g(math.sqrt(lamT)))
    GammaT = traj.resonances[-1].Gamma
    bound = abs(a_rk4[np.searchsorted(traj.times, 2.0)] - target) \
        * math.exp(-2.0 * GammaT / eps * 4.0)
    assert abs(a_rk4[-1] - target) < 2.0 * bound + 1e-9


def test_relaxation_monotonicity():
    # frozen target: |a(t) - target| is nonincreasing (linear relaxation)
    P = left_params()
    al = left_alpha(P, frozen=True)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 21)
    traj = make_traj(P, al, t_out, n_per_unit=100)
    a0 = float(g(math.sqrt(level_energy(P, al.value(0.0))))) + 0.3
    eps = adiabatic_epsilon(P, al)
    rate = 2.0 * traj.Gamma / eps
    target = np.abs(al.value(traj.times) / al.value(0.0)) ** 3 \
        * g(np.sqrt(level_energy(P, al, traj.times)))
    # integrate from a perturbed start to see the relaxation explicitly
    I = reduced._cumulative_simpson(traj.times, rate).real
    a = np.exp(-I) * (a0 - target[0]) + target
    gap = np.abs(a - target)
    assert np.all(np.diff(gap) <= 1e-12)


def test_adiabatic_weight_estimators(left_setup):
    P, al, g, t_out, traj = left_setup
    lead0, ratio0 = reduced.adiabatic_weight(0.0, traj, P)
    assert lead0 == 1.0
    assert ratio0 == pytest.approx(1.0, abs=1e-9)
    lead, ratio = reduced.adiabatic_weight(P.T, traj, P)
    # |alpha| decreasing => both estimators < 1
    assert lead < 1.0 and ratio < 1.0
    # norm-ratio approaches the closed form as h decreases
    devs = []
    for h in (0.1, 0.06):
        Ph = left_params(h=h)
        alh = left_alpha(Ph)
        trj = make_traj(Ph, alh, np.linspace(0.0, Ph.T, 5), n_per_unit=60)
        l_, r_ = reduced.adiabatic_weight(Ph.T, trj, Ph)
        devs.append(abs(l_ - r_))
    assert devs[1] < devs[0]


def test_j1_properties(left_setup):
    P, al, g, t_out, traj = left_setup
    J1 = reduced.correction_j1(traj, g)
    assert J1[0] == 0.0
    assert np.all(J1 >= 0.0)
    # amplitude of size h makes J1 = O(h^2): rescaled values stay bounded
    vals = []
    for h in (0.12, 0.1, 0.08, 0.06):
        Ph = left_params(h=h)
        alh = AlphaProfile(alpha0=-1.3, amplitude=2.0 * h / 3.0, T=Ph.T,
                           kind="smoothstep")
        trj = make_traj(Ph, alh, np.linspace(0, Ph.T, 5), n_per_unit=50)
        vals.append(float(np.max(reduced.correction_j1(trj, window_of(Ph, alh)))) / h**2)
    assert max(vals) / min(vals) < 3.0


def test_j1_full_formula_crosscheck():
    # |1-mu|^2 <chi G, G> int g|C|^2/(2 pi h) vs the closed form, within the
    # desk-scale remainder budget
    import resonlab.scattering as sc
    from resonlab import greens
    P = left_params(h=0.08)
    al = left_alpha(P)
    g = window_of(P, al)
    chi = chi_of(P)
    t = P.T
    traj = make_traj(P, al, np.linspace(0.0, P.T, 5), n_per_unit=60)
    r = traj.at(t)
    J1_closed = float(reduced.correction_j1(traj, g)[-1])
    # direct evaluation
    lead, ratio = reduced.adiabatic_weight(t, traj, P)
    I = sc.lorentzian_integral(t, al, g, P, resonance=r)
    xs = np.linspace(P.a, P.b, 8001)
    Gv = greens.green_xc(r.E, xs, P)
    w = np.ones(xs.size)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    chiGG = float(np.sum(w * chi(xs) * np.abs(Gv) ** 2) * (xs[1] - xs[0]) / 3.0)
    J1_direct = abs(1.0 - ratio) ** 2 * chiGG * I
    assert J1_direct == pytest.approx(J1_closed, rel=0.35)


def test_j2_zero_cases(left_setup):
    P, al, g, t_out, traj = left_setup
    J2 = reduced.correction_j2(traj, g, P)
    assert J2[0] == 0.0
    frozen = left_alpha(P, frozen=True)
    trjf = make_traj(P, frozen, np.linspace(0, P.T, 9), n_per_unit=60)
    assert np.all(reduced.correction_j2(trjf, window_of(P, frozen), P) == 0.0)


def test_j2_boundary_layer_peak():
    P = pulse_params()
    al = pulse_alpha(P)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 41)
    traj = make_traj(P, al, t_out)
    sol = reduced.assemble_A_model(traj, g, P)
    rows = sol.sample(t_out)
    J2 = rows["J2"]
    t_star = 0.35 * P.T
    i_max = int(np.argmax(np.abs(J2)))
    dt = t_out[1] - t_out[0]
    assert abs(t_out[i_max] - t_star) <= 5.0 * dt
    assert J2[0] == 0.0


def test_j2_decay_away_from_layer():
    # |J2| <= C eps / |lambda_t - lambda_0| when the detuning dominates
    P = pulse_params()
    al = pulse_alpha(P)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 121)
    traj = make_traj(P, al, t_out)
    eps = adiabatic_epsilon(P, al)
    J2 = reduced.correction_j2(traj, g, P)
    lam = level_energy(P, al, traj.times)
    det = np.abs(lam - lam[0])
    sel = det > 10.0 * eps
    assert np.all(np.abs(J2[sel]) <= 12.0 * eps / det[sel])


def test_assemble_left_and_gauge_linearity(left_setup):
    P, al, g, t_out, traj = left_setup
    sol = reduced.assemble_A_model(traj, g, P)
    assert sol.case == "left"
    assert np.all(np.isfinite(sol.A_model))
    gmax = 1.0  # max of the window profile
    assert np.all(sol.A_model >= -1e-12) and np.all(sol.A_model <= 1.5 * gmax)

    # frozen drive: A_model stays at g(sqrt(lambda_0))
    frozen = left_alpha(P, frozen=True)
    trjf = make_traj(P, frozen, np.linspace(0, P.T, 9), n_per_unit=60)
    solf = reduced.assemble_A_model(trjf, window_of(P, frozen), P)
    a0 = float(window_of(P, frozen)(math.sqrt(level_energy(P, frozen.value(0.0)))))
    assert np.max(np.abs(solf.A_model - a0)) < 1e-8

    # scaling g by a constant scales every component linearly
    class ScaledG(PartitionFn):
        def __call__(self, k):
            return 2.5 * PartitionFn.__call__(self, k)

    g2 = ScaledG(lambda0=g.lambda0, h=g.h, d0=g.d0)
    sol2 = reduced.assemble_A_model(traj, g2, P)
    assert np.allclose(sol2.A_model, 2.5 * sol.A_model, rtol=1e-10, atol=1e-12)
    assert np.allclose(sol2.a, 2.5 * sol.a, rtol=1e-10, atol=1e-12)


def test_right_case_bound_report():
    P = right_params()
    al = AlphaProfile(alpha0=-1.3, amplitude=2.0 * P.h / 3.0, T=P.T,
                      kind="smoothstep")
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 9)
    traj = make_traj(P, al, t_out, n_per_unit=60)
    sol = reduced.assemble_A_model(traj, g, P)
    assert sol.case == "right"
    assert sol.A_model is None
    beta = abs(al.value(0.0)) * ((P.c - P.a) - (P.b - P.c))
    assert sol.bound.beta_coeff == pytest.approx(beta, rel=1e-12)
    assert sol.bound.bound_e_beta_over_h == pytest.approx(math.exp(-beta / P.h), rel=1e-12)
    assert sol.bound.bound_e_beta_over_h2 == pytest.approx(
        math.exp(-beta / P.h**2), rel=1e-12)
    with pytest.raises(reduced.CaseMismatchError):
        reduced.solve_reduced(traj, g, P)


def test_dense_grid_refines_boundary_layer():
    # ramp large enough that the late-time detuning clearly exceeds 3*eps:
    # early times (layer) must be refined relative to late times
    P = left_params()
    al = AlphaProfile(alpha0=-1.3, amplitude=0.3, T=P.T, kind="smoothstep")
    t_out = np.linspace(0.0, P.T, 11)
    grid = reduced.dense_time_grid(P, al, t_out, n_per_unit=40, layer_refine=4)
    assert np.all(np.isin(np.round(t_out, 12), np.round(grid, 12)))
    steps = np.diff(grid)
    near = grid[:-1] < 0.15            # detuning still < 3*eps here
    far = grid[:-1] > 1.5              # fully detuned
    assert steps[near].max() < steps[far].min() / 2.0
