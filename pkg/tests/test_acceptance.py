"""Acceptance criteria for the driven shape-resonance laboratory.

One test per criterion; each prints a single [PASS]/[FAIL] line with the
measured numbers (run with -s to see them).  The heavy propagation runs
(criteria 7-9) share session fixtures.  Tolerances are fixed here, not
calibrated at run time.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from resonlab import greens, propagator as pr, reduced, scattering as sc, spectra
from resonlab.model import (AlphaProfile, ModelParams, PartitionFn,
                            adiabatic_epsilon, level_energy)

from conftest import (chi_of, left_alpha, left_params, pulse_alpha, pulse_params,
                      right_params, window_of)


def report(num: int, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {detail}")
    assert ok, f"criterion {num}: {detail}"


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="session")
def left_run():
    """Left preset: reduced solution + ramped and frozen full runs (crit 8, 9)."""
    P = left_params()
    al = left_alpha(P)
    alf = left_alpha(P, frozen=True)
    g = window_of(P, al)
    chi = chi_of(P)
    t_out = np.linspace(0.0, P.T, 81)

    traj = reduced.dense_trajectory(P, al, t_out)
    sol = reduced.assemble_A_model(traj, g, P)
    rows = sol.sample(t_out)

    E_lo, E_hi = float(traj.E_R.min()), float(traj.E_R.max())
    gam = float(traj.Gamma.max())
    panels = sc.window_panels(g, E_lo, E_hi, gam)
    order = max(4, 64 // len(panels))
    k, w = sc.window_nodes(g, E_lo, E_hi, gam, order=order)
    grid = pr.make_grid(P, points_per_h=12, L=1.5)

    t0 = time.time()
    ramped = pr.observable_A(al, g, chi, grid, P, k, w, t_out,
                             workers=2, scheme="scattered")
    frozen = pr.observable_A(alf, g, chi, grid, P, k, w, t_out,
                             workers=2, scheme="scattered")
    wall = time.time() - t0
    return dict(P=P, t_out=t_out, rows=rows, sol=sol, ramped=ramped,
                frozen=frozen, wall=wall, k_nodes=k.size)


@pytest.fixture(scope="session")
def right_runs(left_run):
    """Right-case ladder (criterion 9)."""
    out = {}
    for h in (0.105, 0.095, 0.085):
        P = right_params(h=h)
        al = AlphaProfile(alpha0=-1.3, amplitude=2.0 * h / 3.0, T=P.T,
                          kind="smoothstep")
        g = window_of(P, al)
        chi = chi_of(P)
        traj = spectra.resonance_trajectory(al, P, np.linspace(0, P.T, 25))
        E_lo, E_hi = float(traj.E_R.min()), float(traj.E_R.max())
        gam = float(traj.Gamma.max())
        panels = sc.window_panels(g, E_lo, E_hi, gam)
        order = max(4, 48 // len(panels))
        k, w = sc.window_nodes(g, E_lo, E_hi, gam, order=order)
        grid = pr.make_grid(P, points_per_h=12, L=1.5)
        t_out = np.linspace(0.0, P.T, 49)
        out[h] = pr.observable_A(al, g, chi, grid, P, k, w, t_out,
                                 workers=2, scheme="scattered").A
    return out


# ---------------------------------------------------------------- criteria

def test_criterion_01_resonance_equation(presets):
    worst_resid, worst_iters = 0.0, 0
    counts = []
    for name, (P, al, g, chi) in presets.items():
        a0 = al.value(0.0)
        r = spectra.find_resonance(a0, P)
        F = abs(1.0 + P.h * a0 * greens.green_cc(r.E, P).value)
        worst_resid = max(worst_resid, F)
        worst_iters = max(worst_iters, r.iterations)
        counts.append(spectra.winding_count(a0, P))
    ok = worst_resid < 1e-12 and worst_iters <= 8 and all(c == 1 for c in counts)
    report(1, ok, f"|F(E_res)| max {worst_resid:.2e} (<1e-12), "
                  f"Newton iters max {worst_iters} (<=8), contour counts {counts}")


def test_criterion_02_resonance_expansion():
    alpha = -1.0
    base = pulse_params(h=0.1, theta0=0j)  # a=0 b=1 c=0.3 V0=1
    target = -(alpha**2 / 2.0) * spectra.p0_closed_form(alpha, base.V0)
    errs = []
    for h in (0.12, 0.10, 0.08, 0.06):
        P = dataclasses.replace(base, h=h)
        r = spectra.find_resonance(alpha, P)
        dev = (r.E - (P.V0 - alpha**2 / 4.0)) / math.exp(-abs(alpha) * P.d_edge / h)
        errs.append(abs(dev - target) / abs(target))
    ok = all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 0.05
    report(2, ok, "rescaled deviation rel errs "
                  + ", ".join(f"{e:.3f}" for e in errs)
                  + " (monotone, last < 0.05)")


def test_criterion_03_p0_closed_form():
    P = pulse_params(h=0.1, theta0=0j)
    rng = np.random.default_rng(2024)
    worst = 0.0
    n = 0
    while n < 20:
        alpha = -2.0 * math.sqrt(P.V0) * rng.random()
        if alpha > -1e-3:
            continue
        n += 1
        E0 = P.V0 - alpha**2 / 4.0
        _, p = greens.phase_factors(E0, P)
        p0 = spectra.p0_closed_form(alpha, P.V0)
        worst = max(worst, abs(p - p0))
    ok = worst < 1e-12
    report(3, ok, f"|p(E0) - p0 closed form| max {worst:.2e} over 20 random alpha (<1e-12)")


def test_criterion_04_scattering_exactness():
    P = pulse_params(h=0.1, theta0=0j)
    g = PartitionFn(lambda0=0.75, h=P.h, d0=P.d0)
    klo, khi = g.k_range
    worst_u, worst_ode, worst_T = 0.0, 0.0, 0.0
    for k in np.linspace(klo + 1e-6, khi - 1e-6, 40):
        st = sc.scattering_state(float(k), P)
        worst_u = max(worst_u, abs(abs(st.R) ** 2 + abs(st.T) ** 2 - 1.0))
        xs = np.linspace(P.a + 0.02, P.b - 0.02, 20)
        res = -P.h**2 * sc.wave_value(st, xs, 2) \
            + (P.V0 - k * k) * sc.wave_value(st, xs, 0)
        scale = max(1.0, float(np.max(np.abs(sc.wave_value(st, xs)))))
        worst_ode = max(worst_ode, float(np.max(np.abs(res))) / scale)
        kap = math.sqrt(P.V0 - k * k)
        T2 = 1.0 / (1.0 + P.V0**2 * math.sinh(kap * P.l / P.h) ** 2
                    / (4.0 * k * k * kap * kap))
        worst_T = max(worst_T, abs(abs(st.T) ** 2 - T2))
    ok = worst_u < 1e-12 and worst_ode < 1e-10 and worst_T < 1e-10
    report(4, ok, f"|R|^2+|T|^2-1 max {worst_u:.2e} (<1e-12), ODE residual "
                  f"{worst_ode:.2e} (<1e-10), |T|^2 vs transfer matrix {worst_T:.2e} (<1e-10)")


def test_criterion_05_window_integral():
    alpha = AlphaProfile(alpha0=-1.0, amplitude=0.0, T=1.0, kind="constant")
    rels = []
    for h in (0.12, 0.10, 0.08, 0.06):
        P = pulse_params(h=h, theta0=0j, d0=1.0)
        g = PartitionFn(lambda0=0.75, h=h, d0=1.0)
        r = spectra.find_resonance(-1.0, P)
        val = sc.lorentzian_integral(0.0, alpha, g, P, resonance=r)
        lim = (h / 2.0) * g(math.sqrt(0.75))
        rels.append(abs(val - lim) / lim)
    ok = all(b < a for a, b in zip(rels, rels[1:])) and rels[-1] < 0.10
    report(5, ok, "deviation from (h|a|^3/2) g(sqrt(lam)): "
                  + ", ".join(f"{e:.3f}" for e in rels)
                  + " (monotone, last < 0.10)")


def test_criterion_06_krein_convergence():
    P = left_params()
    z = 0.5 + 0.8j
    alpha0 = -1.3
    Gcc = greens.green_cc(z, P).value
    errs, dxs = [], []
    for pph in (16, 32, 64, 128):
        grid = pr.make_grid(P, points_per_h=pph, L=1.0)
        Hd = pr.assemble(alpha0, P.theta0, grid, P)
        f = np.zeros(grid.n, complex)
        f[grid.jc] = 1.0 / grid.dx
        u_d = pr.resolvent_apply(Hd, z, f)
        u_ex = pr.sample_green(z, grid, P) / (1.0 + P.h * alpha0 * Gcc)
        sl = slice(grid.ja, grid.jb + 1)
        errs.append(float(np.max(np.abs(u_d[sl] - u_ex[sl]))
                          / np.max(np.abs(u_ex[sl]))))
        dxs.append(grid.dx)
    slope = float(np.polyfit(np.log(dxs), np.log(errs), 1)[0])
    ok = slope >= 1.9
    report(6, ok, f"Krein rank-one vs discrete resolvent: observed order {slope:.2f} "
                  f"(>=1.9), errors " + ", ".join(f"{e:.1e}" for e in errs))


def test_criterion_07_contractivity_and_adiabatic_trend():
    # fixed grid budget: dx tied to the finer h of the ladder
    dx_budget = 0.08 / 12.0
    sups, growths = [], []
    for h in (0.12, 0.08):
        P = left_params(h=h, theta0=0.02j, T=1.0)
        al = AlphaProfile(alpha0=-1.3, amplitude=2.0 * h / 3.0, T=1.0,
                          kind="smoothstep")
        t_out = np.linspace(0.0, 1.0, 21)
        traj = reduced.dense_trajectory(P, al, t_out, n_per_unit=400)
        grid = pr.make_grid(P, L=1.5, dx=dx_budget)
        out = pr.adiabatic_check(traj, grid, P, t_out=t_out)
        sups.append(float(out["delta"].max()))
        growths.append(out["growth_max"])
    ok = max(growths) <= 1.0 + 1e-6 and sups[1] < sups[0]
    report(7, ok, f"per-step growth max {max(growths):.9f} (<=1+1e-6); "
                  f"sup delta {sups[0]:.3f} (h=0.12) -> {sups[1]:.3f} (h=0.08), decreasing")


def test_criterion_08_reduced_vs_full(left_run):
    rows = left_run["rows"]
    ramped = left_run["ramped"]
    frozen = left_run["frozen"]
    ref = float(np.max(np.abs(rows["A_model"])))
    track = float(np.max(np.abs(ramped.A - rows["A_model"])) / ref)
    drift = float(np.max(np.abs(frozen.A - frozen.A[0])) / frozen.A[0])
    ok = track < 0.20 and drift < 0.02
    report(8, ok, f"max|A_full - A_model|/max A_model = {track:.3f} (<0.20); "
                  f"frozen-drive control drift = {drift:.2e} (<0.02); "
                  f"{left_run['k_nodes']} modes, wall {left_run['wall']:.0f}s")


def test_criterion_09_right_case_suppression(left_run, right_runs):
    A_left = left_run["ramped"].A          # dt = 0.025 sampling
    hs = sorted(right_runs)
    A_right = right_runs[0.085]
    n = A_right.size                        # right run covers [0, 1.2]
    ratio = float(np.max(A_right / A_left[:n]))
    lnA = [math.log(float(np.max(right_runs[h]))) for h in hs]
    beta_hat = -float(np.polyfit([1.0 / h for h in hs], lnA, 1)[0])
    ok = ratio < 0.05 and beta_hat > 0.0
    report(9, ok, f"A_right/A_left max {ratio:.4f} (<0.05) at matched times; "
                  f"fitted decay exponent {beta_hat:.3f} (>0)")


def test_criterion_10_boundary_layer(presets):
    P, al, g, chi = presets["boundary"]
    t_out = np.linspace(0.0, P.T, 41)
    traj = reduced.dense_trajectory(P, al, t_out)
    sol = reduced.assemble_A_model(traj, g, P)
    rows = sol.sample(t_out)
    J2 = rows["J2"]
    t_star = al.u_star * P.T
    i_max = int(np.argmax(np.abs(J2)))
    off = abs(t_out[i_max] - t_star) / (t_out[1] - t_out[0])
    ok = off <= 5.0 and J2[0] == 0.0
    report(10, ok, f"|J2| global max at t={t_out[i_max]:.3f}, {off:.1f} samples from "
                   f"t*={t_star:.2f} (<=5); J2(0) = {J2[0]} (exact zero)")


def test_criterion_11_reduced_ode_consistency():
    P = left_params()
    al = left_alpha(P)
    g = window_of(P, al)
    t_out = np.linspace(0.0, P.T, 41)
    traj = reduced.dense_trajectory(P, al, t_out)
    _, _, diff = reduced.solve_reduced(traj, g, P)

    frozen = left_alpha(P, frozen=True)
    trajf = reduced.dense_trajectory(P, frozen, t_out, n_per_unit=100)
    a_rk4, _, _ = reduced.solve_reduced(trajf, window_of(P, frozen), P)
    a0 = float(window_of(P, frozen)(math.sqrt(level_energy(P, frozen.value(0.0)))))
    fp = float(np.max(np.abs(a_rk4 - a0)))
    ok = diff < 1e-8 and fp < 1e-8
    report(11, ok, f"RK4 vs closed form {diff:.2e} (<1e-8); "
                   f"frozen fixed point deviation {fp:.2e} (<1e-8)")
