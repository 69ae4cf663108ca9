"""Scenario-driven command line front end.

Scenario files are INI-style key/value text with these sections (defaults in
parentheses; dotted values are floats unless noted):

    [geometry]  a, b, c, V0                      -- barrier and well position
    [scales]    h, tau0, d0, eta                 -- tau0 = Im(theta0)
    [profile]   alpha0, amplitude, kind,         -- kind: constant | smoothstep | pulse
                u_star (0.35), width (0.04)      -- pulse parameters
    [time]      T, samples (int)
    [numerics]  L (b-a), points_per_h (12), dt_safety (0.5), k_nodes (64, int),
                workers (1, int), n_per_unit (400, int),
                scheme (scattered | direct)
    [run]       mode, out                        -- optional; flags override

Modes: reduced | full | compare | converge-h | converge-grid | converge-dt |
converge-m | resonance-table.  Convergence studies read

    [converge]  values                           -- whitespace-separated ladder

Every run writes a CSV (one row per sample, 17 significant digits, comma
separated, '.' decimal) whose first line embeds the scenario hash, plus a
JSON summary with the tolerances and diagnostics.  Outputs are deterministic
functions of the scenario file.

Exit codes: 0 ok, 2 scenario/schema error, 3 assumption violation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, greens, propagator, reduced, scattering, spectra
from ._kernels import KERNEL_NAME
from .model import (AlphaProfile, ChiObservable, ModelParams, PartitionFn,
                    adiabatic_epsilon, level_energy, validate)

__all__ = ["Scenario", "load_scenario", "run", "main"]

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERICAL = 4

_MODES = ("reduced", "full", "compare", "converge-h", "converge-grid",
          "converge-dt", "converge-m", "resonance-table")


class SchemaError(ValueError):
    pass


@dataclass
class Scenario:
    params: ModelParams
    alpha: AlphaProfile
    g: PartitionFn
    chi: ChiObservable
    t_out: np.ndarray
    L: float
    points_per_h: float
    dt_safety: float
    k_budget: int
    workers: int
    n_per_unit: int
    scheme: str
    mode: str
    out_dir: Path
    converge_values: list[float]
    sha256: str

    @property
    def eps(self) -> float:
        return adiabatic_epsilon(self.params, self.alpha)


def _get(cp: configparser.ConfigParser, sec: str, key: str, cast, default=None):
    if not cp.has_option(sec, key):
        if default is None:
            raise SchemaError(f"missing [{sec}] {key}")
        return default
    raw = cp.get(sec, key)
    try:
        return cast(raw)
    except ValueError as exc:
        raise SchemaError(f"bad value for [{sec}] {key}: {raw!r}") from exc


def load_scenario(path: str | Path, mode: str | None = None,
                  out: str | None = None, workers: int | None = None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read scenario: {exc}") from exc
    sha = hashlib.sha256(text.encode()).hexdigest()
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SchemaError(f"scenario parse error: {exc}") from exc
    for sec in ("geometry", "scales", "profile", "time"):
        if not cp.has_section(sec):
            raise SchemaError(f"missing section [{sec}]")

    a = _get(cp, "geometry", "a", float)
    b = _get(cp, "geometry", "b", float)
    c = _get(cp, "geometry", "c", float)
    V0 = _get(cp, "geometry", "V0", float)
    h = _get(cp, "scales", "h", float)
    tau0 = _get(cp, "scales", "tau0", float)
    d0 = _get(cp, "scales", "d0", float)
    eta = _get(cp, "scales", "eta", float)
    T = _get(cp, "time", "T", float)
    samples = _get(cp, "time", "samples", int)
    if samples < 2:
        raise SchemaError("[time] samples must be >= 2")

    params = ModelParams(a=a, b=b, c=c, V0=V0, h=h, theta0=tau0 * 1j,
                         eta=eta, d0=d0, T=T)
    alpha = AlphaProfile(
        alpha0=_get(cp, "profile", "alpha0", float),
        amplitude=_get(cp, "profile", "amplitude", float),
        T=T,
        kind=_get(cp, "profile", "kind", str, "smoothstep"),
        u_star=_get(cp, "profile", "u_star", float, 0.35),
        width=_get(cp, "profile", "width", float, 0.04),
    )
    if alpha.kind not in ("constant", "smoothstep", "pulse"):
        raise SchemaError(f"unknown ramp kind {alpha.kind!r}")
    lam0 = level_energy(params, alpha.value(0.0))
    g = PartitionFn(lambda0=lam0, h=h, d0=d0)
    chi = ChiObservable(c=c, eta=eta)

    run_mode = mode or (_get(cp, "run", "mode", str, "compare")
                        if cp.has_section("run") else "compare")
    if run_mode not in _MODES:
        raise SchemaError(f"unknown mode {run_mode!r} (choose from {', '.join(_MODES)})")
    out_dir = Path(out or (_get(cp, "run", "out", str, "out")
                           if cp.has_section("run") else "out"))

    conv: list[float] = []
    if cp.has_section("converge") and cp.has_option("converge", "values"):
        conv = [float(v) for v in cp.get("converge", "values").split()]

    num = "numerics"
    has_num = cp.has_section(num)
    return Scenario(
        params=params, alpha=alpha, g=g, chi=chi,
        t_out=np.linspace(0.0, T, samples),
        L=_get(cp, num, "L", float, params.l) if has_num else params.l,
        points_per_h=_get(cp, num, "points_per_h", float, 12.0) if has_num else 12.0,
        dt_safety=_get(cp, num, "dt_safety", float, 0.5) if has_num else 0.5,
        k_budget=_get(cp, num, "k_nodes", int, 64) if has_num else 64,
        workers=workers if workers is not None else (
            _get(cp, num, "workers", int, 1) if has_num else 1),
        n_per_unit=_get(cp, num, "n_per_unit", int, 400) if has_num else 400,
        scheme=_get(cp, num, "scheme", str, "scattered") if has_num else "scattered",
        mode=run_mode, out_dir=out_dir, converge_values=conv, sha256=sha,
    )


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray], sha: str):
    rows = len(columns[0])
    with path.open("w") as fh:
        fh.write(f"# scenario_sha256={sha}\n")
        fh.write(f"# resonlab={__version__}\n")
        fh.write(",".join(header) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


def write_json(path: Path, payload: dict):
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _base_summary(sc: Scenario) -> dict:
    return {
        "scenario_sha256": sc.sha256,
        "version": __version__,
        "kernel": KERNEL_NAME,
        "mode": sc.mode,
        "eps": sc.eps,
        "case": sc.params.case,
        "theta0_used": sc.params.tau,
        "theta0_asymptotic_scale_h3": sc.params.h ** 3,
        "tolerances": {
            "resonance_residual": 1e-12,
            "rk4_vs_closed": 1e-8,
            "quadrature_rel": 1e-8,
        },
    }


def _resonance_table(sc: Scenario) -> dict:
    traj = spectra.resonance_trajectory(sc.alpha, sc.params, sc.t_out)
    eps = sc.eps
    resid = np.array([r.residual for r in traj.resonances])
    iters = np.array([r.iterations for r in traj.resonances])
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(sc.out_dir / "resonance_table.csv",
              ["t", "Re_E", "Gamma", "Gamma_over_eps", "residual"],
              [traj.times, traj.E_R, traj.Gamma, traj.Gamma / eps, resid],
              sc.sha256)
    summary = _base_summary(sc)
    summary.update({
        "max_residual": float(resid.max()),
        "max_iterations": int(iters.max()),
        "max_jump": traj.max_jump,
        "seed_E": str(spectra.resonance_seed(sc.alpha.value(0.0), sc.params)),
    })
    write_json(sc.out_dir / "summary.json", summary)
    return summary


def _reduced_solution(sc: Scenario):
    traj = reduced.dense_trajectory(sc.params, sc.alpha, sc.t_out,
                                    n_per_unit=sc.n_per_unit)
    return traj, reduced.assemble_A_model(traj, sc.g, sc.params)


def _run_reduced(sc: Scenario) -> dict:
    traj, sol = _reduced_solution(sc)
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    summary = _base_summary(sc)
    if sol.case == "right":
        write_csv(sc.out_dir / "reduced.csv",
                  ["t", "Gamma_over_eps", "lambda_t"],
                  [sc.t_out, sol.Gamma_over_eps[np.searchsorted(sol.times, sc.t_out)],
                   sol.lambda_t[np.searchsorted(sol.times, sc.t_out)]], sc.sha256)
        summary.update({
            "right_case_bound": {
                "beta_coeff": sol.bound.beta_coeff,
                "exp_beta_over_h": sol.bound.bound_e_beta_over_h,
                "exp_beta_over_h2": sol.bound.bound_e_beta_over_h2,
            }})
    else:
        rows = sol.sample(sc.t_out)
        write_csv(sc.out_dir / "reduced.csv",
                  ["t", "a", "J1", "J2", "A_model", "Gamma_over_eps", "lambda_t"],
                  [rows["t"], rows["a"], rows["J1"], rows["J2"], rows["A_model"],
                   rows["Gamma_over_eps"], rows["lambda_t"]], sc.sha256)
        summary.update({"rk4_vs_closed": sol.rk4_vs_closed,
                        "a_final": float(rows["a"][-1])})
    write_json(sc.out_dir / "summary.json", summary)
    return summary


def _full_observable(sc: Scenario):
    rep = validate(sc.params, sc.alpha, sc.g, box_L=sc.L,
                   direct_scheme=(sc.scheme == "direct"))
    if not rep.passed:
        raise AssumptionError(str(rep))
    traj = spectra.resonance_trajectory(sc.alpha, sc.params, sc.t_out)
    E_lo, E_hi = float(traj.E_R.min()), float(traj.E_R.max())
    gamma = float(traj.Gamma.max())
    panels = scattering.window_panels(sc.g, E_lo, E_hi, max(gamma, 1e-14))
    order = max(4, sc.k_budget // max(1, len(panels)))
    k, w = scattering.window_nodes(sc.g, E_lo, E_hi, max(gamma, 1e-14), order=order)
    grid = propagator.make_grid(sc.params, L=sc.L, points_per_h=sc.points_per_h)
    res = propagator.observable_A(sc.alpha, sc.g, sc.chi, grid, sc.params, k, w,
                                  sc.t_out, dt_safety=sc.dt_safety,
                                  workers=sc.workers, scheme=sc.scheme)
    return res, grid


class AssumptionError(ValueError):
    pass


def _run_full(sc: Scenario) -> dict:
    res, grid = _full_observable(sc)
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(sc.out_dir / "observable.csv", ["t", "A_full"],
              [res.times, res.A], sc.sha256)
    summary = _base_summary(sc)
    summary.update({
        "k_nodes": int(res.k_nodes.size),
        "steps": res.steps,
        "growth_max": res.growth_max,
        "edge_sentinel": res.edge_sentinel,
        "grid_nodes": grid.n,
        "dx": grid.dx,
        "scheme": res.scheme,
        "A_initial": float(res.A[0]),
        "A_final": float(res.A[-1]),
    })
    write_json(sc.out_dir / "summary.json", summary)
    return summary


def _run_compare(sc: Scenario) -> dict:
    if sc.params.case != "left":
        raise AssumptionError("compare mode needs the thin-left-barrier case "
                              "(c - a < b - c)")
    traj, sol = _reduced_solution(sc)
    rows = sol.sample(sc.t_out)
    res, grid = _full_observable(sc)
    diff = res.A - rows["A_model"]
    ref = float(np.max(np.abs(rows["A_model"])))
    sc.out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(sc.out_dir / "compare.csv",
              ["t", "A_full", "A_model", "a", "J1", "J2", "Gamma_over_eps", "lambda_t"],
              [sc.t_out, res.A, rows["A_model"], rows["a"], rows["J1"], rows["J2"],
               rows["Gamma_over_eps"], rows["lambda_t"]], sc.sha256)
    summary = _base_summary(sc)
    summary.update({
        "max_abs_diff": float(np.max(np.abs(diff))),
        "max_diff_over_max_model": float(np.max(np.abs(diff)) / ref),
        "A_model_max": ref,
        "k_nodes": int(res.k_nodes.size),
        "steps": res.steps,
        "edge_sentinel": res.edge_sentinel,
        "rk4_vs_closed": sol.rk4_vs_closed,
        "grid_nodes": grid.n,
        "scheme": res.scheme,
    })
    write_json(sc.out_dir / "summary.json", summary)
    return summary


def _run_converge(sc: Scenario) -> dict:
    mode = sc.mode
    vals = sc.converge_values
    if not vals:
        raise SchemaError("converge modes need [converge] values")
    # ladders run coarse -> fine: h and dt_safety shrink, while points_per_h
    # and the contour order m grow
    vals = sorted(vals) if mode in ("converge-m", "converge-grid") \
        else sorted(vals, reverse=True)
    rows: list[tuple[float, float, float]] = []  # (value, metric, order)

    if mode == "converge-h":
        alpha0 = sc.alpha.value(0.0)
        prev = None
        for h in vals:
            P = dataclasses.replace(sc.params, h=h)
            r = spectra.find_resonance(alpha0, P)
            dev = (r.E - (P.V0 - alpha0**2 / 4.0)) \
                / math.exp(-abs(alpha0) * P.d_edge / h)
            target = -(alpha0**2 / 2.0) * spectra.p0_closed_form(alpha0, P.V0)
            metric = abs(dev - target) / abs(target)
            order = math.nan if prev is None else prev / metric
            rows.append((h, metric, order))
            prev = metric
        header = ["h", "rel_deviation", "ratio_to_previous"]
    elif mode == "converge-grid":
        z = 0.5 + 0.8j
        alpha0 = sc.alpha.value(0.0)
        Gcc = greens.green_cc(z, sc.params).value
        prev = None
        for pph in vals:
            grid = propagator.make_grid(sc.params, L=sc.L, points_per_h=pph)
            Hd = propagator.assemble(alpha0, sc.params.theta0, grid, sc.params)
            f = np.zeros(grid.n, complex)
            f[grid.jc] = 1.0 / grid.dx
            u_d = propagator.resolvent_apply(Hd, z, f)
            u_ex = propagator.sample_green(z, grid, sc.params) \
                / (1.0 + sc.params.h * alpha0 * Gcc)
            sl = slice(grid.ja, grid.jb + 1)
            metric = float(np.max(np.abs(u_d[sl] - u_ex[sl]))
                           / np.max(np.abs(u_ex[sl])))
            order = math.nan if prev is None else math.log2(prev / metric)
            rows.append((grid.dx, metric, order))
            prev = metric
        header = ["dx", "rel_error", "observed_order"]
    elif mode == "converge-dt":
        rows, header = _converge_dt(sc, vals)
    elif mode == "converge-m":
        rows, header = _converge_m(sc, vals)
    else:  # pragma: no cover
        raise SchemaError(f"unhandled converge mode {mode}")

    sc.out_dir.mkdir(parents=True, exist_ok=True)
    cols = [np.array([r[i] for r in rows]) for i in range(3)]
    write_csv(sc.out_dir / "converge.csv", header, cols, sc.sha256)
    summary = _base_summary(sc)
    metrics = [r[1] for r in rows]
    summary.update({"values": [r[0] for r in rows], "metrics": metrics,
                    "monotone_decreasing": bool(np.all(np.diff(metrics) < 0))})
    write_json(sc.out_dir / "summary.json", summary)
    return summary


def _converge_dt(sc: Scenario, vals):
    """Crank-Nicolson step-halving study on the frozen-coupling state."""
    P = sc.params
    alpha0 = sc.alpha.value(0.0)
    frozen = AlphaProfile(alpha0=alpha0, amplitude=0.0, T=P.T, kind="constant")
    grid = propagator.make_grid(P, L=sc.L, points_per_h=sc.points_per_h)
    r = spectra.find_resonance(alpha0, P)
    Hd = propagator.assemble(alpha0, P.theta0, grid, P)
    _, u0 = propagator.eigenpair(Hd, r.E)   # isolates the time-stepping error
    eps = adiabatic_epsilon(P, frozen)
    t_end = min(0.1, P.T)
    fields = []
    for safety in vals:
        run = propagator.evolve(u0, frozen, P.theta0, np.array([0.0, t_end]),
                                eps, grid, P, dt_safety=float(safety))
        fields.append(run.snapshots[-1])
    rows = []
    prev = None
    for i, safety in enumerate(vals[:-1]):
        err = float(np.max(np.abs(fields[i] - fields[-1])))
        order = math.nan if prev is None else math.log2(prev / err)
        rows.append((float(safety), err, order))
        prev = err
    return rows, ["dt_safety", "error_vs_finest", "observed_order"]


def _converge_m(sc: Scenario, vals):
    """Contour-order ladder for the spectral projector trace."""
    P = sc.params
    alpha0 = sc.alpha.value(0.0)
    grid = propagator.make_grid(P, L=sc.L, points_per_h=sc.points_per_h)
    Hd = propagator.assemble(alpha0, P.theta0, grid, P)
    r = spectra.find_resonance(alpha0, P)
    probe = propagator.sample_green(r.E, grid, P)
    rows = []
    prev = None
    for m in vals:
        rep = propagator.riesz_projector(Hd, r.E, 6.0 * r.Gamma, int(m), probe)
        err = abs(rep.trace_estimate - 1.0)
        order = math.nan if prev is None else (prev / err if err > 0 else math.inf)
        rows.append((float(m), err, order))
        prev = err
    return rows, ["m", "trace_error", "ratio_to_previous"]


def run(sc: Scenario) -> dict:
    if sc.mode == "resonance-table":
        return _resonance_table(sc)
    if sc.mode == "reduced":
        return _run_reduced(sc)
    if sc.mode == "full":
        return _run_full(sc)
    if sc.mode == "compare":
        return _run_compare(sc)
    return _run_converge(sc)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="resonlab",
        description="Driven shape-resonance laboratory: reduced charge model "
                    "vs direct propagation.")
    ap.add_argument("--scenario", required=True, help="scenario file (INI)")
    ap.add_argument("--mode", choices=_MODES, default=None,
                    help="override the scenario's run mode")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--workers", type=int, default=None,
                    help="thread cap for per-mode propagation")
    ap.add_argument("--seed-check", action="store_true",
                    help="validate the scenario assumptions and exit")
    args = ap.parse_args(argv)

    try:
        sc = load_scenario(args.scenario, mode=args.mode, out=args.out,
                           workers=args.workers)
    except SchemaError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    rep = validate(sc.params, sc.alpha, sc.g)
    if args.seed_check:
        print(rep)
        print(f"eps = {sc.eps:.6g}  case = {sc.params.case}")
        return EXIT_OK if rep.passed else EXIT_ASSUMPTION
    if not rep.passed:
        print(rep, file=sys.stderr)
        return EXIT_ASSUMPTION

    try:
        summary = run(sc)
    except (SchemaError,) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except AssumptionError as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (ArithmeticError, ValueError) as exc:
        mod = type(exc).__module__
        print(f"numerical failure [{mod}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
