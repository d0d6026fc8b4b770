"""The eleven acceptance criteria, one test each, with a PASS/FAIL line per criterion.

Lines are printed as each test finishes and collected again in the terminal
summary.  Criterion 11 asks for a generic ``p_l1`` slope the geometry does
not produce (``P`` is quadratic along generic directions); that part is a
strict xfail and its line reads FAIL.
"""
import math
import time

import numpy as np
import pytest

from cylflow import flow, numerics, rates, spectral, variation
from cylflow.chart import NormalField, build_cylinder, graph, taper
from cylflow.ensemble import analytic_graph, generic_direction, jacobi_direction
from cylflow.gaussian import F_value, inner, rule_for
from cylflow.geometry import (compute_P, drift_tau_residual, gradH_residual, jet, nablaN_residual,
                              simons_residual, tauN_spectrum)

SUMMARY = {}


def report(n, name, ok, detail=""):
    line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    SUMMARY[n] = line
    print(line)
    return ok


@pytest.fixture(scope="module")
def work_grid():
    return build_cylinder(1, 2, 4, 32, 6.0, 97)


def test_c01_cylinder_exact_values():
    t0 = time.perf_counter()
    grid = build_cylinder(1, 2, 4, 64, 6.0, 97)
    J = jet(grid.cylinder())
    errs = dict(H=np.max(np.abs(J.H_norm - 1 / math.sqrt(2))),
                A_sq=np.max(np.abs(J.A_sq - 0.5)),
                phi=np.max(np.abs(J.phi)),
                P=np.max(np.abs(compute_P(J).value)),
                tauN=np.max(np.abs(np.sort(tauN_spectrum(J)) - [0.0, 1.0])))
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-8 and elapsed < 10
    report(1, "cylinder exact values", ok, f"max err {max(errs.values()):.1e}, {elapsed:.1f} s")
    assert ok, errs


def test_c02_F_cylinder():
    grid = build_cylinder(1, 2, 4, 64, 6.0, 97)
    fv = F_value(grid.cylinder())
    exact = math.sqrt(2 * math.pi) * math.exp(-0.5)
    err = abs(fv.value - exact)
    # the cylindrical mass beyond the box is added in closed form, so the
    # reported bound is the quadrature estimate alone
    ok = err <= fv.bound <= 1e-6
    report(2, "F(cylinder)", ok, f"F={fv.value:.10f}, err {err:.1e}, bound {fv.bound:.1e}")
    assert ok


def test_c03_P_vanishes_in_codimension_one():
    grid = build_cylinder(1, 2, 3, 32, 6.0, 97)
    th, y = grid.coords()
    us = [0.05 * np.sin(th) * np.exp(-y**2),
          0.05 * np.cos(2 * th) * np.exp(-y**2 / 2),
          0.03 * (y**2 - 2) * np.exp(-y**2 / 4) + 0.02 * np.cos(3 * th) * np.exp(-y**2 / 4)]
    worst = max(np.max(np.abs(compute_P(jet(graph(grid, NormalField.from_components(grid, u=u)))).value))
                for u in us)
    ok = worst <= 1e-8
    report(3, "P = 0 in codimension one", ok, f"max|P| {worst:.1e} over 3 graphs")
    assert ok


def test_c04_identity_residual_orders(work_grid):
    results = {}
    times = {}
    for m_y in (97, 193, 385):
        g = work_grid.refined(m_y=m_y)
        J = jet(graph(g, analytic_graph(g, 0.05)))
        for suite, fn in (("simons", simons_residual), ("gradH", gradH_residual), ("nablaN", nablaN_residual),
                          ("drift_tau", lambda J: [drift_tau_residual(J)])):
            t0 = time.perf_counter()
            for r in fn(J):
                results.setdefault(r.name, []).append((g.h, r.L2))
            times[suite] = times.get(suite, 0.0) + time.perf_counter() - t0
    orders = {}
    for name, rows in results.items():
        h, l2 = zip(*rows)
        orders[name] = numerics.convergence_order(h, l2) if max(l2) > 1e-9 else math.inf
    ok = min(orders.values()) >= 3.5 and max(times.values()) < 60
    report(4, "identity residual orders", ok, f"min L2 order {min(orders.values()):.2f}, "
                                              f"slowest suite {max(times.values()):.1f} s")
    assert ok, orders


def test_c05_jacobi_basis(work_grid):
    rule = rule_for(work_grid)
    basis = spectral.jacobi_basis(work_grid, rule)
    cyl = jet(work_grid.cylinder())
    ratio = max(math.sqrt(inner(spectral.apply_L(e, cyl), spectral.apply_L(e, cyl), rule) / inner(e, e, rule))
                for e in basis.fields)
    th, y = work_grid.coords()
    V = analytic_graph(work_grid, 1.0) + NormalField.from_components(work_grid, u=0.3 * np.cos(th))
    c1, _ = spectral.project_jacobi(V, basis)
    c2, _ = spectral.project_jacobi(c1.to_field(basis), basis)
    idem = float(np.max(np.abs(c2.values - c1.values)))
    ok = len(basis) == 6 and ratio <= 1e-7 and idem <= 1e-10
    report(5, "Jacobi basis", ok, f"dim {len(basis)}, ||LJ||/||J|| {ratio:.1e}, idempotence {idem:.1e}")
    assert ok


def test_c06_first_variation(work_grid):
    th, y = work_grid.coords()
    env = np.exp(-y**2 / 4)
    V = NormalField.from_components(work_grid, u=np.sin(th) * env + 0.3 * np.cos(2 * th), ua=[0.5 * np.cos(th) * env])
    J = jet(work_grid.cylinder())
    ops = [op(J, V, label="mixed") for op in (variation.dPi, variation.dH, variation.dA, variation.dphi)]
    table = variation.cylinder_variation_table(V, label="mixed")
    orders = [r.order for r in ops]
    ok = min(orders) >= 1.8 and all(r.passed for r in table.values())
    report(6, "first-variation FD agreement", ok,
           f"min order {min(orders):.2f}, cylinder table {sum(r.passed for r in table.values())}/{len(table)}")
    assert ok


def test_c07_taylor_P(work_grid):
    gen = variation.taylor_P(generic_direction(work_grid)).p
    jac = variation.taylor_P(jacobi_direction(work_grid)).p
    ok = gen >= 1.9 and jac >= 2.8 and jac - gen >= 0.8
    report(7, "taylor_P exponents", ok, f"generic {gen:.2f}, Jacobi {jac:.2f}")
    assert ok


def test_c08_energy_identity(work_grid):
    th, y = work_grid.coords()
    env = np.exp(-y**2 / 4)
    U0 = taper(NormalField.from_components(work_grid, u=0.05 * np.cos(2 * th) * env,
                                           ua=[0.03 * np.cos(3 * th) * env]), 4.0, 5.5)
    errs, mono = [], True
    for dt in (2e-3, 1e-3, 5e-4):
        tr = flow.evolve(U0, 0.1, dt=dt)
        errs.append(flow.energy_audit(tr)["relative_error"])
        mono &= flow.monotone(tr)
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = errs[1] <= 0.10 and min(orders) >= 0.9 and mono
    report(8, "flow energy identity", ok, f"rel err at dt=1e-3 {errs[1]:.2%}, halving orders "
                                          f"{orders[0]:.2f}/{orders[1]:.2f}, monotone {mono}")
    assert ok


def test_c09_loja_pipeline():
    rec = rates.synth_sequence(0.5, J_max=400)
    alpha = flow.loja_audit(rec).alpha
    rho = rates.rate_extraction(rec).rho
    beta_bar = rates.beta_threshold(0.5)
    v_hi = rates.summability_check(rec, 0.8).verdict
    v_lo = rates.summability_check(rec, 0.6).verdict
    ok = (abs(alpha - 0.5) <= 0.05 and abs(rho - 2.0) <= 0.2 and 0.6 < beta_bar < 0.8
          and v_hi == "summable" and v_lo == "not-established")
    report(9, "Lojasiewicz pipeline", ok, f"alpha {alpha:.3f}, rho {rho:.3f}, beta 0.8 {v_hi}, beta 0.6 {v_lo}")
    assert ok


def test_c10_gaussian_tail():
    gap = 0.0
    for R in np.linspace(1.0, 6.0, 11):
        table = rates.gamma_table(R, 6)
        for q in range(7):
            quad = rates.gamma_quad(q, R)
            gap = max(gap, abs(table[q] - quad) / abs(quad))
    holds = [rates.gaussian_tail(m, k, R).holds for m in range(1, 5) for k in range(5)
             for R in np.linspace(1.0, 6.0, 11)]
    ok = gap <= 1e-10 and all(holds)
    report(10, "Gaussian tail", ok, f"max recursion gap {gap:.1e}, bound holds {sum(holds)}/{len(holds)}")
    assert ok


@pytest.fixture(scope="module")
def audits(work_grid):
    gen = generic_direction(work_grid)
    C1, C2 = flow.amplitude_sweep(gen, "gradient")
    kap = flow.amplitude_sweep(gen, "kappa")
    p_gen = flow.amplitude_sweep(gen, "p_l1")
    p_jac = flow.amplitude_sweep(jacobi_direction(work_grid), "p_l1")
    return dict(gradient=C1, gradient_h=C2, kappa=kap, p_l1=p_gen, p_jac=p_jac)


def test_c11_audit_constants_stable(audits):
    stab = {k: audits[k].stability for k in ("gradient", "gradient_h", "kappa", "p_l1")}
    assert max(stab.values()) <= 2.0, stab
    assert audits["p_jac"].slope >= 2.8


@pytest.mark.xfail(strict=True, reason="P_U is quadratic along generic directions; the slope is 2, not >= 2.5")
def test_c11_generic_p_l1_slope(audits):
    stab = max(audits[k].stability for k in ("gradient", "gradient_h", "kappa", "p_l1"))
    slope = audits["p_l1"].slope
    ok = stab <= 2.0 and audits["p_jac"].slope >= 2.8 and slope >= 2.5
    report(11, "audits bounded", ok, f"max stability {stab:.2f}, p_l1 slope generic {slope:.2f} (needs 2.5), "
                                     f"Jacobi {audits['p_jac'].slope:.2f}")
    assert ok
