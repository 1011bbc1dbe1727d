"""Acceptance suite: one test, and one printed pass/fail line, per criterion."""

import time

import numpy as np
import pytest
from scipy import integrate

from pucci.barriers import search_barrier_params, verify_barrier
from pucci.extremal_ops import OperatorKind, eval_values, operator_ordering_check
from pucci.grid import Exterior, GridFunction
from pucci.kernel_model import KernelFunction, ScalingFunction, check_upper_scaling, dini_integral
from pucci.quadrature import RadialWeight, apply_levy, precompute_weights
from pucci.regularity_lab import boundary_harnack, oscillation_decay, run_experiment
from pucci.solver import Bellman, DirichletProblem, Extremal, Linear, ball_mask, solve

from conftest import ACCEPTANCE, grid_fn, random_bump, spec_for


def record(num, title, ok, detail):
    line = f"[{num}] {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE[f"{num} {title}"] = (bool(ok), detail)
    assert ok, line


# --------------------------------------------------------------------------

def test_barrier_certificates():
    worst, slowest, fails = np.inf, {1: 0.0, 2: 0.0}, []
    for dim in (1, 2):
        for fam in ("power", "logpower"):
            for a in (0.6, 1.0, 1.5, 1.8):
                spec = spec_for(a, fam)
                t0 = time.perf_counter()
                params = search_barrier_params(1.0, spec, dim=dim)
                gm = min(verify_barrier(params, spec, params.delta / 16).grid_min,
                         verify_barrier(params, spec, params.delta / 32).grid_min)
                slowest[dim] = max(slowest[dim], time.perf_counter() - t0)
                worst = min(worst, gm)
                if gm < -1e-6:
                    fails.append((dim, fam, a, gm))
    ok = not fails and slowest[1] <= 120 and slowest[2] <= 600
    record(1, "barrier certificates", ok,
           f"min grid_min={worst:.4g}, slowest d=1 {slowest[1]:.1f}s, d=2 {slowest[2]:.1f}s, failures={fails}")


def test_operator_algebra():
    rng = np.random.default_rng(50)
    viol = {"ordering": 0, "duality": 0, "homogeneity": 0, "additivity": 0, "scale": 0}
    worst_dual = 0.0
    for k in range(50):
        a = rng.uniform(0.5, 1.9)
        spec = spec_for(a, ("power", "logpower")[k % 2], "A4")
        u = grid_fn(random_bump(rng), 1, 2.0, 512)
        v = grid_fn(random_bump(rng), 1, 2.0, 512)
        nodes = rng.choice(np.arange(64, 449), 20, replace=False)[:, None]
        if not operator_ordering_check(spec, u, nodes).passed:
            viol["ordering"] += 1
        P, eP = eval_values(OperatorKind.mplus(), spec, u, nodes)
        M, eM = eval_values(OperatorKind.mminus(), spec, u, nodes)
        Pn, _ = eval_values(OperatorKind.mplus(), spec, -u, nodes)
        rel = np.max(np.abs(Pn + M)) / np.max(np.abs(M))
        worst_dual = max(worst_dual, rel)
        viol["duality"] += int(rel > 1e-12)
        c = rng.uniform(0.1, 10.0)
        Pc, _ = eval_values(OperatorKind.mplus(), spec, u.scaled(c), nodes)
        viol["homogeneity"] += not np.all(np.abs(Pc - c * P) <= c * eP + 1e-12 * c * np.abs(P))
        Puv, e1 = eval_values(OperatorKind.mplus(), spec, u + v, nodes)
        Pv, e2 = eval_values(OperatorKind.mplus(), spec, v, nodes)
        Muv, e3 = eval_values(OperatorKind.mminus(), spec, u + v, nodes)
        Mv, e4 = eval_values(OperatorKind.mminus(), spec, v, nodes)
        sub = np.all(Puv <= P + Pv + e1 + e2 + eP)
        sup = np.all(Muv >= M + Mv - e3 - e4 - eM)
        viol["additivity"] += not (sub and sup)
        P0, e0 = eval_values(OperatorKind.mplus(0), spec, u, nodes)
        for i in (1, 3, 10):
            Pi, ei = eval_values(OperatorKind.mplus(i), spec, u, nodes)
            viol["scale"] += not np.all(P0 >= Pi - e0 - ei)
    record(2, "operator algebra", not any(viol.values()),
           f"violations={viol}, worst duality rel err={worst_dual:.2e}")


def _bump(x):
    return np.where(np.abs(x) < 1, (1 - x * x) ** 2, 0.0)


def _levy_oracle(x, w):
    def f(r):
        if abs(x) + r < 1:
            d = -4 * r * r + 12 * x * x * r * r + 2 * r**4
        else:
            d = _bump(x + r) + _bump(x - r) - 2 * _bump(x)
        return d * w(r) / r
    edges = [0.0] + sorted({abs(1 - x), abs(1 + x), max(1 - abs(x), 0.0)} - {0.0}) + [np.inf]
    return 2 * sum(integrate.quad(f, lo, hi, epsabs=1e-12, epsrel=1e-10, limit=500)[0]
                   for lo, hi in zip(edges[:-1], edges[1:]))


def test_quadrature_oracle():
    u = grid_fn(lambda p: _bump(p[..., 0]), 1, 2.0, 512)
    nodes = np.random.default_rng(20).choice(np.arange(32, 481), 20, replace=False)
    worst = 0.0
    for a in (0.8, 1.6):
        for w in (RadialWeight.stable(a), RadialWeight.of_phi(ScalingFunction.power(a / 2))):
            cw = precompute_weights(1, u.h, w, 4.0)
            for i in nodes:
                ref = _levy_oracle(u.axis[i], w)
                worst = max(worst, abs(apply_levy(u, np.array([i]), cw) - ref) / abs(ref))
    record(3, "quadrature oracle", worst <= 1e-3, f"max relative error={worst:.2e} over 4 configs x 20 points")


def _zero(N, R=1.0):
    return grid_fn(lambda p: 0 * p[..., 0], 1, R, N)


def test_solver_correctness():
    notes = []
    # (a) affine data
    spec = spec_for(1.1, "logpower", "A4")
    k = KernelFunction.constant(spec, 1, 1.2, 1.5)
    g = GridFunction.from_function(lambda p: 1 + 0.5 * p[..., 0], 1, 1.0, 128, exterior="formula")
    aff = 0.0
    for op in (Linear(k), Extremal(OperatorKind.mplus(), spec), Extremal(OperatorKind.mminus(), spec)):
        aff = max(aff, np.max(np.abs(solve(DirichletProblem(g, ball_mask(g, 0.7), 0.0, op)).u.values - g.values)))
    ok_a = aff <= 1e-10
    notes.append(f"affine err={aff:.1e}")
    # (b) comparison on randomized pairs
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(20):
        sp = spec_for(rng.uniform(0.5, 1.9), rng.choice(["power", "logpower"]))
        ops = [Extremal(OperatorKind.mplus(), sp), Extremal(OperatorKind.mminus(int(rng.integers(0, 4))), sp),
               Bellman([KernelFunction.constant(sp, 1, c1, c2) for c1, c2 in rng.uniform(1, 2, (3, 2))])]
        op = ops[int(rng.integers(3))]
        fb, gb = random_bump(rng), random_bump(rng)
        c = rng.uniform(0, 1)
        g1 = GridFunction.from_function(lambda p: gb(p) - 0.2, 1, 2.0, 64,
                                        exterior=Exterior.from_formula(lambda p: gb(p) - 0.2, 2.0, "", -0.2, 1.5))
        g2 = GridFunction.from_function(lambda p: gb(p) + c, 1, 2.0, 64,
                                        exterior=Exterior.from_formula(lambda p: gb(p) + c, 3.0, "", c, 1.5))
        f = fb(g1.coords())
        m = ball_mask(g1, 1.0)
        u1 = solve(DirichletProblem(g1, m, f + rng.uniform(0, 1), op)).u.values
        u2 = solve(DirichletProblem(g2, m, f, op)).u.values
        bad += not np.all(u1 <= u2 + 1e-10)
    ok_b = bad == 0
    notes.append(f"comparison failures={bad}/20")
    # (c) self-convergence
    sp = spec_for(1.2, "logpower")
    sols = [solve(DirichletProblem(_zero(N), ball_mask(_zero(N), 1.0), -1.0,
                                   Extremal(OperatorKind.mplus(), sp))).u.values for N in (128, 256, 512)]
    d1 = np.max(np.abs(sols[1][::2] - sols[0]))
    d2 = np.max(np.abs(sols[2][::4] - sols[1][::2]))
    ok_c = d1 / d2 >= 1.5
    notes.append(f"self-convergence factor={d1 / d2:.2f}")
    # (d) singleton policy iteration
    kk = KernelFunction.constant(sp, 1, 1.3, 0.7)
    z = _zero(256)
    f = random_bump(np.random.default_rng(1))(z.coords()) - 1
    a = solve(DirichletProblem(z, ball_mask(z, 1.0), f, Linear(kk))).u.values
    b = solve(DirichletProblem(z, ball_mask(z, 1.0), f, Bellman([kk]))).u.values
    diff = np.max(np.abs(a - b))
    ok_d = diff <= 1e-12 * np.max(np.abs(a))
    notes.append(f"singleton diff={diff:.1e}")
    record(4, "solver correctness", ok_a and ok_b and ok_c and ok_d, ", ".join(notes))


def test_weak_harnack():
    lab = {"grid": {"dim": 1, "R": 1.0, "N": 512}, "f": "-1", "g": "0",
           "operator": {"type": "extremal", "variant": "MMinus"}, "class": "A3",
           "alphas": [0.8, 1.4], "phi_families": ["power", "logpower"],
           "measurements": [{"kind": "weak_harnack", "r": 0.25}]}
    rows = run_experiment(lab).rows + run_experiment(
        dict(lab, measurements=[{"kind": "weak_harnack", "r": 0.5}])).rows
    ok = all(r["eps_fit"] > 0 and r["tail_bound_holds"] for r in rows) and len(rows) == 8
    eps = [round(r["eps_fit"], 2) for r in rows]
    record(5, "weak Harnack tail", ok, f"eps_fit over (r, family, alpha)={eps}")


def test_holder():
    base = {"grid": {"dim": 1, "R": 1.0, "N": 2048}, "f": "-1 + 2*ball(0.5, 0.5)", "g": "0",
            "operator": {"type": "extremal", "variant": "MPlus"}, "class": "A3",
            "alphas": [0.6, 1.0, 1.4, 1.8], "measurements": [{"kind": "holder", "x0": [0.25]}]}
    coarse = run_experiment(base).rows
    fine = run_experiment(dict(base, grid={"dim": 1, "R": 1.0, "N": 4096})).rows
    gam = [r["gamma_hat"] for r in coarse]
    res = [r["holder_fit_residual"] for r in coarse + fine]
    dg = [abs(a["gamma_hat"] - b["gamma_hat"]) for a, b in zip(coarse, fine)]
    ctrl = oscillation_decay(grid_fn(lambda p: np.sqrt(np.abs(p[..., 0])), 1, 1.0, 8192, "formula"), [0.0])
    ok = (min(gam) >= 0.05 and max(res) <= 0.1 and max(dg) <= 0.05 and abs(ctrl.gamma_hat - 0.5) <= 0.02)
    record(6, "Holder decay", ok, f"gamma={np.round(gam, 3).tolist()}, max residual={max(res):.3f}, "
           f"max refinement change={max(dg):.1e}, |x|^1/2 control={ctrl.gamma_hat:.4f}")


def test_harnack_uniformity():
    lab = {"grid": {"dim": 1, "R": 2.0, "N": 256}, "f": "0", "g": "ball(2) - ball(1)",
           "operator": {"type": "linear", "c_stable": 1.5, "c_phi": 1.5}, "class": "A4",
           "alphas": [0.6, 1.0, 1.4, 1.8], "phi_families": ["power", "logpower"],
           "measurements": [{"kind": "harnack"}], "refine": True}
    rows = run_experiment(lab).rows
    ok = True
    spread = []
    for fam in ("logpower", "power"):
        q = np.array([r["quotient"] for r in rows if r["phi_family"] == fam])
        qf = np.array([r["quotient_fine"] for r in rows if r["phi_family"] == fam])
        ok &= bool(np.all(np.isfinite(q)) and np.all(np.abs(qf - q) <= 0.1 * q) and q.max() / q.min() <= 10)
        spread.append(q.max() / q.min())
    record(7, "Harnack uniformity", ok, f"max/min per family={np.round(spread, 3).tolist()}, "
           f"quotients={[round(r['quotient'], 3) for r in rows]}")


def test_boundary_harnack():
    ratios = []
    for N in (128, 256):
        lab = {"grid": {"dim": 2, "R": 2.0, "N": N}, "domain": {"expr": "ball(1)", "positive_coordinate": 0},
               "f": "0", "g": "ball(0.4, 1.5, 0)", "operator": {"type": "linear", "c_stable": 1.0, "c_phi": 1.0},
               "alphas": [1.5], "measurements": [{"kind": "boundary_harnack", "g2": "ball(0.4, 0, 1.5)",
                                                  "x0": [0.25, 0.0], "rho": 0.1}]}
        r = run_experiment(lab).rows[0]
        ratios.append((r["ratio_min"], r["ratio_max"]))
    q = [b / a for a, b in ratios]
    change = abs(q[1] - q[0]) / q[0]
    # identical-solution control
    from pucci.config import LabBlock
    from pucci.problems import build_problem
    blk = LabBlock.model_validate(dict(lab, grid={"dim": 2, "R": 2.0, "N": 64}))
    spec = spec_for(1.5, "power")
    prob = build_problem(blk.grid, blk.domain, blk.f, blk.g, blk.operator, spec)
    u = solve(prob).u
    ctrl = boundary_harnack(u, u, spec, prob.mask)
    ok = (all(0 < a <= b < np.inf for a, b in ratios) and change <= 0.2
          and ctrl.ratio_min == 1.0 and ctrl.ratio_max == 1.0)
    record(8, "boundary Harnack", ok, f"(min, max) at N=128, 256: {np.round(ratios, 4).tolist()}, "
           f"max/min change={change:.1%}, control=({ctrl.ratio_min}, {ctrl.ratio_max})")


def test_assumption_validators():
    passes = all(check_upper_scaling(ScalingFunction(fam, b)).passed
                 for fam in ("power", "logpower") for b in (0.2, 0.5, 0.9, 1.5))
    mis = ScalingFunction.tabulated([1e-6, 1e6], [1e-6**1.2, 1e6**1.2], 0.5)
    fails = not check_upper_scaling(mis).passed
    dini = max(abs(dini_integral(ScalingFunction.power(b)) - 1 / b) for b in (0.2, 0.5, 0.9, 1.5))
    record(9, "assumption validators", passes and fails and dini <= 1e-8,
           f"shipped families pass={passes}, mis-declared beta rejected={fails}, max Dini error={dini:.1e}")
