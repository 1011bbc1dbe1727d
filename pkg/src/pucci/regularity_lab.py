"""Measurements on computed solutions: weighted tail norms, oscillation decay,
superlevel-set tails, Harnack quotients and boundary Harnack ratios."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import (DegenerateFitError, PreconditionError, ResolutionError,
                     UnboundedFunctionError)
from .grid import GridFunction
from .kernel_model import KernelSpec

LOG8 = np.log(8.0)


# ---------------------------------------------------------------------------
# weighted integrability norm

def _weights(spec: KernelSpec, dim: int):
    a = spec.alpha
    phi = spec.phi

    def w1(rho):
        return 1.0 / (1.0 + rho ** (dim + a))

    def w2(rho):
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore"):
            inv = np.where(rho > 0, 1.0 / np.maximum(rho, 1e-300), np.inf)
            val = phi(np.minimum(inv, 1e300))
        return 1.0 / (1.0 + rho ** dim / val)
    return w1, w2


def _box_integral(u: GridFunction, w, m=6):
    """∫ over the box of the bilinear interpolant of |u| against w(|y|)."""
    x, wt = leggauss(m)
    x = 0.5 * (x + 1.0)
    wt = 0.5 * wt
    h = u.h
    v = np.abs(u.values)
    if u.dim == 1:
        a = u.axis[:-1]
        pts = a[:, None] + h * x[None, :]
        ww = w(np.abs(pts))
        lin = v[:-1, None] * (1 - x) + v[1:, None] * x
        return float(h * np.sum(lin * ww * wt))
    a = u.axis[:-1]
    total = 0.0
    X = a[:, None] + h * x[None, :]  # (N, m)
    for i in range(u.N):
        px = X[i][:, None, None, None]  # (m,1,1,1)
        py = X[None, None, :, :]  # (1,1,N,m)
        rho = np.sqrt(px ** 2 + py ** 2)
        ww = w(rho)  # (m,1,N,m)
        s = x[:, None, None, None]
        t = x[None, None, None, :]
        f = ((1 - s) * (1 - t) * v[i, :-1][None, None, :, None] + s * (1 - t) * v[i + 1, :-1][None, None, :, None]
             + (1 - s) * t * v[i, 1:][None, None, :, None] + s * t * v[i + 1, 1:][None, None, :, None])
        total += float(np.sum(f * ww * wt[:, None, None, None] * wt[None, None, None, :]))
    return total * h * h


def _outside_integral(u: GridFunction, w):
    """∫ over the complement of the box of |exterior| against w(|y|)."""
    R = u.R
    ext = u.exterior
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if u.dim == 1:
                if ext.is_constant:
                    v, _ = integrate.quad(lambda r: w(r), R, np.inf, limit=400, epsabs=0, epsrel=1e-11)
                    return 2.0 * abs(ext.value) * v
                tot = 0.0
                for sgn in (1.0, -1.0):
                    g = lambda r, s=sgn: abs(float(ext(np.array([[s * r]]))[0])) * w(r)
                    tot += integrate.quad(g, R, np.inf, limit=400, epsabs=1e-13, epsrel=1e-10)[0]
                return tot
            if ext.is_constant:
                def inner(th):
                    return integrate.quad(lambda r: w(r) * r, R / np.cos(th), np.inf,
                                          limit=200, epsabs=0, epsrel=1e-11)[0]
                v, _ = integrate.quad(inner, 0.0, np.pi / 4, epsabs=0, epsrel=1e-10)
                return 8.0 * abs(ext.value) * v

            def inner2(th):
                e = np.array([np.cos(th), np.sin(th)])
                r0 = R / max(abs(e[0]), abs(e[1]))
                return integrate.quad(lambda r: abs(float(ext((r * e)[None])[0])) * w(r) * r, r0, np.inf,
                                      limit=200, epsabs=1e-13, epsrel=1e-9)[0]
            return integrate.quad(inner2, 0.0, 2 * np.pi, limit=200, epsabs=1e-12, epsrel=1e-9,
                                  points=[np.pi / 4 * k for k in range(1, 8)])[0]
        except integrate.IntegrationWarning as exc:
            raise UnboundedFunctionError(f"weighted integral of the exterior does not converge: {exc}") from None


def weighted_tail_norm(u: GridFunction, spec: KernelSpec, parts: bool = False):
    """∫|u|/(1+|y|^{d+α}) dy + ∫|u|/(1+|y|^d/φ(1/|y|)) dy."""
    w1, w2 = _weights(spec, u.dim)
    a = _box_integral(u, w1) + _outside_integral(u, w1)
    b = _box_integral(u, w2) + _outside_integral(u, w2)
    return (a, b) if parts else a + b


# ---------------------------------------------------------------------------
# oscillation decay

@dataclass
class HolderReport:
    gamma_hat: float
    fit_residual: float
    radii: list
    C_hat: float
    oscillations: list = field(default_factory=list)
    slope: float = float("nan")

    def to_dict(self):
        return asdict(self)


def _ball_nodes(u: GridFunction, x0, radius):
    """Lattice nodes (possibly outside the box) with |x - x0| <= radius."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    c = (x0 + u.R) / u.h
    k = int(np.floor(radius / u.h + 1e-9))
    base = np.rint(c).astype(int)
    if not np.allclose(c, base, atol=1e-9):
        raise ResolutionError("the centre must be a grid node")
    r = np.arange(-k, k + 1)
    if u.dim == 1:
        off = r[:, None]
    else:
        A, B = np.meshgrid(r, r, indexing="ij")
        off = np.stack([A.ravel(), B.ravel()], axis=1)
    keep = np.sum((off * u.h) ** 2, axis=1) <= radius ** 2 * (1 + 1e-12)
    return base + off[keep]


def oscillation_decay(u: GridFunction, x0=None, k_max: int = 8, min_cells: int = 4) -> HolderReport:
    """Fit osc over B_{8^-k}(x0) ≈ C 8^{-γk}; radii spanning fewer than ``min_cells`` cells are dropped."""
    x0 = np.zeros(u.dim) if x0 is None else x0
    ks, osc = [], []
    for k in range(k_max + 1):
        rho = 8.0 ** (-k)
        if 2.0 * rho / u.h < min_cells - 1e-9:
            break
        vals = u.at_nodes(_ball_nodes(u, x0, rho))
        ks.append(k)
        osc.append(float(np.max(vals) - np.min(vals)))
    if len(ks) < 4:
        raise ResolutionError("fewer than four resolvable radii; refine the grid")
    ks = np.array(ks, dtype=float)
    osc = np.array(osc)
    top = np.max(osc)
    if top == 0.0:
        return HolderReport(1.0, 0.0, [8.0 ** -k for k in ks], 8.0, osc.tolist(), np.inf)
    y = np.log(np.maximum(osc, 1e-14 * top)) / LOG8
    A = np.stack([np.ones_like(ks), -ks], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[1])
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    gamma = float(np.clip(slope, 0.0, 1.0))
    return HolderReport(gamma, resid, [8.0 ** -k for k in ks], 8.0 ** gamma, osc.tolist(), slope)


# ---------------------------------------------------------------------------
# weak Harnack tail

@dataclass
class TailFit:
    C_fit: float
    eps_fit: float
    r: float
    thresholds: list
    measures: list
    bound: list
    bound_holds: bool
    normalization: float

    def to_dict(self):
        return asdict(self)


def _check_nonnegative(u: GridFunction):
    tol = 1e-12 * max(1.0, float(np.max(np.abs(u.values))))
    if np.min(u.values) < -tol:
        raise PreconditionError("u must be nonnegative")
    e = u.exterior
    if e.is_constant and e.value < 0:
        raise PreconditionError("u must be nonnegative")


def _center_value(u, center):
    node = _ball_nodes(u, center, 0.0)
    return float(u.at_nodes(node)[0])


def weak_harnack_tail(u: GridFunction, r: float, C0: float, thresholds=None, alpha: float = 1.0,
                      center=None) -> TailFit:
    """Measure |{u >= t} ∩ B_r| by cell counting and fit C r^d (u(0)+C0 r^α)^ε t^-ε.

    ε is the least-squares slope over the thresholds with 0 < measure < |B_r|;
    C is the smallest constant for which the power law majorises every
    measured point of that range. ``bound_holds`` then checks all thresholds.
    """
    _check_nonnegative(u)
    center = np.zeros(u.dim) if center is None else center
    nodes = _ball_nodes(u, center, r)
    vals = u.at_nodes(nodes)
    if thresholds is None:
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if hi > 0:
            lo = max(lo, 1e-12 * hi)
            thresholds = np.concatenate([[0.5 * lo], np.geomspace(lo, hi, 18)[1:-1], [1.05 * hi]])
        else:
            thresholds = [1.0]
    t = np.sort(np.asarray(thresholds, dtype=float))
    if np.any(t <= 0):
        raise PreconditionError("thresholds must be positive")
    cell = u.h ** u.dim
    meas = np.array([cell * np.count_nonzero(vals >= ti) for ti in t])
    if np.any(np.diff(meas) > 0):
        raise DegenerateFitError("superlevel measure increased with the threshold")
    full = cell * len(vals)
    sel = (meas > 0) & (meas < full)
    if np.count_nonzero(sel) < 2:
        raise DegenerateFitError("fewer than two thresholds in the decaying range")
    lt, lm = np.log(t[sel]), np.log(meas[sel])
    slope = np.polyfit(lt, lm, 1)[0]
    eps = float(-slope)
    norm = r ** u.dim * (_center_value(u, center) + C0 * r ** alpha) ** eps
    C = float(np.max(meas[sel] * t[sel] ** eps) / norm)
    bound = C * norm * t ** (-eps)
    holds = bool(np.all(meas <= bound * (1 + 1e-12)))
    return TailFit(C, eps, float(r), t.tolist(), meas.tolist(), bound.tolist(), holds, float(norm))


# ---------------------------------------------------------------------------
# Harnack quotient

@dataclass
class HarnackReport:
    sup_val: float
    inf_val: float
    quotient: float
    normalization: float

    def to_dict(self):
        return asdict(self)


def harnack_quotient(u: GridFunction, C0: float = 0.0, radius: float = 0.5, center=None) -> HarnackReport:
    """sup over B_radius of u divided by u(centre) + C0."""
    _check_nonnegative(u)
    if C0 < 0:
        raise PreconditionError("C0 must be nonnegative")
    center = np.zeros(u.dim) if center is None else center
    vals = u.at_nodes(_ball_nodes(u, center, radius))
    norm = _center_value(u, center) + C0
    if not norm > 0:
        raise PreconditionError("u(0) + C0 must be positive")
    sup, inf = float(np.max(vals)), float(np.min(vals))
    return HarnackReport(sup, inf, sup / norm, norm)


# ---------------------------------------------------------------------------
# boundary Harnack

@dataclass
class BoundaryHarnackReport:
    ratio_min: float
    ratio_max: float
    norm_u1: float
    norm_u2: float
    n_points: int

    def to_dict(self):
        return asdict(self)


def boundary_harnack(u1: GridFunction, u2: GridFunction, spec: KernelSpec, omega=None,
                     radius: float = 0.5, floor: float = 1e-8, x0=None, rho: Optional[float] = None,
                     vanish_radius: float = 1.0) -> BoundaryHarnackReport:
    """Extremes of u1/u2 over B_radius after normalising both weighted norms to 1.

    ``omega`` is the domain mask; both functions must vanish on the nodes of
    B_vanish_radius outside it. With ``x0`` and ``rho`` the ball B_{2rho}(x0)
    must lie in Ω ∩ B_radius.
    """
    if not u1.same_geometry(u2):
        raise PreconditionError("u1 and u2 must live on the same grid")
    _check_nonnegative(u1)
    _check_nonnegative(u2)
    if omega is not None:
        omega = np.asarray(omega, dtype=bool)
        r = np.linalg.norm(u1.coords(), axis=-1)
        out = (r < vanish_radius) & ~omega
        for u in (u1, u2):
            top = float(np.max(np.abs(u.values)))
            if np.any(np.abs(u.values[out]) > 1e-10 * max(top, 1e-300)):
                raise PreconditionError("the functions must vanish on B_1 outside Ω")
        if x0 is not None and rho is not None:
            nodes = _ball_nodes(u1, x0, 2.0 * rho)
            inside = np.all((nodes >= 0) & (nodes <= u1.N), axis=1)
            pts = u1.node_coords(nodes)
            ok = inside.all() and np.all(np.linalg.norm(pts, axis=1) < radius)
            ok = ok and bool(np.all(omega[tuple(nodes.T)]))
            if not ok:
                raise PreconditionError("B_{2 rho}(x0) must lie in Ω ∩ B_{1/2}")
    n1 = weighted_tail_norm(u1, spec)
    n2 = weighted_tail_norm(u2, spec)
    if not (n1 > 0 and n2 > 0):
        raise DegenerateFitError("cannot normalise a function with zero weighted norm")
    center = np.zeros(u1.dim)
    nodes = _ball_nodes(u1, center, radius)
    a = u1.at_nodes(nodes) / n1
    b = u2.at_nodes(nodes) / n2
    keep = b > floor * np.max(b) if np.max(b) > 0 else np.zeros(len(b), dtype=bool)
    if not np.any(keep):
        raise DegenerateFitError("u2 is below the floor on all of the ball")
    q = a[keep] / b[keep]
    return BoundaryHarnackReport(float(np.min(q)), float(np.max(q)), float(n1), float(n2), int(np.count_nonzero(keep)))


# ---------------------------------------------------------------------------
# experiment orchestration

CSV_COLUMNS = ("alpha", "phi_family", "quotient", "gamma_hat", "eps_fit", "ratio_min", "ratio_max")


class StageError(RuntimeError):
    """A failure inside one stage of an experiment (``stage`` names it)."""

    def __init__(self, stage, exc):
        self.stage = stage
        self.cause = exc
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


@dataclass
class RegularityReport:
    """One row per (phi family, alpha) with the measurements that were requested."""

    rows: list = field(default_factory=list)

    def csv_rows(self):
        return [[r.get(c, "") for c in CSV_COLUMNS] for r in self.rows]


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
        raise StageError(name, exc) from exc


def _measure(lab, spec, N, alpha):
    from .problems import build_problem, grid_function
    from .solver import SolverConfig, solve

    grid = lab.grid
    out = {}
    prob = _stage("build", build_problem, grid, lab.domain, lab.f, lab.g, lab.operator, spec, N)
    res = _stage("solve", solve, prob, SolverConfig())
    u = res.u
    out["residual"] = res.residual
    for m in lab.measurements:
        if m.kind == "harnack":
            rep = _stage("harnack", harnack_quotient, u, m.C0, m.radius)
            out["quotient"] = rep.quotient
        elif m.kind == "holder":
            rep = _stage("holder", oscillation_decay, u, m.x0, m.k_max)
            out["gamma_hat"] = rep.gamma_hat
            out["holder_fit_residual"] = rep.fit_residual
        elif m.kind == "weak_harnack":
            rep = _stage("weak_harnack", weak_harnack_tail, u, m.r, m.C0, m.thresholds, alpha)
            out["eps_fit"] = rep.eps_fit
            out["C_fit"] = rep.C_fit
            out["tail_bound_holds"] = rep.bound_holds
        elif m.kind == "boundary_harnack":
            p2 = _stage("build", build_problem, grid, lab.domain, lab.f, m.g2, lab.operator, spec, N)
            u2 = _stage("solve", solve, p2, SolverConfig()).u
            rep = _stage("boundary_harnack", boundary_harnack, u, u2, spec, prob.mask, m.radius,
                         m.floor, m.x0, m.rho)
            out["ratio_min"] = rep.ratio_min
            out["ratio_max"] = rep.ratio_max
    return out


def run_experiment(lab) -> RegularityReport:
    """Solve and measure for every (phi family, alpha) of the sweep.

    ``lab`` is a validated lab block (see ``pucci.config.LabBlock``) or a dict.
    With ``refine`` every measurement is repeated at 2N and reported with the
    suffix ``_fine``.
    """
    from .config import LabBlock
    from .kernel_model import ScalingFunction

    if isinstance(lab, dict):
        lab = LabBlock.model_validate(lab)
    report = RegularityReport()
    if not lab.measurements:
        return report
    for fam in sorted(lab.phi_families):
        for alpha in sorted(lab.alphas):
            phi = ScalingFunction(fam, lab.beta_fraction * alpha)
            spec = _stage("spec", KernelSpec, lab.lam, lab.Lam, alpha, phi, lab.kernel_class)
            row = {"alpha": alpha, "phi_family": fam}
            row.update(_measure(lab, spec, lab.grid.N, alpha))
            if lab.refine:
                fine = _measure(lab, spec, 2 * lab.grid.N, alpha)
                row.update({k + "_fine": v for k, v in fine.items()})
            report.rows.append(row)
    return report
