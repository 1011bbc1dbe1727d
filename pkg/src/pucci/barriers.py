"""The special barrier f = min{δ^-p, max{|x|^-p, (2√n)^-p}}, its certification and the bump Φ."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (ConstructionError, PreconditionError, ResolutionError,
                     SearchFailureError)
from .extremal_ops import OperatorKind, phi_factor
from .grid import Exterior, GridFunction
from .kernel_model import KernelSpec
from .panel import PanelTerm, RadialProfile, levy_radial_checked
from .quadrature import RadialWeight


@dataclass(frozen=True)
class BarrierParams:
    """Exponent ``p``, cap radius ``delta``, inner radius ``r`` and dimension ``n``.

    With ``strict`` the working assumptions delta < r/16 and p > n are enforced;
    degenerate barriers (e.g. delta = 2√n, a constant) need ``strict=False``.
    """

    p: float
    delta: float
    r: float
    n: int
    alpha_range: tuple = (1.0, 1.0)
    strict: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not (self.p > 0 and self.delta > 0):
            raise PreconditionError("p and delta must be positive")
        if not 0.0 < self.r <= 1.0:
            raise PreconditionError("r must lie in (0, 1]")
        if self.n not in (1, 2):
            raise PreconditionError("only dimensions 1 and 2 are supported")
        a0, a1 = self.alpha_range
        if not 0.0 < a0 <= a1 < 2.0:
            raise PreconditionError("alpha_range must satisfy 0 < a0 <= a1 < 2")
        object.__setattr__(self, "alpha_range", (float(a0), float(a1)))
        if self.strict:
            if not self.delta < self.r / 16.0:
                raise PreconditionError("delta must be smaller than r/16")
            if not self.p > self.n:
                raise PreconditionError("p must exceed the dimension")

    @property
    def outer(self) -> float:
        return 2.0 * np.sqrt(self.n)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("strict")
        d["alpha_range"] = list(self.alpha_range)
        return d


def cp_constant(p: float) -> float:
    """C_p = p (1 + (p+2)(p+4)/2)."""
    if not p > 0:
        raise PreconditionError("C_p needs p > 0")
    return p * (1.0 + 0.5 * (p + 2.0) * (p + 4.0))


def _barrier_F(p, delta, outer):
    cap, floor = delta ** (-p), outer ** (-p)

    def F(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.minimum(cap, np.maximum(s ** (-p), floor))
    return F


def barrier_profile(params: BarrierParams, scale: float = 1.0) -> RadialProfile:
    """f as a radial profile; ``scale`` = r gives the rescaled f̂ with thresholds δ/r and 2√n/r."""
    p = params.p
    delta, outer = params.delta / scale, params.outer / scale
    F = _barrier_F(p, delta, outer)

    def dF(s):
        s = np.asarray(s, dtype=float)
        on = (s > delta) & (s < outer)
        return np.where(on, -p * np.where(on, s, 1.0) ** (-p - 1), 0.0)

    def d2F(s):
        s = np.asarray(s, dtype=float)
        on = (s > delta) & (s < outer)
        return np.where(on, p * (p + 1) * np.where(on, s, 1.0) ** (-p - 2), 0.0)
    return RadialProfile(F, dF, d2F, (delta, outer), outer ** (-p), outer, "barrier")


def barrier_eval(params: BarrierParams, x, scale: float = 1.0):
    """f(x) for points x of shape (..., n) (or scalars in 1-d)."""
    x = np.asarray(x, dtype=float)
    if params.n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    return barrier_profile(params, scale)(x)


def barrier_grid(params: BarrierParams, h: float, R: Optional[float] = None) -> GridFunction:
    """The barrier on a grid with a formula exterior (needs h <= delta/8)."""
    if h > params.delta / 8.0 * (1 + 1e-12):
        raise ResolutionError("grid spacing must be at most delta/8")
    R = params.outer + params.delta if R is None else R
    N = int(np.ceil(2 * R / h))
    N += N % 2
    R = N * h / 2.0
    prof = barrier_profile(params)
    ext = Exterior.from_formula(prof, params.delta ** (-params.p), "barrier", prof.far_value, prof.far_radius)
    return GridFunction.from_function(prof, params.n, R, N, exterior=ext)


def annulus_radii(params: BarrierParams, growth: float = 1.25) -> np.ndarray:
    """Test radii in (r, 2√n): spacing delta/8 next to r, growing geometrically."""
    step = params.delta / 8.0
    top = params.outer - step
    out = [params.r + step]
    while out[-1] < top:
        step *= growth
        out.append(min(out[-1] + step, top))
    return np.unique(np.array(out))


def operator_terms(kind: OperatorKind, spec: KernelSpec) -> list:
    """Scalar sign coefficients of an extremal operator for the panel quadrature."""
    lam, Lam = spec.lam, spec.Lam
    ws = RadialWeight.stable(spec.alpha)
    wp = RadialWeight.of_phi(spec.phi)
    f = phi_factor(spec, kind.scale)
    table = {
        "MPlus": [(ws, Lam, lam), (wp, Lam * f, 0.0)],
        "MMinus": [(ws, lam, Lam), (wp, 0.0, Lam * f)],
        "TildePlus": [(ws, Lam, lam), (wp, Lam, lam)],
        "TildeMinus": [(ws, lam, Lam), (wp, lam, Lam)],
    }
    if kind.variant not in table:
        raise PreconditionError("closed-form evaluation supports the extremal operators only")
    return [PanelTerm(w, pos, neg) for w, pos, neg in table[kind.variant] if pos or neg]


@dataclass
class BarrierCertificate:
    params: BarrierParams
    grid_min: float
    tolerance: float
    passed: bool
    resolution: float
    alphas: tuple
    radii: np.ndarray
    values: np.ndarray
    errors: np.ndarray

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "grid_min": float(self.grid_min),
                "tolerance": float(self.tolerance), "pass": bool(self.passed),
                "resolution": float(self.resolution), "alphas": list(self.alphas)}


def _alphas(params: BarrierParams):
    a0, a1 = params.alpha_range
    return tuple(sorted({a0, 0.5 * (a0 + a1), a1}))


def _evaluate_profile(prof, dim, radii, terms, h):
    vals, errs = [], []
    for s in radii:
        res = levy_radial_checked(prof, dim, s, terms, h)
        vals.append(res.parts["fine"])
        errs.append(res.error)
    return np.array(vals), np.array(errs)


def verify_barrier(params: BarrierParams, spec: KernelSpec, h: Optional[float] = None,
                   alphas: Optional[Sequence[float]] = None, radii=None) -> BarrierCertificate:
    """Evaluate M₀⁻f on the annulus r < |x| < 2√n for each α and certify min >= -tolerance.

    f is radial and the operator rotation invariant, so one point per radius
    suffices in 2-d. Values are quadrature results at resolution h/2 with
    the h versus h/2 difference as error estimate.
    """
    h = params.delta / 16.0 if h is None else float(h)
    if h > params.delta / 8.0 * (1 + 1e-12):
        raise ResolutionError("resolution must be at most delta/8")
    alphas = _alphas(params) if alphas is None else tuple(alphas)
    radii = annulus_radii(params) if radii is None else np.asarray(radii, dtype=float)
    prof = barrier_profile(params)
    vals, errs = [], []
    for a in alphas:
        sp = spec if a == spec.alpha else spec.with_alpha(a)
        v, e = _evaluate_profile(prof, params.n, radii, operator_terms(OperatorKind.mminus(0), sp), h)
        vals.append(v)
        errs.append(e)
    vals, errs = np.array(vals), np.array(errs)
    gmin = float(np.min(vals))
    tol = float(np.max(errs)) if errs.size else 0.0
    return BarrierCertificate(params, gmin, tol, bool(gmin >= -tol), h, alphas, radii, vals, errs)


def p_candidates(d: int, count: int = 6):
    out = [d + 1, d + 2]
    q = 2 * d + 2
    while len(out) < count:
        out.append(q)
        q *= 2
    return [float(v) for v in out]


def search_barrier_params(r: float, spec: KernelSpec, alpha_range=None, n: Optional[int] = None,
                          dim: int = 1, max_halvings: int = 4, p_count: int = 6) -> BarrierParams:
    """First (p, delta) on the search lattice whose certificate passes at every sampled α."""
    if not 0.0 < r <= 1.0:
        raise PreconditionError("r must lie in (0, 1]")
    n = dim if n is None else n
    alpha_range = (spec.alpha, spec.alpha) if alpha_range is None else tuple(alpha_range)
    best = -np.inf
    for p in p_candidates(n, p_count):
        for k in range(max_halvings):
            delta = r / 32.0 / 2**k
            params = BarrierParams(p, delta, r, n, alpha_range)
            cert = verify_barrier(params, spec)
            margin = cert.grid_min + cert.tolerance
            best = max(best, margin)
            if cert.passed:
                return params
    raise SearchFailureError("no (p, delta) on the search lattice certifies the barrier", best)


def elementary_slacks(a, b, q):
    """Slacks of (a+b)^-q >= a^-q(1 - qb/a) and (a+b)^-q + (a-b)^-q >= 2a^-q + q(q+1)b^2 a^(-q-2)."""
    a, b, q = (np.asarray(v, dtype=float) for v in (a, b, q))
    s1 = (a + b) ** (-q) - a ** (-q) * (1.0 - q * b / a)
    s2 = (a + b) ** (-q) + (a - b) ** (-q) - 2.0 * a ** (-q) - q * (q + 1.0) * b * b * a ** (-q - 2.0)
    return s1, s2


@dataclass
class BumpFunction:
    """Φ = a·(F_cap(|x|) - (2√n)^-p): a C^{1,1} paraboloid cap inside B_δ, zero outside B_{2√n}."""

    params: BarrierParams
    amplitude: float
    profile: RadialProfile
    grid: GridFunction
    certificates: dict
    q3_min: float

    def __call__(self, x):
        return self.profile(np.asarray(x, dtype=float))


def bump_profile(params: BarrierParams, amplitude: float) -> RadialProfile:
    p, dl, outer = params.p, params.delta, params.outer
    floor = outer ** (-p)
    B = 0.5 * p * dl ** (-p - 2)
    A = dl ** (-p) * (1.0 + 0.5 * p)

    def F(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            mid = np.maximum(s ** (-p), floor)
        return amplitude * (np.where(s < dl, A - B * s * s, mid) - floor)

    def dF(s):
        s = np.asarray(s, dtype=float)
        return amplitude * np.where(s < dl, -2 * B * s, np.where(s < outer, -p * s ** (-p - 1), 0.0))

    def d2F(s):
        s = np.asarray(s, dtype=float)
        return amplitude * np.where(s < dl, -2 * B, np.where(s < outer, p * (p + 1) * s ** (-p - 2), 0.0))

    return RadialProfile(F, dF, d2F, (dl, outer), 0.0, outer, "bump")


def build_bump(params: BarrierParams, spec: KernelSpec, scales=(0, 1, 5), h: Optional[float] = None,
               grid_N: int = 128, amplitude: Optional[float] = None) -> BumpFunction:
    """Glue the certified barrier into Φ and check Φ > 2 on Q_3 and M_i⁻Φ >= 0 outside B_{1/4}."""
    n = params.n
    if params.r > 0.25:
        raise PreconditionError("the bump needs a barrier certified outside B_{1/4} (r <= 1/4)")
    q3_corner = 1.5 * np.sqrt(n)
    if q3_corner >= params.outer:
        raise ConstructionError("Q_3 does not fit inside B_{2√n}")
    base = q3_corner ** (-params.p) - params.outer ** (-params.p)
    a = 2.5 / base if amplitude is None else float(amplitude)
    for _ in range(8):
        prof = bump_profile(params, a)
        ax = np.linspace(-1.5, 1.5, 61)
        if n == 1:
            pts = ax[:, None]
        else:
            X, Y = np.meshgrid(ax, ax, indexing="ij")
            pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        q3_min = float(np.min(prof(pts)))
        if q3_min > 2.0:
            break
        a *= 2.0
    else:
        raise ConstructionError("could not reach Phi > 2 on Q_3")
    h = params.delta / 16.0 if h is None else h
    radii = np.concatenate([annulus_radii(params), [params.outer * 1.25]])
    certs = {}
    for i in scales:
        vals, errs = _evaluate_profile(prof, n, radii, operator_terms(OperatorKind.mminus(int(i)), spec), h)
        gmin = float(np.min(vals))
        tol = float(np.max(errs))
        certs[int(i)] = BarrierCertificate(params, gmin, tol, bool(gmin >= -tol), h, (spec.alpha,),
                                           radii, vals[None], errs[None])
    R = params.outer * 1.125
    ext = Exterior.from_formula(prof, prof(np.zeros((1, n)))[0], "bump", 0.0, params.outer)
    grid = GridFunction.from_function(prof, n, R, grid_N, exterior=ext)
    return BumpFunction(params, a, prof, grid, certs, q3_min)
