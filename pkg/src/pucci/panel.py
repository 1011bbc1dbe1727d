"""Off-grid quadrature of sign-split Lévy integrals for closed-form radial functions.

For u(z) = F(|z|) and a point x = (s, 0, ...), the integral
∫ [c+ δ⁺ - c- δ⁻] w(|y|)/|y|^d dy is computed ray by ray in polar coordinates.
Along each ray the radial panels are graded geometrically towards every
radius where F has a kink (|x ± ρe| = κ) and split at sign changes of δ, so
each Gauss-Legendre panel sees a smooth integrand.  Angular panels are graded
towards the tangency directions of the kink circles and the directions where
the Hessian quadratic form of u at x changes sign.  Near ρ = 0 the quadratic
Taylor term is integrated in closed form; beyond s + far_radius both x ± y
sit in the constant far field, which is closed form too.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigurationError, DimensionError


def _gl01(m):
    x, w = leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """u(z) = F(|z|) with first and second derivatives, kink radii and constant far field."""

    F: Callable
    dF: Callable
    d2F: Callable
    kinks: tuple
    far_value: float
    far_radius: float
    label: str = ""

    def __call__(self, points):
        p = np.asarray(points, dtype=float)
        return self.F(np.sqrt(np.sum(p * p, axis=-1)))


@dataclass(frozen=True)
class PanelTerm:
    """A radial weight with scalar sign coefficients."""

    weight: object
    pos: float
    neg: float


def _split(d, pos, neg):
    return pos * np.maximum(d, 0.0) - neg * np.maximum(-d, 0.0)


def _graded(a, b, hmin, fine_left=True, fine_right=True, hmax=0.25):
    """Edges of panels on [a, b]: size hmin at the refined ends, doubling inwards up to hmax."""
    if b - a <= hmin:
        return np.array([a, b])
    if not (fine_left or fine_right):
        return np.linspace(a, b, int(np.ceil((b - a) / hmax)) + 1)
    mid = 0.5 * (a + b) if fine_left and fine_right else (b if fine_left else a)
    pts = [a, b, mid]
    for start, on in ((a, fine_left), (b, fine_right)):
        if not on:
            continue
        direction = 1.0 if mid > start else -1.0
        x, step = start, hmin
        while abs(mid - x) > step:
            x = x + direction * step
            pts.append(x)
            step = min(2.0 * step, hmax)
    if not fine_left:
        pts.extend(np.linspace(a, mid, int(np.ceil((mid - a) / hmax)) + 1))
    if not fine_right:
        pts.extend(np.linspace(mid, b, int(np.ceil((b - mid) / hmax)) + 1))
    return np.unique(np.array(pts))


@dataclass
class PanelResult:
    value: float
    error: float
    n_nodes: int = 0
    parts: dict = field(default_factory=dict)


class _Ray:
    """δ along rays x ± ρe for a batch of directions (cosines c)."""

    def __init__(self, prof: RadialProfile, s: float, dim: int):
        self.p = prof
        self.s = s
        self.dim = dim
        self.Fs = float(prof.F(np.array([s]))[0])
        d1 = float(prof.dF(np.array([s]))[0])
        d2 = float(prof.d2F(np.array([s]))[0])
        self.hess_rad = d2
        self.hess_tan = d1 / s if s > 0 else d2

    def delta(self, rho, c):
        s = self.s
        a = np.sqrt(np.maximum(s * s + 2 * s * rho * c + rho * rho, 0.0))
        b = np.sqrt(np.maximum(s * s - 2 * s * rho * c + rho * rho, 0.0))
        return self.p.F(a) + self.p.F(b) - 2.0 * self.Fs

    def quad_form(self, c):
        return self.hess_rad * c * c + self.hess_tan * (1.0 - c * c)


def levy_radial(prof: RadialProfile, dim: int, s: float, terms: Sequence[PanelTerm], h: float,
                m_rad: int = 8, m_ang: int = 12) -> PanelResult:
    """Sign-split Lévy integral of F(|·|) at a point at distance ``s`` from the origin."""
    if dim not in (1, 2):
        raise DimensionError("only dimensions 1 and 2 are supported")
    if not h > 0:
        raise ConfigurationError("resolution h must be positive")
    s = float(s)
    ray = _Ray(prof, s, dim)
    kinks = np.array([k for k in prof.kinks if k > 0], dtype=float)
    dist = np.min(np.abs(kinks - s)) if kinks.size else s
    if dist <= 0:
        raise ConfigurationError("the evaluation point sits on a kink of the profile")
    # quadratic Taylor region near ρ = 0
    eps = 1e-4 * min(dist, s if s > 0 else dist, h)
    rmax = s + prof.far_radius
    d_far = 2.0 * (prof.far_value - ray.Fs)

    if dim == 1:
        cs = np.array([1.0])
        wts = np.array([2.0])
    else:
        cs, wts = _angular_nodes(ray, kinks, s, h, m_ang)
        wts = 4.0 * wts
    # flat panel list over all rays
    A, B, C, Wt = [], [], [], []
    for c, wt in zip(cs, wts):
        e = _radial_edges(s, c, kinks, eps, rmax, h)
        A.append(e[:-1])
        B.append(e[1:])
        C.append(np.full(len(e) - 1, c))
        Wt.append(np.full(len(e) - 1, wt))
    a, b, c, wt = (np.concatenate(v) for v in (A, B, C, Wt))
    xi, wi = _gl01(m_rad)
    a, b, c, wt = _split_at_roots(ray, a, b, c, wt, xi)
    rho = a[:, None] + (b - a)[:, None] * xi[None, :]
    d = ray.delta(rho, c[:, None])
    scale = (wt * (b - a))[:, None] * wi[None, :] / rho
    total = 0.0
    q = ray.quad_form(cs)
    for t in terms:
        total += float(np.sum(_split(d, t.pos, t.neg) * t.weight(rho) * scale))
        # Taylor core: δ ≈ q ρ^2 on (0, eps)
        total += float(np.sum(wts * _split(q, t.pos, t.neg))) * t.weight.moment(eps)
    tail = 0.0
    for t in terms:
        mass = 2.0 * t.weight.tail(rmax) if dim == 1 else 2.0 * np.pi * t.weight.tail(rmax)
        tail += float(_split(d_far, t.pos, t.neg)) * mass
    return PanelResult(total + tail, 0.0, rho.size, {"tail": tail})


def levy_radial_checked(prof, dim, s, terms, h, **kw) -> PanelResult:
    """Value at resolution h with error estimated against resolution h/2."""
    coarse = levy_radial(prof, dim, s, terms, h, **kw)
    fine = levy_radial(prof, dim, s, terms, h / 2.0, **kw)
    err = abs(fine.value - coarse.value) + 1e-13 * (abs(coarse.value) + abs(coarse.parts["tail"]))
    return PanelResult(coarse.value, err, coarse.n_nodes + fine.n_nodes,
                       {"tail": coarse.parts["tail"], "fine": fine.value})


def _radial_edges(s, c, kinks, eps, rmax, h, hmax=0.25):
    br = [eps, rmax]
    for k in kinks:
        for sign in (1.0, -1.0):
            # |x + sign ρ e| = k  <=>  ρ^2 + 2 sign s c ρ + s^2 - k^2 = 0
            disc = s * s * c * c - s * s + k * k
            if disc < 0:
                continue
            r = np.sqrt(disc)
            for root in (-sign * s * c + r, -sign * s * c - r):
                if eps < root < rmax:
                    br.append(root)
    br = np.unique(np.array(br))
    pieces = []
    for j in range(len(br) - 1):
        lo, hi = br[j], br[j + 1]
        if j == 0:
            # geometric grading away from the Taylor core, fine again at the far end
            mid = 0.5 * (lo + hi)
            pts = [lo]
            while pts[-1] < mid:
                pts.append(min(2.0 * pts[-1], pts[-1] + hmax))
            pts[-1] = min(pts[-1], mid)
            right = _graded(mid, hi, h, fine_left=False, fine_right=True, hmax=hmax)
            pieces.append(np.concatenate([pts, right]))
        else:
            pieces.append(_graded(lo, hi, h, hmax=hmax))
    return np.unique(np.concatenate(pieces))


def _split_at_roots(ray, a, b, c, wt, xi, passes=3):
    """Split panels at the zeros of δ along their rays."""
    t = np.concatenate([[0.0], xi, [1.0]])
    for _ in range(passes):
        rho = a[:, None] + (b - a)[:, None] * t[None, :]
        d = ray.delta(rho, c[:, None])
        sg = np.sign(d)
        change = sg[:, 1:] * sg[:, :-1] < 0
        rows = np.nonzero(change.any(axis=1))[0]
        if rows.size == 0:
            break
        cols = np.argmax(change[rows], axis=1)
        lo = rho[rows, cols].copy()
        hi = rho[rows, cols + 1].copy()
        dlo = d[rows, cols].copy()
        cr = c[rows]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            dm = ray.delta(mid, cr)
            left = np.sign(dm) == np.sign(dlo)
            lo = np.where(left, mid, lo)
            dlo = np.where(left, dm, dlo)
            hi = np.where(left, hi, mid)
        root = 0.5 * (lo + hi)
        ok = (root - a[rows] > 1e-13 * b[rows]) & (b[rows] - root > 1e-13 * b[rows])
        if not np.any(ok):
            break
        rows, root = rows[ok], root[ok]
        new_a = np.concatenate([a, root])
        new_b = b.copy()
        new_b[rows] = root
        new_b = np.concatenate([new_b, b[rows]])
        c = np.concatenate([c, c[rows]])
        wt = np.concatenate([wt, wt[rows]])
        a, b = new_a, new_b
    return a, b, c, wt


def _angular_nodes(ray, kinks, s, h, m):
    """Composite GL nodes (as cosines) and weights on θ ∈ [0, π/2]."""
    br = [0.0, np.pi / 2]
    for k in kinks:
        if k < s:
            br.append(np.arcsin(k / s))
    hr, ht = ray.hess_rad, ray.hess_tan
    if hr * ht < 0:
        br.append(np.arctan(np.sqrt(-hr / ht)))
    br = np.unique(np.array(br))
    hmin = h / max(s, h)
    edges = np.unique(np.concatenate([_graded(br[j], br[j + 1], hmin) for j in range(len(br) - 1)]))
    xi, wi = _gl01(m)
    a, b = edges[:-1], edges[1:]
    th = (a[:, None] + (b - a)[:, None] * xi[None, :]).ravel()
    w = ((b - a)[:, None] * wi[None, :]).ravel()
    return np.cos(th), w
