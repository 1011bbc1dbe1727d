"""Discretisation of the Lévy integral ∫ δ(u,x,y) w(|y|)/|y|^d dy on a uniform lattice.

Scheme.  Write g(y) = δ(u,x,y)/|y|^2, which is bounded near the origin for
smooth u.  On the lattice cube |y|_∞ <= T the measure |y|^2 w(|y|)/|y|^d dy is
integrated against the piecewise (multi)linear hat functions of the lattice,
giving a nonnegative weight per offset y_j:

    W_j = ∫ Ψ_j(y) |y|^{2-d} w(|y|) dy / |y_j|^2 ,

so the lattice sum is Σ_j W_j δ(u,x,y_j).  The cells touching the origin are
handled by quadratic Taylor matching: their mass (1/2d) ∫ |y|^{2-d} w dy
(``inner_coeff``) multiplies the nearest-neighbour second differences divided
by h^2.  Outside the cube both x±y leave the box, so for zero or constant
exteriors the remaining integral has a closed form; formula exteriors use
adaptive quadrature.  All weights are nonnegative, so the scheme is monotone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from .errors import (ConfigurationError, DimensionError, InvalidSpecError,
                     UnboundedFunctionError)
from .grid import GridFunction
from .kernel_model import ScalingFunction, n_sectors, sector_index

WEIGHT_RTOL = 1e-6


def _gl01(m: int):
    x, w = leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@dataclass(frozen=True)
class RadialWeight:
    """Radial factor w(ρ) of a Lévy density w(|y|)/|y|^d.

    ``stable``: prefactor·(2-α)ρ^-α.  ``phi``: prefactor·φ(1/ρ), restricted to
    ρ >= 1 when ``cutoff`` is set.
    """

    kind: str
    alpha: float = float("nan")
    phi: Optional[ScalingFunction] = None
    prefactor: float = 1.0
    cutoff: bool = False

    def __post_init__(self):
        if self.kind == "stable":
            if not 0.0 < self.alpha < 2.0:
                raise InvalidSpecError("stable weight needs alpha in (0, 2)")
        elif self.kind == "phi":
            if self.phi is None:
                raise InvalidSpecError("phi weight needs a ScalingFunction")
        else:
            raise InvalidSpecError("weight kind must be 'stable' or 'phi'")
        if not self.prefactor > 0.0:
            raise InvalidSpecError("prefactor must be positive")

    @classmethod
    def stable(cls, alpha, prefactor=1.0):
        return cls("stable", float(alpha), None, float(prefactor))

    @classmethod
    def of_phi(cls, phi, prefactor=1.0, cutoff=False):
        return cls("phi", float("nan"), phi, float(prefactor), bool(cutoff))

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "stable":
            return self.prefactor * (2.0 - self.alpha) * rho ** (-self.alpha)
        with np.errstate(divide="ignore"):
            out = self.prefactor * self.phi(1.0 / rho)
        if self.cutoff:
            out = np.where(rho >= 1.0, out, 0.0)
        return out

    def _power_beta(self):
        if self.kind == "phi" and self.phi.family == "power":
            return self.phi.beta, self.prefactor * self.phi.scale_factor
        return None

    def moment(self, s: float) -> float:
        """∫_0^s ρ w(ρ) dρ."""
        s = float(s)
        if s <= 0.0:
            return 0.0
        if self.kind == "stable":
            return self.prefactor * s ** (2.0 - self.alpha)
        lo = 1.0 if self.cutoff else 0.0
        if s <= lo:
            return 0.0
        pb = self._power_beta()
        if pb is not None:
            beta, c = pb
            return c * (s ** (2.0 - beta) - lo ** (2.0 - beta)) / (2.0 - beta)
        return _checked_quad(lambda r: r * self(r), lo, s, "inner moment")

    def tail(self, s: float) -> float:
        """∫_s^∞ w(ρ)/ρ dρ."""
        s = float(s)
        if s <= 0.0:
            raise ConfigurationError("tail integral needs a positive radius")
        if self.kind == "stable":
            return self.prefactor * (2.0 - self.alpha) / self.alpha * s ** (-self.alpha)
        if self.cutoff:
            s = max(s, 1.0)
        pb = self._power_beta()
        if pb is not None:
            beta, c = pb
            return c * s ** (-beta) / beta
        # substitute t = 1/ρ: ∫_0^{1/s} φ(t)/t dt = ∫_{-∞}^{log(1/s)} φ(e^v) dv
        f = self.phi
        return self.prefactor * _checked_quad(lambda v: f(np.exp(v)), -np.inf, -np.log(s), "tail")

    def tail_tables(self, T: float, dim: int) -> np.ndarray:
        """Mass ∫ w/|y|^d over {|y|_∞ > T} split by direction sector."""
        if dim == 1:
            return np.full(2, self.tail(T))
        g = lambda th: self.tail(T / np.cos(th))
        m0 = _checked_quad(g, 0.0, np.pi / 8, "sector tail")
        m1 = _checked_quad(g, np.pi / 8, np.pi / 4, "sector tail")
        return np.tile([m0, m1, m1, m0], 4)

    def second_moment(self, dim: int) -> float:
        """∫ (|y|^2 ∧ 1) w(|y|)/|y|^d dy over R^d."""
        omega = 2.0 if dim == 1 else 2.0 * np.pi
        return omega * (self.moment(1.0) + self.tail(1.0))


def _checked_quad(f, a, b, what, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, a, b, limit=200, epsabs=0.0, epsrel=1e-11, **kw)
        except integrate.IntegrationWarning as exc:
            raise ConfigurationError(f"{what} integral did not converge: {exc}") from None
    if not np.isfinite(val):
        raise ConfigurationError(f"{what} integral is not finite")
    return float(val)


def cell_integral(w: RadialWeight, lo, hi) -> float:
    """∫ w(|y|)/|y|^d dy over the axis-parallel box [lo, hi] (which must avoid 0)."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or lo.size not in (1, 2):
        raise DimensionError("cell corners must both be 1-d or both 2-d")
    if np.all(lo <= 0) and np.all(hi >= 0):
        raise ConfigurationError("the cell containing the origin has no finite weight")
    if lo.size == 1:
        return _checked_quad(lambda t: w(abs(t)) / abs(t), lo[0], hi[0], "cell")
    val, _ = integrate.dblquad(lambda b, a: w(np.hypot(a, b)) / (a * a + b * b),
                               lo[0], hi[0], lo[1], hi[1], epsabs=0.0, epsrel=1e-10)
    return float(val)


@dataclass(frozen=True, eq=False)
class CellWeights:
    """Lattice weights for one radial weight on a grid of spacing ``h``.

    ``table[|j_1|, |j_2|]`` is the weight of each lattice offset (origin entry
    zero); ``inner_coeff`` is the Taylor-matched mass of the cells touching the
    origin and ``tail_by_sector`` the mass beyond ``tail_radius``.
    """

    dim: int
    h: float
    n_cells: int
    weight: RadialWeight
    table: np.ndarray
    inner_coeff: float
    tail_by_sector: np.ndarray

    @property
    def tail_radius(self) -> float:
        return self.n_cells * self.h

    @property
    def tail_mass(self) -> float:
        return float(np.sum(self.tail_by_sector))

    def effective_table(self) -> np.ndarray:
        t = self.table.copy()
        nn = self.inner_coeff / self.h**2
        if self.dim == 1:
            t[1] += nn
        else:
            t[1, 0] += nn
            t[0, 1] += nn
        return t

    def offsets(self) -> np.ndarray:
        """All nonzero lattice offsets, shape (m, dim)."""
        r = np.arange(-self.n_cells, self.n_cells + 1)
        if self.dim == 1:
            o = r[r != 0][:, None]
        else:
            A, B = np.meshgrid(r, r, indexing="ij")
            o = np.stack([A.ravel(), B.ravel()], axis=1)
            o = o[np.any(o != 0, axis=1)]
        return o

    def weights(self) -> np.ndarray:
        """Weight of each row of ``offsets()``."""
        a = np.abs(self.offsets())
        return self.table[a[:, 0]] if self.dim == 1 else self.table[a[:, 0], a[:, 1]]

    def second_moment(self) -> float:
        """Discrete counterpart of ∫ (|y|^2 ∧ 1) w/|y|^d dy."""
        o = self.offsets() * self.h
        r2 = np.sum(o * o, axis=1)
        lattice = float(np.sum(self.weights() * np.minimum(r2, 1.0)))
        # assumes h <= 1/sqrt(d) and tail_radius >= 1, so the inner cells sit
        # inside the unit ball and the tail outside it
        return lattice + 2 * self.dim * self.inner_coeff + self.tail_mass


def precompute_weights(dim: int, h: float, w: RadialWeight, tail_radius: float) -> CellWeights:
    """Weight table for the lattice hZ^dim truncated at |y|_∞ <= tail_radius (rounded up to a node)."""
    if dim not in (1, 2):
        raise DimensionError("only dimensions 1 and 2 are supported")
    if not h > 0 or not tail_radius > 0:
        raise ConfigurationError("h and tail_radius must be positive")
    n = int(np.ceil(tail_radius / h - 1e-9))
    if n < 2:
        raise ConfigurationError("tail_radius must cover at least two cells")
    return _precompute(dim, float(h), w, n)


@lru_cache(maxsize=64)
def _precompute(dim, h, w, n):
    if dim == 1:
        table = _table_1d(w, h, n)
        inner = w.moment(h)
    else:
        table = _table_2d(w, h, n)
        inner = _origin_cell_2d(w, h)
    if not np.isfinite(inner):
        raise ConfigurationError("weight is not integrable against |y|^2 near the origin")
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ConfigurationError("weight table has negative or non-finite entries")
    table.setflags(write=False)
    tails = w.tail_tables(n * h, dim)
    return CellWeights(dim, h, n, w, table, float(inner), tails)


def _table_1d(w, h, n):
    xi, wt = _gl01(12)
    k = np.arange(1, n)[:, None]
    lo = np.zeros_like(k, dtype=float)
    if w.kind == "phi" and w.cutoff:
        lo = np.clip(1.0 / h - k, 0.0, 1.0)
    span = 1.0 - lo
    x = lo + span * xi[None, :]
    rho = (k + x) * h
    f = rho * w(rho) * (h * span) * wt[None, :]
    W = np.zeros(n + 1)
    W[1:n] += np.sum(f * (1.0 - x), axis=1)
    W[2:n + 1] += np.sum(f * x, axis=1)
    W[1:] /= (np.arange(1, n + 1) * h) ** 2
    return W


def _origin_cell_2d(w, h):
    """∫_{[0,h]^2} w(|y|) dy, which equals (1/4)∫_{[-h,h]^2} |y|^2 w/|y|^2 dy."""
    return 2.0 * _checked_quad(lambda th: w.moment(h / np.cos(th)), 0.0, np.pi / 4, "origin cell")


def _table_2d(w, h, n):
    xi, wt = _gl01(8)
    X1, X2 = xi[:, None], xi[None, :]
    WW = wt[:, None] * wt[None, :] * h * h
    N00 = (1 - X1) * (1 - X2)
    N10 = X1 * (1 - X2)
    N01 = (1 - X1) * X2
    N11 = X1 * X2
    W = np.zeros((n + 1, n + 1))
    b = np.arange(n)
    for a in range(n):
        y1 = (a + X1) * h
        y2 = (b[:, None, None] + X2[None]) * h
        f = w(np.hypot(y1[None], y2)) * WW
        if a == 0:
            f[0] = 0.0
        W[a, :n] += np.einsum("kij,ij->k", f, N00)
        W[a + 1, :n] += np.einsum("kij,ij->k", f, N10)
        W[a, 1:] += np.einsum("kij,ij->k", f, N01)
        W[a + 1, 1:] += np.einsum("kij,ij->k", f, N11)
    if w.kind == "phi" and w.cutoff:
        _fix_cutoff_cells(W, w, h, n)
    # mirror images of the axis nodes belong to the same table entry
    W[0, :] *= 2.0
    W[:, 0] *= 2.0
    a, bb = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    r2 = (a * a + bb * bb) * h * h
    r2[0, 0] = 1.0
    W = W / r2
    W[0, 0] = 0.0
    return W


def _fix_cutoff_cells(W, w, h, n):
    """Recompute cells cut by the circle |y| = 1, where the φ part switches on."""
    inner_w = RadialWeight.of_phi(w.phi, w.prefactor, cutoff=False)
    xi, wt = _gl01(12)
    for a in range(n):
        for b in range(n):
            c = np.array([[a, b], [a + 1, b], [a, b + 1], [a + 1, b + 1]]) * h
            r = np.hypot(c[:, 0], c[:, 1])
            if not (r.min() < 1.0 < r.max()):
                continue
            x0, y0 = a * h, b * h

            def fa(s):
                y1 = x0 + s * h
                lo = max(y0, np.sqrt(max(1.0 - y1 * y1, 0.0)))
                if lo >= y0 + h:
                    return np.zeros(4)
                y2 = lo + (y0 + h - lo) * xi
                t = (y2 - y0) / h
                f = inner_w(np.hypot(y1, y2)) * wt * (y0 + h - lo)
                return h * np.array([np.sum(f * (1 - s) * (1 - t)), np.sum(f * s * (1 - t)),
                                     np.sum(f * (1 - s) * t), np.sum(f * s * t)])

            # undo the GL contribution, then add the split one
            vals, _ = integrate.quad_vec(fa, 0.0, 1.0, epsrel=1e-10, points=_kinks(x0, y0, h))
            old = _cell_gl(w, a, b, h)
            W[a, b] += vals[0] - old[0]
            W[a + 1, b] += vals[1] - old[1]
            W[a, b + 1] += vals[2] - old[2]
            W[a + 1, b + 1] += vals[3] - old[3]


def _kinks(x0, y0, h):
    pts = []
    for yy in (y0, y0 + h):
        if yy < 1.0:
            s = (np.sqrt(1.0 - yy * yy) - x0) / h
            if 0 < s < 1:
                pts.append(s)
    s = (1.0 - x0) / h
    if 0 < s < 1:
        pts.append(s)
    return sorted(pts) or None


def _cell_gl(w, a, b, h):
    xi, wt = _gl01(8)
    X1, X2 = xi[:, None], xi[None, :]
    f = w(np.hypot((a + X1) * h, (b + X2) * h)) * wt[:, None] * wt[None, :] * h * h
    return np.array([np.sum(f * (1 - X1) * (1 - X2)), np.sum(f * X1 * (1 - X2)),
                     np.sum(f * (1 - X1) * X2), np.sum(f * X1 * X2)])


# --------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class Component:
    """One weight table with its sign coefficients (c+ on δ+, c- on δ-), per direction sector."""

    weights: CellWeights
    pos: np.ndarray
    neg: np.ndarray

    @classmethod
    def make(cls, weights, pos, neg):
        m = n_sectors(weights.dim)
        p = np.broadcast_to(np.asarray(pos, dtype=float), (m,)).copy()
        q = np.broadcast_to(np.asarray(neg, dtype=float), (m,)).copy()
        if np.any(p < 0) or np.any(q < 0):
            raise ConfigurationError("sign coefficients must be nonnegative")
        return cls(weights, p, q)


@dataclass(frozen=True)
class SignSelector:
    """Per-sign coefficients (c+, c-) for the stable and the φ weight."""

    stable: tuple = (1.0, 1.0)
    phi: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class LevyParts:
    value: np.ndarray
    near: np.ndarray
    mid: np.ndarray
    tail: np.ndarray
    tail_error: np.ndarray
    quad_error: np.ndarray
    tail_remainder: np.ndarray


@lru_cache(maxsize=16)
def _half_stencil(dim, n):
    r = np.arange(-n, n + 1)
    if dim == 1:
        offs = np.arange(1, n + 1)[:, None]
    else:
        A, B = np.meshgrid(r, r, indexing="ij")
        offs = np.stack([A.ravel(), B.ravel()], axis=1)
        keep = (offs[:, 0] > 0) | ((offs[:, 0] == 0) & (offs[:, 1] > 0))
        offs = offs[keep]
    sec = sector_index(offs.astype(float), dim)
    nn = np.sum(np.abs(offs), axis=1) == 1
    offs.setflags(write=False)
    return offs, sec, nn


def _check_geometry(u: GridFunction, comps: Sequence[Component]):
    if not comps:
        raise ConfigurationError("need at least one weight component")
    n = comps[0].weights.n_cells
    for c in comps:
        cw = c.weights
        if cw.dim != u.dim or not np.isclose(cw.h, u.h, rtol=1e-12) or cw.n_cells != n:
            raise DimensionError("weight tables do not match the grid")
    if n < u.N:
        raise ConfigurationError("tail_radius must be at least the box diameter 2R")
    return n


def levy_parts(u: GridFunction, idx, comps: Sequence[Component], chunk: int = 4_000_000) -> LevyParts:
    """Evaluate Σ_components Σ_j W_j [c+ δ_j^+ - c- δ_j^-] + tail at many nodes.

    ``idx`` holds node multi-indices, shape (P, dim).
    """
    idx = np.atleast_2d(np.asarray(idx, dtype=int))
    if idx.shape[1] != u.dim:
        raise DimensionError("node indices must have one column per dimension")
    n = _check_geometry(u, comps)
    offs, sec, nn = _half_stencil(u.dim, n)
    U = u.padded(n)
    shape = U.shape
    center = idx + n
    flat_c = np.ravel_multi_index(tuple(center.T), shape)
    step = np.ravel_multi_index(tuple((offs + n).T), shape) - np.ravel_multi_index((n,) * u.dim, shape)
    # per-component weight vectors over the half stencil (factor 2 pairs j with -j)
    vecs = []
    for c in comps:
        a = np.abs(offs)
        tab = c.weights.table
        wr = 2.0 * (tab[a[:, 0]] if u.dim == 1 else tab[a[:, 0], a[:, 1]])
        wi = np.where(nn, 2.0 * c.weights.inner_coeff / c.weights.h**2, 0.0)
        p, q = c.pos[sec], c.neg[sec]
        vecs.append((wr * p, wr * q, wi * p, wi * q))
    P = len(idx)
    near = np.zeros(P)
    mid = np.zeros(P)
    qerr = np.zeros(P)
    bs = max(1, chunk // len(offs))
    Uf = U.ravel()
    for s in range(0, P, bs):
        fc = flat_c[s:s + bs, None]
        d = Uf[fc + step] + Uf[fc - step] - 2.0 * Uf[fc]
        dp = np.maximum(d, 0.0)
        dn = np.maximum(-d, 0.0)
        for wp, wq, ip, iq in vecs:
            a_ = dp @ wp
            b_ = dn @ wq
            mid[s:s + bs] += a_ - b_
            near[s:s + bs] += dp @ ip - dn @ iq
            qerr[s:s + bs] += WEIGHT_RTOL * (a_ + b_)
    tail = np.zeros(P)
    terr = np.zeros(P)
    trem = np.zeros(P)
    for c in comps:
        tv, te, tr = _tail_many(u, idx, c)
        tail += tv
        terr += te
        trem += tr
    value = near + mid + tail
    return LevyParts(value, near, mid, tail, terr, qerr, trem)


def _tail_many(u, idx, comp):
    cw = comp.weights
    T = cw.tail_radius
    mass = cw.tail_by_sector
    total = float(np.sum(mass))
    remainder = 2.0 * u.sup_bound * total * np.ones(len(idx))
    far = u.exterior.far_field
    reach = T - np.max(np.abs(u.node_coords(idx)), axis=1) if len(idx) else np.zeros(0)
    if far is not None and np.all(reach >= far[1] * (1 - 1e-12)):
        ux = u.at_nodes(idx)
        d = 2.0 * (far[0] - ux)
        cp = float(np.dot(comp.pos, mass))
        cn = float(np.dot(comp.neg, mass))
        val = cp * np.maximum(d, 0.0) - cn * np.maximum(-d, 0.0)
        return val, 1e-14 * np.abs(val), remainder
    vals = np.empty(len(idx))
    errs = np.empty(len(idx))
    for k, node in enumerate(idx):
        vals[k], errs[k] = _formula_tail(u, node, comp, T)
    return vals, errs, remainder


def _formula_tail(u, node, comp, T):
    x = u.node_coords(node)
    ux = float(u.at_nodes(np.asarray(node)[None])[0])
    f = u.exterior
    w = comp.weights.weight
    pos, neg = comp.pos, comp.neg

    def split(d, s):
        return pos[s] * max(d, 0.0) - neg[s] * max(-d, 0.0)

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            if u.dim == 1:
                def g(r):
                    d = float(f(np.array([[x[0] + r], [x[0] - r]])).sum()) - 2.0 * ux
                    return split(d, 0) * w(r) / r
                v, e = integrate.quad(g, T, np.inf, limit=400, epsabs=1e-13, epsrel=1e-10)
                return 2.0 * v, 2.0 * e

            def inner(th):
                e_ = np.array([np.cos(th), np.sin(th)])
                s = int(sector_index(e_, 2))
                r0 = T / max(abs(e_[0]), abs(e_[1]))

                def g(r):
                    d = float(f(np.stack([x + r * e_, x - r * e_])).sum()) - 2.0 * ux
                    return split(d, s) * w(r) / r
                return integrate.quad(g, r0, np.inf, limit=200, epsabs=1e-13, epsrel=1e-10)[0]
            v, e = integrate.quad(inner, 0.0, np.pi, limit=200, epsabs=1e-12, epsrel=1e-9,
                                  points=[np.pi / 4, np.pi / 2, 3 * np.pi / 4])
            return 2.0 * v, 2.0 * e + 1e-10 * abs(v)
        except integrate.IntegrationWarning as exc:
            raise UnboundedFunctionError(f"tail integral of the exterior formula does not converge: {exc}") from None


# --------------------------------------------------------------------------
# single-point operations

def second_difference(u: GridFunction, x, y) -> float:
    """u(x+y) + u(x-y) - 2u(x) for a node x and a lattice offset y (both in index units)."""
    x = np.atleast_1d(np.asarray(x, dtype=int))
    y = np.atleast_1d(np.asarray(y, dtype=int))
    if x.shape != (u.dim,) or y.shape != (u.dim,):
        raise DimensionError(f"x and y must be {u.dim}-dimensional index vectors")
    v = u.at_nodes(np.stack([x + y, x - y, x]))
    return float(v[0] + v[1] - 2.0 * v[2])


def _as_index(u: GridFunction, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x))
    if np.issubdtype(x.dtype, np.integer):
        if x.shape != (u.dim,):
            raise DimensionError(f"expected a {u.dim}-dimensional node index")
        return x
    return np.asarray(u.index_of(x))


def apply_levy(u: GridFunction, x, weights_stable: CellWeights, weights_phi: Optional[CellWeights] = None,
               selector: SignSelector = SignSelector()) -> float:
    """The discrete sign-split Lévy integral at the node ``x`` (index vector or coordinates)."""
    comps = [Component.make(weights_stable, *selector.stable)]
    if weights_phi is not None and any(selector.phi):
        comps.append(Component.make(weights_phi, *selector.phi))
    node = _as_index(u, x)
    return float(levy_parts(u, node[None], comps).value[0])


@dataclass(frozen=True)
class TailContribution:
    value: float
    error_bound: float
    remainder_bound: float


def tail_contribution(u: GridFunction, x, w: RadialWeight, tail_radius: Optional[float] = None,
                      pos=1.0, neg=1.0) -> TailContribution:
    """∫ over |y|_∞ > tail_radius of the sign-split δ against w/|y|^d.

    ``remainder_bound`` is the crude bound 2·sup|u|·mass, what one would
    lose by dropping the tail; ``error_bound`` is the error of the value returned.
    """
    T = 2.0 * u.R if tail_radius is None else float(tail_radius)
    if T < 2.0 * u.R * (1 - 1e-12):
        raise ConfigurationError("tail_radius must be at least the box diameter 2R")
    cw = _TailOnly(u.dim, w, T)
    comp = Component.make(cw, pos, neg)
    node = _as_index(u, x)
    v, e, r = _tail_many(u, node[None], comp)
    return TailContribution(float(v[0]), float(e[0]), float(r[0]))


class _TailOnly:
    """Just enough of CellWeights for the tail routines."""

    def __init__(self, dim, w, T):
        self.dim = dim
        self.weight = w
        self.tail_radius = T
        self.tail_by_sector = w.tail_tables(T, dim)
