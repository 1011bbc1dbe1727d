"""Extremal operators M±, their scaled versions M_i±, the two-sided pair M̃± and linear operators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ClassMismatchError, InvalidSpecError, ResolutionError
from .grid import Exterior, GridFunction
from .kernel_model import KernelFunction, KernelSpec
from .quadrature import Component, RadialWeight, levy_parts, precompute_weights

MAX_SCALE = 40
VARIANTS = ("MPlus", "MMinus", "TildePlus", "TildeMinus", "Linear")


@dataclass(frozen=True)
class OperatorKind:
    """Which operator to evaluate.

    ``scale`` is the index i of M_i± (the φ part carries κ∘ 2^{-i(α-β)});
    ``scale=None`` means the unscaled M± with φ itself.
    """

    variant: str
    scale: Optional[int] = None
    kernel: Optional[KernelFunction] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidSpecError(f"operator variant must be one of {VARIANTS}")
        if self.scale is not None:
            if int(self.scale) != self.scale or not 0 <= self.scale <= MAX_SCALE:
                raise InvalidSpecError(f"scale index must be an integer in [0, {MAX_SCALE}]")
            if self.variant not in ("MPlus", "MMinus"):
                raise InvalidSpecError("only M+ and M- take a scale index")
        if (self.variant == "Linear") != (self.kernel is not None):
            raise InvalidSpecError("a Linear operator needs exactly one kernel")

    @classmethod
    def mplus(cls, i=None):
        return cls("MPlus", i)

    @classmethod
    def mminus(cls, i=None):
        return cls("MMinus", i)

    @classmethod
    def tilde_plus(cls):
        return cls("TildePlus")

    @classmethod
    def tilde_minus(cls):
        return cls("TildeMinus")

    @classmethod
    def linear(cls, kernel):
        return cls("Linear", None, kernel)

    def label(self) -> str:
        if self.variant == "Linear":
            return "Linear"
        return self.variant if self.scale is None else f"{self.variant}({self.scale})"


@dataclass(frozen=True)
class OperatorEvaluation:
    value: float
    near_field: float
    mid_field: float
    tail: float
    tail_error_bound: float
    quad_error_bound: float = 0.0
    tail_remainder_bound: float = 0.0

    @property
    def error_budget(self) -> float:
        return self.tail_error_bound + self.quad_error_bound


def phi_factor(spec: KernelSpec, scale: Optional[int]) -> float:
    if scale is None:
        return 1.0
    return spec.phi.kappa0 * 2.0 ** (-scale * (spec.alpha - spec.phi.beta))


def components(kind: OperatorKind, spec: KernelSpec, dim: int, h: float, tail_radius: float):
    """Weight tables with sign coefficients realising ``kind``."""
    lam, Lam = spec.lam, spec.Lam
    ws = precompute_weights(dim, h, RadialWeight.stable(spec.alpha), tail_radius)
    v = kind.variant
    if v in ("TildePlus", "TildeMinus") and spec.kernel_class != "A4":
        raise ClassMismatchError("the two-sided operators need a class A4 spec")
    if v == "Linear":
        k = kind.kernel
        if k.dim != dim:
            raise InvalidSpecError("kernel dimension does not match the grid")
        cs, cp = np.asarray(k.c_stable), np.asarray(k.c_phi)
        out = [Component.make(ws, cs, cs)]
        if np.any(cp > 0):
            wp = precompute_weights(dim, h, RadialWeight.of_phi(spec.phi, cutoff=k.phi_cutoff), tail_radius)
            out.append(Component.make(wp, cp, cp))
        return out
    wp = precompute_weights(dim, h, RadialWeight.of_phi(spec.phi), tail_radius)
    f = phi_factor(spec, kind.scale)
    if v == "MPlus":
        return [Component.make(ws, Lam, lam), Component.make(wp, Lam * f, 0.0)]
    if v == "MMinus":
        return [Component.make(ws, lam, Lam), Component.make(wp, 0.0, Lam * f)]
    if v == "TildePlus":
        return [Component.make(ws, Lam, lam), Component.make(wp, Lam, lam)]
    return [Component.make(ws, lam, Lam), Component.make(wp, lam, Lam)]


def _nodes(u: GridFunction, points) -> np.ndarray:
    pts = np.asarray(points)
    if np.issubdtype(pts.dtype, np.integer):
        return np.atleast_2d(pts).reshape(-1, u.dim)
    pts = np.asarray(points, dtype=float).reshape(-1, u.dim)
    return np.array([u.index_of(p) for p in pts], dtype=int).reshape(-1, u.dim)


def eval_many(kind: OperatorKind, spec: KernelSpec, u: GridFunction, points,
              tail_radius: Optional[float] = None) -> list:
    """Evaluate at many nodes (index array or coordinates) and return OperatorEvaluations."""
    T = 2.0 * u.R if tail_radius is None else float(tail_radius)
    comps = components(kind, spec, u.dim, u.h, T)
    parts = levy_parts(u, _nodes(u, points), comps)
    return [OperatorEvaluation(float(parts.value[k]), float(parts.near[k]), float(parts.mid[k]),
                               float(parts.tail[k]), float(parts.tail_error[k]),
                               float(parts.quad_error[k]), float(parts.tail_remainder[k]))
            for k in range(len(parts.value))]


def eval_values(kind: OperatorKind, spec: KernelSpec, u: GridFunction, points,
                tail_radius: Optional[float] = None):
    """Values and error budgets as arrays."""
    T = 2.0 * u.R if tail_radius is None else float(tail_radius)
    parts = levy_parts(u, _nodes(u, points), components(kind, spec, u.dim, u.h, T))
    return parts.value, parts.quad_error + parts.tail_error


def eval_operator(kind: OperatorKind, spec: KernelSpec, u: GridFunction, x,
                  tail_radius: Optional[float] = None) -> OperatorEvaluation:
    return eval_many(kind, spec, u, [x] if np.ndim(x) else [[x]], tail_radius)[0]


@dataclass
class OrderingReport:
    max_violation: float
    passed: bool
    values: dict = field(default_factory=dict)
    budgets: np.ndarray = None


def operator_ordering_check(spec: KernelSpec, u: GridFunction, points) -> OrderingReport:
    """Check M⁻u ≤ M̃⁻u ≤ M̃⁺u ≤ M⁺u at every point, modulo the summed error budgets."""
    if spec.kernel_class != "A4":
        raise ClassMismatchError("the ordering chain concerns class A4")
    kinds = [OperatorKind.mminus(), OperatorKind.tilde_minus(), OperatorKind.tilde_plus(), OperatorKind.mplus()]
    vals, errs = {}, []
    for k in kinds:
        v, e = eval_values(k, spec, u, points)
        vals[k.variant] = v
        errs.append(e)
    budget = np.sum(errs, axis=0)
    seq = [vals[k.variant] for k in kinds]
    viol = np.max([np.max(seq[j] - seq[j + 1] - budget) for j in range(3)])
    return OrderingReport(float(viol), bool(viol <= 0.0), vals, budget)


def rescale_function(u: GridFunction, scale: float, amplitude: float = 1.0, x0=None,
                     N: Optional[int] = None, min_cells: int = 8) -> GridFunction:
    """v(y) = u(x0 + scale·y)/amplitude on a grid whose nodes map onto nodes of ``u``.

    The new spacing is h/scale, so lattice offsets of v correspond one-to-one
    to lattice offsets of u shrunk by ``scale``.
    """
    if not 0.0 < scale <= 1.0:
        raise ResolutionError("scale must lie in (0, 1]")
    if amplitude <= 0:
        raise InvalidSpecError("amplitude must be positive")
    x0 = np.zeros(u.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    c0 = np.asarray(u.index_of(x0))
    room = int(np.min(np.minimum(c0, u.N - c0)))
    if N is None:
        N = 2 * room
    if N % 2 or N // 2 > room:
        raise ResolutionError("rescaled grid does not fit inside the box of u")
    if N < min_cells:
        raise ResolutionError("rescaled grid would have fewer than min_cells cells")
    hv = u.h / scale
    Rv = N * hv / 2.0
    half = N // 2
    if u.dim == 1:
        vals = u.values[c0[0] - half:c0[0] + half + 1]
    else:
        vals = u.values[c0[0] - half:c0[0] + half + 1, c0[1] - half:c0[1] + half + 1]
    vals = vals / amplitude

    def fn(p, u=u, x0=x0, s=scale, a=amplitude):
        return u(x0 + s * np.asarray(p)) / a

    far = u.exterior.far_field
    if far is not None:
        # u equals far[0] for |x|_∞ > max(R, radius); pull that back through the map
        rad = (max(u.R, far[1]) + np.max(np.abs(x0))) / scale
        ext = Exterior.from_formula(fn, u.sup_bound / amplitude, "rescaled", far[0] / amplitude, rad)
    else:
        ext = Exterior.from_formula(fn, u.sup_bound / amplitude, "rescaled")
    return GridFunction(u.dim, Rv, N, vals, ext, u.sup_bound / amplitude)


@dataclass
class ScalingReport:
    lhs: np.ndarray
    rhs: np.ndarray
    margin: np.ndarray
    tolerance: np.ndarray
    passed: bool


def scaling_inequality_check(u: GridFunction, i: int, spec: KernelSpec, points,
                             amplitude: float = 1.0, x0=None) -> ScalingReport:
    """Check 2^{-iα}/amplitude · M⁻u(x̂) ≥ M_i⁻ v(x) where v(y) = u(x̂₀ + 2^{-i} y)/amplitude.

    ``points`` are nodes of v (index vectors into v's grid); x̂ = x0 + 2^{-i} x.
    Both sides use the same lattice extent so the comparison is offset by offset.
    """
    s = 2.0 ** (-int(i))
    v = rescale_function(u, s, amplitude, x0)
    x0 = np.zeros(u.dim) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    vidx = _nodes(v, points)
    uidx = vidx - v.N // 2 + np.asarray(u.index_of(x0))
    lhs, el = eval_values(OperatorKind.mminus(), spec, u, uidx, tail_radius=u.N * u.h)
    rhs, er = eval_values(OperatorKind.mminus(int(i)), spec, v, vidx, tail_radius=u.N * v.h)
    lhs = s ** spec.alpha / amplitude * lhs
    tol = s ** spec.alpha / amplitude * el + er + 1e-12 * (np.abs(lhs) + np.abs(rhs))
    margin = lhs - rhs
    return ScalingReport(lhs, rhs, margin, tol, bool(np.all(margin >= -tol)))
