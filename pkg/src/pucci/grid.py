"""Bounded functions on R^d stored as grid values on a box plus an exterior rule."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, InvalidFunctionError

EXTERIOR_KINDS = ("zero", "constant", "formula")


@dataclass(frozen=True, eq=False)
class Exterior:
    """How a grid function continues outside its box.

    ``formula`` receives coordinates with shape ``(..., dim)`` and must be
    vectorised. ``bound`` is a certified bound on |u| over the exterior
    (``inf`` when unknown or unbounded). A formula that is known to equal the
    constant ``far_value`` wherever |x|_∞ > ``far_radius`` may say so; the
    tail quadrature then closes in closed form.
    """

    kind: str = "zero"
    value: float = 0.0
    formula: Optional[Callable] = None
    bound: float = np.inf
    label: str = ""
    far_value: Optional[float] = None
    far_radius: float = np.inf

    def __post_init__(self):
        if self.kind not in EXTERIOR_KINDS:
            raise InvalidFunctionError(f"exterior kind must be one of {EXTERIOR_KINDS}")
        if self.kind == "formula" and self.formula is None:
            raise InvalidFunctionError("a formula exterior needs a callable")
        if self.kind == "zero":
            object.__setattr__(self, "value", 0.0)
            object.__setattr__(self, "bound", 0.0)
        elif self.kind == "constant":
            object.__setattr__(self, "bound", abs(float(self.value)))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @classmethod
    def from_formula(cls, fn, bound=np.inf, label="", far_value=None, far_radius=np.inf):
        return cls("formula", 0.0, fn, float(bound), label, far_value, float(far_radius))

    @property
    def is_constant(self) -> bool:
        return self.kind in ("zero", "constant")

    @property
    def far_field(self):
        """(value, radius) such that the exterior equals value for |x|_∞ > radius, or None."""
        if self.is_constant:
            return self.value, 0.0
        if self.far_value is not None:
            return self.far_value, self.far_radius
        return None

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        if self.kind == "formula":
            return np.asarray(self.formula(points), dtype=float) * np.ones(points.shape[:-1])
        return np.full(points.shape[:-1], self.value)

    def scaled(self, c: float) -> "Exterior":
        if self.kind == "zero":
            return self
        if self.kind == "constant":
            return Exterior.constant(c * self.value)
        fn = self.formula
        fv = None if self.far_value is None else c * self.far_value
        return Exterior.from_formula(lambda p: c * fn(p), abs(c) * self.bound, self.label, fv, self.far_radius)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on the uniform grid ``{-R + k h : k = 0..N}^dim`` with ``h = 2R/N``.

    ``function``, when given, is a closed form on all of R^d that the grid
    values sample; quadrature paths that work off-grid use it.
    """

    dim: int
    R: float
    N: int
    values: np.ndarray
    exterior: Exterior = field(default_factory=Exterior.zero)
    sup_bound: float = np.nan
    function: Optional[Callable] = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DimensionError("only dimensions 1 and 2 are supported")
        if int(self.N) != self.N or self.N < 2:
            raise DimensionError("N must be an integer >= 2 (h must divide 2R)")
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.N + 1,) * self.dim:
            raise DimensionError(f"values must have shape {(self.N + 1,) * self.dim}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InvalidFunctionError("grid values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "N", int(self.N))
        vmax = float(np.max(np.abs(vals))) if vals.size else 0.0
        sup = self.sup_bound
        if np.isnan(sup):
            sup = max(vmax, self.exterior.bound)
        elif sup < vmax * (1 - 1e-12):
            raise InvalidFunctionError("sup_bound is smaller than max |values|")
        object.__setattr__(self, "sup_bound", float(sup))

    # geometry ---------------------------------------------------------------
    @property
    def h(self) -> float:
        return 2.0 * self.R / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.R + self.h * np.arange(self.N + 1)

    @property
    def shape(self):
        return self.values.shape

    def coords(self) -> np.ndarray:
        """All node coordinates, shape ``values.shape + (dim,)``."""
        ax = self.axis
        if self.dim == 1:
            return ax[:, None]
        X, Y = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def node_coords(self, idx) -> np.ndarray:
        return -self.R + self.h * np.asarray(idx, dtype=float)

    def index_of(self, x, atol=1e-9) -> tuple:
        """Node multi-index of the point ``x``; raises if ``x`` is not a node."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionError(f"expected a point of dimension {self.dim}")
        k = (x + self.R) / self.h
        kr = np.rint(k)
        if np.any(np.abs(k - kr) > atol * max(1.0, self.N)) or np.any(kr < 0) or np.any(kr > self.N):
            raise DimensionError(f"point {x.tolist()} is not a grid node")
        return tuple(int(v) for v in kr)

    def same_geometry(self, other: "GridFunction") -> bool:
        return self.dim == other.dim and self.N == other.N and np.isclose(self.R, other.R)

    # evaluation --------------------------------------------------------------
    def at_nodes(self, idx) -> np.ndarray:
        """Values at integer node indices ``idx`` (shape (..., dim)); may lie outside the box."""
        idx = np.asarray(idx)
        inside = np.all((idx >= 0) & (idx <= self.N), axis=-1)
        out = np.empty(idx.shape[:-1])
        if self.dim == 1:
            out[inside] = self.values[idx[inside][:, 0]]
        else:
            ii = idx[inside]
            out[inside] = self.values[ii[:, 0], ii[:, 1]]
        if not np.all(inside):
            out[~inside] = self.exterior(self.node_coords(idx[~inside]))
        return out

    def padded(self, pad: int) -> np.ndarray:
        """Values on the box grown by ``pad`` nodes per side (exterior filled in)."""
        n = self.N + 1 + 2 * pad
        if self.exterior.is_constant:
            out = np.full((n,) * self.dim, self.exterior.value)
        else:
            ax = -self.R + self.h * (np.arange(n) - pad)
            if self.dim == 1:
                pts = ax[:, None]
            else:
                X, Y = np.meshgrid(ax, ax, indexing="ij")
                pts = np.stack([X, Y], axis=-1)
            out = np.asarray(self.exterior(pts), dtype=float).reshape((n,) * self.dim)
        sl = (slice(pad, pad + self.N + 1),) * self.dim
        out[sl] = self.values
        return out

    def __call__(self, points) -> np.ndarray:
        """Multilinear interpolation inside the box, exterior rule outside."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.dim:
            raise DimensionError(f"points must have trailing dimension {self.dim}")
        flat = pts.reshape(-1, self.dim)
        inside = np.all(np.abs(flat) <= self.R * (1 + 1e-12), axis=-1)
        out = np.empty(len(flat))
        if np.any(inside):
            k = np.clip((flat[inside] + self.R) / self.h, 0, self.N)
            k0 = np.minimum(np.floor(k).astype(int), self.N - 1)
            t = k - k0
            if self.dim == 1:
                v = self.values
                out[inside] = (1 - t[:, 0]) * v[k0[:, 0]] + t[:, 0] * v[k0[:, 0] + 1]
            else:
                v = self.values
                a, b = k0[:, 0], k0[:, 1]
                s, r = t[:, 0], t[:, 1]
                out[inside] = ((1 - s) * (1 - r) * v[a, b] + s * (1 - r) * v[a + 1, b]
                               + (1 - s) * r * v[a, b + 1] + s * r * v[a + 1, b + 1])
        if not np.all(inside):
            out[~inside] = self.exterior(flat[~inside])
        return out.reshape(pts.shape[:-1])

    # construction and arithmetic ---------------------------------------------
    @classmethod
    def from_function(cls, fn, dim, R, N, exterior="formula", bound=np.inf):
        """Sample ``fn`` on the grid; ``exterior`` is 'formula', 'zero', a constant or an Exterior."""
        probe = cls(dim, R, N, np.zeros((N + 1,) * dim), Exterior.zero(), 0.0)
        vals = np.asarray(fn(probe.coords()), dtype=float).reshape((N + 1,) * dim)
        if isinstance(exterior, Exterior):
            ext = exterior
        elif exterior == "formula":
            ext = Exterior.from_formula(fn, bound)
        elif exterior == "zero":
            ext = Exterior.zero()
        else:
            ext = Exterior.constant(float(exterior))
        sup = np.nan if np.isinf(bound) or not ext.kind == "formula" else max(bound, float(np.max(np.abs(vals))))
        closed = fn if ext.kind == "formula" else None
        return cls(dim, R, N, vals, ext, sup, closed)

    def with_values(self, values, exterior=None) -> "GridFunction":
        return GridFunction(self.dim, self.R, self.N, values, exterior or self.exterior)

    def scaled(self, c: float) -> "GridFunction":
        fn = self.function
        return GridFunction(self.dim, self.R, self.N, c * self.values, self.exterior.scaled(c),
                            abs(c) * self.sup_bound,
                            None if fn is None else (lambda p: c * fn(p)))

    def __neg__(self):
        return self.scaled(-1.0)

    def __mul__(self, c):
        return self.scaled(float(c))

    __rmul__ = __mul__

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if not isinstance(other, GridFunction) or not self.same_geometry(other):
            raise DimensionError("can only add grid functions on the same grid")
        e1, e2 = self.exterior, other.exterior
        if e1.is_constant and e2.is_constant:
            c = e1.value + e2.value
            ext = Exterior.zero() if c == 0.0 else Exterior.constant(c)
        else:
            f1, f2 = e1.far_field, e2.far_field
            far = (None, np.inf) if f1 is None or f2 is None else (f1[0] + f2[0], max(f1[1], f2[1]))
            ext = Exterior.from_formula(lambda p: e1(p) + e2(p), e1.bound + e2.bound, "", *far)
        f1, f2 = self.function, other.function
        fn = None if f1 is None or f2 is None else (lambda p: f1(p) + f2(p))
        return GridFunction(self.dim, self.R, self.N, self.values + other.values, ext,
                            self.sup_bound + other.sup_bound, fn)

    def __sub__(self, other):
        return self + (-other)

    def reflected(self) -> "GridFunction":
        """x -> u(-x)."""
        vals = self.values[::-1] if self.dim == 1 else self.values[::-1, ::-1]
        e = self.exterior
        ext = e if e.is_constant else Exterior.from_formula(lambda p: e(-np.asarray(p)), e.bound, e.label,
                                                             e.far_value, e.far_radius)
        fn = self.function
        return GridFunction(self.dim, self.R, self.N, vals.copy(), ext, self.sup_bound,
                            None if fn is None else (lambda p: fn(-np.asarray(p))))

    # debugging dumps -----------------------------------------------------------
    def to_csv(self, path) -> None:
        coords = self.coords().reshape(-1, self.dim)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"x{k}" for k in range(self.dim)] + ["value"])
            for i, (c, v) in enumerate(zip(coords, self.values.ravel())):
                w.writerow([i] + [repr(float(t)) for t in c] + [repr(float(v))])

    def to_npz(self, path) -> None:
        np.savez(path, dim=self.dim, R=self.R, N=self.N, values=self.values,
                 exterior_kind=self.exterior.kind, exterior_value=self.exterior.value)
