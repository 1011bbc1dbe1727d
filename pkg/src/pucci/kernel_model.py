"""Lower-order profiles, ellipticity classes and concrete kernels.

A kernel in the class acts through

    L u(x) = ∫ (u(x+y) + u(x-y) - 2u(x)) k(y) / |y|^d dy

with ``(2-α)λ|y|^-α <= k(y) <= Λ((2-α)|y|^-α + φ(1/|y|))`` (class ``A3``) or the
two-sided version where φ also appears in the lower bound (class ``A4``).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Mapping

import warnings

import numpy as np
from scipy import integrate

from .errors import DivergenceError, InvalidFunctionError, InvalidSpecError, SingularPointError

FAMILIES = ("power", "logpower", "tabulated")
KERNEL_CLASSES = ("A3", "A4")

# sample grid used for monotonicity and positivity checks
_CHECK_GRID = np.logspace(-6, 6, 481)


@dataclass(frozen=True)
class ScalingFunction:
    """The profile φ: (0, ∞) → (0, ∞) with declared upper-scaling exponent ``beta``.

    ``power`` is t**beta, ``logpower`` is log(1 + t**beta) and ``tabulated``
    interpolates ``params = (t_nodes, values)`` linearly in log-log coordinates,
    extrapolating with the end slopes. ``scale_factor`` multiplies every value.
    """

    family: str
    beta: float
    kappa0: float = 1.0
    params: tuple = ()
    scale_factor: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(f"unknown phi family {self.family!r}; expected one of {FAMILIES}")
        if not 0.0 < self.beta < 2.0:
            raise InvalidSpecError("beta must lie in (0, 2)")
        if not self.kappa0 >= 1.0:
            raise InvalidSpecError("kappa0 must be >= 1 (the scaling inequality at s=1 forces it)")
        if not self.scale_factor > 0.0:
            raise InvalidSpecError("scale_factor must be positive")
        if self.family == "tabulated":
            if len(self.params) != 2:
                raise InvalidSpecError("tabulated phi needs params=(t_nodes, values)")
            t, v = (np.asarray(p, dtype=float) for p in self.params)
            if t.ndim != 1 or t.shape != v.shape or t.size < 2:
                raise InvalidSpecError("tabulated phi needs two equal-length 1-d sequences (>= 2 nodes)")
            if np.any(t <= 0) or np.any(np.diff(t) <= 0):
                raise InvalidSpecError("tabulated t_nodes must be positive and strictly increasing")
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise InvalidSpecError("tabulated values must be finite and positive")
            object.__setattr__(self, "params", (tuple(map(float, t)), tuple(map(float, v))))

    @classmethod
    def power(cls, beta, kappa0=1.0):
        return cls("power", beta, kappa0)

    @classmethod
    def logpower(cls, beta, kappa0=1.0):
        return cls("logpower", beta, kappa0)

    @classmethod
    def tabulated(cls, t_nodes, values, beta, kappa0=1.0):
        return cls("tabulated", beta, kappa0, (tuple(t_nodes), tuple(values)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            out = t**self.beta
        elif self.family == "logpower":
            out = np.log1p(t**self.beta)
        else:
            out = self._tabulated(t)
        return self.scale_factor * out

    def _tabulated(self, t):
        lt = np.log(np.asarray(self.params[0]))
        lv = np.log(np.asarray(self.params[1]))
        # t = 0 (underflow of e^-s in quadrature) is mapped to the smallest normal float
        x = np.log(np.maximum(t, np.finfo(float).tiny))
        y = np.interp(x, lt, lv)
        lo_slope = (lv[1] - lv[0]) / (lt[1] - lt[0])
        hi_slope = (lv[-1] - lv[-2]) / (lt[-1] - lt[-2])
        y = np.where(x < lt[0], lv[0] + lo_slope * (x - lt[0]), y)
        y = np.where(x > lt[-1], lv[-1] + hi_slope * (x - lt[-1]), y)
        return np.exp(y)

    def is_nondecreasing(self, grid=None) -> bool:
        grid = _CHECK_GRID if grid is None else np.asarray(grid, dtype=float)
        vals = self(grid)
        return bool(np.all(np.diff(vals) >= 0.0))

    def to_dict(self) -> dict:
        d = {"family": self.family, "beta": self.beta, "kappa0": self.kappa0}
        if self.family == "tabulated":
            d["t_nodes"] = list(self.params[0])
            d["values"] = list(self.params[1])
        if self.scale_factor != 1.0:
            d["scale_factor"] = self.scale_factor
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ScalingFunction":
        family = str(d.get("family", "power")).lower()
        params = ()
        if family == "tabulated":
            params = (tuple(d["t_nodes"]), tuple(d["values"]))
        return cls(family, float(d["beta"]), float(d.get("kappa0", 1.0)), params,
                   float(d.get("scale_factor", 1.0)))


def scaled_phi(phi: ScalingFunction, i: int, alpha: float) -> ScalingFunction:
    """φ_i = κ∘ 2^{-i(α-β)} φ, the profile seen after ``i`` dyadic zooms."""
    if int(i) != i or i < 0:
        raise InvalidSpecError("scale index must be a nonnegative integer")
    if alpha <= phi.beta:
        raise InvalidSpecError("alpha must exceed beta for the scaled profile to decay")
    factor = phi.kappa0 * 2.0 ** (-int(i) * (alpha - phi.beta))
    return replace(phi, scale_factor=phi.scale_factor * factor)


@dataclass(frozen=True)
class UpperScalingReport:
    max_violation: float
    passed: bool
    worst_s: float
    worst_t: float


def check_upper_scaling(phi: ScalingFunction, sample_count: int = 64, rtol: float = 1e-12) -> UpperScalingReport:
    """Sample φ(st) <= κ∘ s^β φ(t) over s in [1, 1e4], t in [1e-6, 1e6]."""
    if sample_count < 10:
        raise InvalidSpecError("sample_count must be >= 10")
    s = np.logspace(0.0, 4.0, sample_count)[:, None]
    t = np.logspace(-6.0, 6.0, sample_count)[None, :]
    phi_t = phi(t)
    phi_st = phi(s * t)
    if np.any(~(phi_t > 0)) or np.any(~(phi_st > 0)):
        raise InvalidFunctionError("phi must be finite and positive at every sample")
    ratio = phi_st / (phi.kappa0 * s**phi.beta * phi_t) - 1.0
    k = np.unravel_index(np.argmax(ratio), ratio.shape)
    worst = float(ratio[k])
    return UpperScalingReport(worst, worst <= rtol, float(s[k[0], 0]), float(t[0, k[1]]))


def dini_integral(phi: ScalingFunction, rtol: float = 1e-8) -> float:
    """∫_0^1 φ(y)/y dy, computed as ∫_0^∞ φ(e^{-s}) ds."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(lambda s: float(phi(np.exp(-s))), 0.0, np.inf,
                                      epsabs=0.0, epsrel=1e-11, limit=400)
        except integrate.IntegrationWarning as exc:
            raise DivergenceError(f"Dini integral did not converge: {exc}") from None
    if not np.isfinite(val) or err > rtol * abs(val):
        raise DivergenceError(f"Dini integral did not converge (value={val}, error={err})")
    return float(val)


@dataclass(frozen=True)
class KernelSpec:
    """Ellipticity data (λ, Λ, α, φ) and the class (``A3`` or ``A4``)."""

    lam: float
    Lam: float
    alpha: float
    phi: ScalingFunction
    kernel_class: str = "A3"

    def __post_init__(self):
        if not 0.0 < self.lam <= self.Lam:
            raise InvalidSpecError("need 0 < lambda <= Lambda")
        if not self.phi.beta < self.alpha < 2.0:
            raise InvalidSpecError("alpha must lie in (beta, 2)")
        if self.kernel_class not in KERNEL_CLASSES:
            raise InvalidSpecError(f"class must be one of {KERNEL_CLASSES}")
        if self.kernel_class == "A4" and not self.phi.is_nondecreasing():
            raise InvalidSpecError("class A4 requires phi to be non-decreasing")

    def with_alpha(self, alpha: float) -> "KernelSpec":
        return replace(self, alpha=alpha)

    def to_dict(self) -> dict:
        return {"phi": self.phi.to_dict(), "lambda": self.lam, "Lambda": self.Lam,
                "alpha": self.alpha, "class": self.kernel_class}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "KernelSpec":
        return cls(float(d["lambda"]), float(d["Lambda"]), float(d["alpha"]),
                   ScalingFunction.from_dict(d["phi"]), str(d.get("class", "A3")))


def n_sectors(dim: int) -> int:
    if dim == 1:
        return 2
    if dim == 2:
        return 16
    raise InvalidSpecError("only dimensions 1 and 2 are supported")


def sector_index(y, dim: int):
    """Direction sector of each row of ``y`` (shape (..., dim) or (...) in 1-d)."""
    y = np.asarray(y, dtype=float)
    if dim == 1:
        y = y[..., 0] if y.ndim and y.shape[-1:] == (1,) else y
        return np.where(y >= 0, 0, 1)
    theta = np.arctan2(y[..., 1], y[..., 0]) % (2 * np.pi)
    return np.minimum((theta / (2 * np.pi / 16)).astype(int), 15)


@dataclass(frozen=True)
class KernelFunction:
    """A concrete symmetric kernel inside the class of ``spec``.

    ``c_stable`` and ``c_phi`` hold one coefficient per direction sector (2 in
    1-d, 16 in 2-d, antipodal sectors equal). With ``phi_cutoff`` the φ part is
    only active for |y| >= 1.
    """

    spec: KernelSpec
    dim: int
    c_stable: tuple
    c_phi: tuple
    phi_cutoff: bool = False

    def __post_init__(self):
        m = n_sectors(self.dim)
        cs = np.asarray(self.c_stable, dtype=float).ravel()
        cp = np.asarray(self.c_phi, dtype=float).ravel()
        if cs.size == 1:
            cs = np.full(m, cs[0])
        if cp.size == 1:
            cp = np.full(m, cp[0])
        if cs.size != m or cp.size != m:
            raise InvalidSpecError(f"need {m} sector coefficients in dimension {self.dim}")
        half = m // 2
        if not (np.array_equal(cs[:half], cs[half:]) and np.array_equal(cp[:half], cp[half:])):
            raise InvalidSpecError("sector coefficients must be antipodally equal (k(y) = k(-y))")
        spec = self.spec
        if np.any(cs < spec.lam) or np.any(cs > spec.Lam):
            raise InvalidSpecError("stable coefficients must lie in [lambda, Lambda]")
        lo = spec.lam if spec.kernel_class == "A4" else 0.0
        if np.any(cp < lo) or np.any(cp > spec.Lam):
            raise InvalidSpecError(f"phi coefficients must lie in [{lo}, Lambda] for class {spec.kernel_class}")
        if self.phi_cutoff and spec.kernel_class == "A4":
            raise InvalidSpecError("a cut-off phi part violates the two-sided A4 lower bound")
        object.__setattr__(self, "c_stable", tuple(cs.tolist()))
        object.__setattr__(self, "c_phi", tuple(cp.tolist()))

    @classmethod
    def constant(cls, spec, dim, c_stable, c_phi, phi_cutoff=False):
        return cls(spec, dim, (c_stable,), (c_phi,), phi_cutoff)

    def coefficients(self, y):
        idx = sector_index(y, self.dim)
        return np.asarray(self.c_stable)[idx], np.asarray(self.c_phi)[idx]

    def __call__(self, y):
        return kernel_eval(self, y)


def kernel_eval(k: KernelFunction, y) -> np.ndarray:
    """The factor multiplying |y|^-d in the Lévy density, at one or many points."""
    y = np.asarray(y, dtype=float)
    if k.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    rho = np.linalg.norm(y, axis=-1)
    if np.any(rho == 0.0):
        raise SingularPointError("the kernel is singular at y = 0")
    cs, cp = k.coefficients(y)
    spec = k.spec
    phi_part = spec.phi(1.0 / rho)
    if k.phi_cutoff:
        phi_part = np.where(rho >= 1.0, phi_part, 0.0)
    return cs * (2.0 - spec.alpha) * rho ** (-spec.alpha) + cp * phi_part


def check_kernel_bounds(k: KernelFunction, y) -> float:
    """Largest violation of the class bounds over the sample points ``y`` (<= 0 means ok)."""
    y = np.asarray(y, dtype=float)
    if k.dim == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    rho = np.linalg.norm(y, axis=-1)
    spec = k.spec
    stable = (2.0 - spec.alpha) * rho ** (-spec.alpha)
    phi_part = spec.phi(1.0 / rho)
    val = kernel_eval(k, y)
    upper = spec.Lam * (stable + phi_part)
    lower = spec.lam * stable if spec.kernel_class == "A3" else spec.lam * (stable + phi_part)
    viol = np.maximum((val - upper) / upper, (lower - val) / lower)
    return float(np.max(viol))


def kernel_from_dict(spec: KernelSpec, dim: int, d: Mapping[str, Any] | None) -> KernelFunction:
    d = dict(d or {})
    cs = d.get("c_stable", spec.lam)
    cp = d.get("c_phi", spec.lam if spec.kernel_class == "A4" else 0.0)
    cs = (cs,) if np.isscalar(cs) else tuple(cs)
    cp = (cp,) if np.isscalar(cp) else tuple(cp)
    return KernelFunction(spec, dim, cs, cp, bool(d.get("phi_cutoff", False)))
