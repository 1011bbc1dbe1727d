"""Monotone discretisation of nonlocal Dirichlet problems and policy iteration.

At a node x of Ω the discrete operator is

    I_h u(x) = Σ_j C_j(x) (u(x+y_j) + u(x-y_j) - 2u(x)) + Σ_w C_w(x) (2 G_w(x) - 2u(x))

over the half lattice stencil j, where the second sum closes the integral
beyond the stencil (G_w is the exterior data averaged against the tail of
weight w). Linear operators have fixed coefficients C; Bellman, Isaacs and
extremal operators choose them per node (or per node and offset) and are
solved by Howard's policy iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, cg
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import (ConfigurationError, CyclingError, DimensionError, InvalidSpecError,
                     NonConvergenceError, PucciError)
from .extremal_ops import OperatorKind, components
from .grid import GridFunction
from .kernel_model import KernelFunction, KernelSpec
from .quadrature import _half_stencil, tail_contribution

# dense policy solves are limited to this many (row, offset) pairs
DENSE_LIMIT = 60_000_000


# ---------------------------------------------------------------------------
# problem description

@dataclass(frozen=True)
class Linear:
    kernel: KernelFunction


@dataclass(frozen=True)
class Bellman:
    """sup over a finite family of kernels."""

    kernels: tuple

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if not self.kernels:
            raise InvalidSpecError("a Bellman family needs at least one kernel")


@dataclass(frozen=True)
class Extremal:
    kind: OperatorKind
    spec: KernelSpec

    def __post_init__(self):
        if self.kind.variant == "Linear":
            raise InvalidSpecError("use Linear for a single kernel")


@dataclass(frozen=True)
class Isaacs:
    """inf over groups of sup over the kernels of each group."""

    groups: tuple

    def __post_init__(self):
        g = tuple(tuple(x) for x in self.groups)
        if not g or any(len(x) == 0 for x in g):
            raise InvalidSpecError("an Isaacs family needs nonempty groups")
        object.__setattr__(self, "groups", g)


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """I u = f in Ω, u = g outside Ω.

    ``mask`` marks Ω among the grid nodes of ``g`` (box-boundary nodes are not
    allowed); ``f`` is an array over the grid or a scalar.
    """

    g: GridFunction
    mask: np.ndarray
    f: object
    operator: object

    def __post_init__(self):
        g = self.g
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != g.shape:
            raise DimensionError("domain mask must have the grid shape")
        if not mask.any():
            raise InvalidSpecError("the domain Ω is empty")
        edge = np.zeros_like(mask)
        for ax in range(g.dim):
            sl = [slice(None)] * g.dim
            sl[ax] = 0
            edge[tuple(sl)] = True
            sl[ax] = -1
            edge[tuple(sl)] = True
        if np.any(mask & edge):
            raise InvalidSpecError("Ω must consist of interior grid nodes")
        f = np.broadcast_to(np.asarray(self.f, dtype=float), g.shape).copy()
        if not np.all(np.isfinite(f[mask])):
            raise InvalidSpecError("right-hand side must be finite on Ω")
        mask.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "f", f)
        for k in _kernels(self.operator):
            if k.dim != g.dim:
                raise DimensionError("kernel dimension does not match the grid")
        if not isinstance(self.operator, (Linear, Bellman, Extremal, Isaacs)):
            raise InvalidSpecError("operator must be Linear, Bellman, Extremal or Isaacs")

    @property
    def dim(self) -> int:
        return self.g.dim

    def clamp(self, u) -> np.ndarray:
        """Grid values equal to ``u`` on Ω and to g elsewhere."""
        vals = np.asarray(u.values if isinstance(u, GridFunction) else u, dtype=float)
        return np.where(self.mask, vals, self.g.values)


def _kernels(op):
    if isinstance(op, Linear):
        return [op.kernel]
    if isinstance(op, Bellman):
        return list(op.kernels)
    if isinstance(op, Isaacs):
        return [k for grp in op.groups for k in grp]
    return []


@dataclass(frozen=True)
class SolverConfig:
    tol: Optional[float] = None
    max_iters: int = 200
    damping: float = 1.0

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise ConfigurationError("tol must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError("damping must lie in (0, 1]")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be at least 1")

    def tolerance(self, problem: DirichletProblem) -> float:
        if self.tol is not None:
            return self.tol
        f = np.max(np.abs(problem.f[problem.mask]))
        g = problem.g.sup_bound if np.isfinite(problem.g.sup_bound) else np.max(np.abs(problem.g.values))
        return 1e-8 * (1.0 + f + g)


@dataclass
class OperatorMatrix:
    """I_h u = A u_Ω + b for the unknowns ``rows`` (flat grid indices of Ω)."""

    rows: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def check(self) -> bool:
        A = self.A
        off = A - np.diag(np.diag(A))
        if np.any(off < 0):
            raise PucciError("negative off-diagonal weight in the assembled matrix")
        if not np.all(np.diag(A) < 0):
            raise PucciError("nonnegative diagonal entry in the assembled matrix")
        if np.any(A.sum(axis=1) > 1e-9 * np.abs(np.diag(A))):
            raise PucciError("positive row sum in the assembled matrix")
        return True

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Action on full grid values (Ω part used, exterior through b)."""
        return self.A @ np.asarray(u, dtype=float).ravel()[self.rows] + self.b


@dataclass
class SolveResult:
    u: GridFunction
    iterations: int
    residual: float
    tol: float
    history: list = field(default_factory=list)
    method: str = ""

    def summary(self) -> dict:
        return {"iterations": self.iterations, "residual": self.residual, "tol": self.tol,
                "method": self.method, "history": [float(r) for r in self.history]}


# ---------------------------------------------------------------------------
# discretisation

class _Discretization:
    def __init__(self, problem: DirichletProblem):
        self.problem = problem
        g = problem.g
        self.dim, self.N, self.h = g.dim, g.N, g.h
        self.n = g.N
        T = self.n * self.h
        self.offs, self.sec, nn = _half_stencil(self.dim, self.n)
        self.m = len(self.offs)
        self.pad_shape = (g.N + 1 + 2 * self.n,) * self.dim
        self.gpad = g.padded(self.n).ravel()
        base = np.ravel_multi_index((self.n,) * self.dim, self.pad_shape)
        self.step = np.ravel_multi_index(tuple((self.offs + self.n).T), self.pad_shape) - base
        idx = np.argwhere(problem.mask)
        self.idx = idx
        self.flat = np.ravel_multi_index(tuple((idx + self.n).T), self.pad_shape)
        self.grid_flat = np.ravel_multi_index(tuple(idx.T), g.shape)
        self.f = problem.f[problem.mask]
        self.col = -np.ones(int(np.prod(self.pad_shape)), dtype=np.int64)
        self.col[self.flat] = np.arange(len(self.flat))
        self.gpad_out = self.gpad.copy()
        self.gpad_out[self.flat] = 0.0

        groups, self.signsplit, self.sense = _operator_pieces(problem.operator, self.dim, self.h, T)
        self.weights = []
        for grp in groups:
            for comps in grp:
                for c in comps:
                    if not any(c.weights is w for w in self.weights):
                        self.weights.append(c.weights)
        self.G = self._exterior_means()
        vecs = [[self._vector(comps) for comps in grp] for grp in groups]
        self.group_sizes = [len(grp) for grp in vecs]
        self.Kp = np.array([v[0] for grp in vecs for v in grp])
        self.Kn = np.array([v[1] for grp in vecs for v in grp])
        self.nn = nn

    def _vector(self, comps):
        nw = len(self.weights)
        kp = np.zeros(self.m + nw)
        kn = np.zeros(self.m + nw)
        a = np.abs(self.offs)
        for c in comps:
            cw = c.weights
            tab = cw.table[a[:, 0]] if self.dim == 1 else cw.table[a[:, 0], a[:, 1]]
            w = 2.0 * (tab + np.where(self._nn(), cw.inner_coeff / cw.h**2, 0.0))
            kp[:self.m] += w * c.pos[self.sec]
            kn[:self.m] += w * c.neg[self.sec]
            k = next(i for i, x in enumerate(self.weights) if x is cw)
            kp[self.m + k] += float(np.dot(c.pos, cw.tail_by_sector))
            kn[self.m + k] += float(np.dot(c.neg, cw.tail_by_sector))
        return kp, kn

    def _nn(self):
        return np.sum(np.abs(self.offs), axis=1) == 1

    def _exterior_means(self):
        """G_w(x): exterior data averaged against the tail of each weight, per Ω node."""
        g = self.problem.g
        P = len(self.flat)
        out = np.zeros((P, len(self.weights)))
        far = g.exterior.far_field
        reach = self.n * self.h - np.max(np.abs(g.node_coords(self.idx)), axis=1)
        if far is not None and np.all(reach >= far[1] * (1 - 1e-12)):
            out[:] = far[0]
            return out
        for k, cw in enumerate(self.weights):
            mass = float(np.sum(cw.tail_by_sector))
            for p, node in enumerate(self.idx):
                gx = float(g.values[tuple(node)])
                t = tail_contribution(g, tuple(node), cw.weight, self.n * self.h)
                out[p, k] = (t.value + 2.0 * mass * gx) / (2.0 * mass)
        return out

    # -- sweeps over Ω --------------------------------------------------------
    def deltas(self, upad, rows):
        fc = self.flat[rows]
        uc = upad[fc]
        D = upad[fc[:, None] + self.step] + upad[fc[:, None] - self.step] - 2.0 * uc[:, None]
        V = 2.0 * (self.G[rows] - uc[:, None])
        return np.hstack([D, V])

    def chunks(self, rows_per=None):
        P = len(self.flat)
        per = rows_per or max(1, 2_000_000 // (self.m + 1))
        for s in range(0, P, per):
            yield np.arange(s, min(P, s + per))

    def padded(self, u_omega):
        upad = self.gpad.copy()
        upad[self.flat] = u_omega
        return upad


def _operator_pieces(op, dim, h, T):
    """Groups of component lists, whether coefficients split by sign, and the sense."""
    if isinstance(op, Linear):
        return [[components(OperatorKind.linear(op.kernel), op.kernel.spec, dim, h, T)]], False, "max"
    if isinstance(op, Bellman):
        return [[components(OperatorKind.linear(k), k.spec, dim, h, T) for k in op.kernels]], False, "max"
    if isinstance(op, Isaacs):
        return [[components(OperatorKind.linear(k), k.spec, dim, h, T) for k in grp] for grp in op.groups], \
            False, "minmax"
    comps = components(op.kind, op.spec, dim, h, T)
    sense = "max" if op.kind.variant in ("MPlus", "TildePlus") else "min"
    return [[comps]], True, sense


# ---------------------------------------------------------------------------
# policies

class _Policy:
    """Chooses coefficient rows from δ; ``value`` is I_h at the chosen policy."""

    def __init__(self, disc: _Discretization, restrict=None):
        self.d = disc
        self.restrict = restrict  # Isaacs: fixed group per node

    def select(self, D, rows):
        d = self.d
        if d.signsplit:
            C = np.where(D >= 0.0, d.Kp[0], d.Kn[0])
            return C, np.einsum("ij,ij->i", C, D), None
        V = D @ d.Kp.T
        if len(d.Kp) == 1:
            return np.broadcast_to(d.Kp[0], D.shape), V[:, 0], np.zeros(len(rows), dtype=int)
        starts = np.cumsum([0] + d.group_sizes)
        if self.restrict is not None:
            grp = self.restrict[rows]
            choice = np.empty(len(rows), dtype=int)
            for gi in range(len(d.group_sizes)):
                sel = grp == gi
                if np.any(sel):
                    choice[sel] = starts[gi] + np.argmax(V[sel, starts[gi]:starts[gi + 1]], axis=1)
        else:
            best = np.full((len(rows), len(d.group_sizes)), -np.inf)
            arg = np.zeros((len(rows), len(d.group_sizes)), dtype=int)
            for gi in range(len(d.group_sizes)):
                blk = V[:, starts[gi]:starts[gi + 1]]
                arg[:, gi] = starts[gi] + np.argmax(blk, axis=1)
                best[:, gi] = np.max(blk, axis=1)
            gsel = np.argmin(best, axis=1)
            choice = arg[np.arange(len(rows)), gsel]
        return d.Kp[choice], V[np.arange(len(rows)), choice], choice


def _evaluate(disc: _Discretization, u_omega, policy: _Policy, assemble=False):
    """I_h u on Ω and, optionally, the linear system of the selected policy."""
    upad = disc.padded(u_omega)
    P = len(disc.flat)
    value = np.empty(P)
    choice = np.zeros(P, dtype=int)
    A = np.zeros((P, P)) if assemble else None
    b = np.zeros(P) if assemble else None
    npad = len(disc.gpad)
    m = disc.m
    for rows in disc.chunks():
        D = disc.deltas(upad, rows)
        C, v, ch = policy.select(D, rows)
        value[rows] = v
        if ch is not None:
            choice[rows] = ch
        if not assemble:
            continue
        fc = disc.flat[rows]
        Cl = np.ascontiguousarray(C[:, :m])
        r = np.arange(len(rows))[:, None] * npad
        M = np.bincount((r + fc[:, None] + disc.step).ravel(), Cl.ravel(), len(rows) * npad)
        M += np.bincount((r + fc[:, None] - disc.step).ravel(), Cl.ravel(), len(rows) * npad)
        M = M.reshape(len(rows), npad)
        A[rows] = M[:, disc.flat]
        A[rows, rows] -= 2.0 * C.sum(axis=1)
        b[rows] = M @ disc.gpad_out + 2.0 * np.sum(C[:, m:] * disc.G[rows], axis=1)
    return value, choice, A, b


def _dense_solve(A, rhs):
    lu = linalg.lu_factor(A, check_finite=False)
    x = linalg.lu_solve(lu, rhs, check_finite=False)
    # one step of iterative refinement
    x += linalg.lu_solve(lu, rhs - A @ x, check_finite=False)
    return x


# ---------------------------------------------------------------------------
# public operations

def assemble(kernel: KernelFunction, problem: DirichletProblem) -> OperatorMatrix:
    """The matrix of the linear operator of ``kernel`` on Ω (exterior data in b)."""
    lin = DirichletProblem(problem.g, problem.mask, problem.f, Linear(kernel))
    disc = _Discretization(lin)
    _, _, A, b = _evaluate(disc, problem.g.values.ravel()[disc.grid_flat], _Policy(disc), assemble=True)
    out = OperatorMatrix(disc.grid_flat.copy(), A, b)
    out.check()
    return out


def residual(u, problem: DirichletProblem) -> float:
    """sup over Ω of |I_h u - f| with u clamped to g outside Ω."""
    disc = _Discretization(problem)
    vals = problem.clamp(u).ravel()[disc.grid_flat]
    v, _, _, _ = _evaluate(disc, vals, _Policy(disc))
    return float(np.max(np.abs(v - disc.f)))


def operator_values(u, problem: DirichletProblem) -> np.ndarray:
    """I_h u on Ω (in the order of ``np.argwhere(problem.mask)``)."""
    disc = _Discretization(problem)
    vals = problem.clamp(u).ravel()[disc.grid_flat]
    return _evaluate(disc, vals, _Policy(disc))[0]


def _result(disc, problem, u_omega, it, res, tol, hist, method):
    vals = problem.g.values.copy().ravel()
    vals[disc.grid_flat] = u_omega
    g = problem.g
    u = GridFunction(g.dim, g.R, g.N, vals.reshape(g.shape), g.exterior)
    return SolveResult(u, it, float(res), tol, hist, method)


def _fft_linear(disc: _Discretization, tol, config):
    """Matrix-free conjugate gradients for one linear kernel (the negated operator is SPD)."""
    K = disc.Kp[0]
    n, dim, m = disc.n, disc.dim, disc.m
    F = np.zeros((2 * n + 1,) * dim)
    for s in (1, -1):
        F[tuple((n + s * disc.offs).T)] = K[:m]
    diag = 2.0 * np.sum(K)
    shape = disc.pad_shape

    def conv(vpad):
        return fftconvolve(vpad.reshape(shape), F, mode="valid").ravel()[disc.grid_flat]

    b = conv(disc.gpad_out) + 2.0 * disc.G @ K[m:]
    rhs = disc.f - b

    def matvec(v):
        vpad = np.zeros(len(disc.gpad))
        vpad[disc.flat] = v
        return diag * v - conv(vpad)

    P = len(disc.flat)
    op = LinearOperator((P, P), matvec=matvec, dtype=float)
    x = np.zeros(P)
    hist = []
    for _ in range(config.max_iters):
        x, info = cg(op, -rhs, x0=x, rtol=0.0, atol=0.25 * tol, maxiter=20 * P)
        res = float(np.max(np.abs(-matvec(x) - rhs)))
        hist.append(res)
        if res <= tol:
            return x, len(hist), res, hist
    raise NonConvergenceError("conjugate gradients did not reach the tolerance", res)


def solve(problem: DirichletProblem, config: Optional[SolverConfig] = None) -> SolveResult:
    """Solve the Dirichlet problem for any supported operator."""
    config = config or SolverConfig()
    tol = config.tolerance(problem)
    disc = _Discretization(problem)
    P = len(disc.flat)
    linear = not disc.signsplit and len(disc.Kp) == 1
    if linear and disc.dim == 2 and P * disc.m > DENSE_LIMIT // 4:
        x, it, res, hist = _fft_linear(disc, tol, config)
        return _result(disc, problem, x, it, res, tol, hist, "cg-fft")
    if P * (disc.m + P) > DENSE_LIMIT:
        raise ConfigurationError("problem too large for the dense policy solver")
    if isinstance(problem.operator, Isaacs) and len(disc.group_sizes) > 1:
        return _isaacs(disc, problem, tol, config)
    u = problem.g.values.ravel()[disc.grid_flat].astype(float)
    x, it, res, hist = _howard(disc, u, _Policy(disc), tol, config)
    return _result(disc, problem, x, it, res, tol, hist, "direct" if linear else "policy")


def _howard(disc, u, policy, tol, config):
    hist = []
    prev_choice = None
    stalls = 0
    for it in range(1, config.max_iters + 1):
        _, choice, A, b = _evaluate(disc, u, policy, assemble=True)
        new = _dense_solve(A, disc.f - b)
        u = new if config.damping == 1.0 else u + config.damping * (new - u)
        val, ch2, _, _ = _evaluate(disc, u, policy)
        res = float(np.max(np.abs(val - disc.f)))
        hist.append(res)
        if res <= tol:
            return u, it, res, hist
        if prev_choice is not None and np.array_equal(ch2, prev_choice) and len(hist) > 1 \
                and res >= hist[-2]:
            stalls += 1
            if stalls >= 3:
                raise NonConvergenceError("policy iteration stalled above the tolerance", res)
        prev_choice = ch2
    raise NonConvergenceError("policy iteration reached max_iters", hist[-1])


def _isaacs(disc, problem, tol, config):
    """Outer policy iteration on the inf player, inner Howard for the sup player."""
    u = problem.g.values.ravel()[disc.grid_flat].astype(float)
    starts = np.cumsum([0] + disc.group_sizes)
    hist, seen = [], {}
    total = 0
    for outer in range(1, config.max_iters + 1):
        _, choice, _, _ = _evaluate(disc, u, _Policy(disc))
        grp = np.searchsorted(starts, choice, side="right") - 1
        key = grp.tobytes()
        u_new, it, _, _ = _howard(disc, u, _Policy(disc, restrict=grp), tol, config)
        total += it
        u = u_new
        val, _, _, _ = _evaluate(disc, u, _Policy(disc))
        res = float(np.max(np.abs(val - disc.f)))
        hist.append(res)
        if res <= tol:
            return _result(disc, problem, u, total, res, tol, hist, "isaacs-policy")
        if key in seen and res >= seen[key]:
            raise CyclingError("inf-player policy cycled without decreasing the residual; "
                               "try a smaller damping", res)
        seen[key] = res
    raise NonConvergenceError("Isaacs iteration reached max_iters", hist[-1])


def solve_linear(problem: DirichletProblem, config: Optional[SolverConfig] = None) -> GridFunction:
    if not isinstance(problem.operator, Linear):
        raise InvalidSpecError("solve_linear needs a Linear operator")
    return solve(problem, config).u


def solve_policy(problem: DirichletProblem, config: Optional[SolverConfig] = None) -> GridFunction:
    if isinstance(problem.operator, Linear):
        raise InvalidSpecError("solve_policy needs a Bellman, Extremal or Isaacs operator")
    return solve(problem, config).u


# ---------------------------------------------------------------------------
# convenience constructors

def ball_mask(g: GridFunction, radius: float, center=None, extra=None) -> np.ndarray:
    """Interior nodes with |x - center| < radius (and ``extra(x)`` if given)."""
    x = g.coords()
    c = np.zeros(g.dim) if center is None else np.asarray(center, dtype=float)
    m = np.linalg.norm(x - c, axis=-1) < radius - 1e-12
    if extra is not None:
        m &= np.asarray(extra(x), dtype=bool)
    edge = np.ones(g.shape, dtype=bool)
    inner = (slice(1, -1),) * g.dim
    edge[inner] = False
    return m & ~edge


# ---------------------------------------------------------------------------
# estimator interface


class DirichletSolver(BaseEstimator):
    """Estimator-style wrapper: ``fit`` solves a DirichletProblem, ``predict`` interpolates.

    >>> est = DirichletSolver(max_iters=50).fit(problem)      # doctest: +SKIP
    >>> est.predict([[0.0]]), est.n_iter_, est.residual_      # doctest: +SKIP
    """

    def __init__(self, tol=None, max_iters=200, damping=1.0):
        self.tol = tol
        self.max_iters = max_iters
        self.damping = damping

    def fit(self, problem: DirichletProblem, y=None):
        res = solve(problem, SolverConfig(self.tol, self.max_iters, self.damping))
        self.problem_ = problem
        self.solution_ = res.u
        self.n_iter_ = res.iterations
        self.residual_ = res.residual
        self.history_ = list(res.history)
        self.method_ = res.method
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "solution_")
        u = self.solution_
        pts = np.asarray(X, dtype=float).reshape(-1, u.dim)
        return u(pts)

    def score(self, problem: Optional[DirichletProblem] = None, y=None) -> float:
        """Negative sup-norm residual of the fitted solution (higher is better)."""
        check_is_fitted(self, "solution_")
        return -residual(self.solution_, problem or self.problem_)
