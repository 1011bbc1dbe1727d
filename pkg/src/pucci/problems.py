"""Builders turning validated config blocks into grid functions and Dirichlet problems."""

from __future__ import annotations

import numpy as np

from .expressions import Expression, parse
from .extremal_ops import OperatorKind
from .grid import Exterior, GridFunction
from .kernel_model import KernelFunction, KernelSpec
from .solver import Bellman, DirichletProblem, Extremal, Isaacs, Linear


def exterior_of(expr: Expression, R: float = 0.0) -> Exterior:
    """Exterior data of ``expr`` seen from a box of half-width R."""
    far = expr.far_field()
    if far is not None and far[1] <= R:
        return Exterior.zero() if far[0] == 0.0 else Exterior.constant(far[0])
    if far is None:
        return Exterior.from_formula(expr, expr.bound(), expr.text)
    return Exterior.from_formula(expr, expr.bound(), expr.text, far[0], far[1])


def grid_function(text: str, dim: int, R: float, N: int) -> GridFunction:
    e = parse(text, dim)
    ext = exterior_of(e, R)
    u = GridFunction.from_function(e, dim, R, N, exterior=ext, bound=e.bound())
    if u.function is None:
        u = GridFunction(u.dim, u.R, u.N, u.values, u.exterior, u.sup_bound, e)
    return u


def domain_mask(g: GridFunction, expr: str = "ball(1)", positive_coordinate=None) -> np.ndarray:
    """Interior nodes where ``expr`` is positive (and x_k > 0 if requested)."""
    x = g.coords()
    m = parse(expr, g.dim)(x) > 0
    if positive_coordinate is not None:
        m &= x[..., positive_coordinate] > 1e-12 * g.h
    edge = np.ones(g.shape, dtype=bool)
    edge[(slice(1, -1),) * g.dim] = False
    return m & ~edge


def kernel_from_block(block, spec: KernelSpec, dim: int) -> KernelFunction:
    cs = block.c_stable if isinstance(block.c_stable, list) else [block.c_stable]
    cp = block.c_phi if isinstance(block.c_phi, list) else [block.c_phi]
    return KernelFunction(spec, dim, tuple(cs), tuple(cp), block.phi_cutoff)


def operator_from_block(block, spec: KernelSpec, dim: int):
    t = block.type
    if t == "linear":
        return Linear(kernel_from_block(block, spec, dim))
    if t == "bellman":
        return Bellman(tuple(kernel_from_block(k, spec, dim) for k in block.kernels))
    if t == "isaacs":
        return Isaacs(tuple(tuple(kernel_from_block(k, spec, dim) for k in grp) for grp in block.groups))
    return Extremal(OperatorKind(block.variant, block.scale), spec)


def eval_kind(block, spec: KernelSpec, dim: int) -> OperatorKind:
    if block.type == "linear":
        return OperatorKind.linear(kernel_from_block(block, spec, dim))
    if block.type != "extremal":
        raise ValueError("eval supports linear and extremal operators")
    return OperatorKind(block.variant, block.scale)


def build_problem(grid, domain, f: str, g: str, op_block, spec: KernelSpec, N=None) -> DirichletProblem:
    N = grid.N if N is None else N
    gf = grid_function(g, grid.dim, grid.R, N)
    ff = parse(f, grid.dim)(gf.coords())
    mask = domain_mask(gf, domain.expr, domain.positive_coordinate)
    return DirichletProblem(gf, mask, ff, operator_from_block(op_block, spec, grid.dim))
