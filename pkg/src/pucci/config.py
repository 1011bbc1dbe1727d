"""JSON run configurations (strict: unknown fields are errors)."""

from __future__ import annotations

import json
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError, PucciError
from .expressions import parse
from .kernel_model import KernelSpec, ScalingFunction

SCHEMA_VERSION = 1


class ConfigError(ConfigurationError):
    """A config failed validation; ``errors`` lists (path, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class PhiBlock(_Strict):
    family: Literal["power", "logpower", "tabulated"]
    beta: float
    kappa0: float = 1.0
    scale_factor: float = 1.0
    t_nodes: Optional[List[float]] = None
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _build(self):
        d = self.model_dump(exclude_none=True)
        try:
            ScalingFunction.from_dict(d)
        except (PucciError, KeyError, TypeError) as exc:
            raise ValueError(str(exc)) from None
        return self

    def build(self) -> ScalingFunction:
        return ScalingFunction.from_dict(self.model_dump(exclude_none=True))


class KernelBlock(_Strict):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True, populate_by_name=True)

    phi: PhiBlock
    lam: float = Field(alias="lambda")
    Lam: float = Field(alias="Lambda")
    alpha: float
    kernel_class: Literal["A3", "A4"] = Field("A3", alias="class")

    @model_validator(mode="after")
    def _check(self):
        if not 0 < self.lam <= self.Lam:
            raise ValueError("need 0 < lambda <= Lambda")
        if not self.phi.beta < self.alpha < 2.0:
            raise ValueError("alpha must lie in (beta, 2) as required by the kernel class A3")
        try:
            self.build()
        except PucciError as exc:
            msg = str(exc)
            if "non-decreasing" in msg:
                msg = "class A4 (two-sided bounds) requires a non-decreasing phi"
            raise ValueError(msg) from None
        return self

    def build(self) -> KernelSpec:
        return KernelSpec(self.lam, self.Lam, self.alpha, self.phi.build(), self.kernel_class)


class LinearOp(_Strict):
    type: Literal["linear"]
    c_stable: Union[float, List[float]] = 1.0
    c_phi: Union[float, List[float]] = 0.0
    phi_cutoff: bool = False


class BellmanOp(_Strict):
    type: Literal["bellman"]
    kernels: List[LinearOp]


class IsaacsOp(_Strict):
    type: Literal["isaacs"]
    groups: List[List[LinearOp]]


class ExtremalOp(_Strict):
    type: Literal["extremal"]
    variant: Literal["MPlus", "MMinus", "TildePlus", "TildeMinus"]
    scale: Optional[int] = None


OperatorBlock = Union[LinearOp, BellmanOp, IsaacsOp, ExtremalOp]


class GridBlock(_Strict):
    dim: Literal[1, 2]
    R: float
    N: int

    @model_validator(mode="after")
    def _check(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.N < 4 or self.N % 2:
            raise ValueError("N must be an even integer >= 4")
        return self


def _expr_check(v, dim):
    try:
        parse(v, dim)
    except PucciError as exc:
        raise ValueError(str(exc)) from None


class DomainBlock(_Strict):
    expr: str = "ball(1)"
    positive_coordinate: Optional[int] = None


class SolveBlock(_Strict):
    grid: GridBlock
    domain: DomainBlock = DomainBlock()
    f: str = "0"
    g: str = "0"
    operator: OperatorBlock = Field(discriminator="type")
    tol: Optional[float] = None
    max_iters: int = 200
    damping: float = 1.0

    @model_validator(mode="after")
    def _check(self):
        for v in (self.f, self.g, self.domain.expr):
            _expr_check(v, self.grid.dim)
        pc = self.domain.positive_coordinate
        if pc is not None and not 0 <= pc < self.grid.dim:
            raise ValueError("positive_coordinate must name a coordinate axis")
        return self


class EvalBlock(_Strict):
    grid: GridBlock
    u: str
    operator: OperatorBlock = Field(discriminator="type")
    points: Optional[List[List[float]]] = None


class BarrierBlock(_Strict):
    r: float = 1.0
    dim: Literal[1, 2] = 1
    p: Optional[float] = None
    delta: Optional[float] = None
    alpha_range: Optional[List[float]] = None
    max_halvings: int = 4

    @field_validator("alpha_range")
    @classmethod
    def _ar(cls, v):
        if v is not None and (len(v) != 2 or not 0 < v[0] <= v[1] < 2):
            raise ValueError("alpha_range must be [a0, a1] with 0 < a0 <= a1 < 2")
        return v

    @model_validator(mode="after")
    def _check(self):
        if (self.p is None) != (self.delta is None):
            raise ValueError("give both p and delta, or neither to search")
        return self


class HarnackMeasure(_Strict):
    kind: Literal["harnack"]
    C0: float = 0.0
    radius: float = 0.5


class HolderMeasure(_Strict):
    kind: Literal["holder"]
    x0: Optional[List[float]] = None
    k_max: int = 8


class WeakHarnackMeasure(_Strict):
    kind: Literal["weak_harnack"]
    r: float = 0.5
    C0: float = 0.0
    thresholds: Optional[List[float]] = None


class BoundaryHarnackMeasure(_Strict):
    kind: Literal["boundary_harnack"]
    g2: str
    radius: float = 0.5
    floor: float = 1e-8
    x0: Optional[List[float]] = None
    rho: Optional[float] = None


Measurement = Union[HarnackMeasure, HolderMeasure, WeakHarnackMeasure, BoundaryHarnackMeasure]


class LabBlock(_Strict):
    grid: GridBlock
    domain: DomainBlock = DomainBlock()
    f: str = "0"
    g: str = "0"
    operator: OperatorBlock = Field(discriminator="type")
    lam: float = Field(1.0, alias="lambda")
    Lam: float = Field(2.0, alias="Lambda")
    kernel_class: Literal["A3", "A4"] = Field("A3", alias="class")
    alphas: List[float] = []
    phi_families: List[Literal["power", "logpower"]] = ["power"]
    beta_fraction: float = 0.5
    measurements: List[Measurement] = []
    refine: bool = False
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def _check(self):
        for v in (self.f, self.g, self.domain.expr):
            _expr_check(v, self.grid.dim)
        for m in self.measurements:
            if isinstance(m, BoundaryHarnackMeasure):
                _expr_check(m.g2, self.grid.dim)
        if not 0 < self.beta_fraction < 1:
            raise ValueError("beta_fraction must lie in (0, 1) so that beta < alpha")
        for a in self.alphas:
            if not 0 < a < 2:
                raise ValueError("alpha must lie in (beta, 2) as required by the kernel class A3")
        if not 0 < self.lam <= self.Lam:
            raise ValueError("need 0 < lambda <= Lambda")
        return self


class RunConfig(_Strict):
    schema_version: int = SCHEMA_VERSION
    command: Literal["verify-kernel", "barrier", "eval", "solve", "lab"]
    seed: int = 0
    kernel: Optional[KernelBlock] = None
    barrier: Optional[BarrierBlock] = None
    eval: Optional[EvalBlock] = None
    solve: Optional[SolveBlock] = None
    lab: Optional[LabBlock] = None

    @model_validator(mode="after")
    def _blocks(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}")
        need = {"verify-kernel": ["kernel"], "barrier": ["kernel", "barrier"], "eval": ["kernel", "eval"],
                "solve": ["kernel", "solve"], "lab": ["lab"]}[self.command]
        missing = [b for b in need if getattr(self, b) is None]
        if missing:
            raise ValueError(f"missing block(s) for command {self.command}: {', '.join(missing)}")
        return self


def parse_config(text: str) -> RunConfig:
    """Validate a JSON document; raises ConfigError listing (path, message) pairs."""
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([("", f"invalid JSON: {exc}")]) from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        errs = []
        for e in exc.errors():
            path = ".".join(str(p) for p in e["loc"])
            msg = e["msg"]
            if msg.startswith("Value error, "):
                msg = msg[len("Value error, "):]
            errs.append((path, msg))
        raise ConfigError(errs) from None
