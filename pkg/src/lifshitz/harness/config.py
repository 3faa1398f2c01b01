"""Experiment configuration: TOML text validated into typed models."""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigurationError
from ..lattice import LatticeGeometry
from ..potential import (
    AtomAtZero,
    BaseSet,
    CouplingLaw,
    GeneralBreather,
    PeriodicBackground,
    PointMass,
    PotentialModel,
    StandardBreather,
    Tabulated,
    TentProfile,
    Uniform,
    cutoff_simplify,
)

KINDS = ("spectrum", "ids", "tail", "lifshitz-fit", "bounds-check", "e0", "lower-bound", "ct-decay", "ilse")
BCS = ("dirichlet", "neumann", "periodic", "mezincescu")


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometrySection(Strict):
    dimension: int = Field(1, ge=1, le=3)
    spacing: float = Field(1.0, gt=0)
    generator: Optional[list[list[float]]] = None

    def build(self) -> LatticeGeometry:
        if self.generator is not None:
            return LatticeGeometry(tuple(tuple(r) for r in self.generator))
        return LatticeGeometry.cubic(self.dimension, self.spacing)


class BackgroundTerm(Strict):
    amplitude: float
    kind: Literal["cos", "sin"] = "cos"
    wavevector: list[int]


class BackgroundSection(Strict):
    constant: float = 0.0
    terms: list[BackgroundTerm] = []

    def build(self) -> PeriodicBackground:
        return PeriodicBackground(self.constant, tuple((t.amplitude, t.kind, tuple(t.wavevector)) for t in self.terms))


class SingleSiteSection(Strict):
    kind: Literal["standard", "tent"] = "standard"
    coupling: float = Field(1.0, gt=0, description="height mu of the standard breather")
    base: Literal["half-cell", "ball", "box"] = "half-cell"
    base_size: list[float] = []
    peak: float = Field(1.0, gt=0)
    radius: float = Field(0.5, gt=0)
    cutoff: Optional[float] = Field(None, gt=0)

    def build(self):
        if self.kind == "standard":
            u = StandardBreather(self.coupling, BaseSet(self.base, tuple(self.base_size)))
        else:
            u = GeneralBreather(TentProfile(self.peak, self.radius))
        return cutoff_simplify(u, self.cutoff) if self.cutoff is not None else u


class LawSection(Strict):
    kind: Literal["uniform", "point", "atom", "beta"] = "uniform"
    low: float = Field(0.0, ge=0, le=1)
    high: float = Field(1.0, ge=0, le=1)
    value: float = Field(1.0, ge=0, le=1)
    weight: float = Field(0.5, ge=0, le=1, description="mass of the atom at zero")
    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _order(self):
        if self.kind == "uniform" and not self.low < self.high:
            raise ValueError("uniform law needs low < high")
        return self

    def build(self):
        if self.kind == "uniform":
            return Uniform(self.low, self.high)
        if self.kind == "point":
            return PointMass(self.value)
        if self.kind == "atom":
            return AtomAtZero(self.weight, PointMass(self.value))
        return Tabulated.beta(self.a, self.b)


class EnergySection(Strict):
    """Either explicit ``offsets`` or a geometric ladder ``smallest * ratio^j``."""

    offsets: list[float] = []
    smallest: float = Field(0.05, gt=0)
    ratio: float = Field(2.0, gt=1)
    count: int = Field(6, ge=1, le=200)

    def values(self) -> list[float]:
        if self.offsets:
            return list(self.offsets)
        return [self.smallest * self.ratio**j for j in range(self.count)]


class ParamsSection(Strict):
    """Kind-specific parameters; unused fields are ignored by other kinds."""

    L: int = Field(4, ge=0, le=400)
    L_list: list[int] = [2, 4]
    bc: Literal["dirichlet", "neumann", "periodic", "mezincescu"] = "mezincescu"
    bcs: list[Literal["dirichlet", "neumann", "periodic", "mezincescu"]] = ["dirichlet", "mezincescu", "neumann"]
    k: int = Field(10, ge=1, le=1000)
    sample_index: int = Field(0, ge=0)
    length_rule: Literal["critical", "gap"] = "critical"
    gap_lengths: list[int] = list(range(2, 13))
    mu: float = Field(1.0, gt=0, le=1, description="non-degeneracy level")
    beta: Optional[float] = Field(None, gt=0, le=1, description="E[X_0]; estimated when absent")
    rate: Optional[float] = Field(None, gt=0, description="Chernoff rate attached as a bound")
    random_potential: bool = False
    calibration_L: int = Field(9, ge=1, le=200)
    c_prime_samples: int = Field(500, ge=1)
    slope_max: Optional[float] = None
    ct_residual_max: float = Field(1e-2, gt=0)
    ilse_min: float = Field(0.9, ge=0, le=1)
    alphas: list[float] = [0.1, 0.5]
    energy_fractions: list[float] = [0.25, 0.5, 0.75]
    width: float = Field(1.0, gt=0)
    max_offset: Optional[int] = Field(None, ge=0, description="last target slab offset; whole box when absent")
    ell: int = Field(3, ge=1)
    kappa: int = Field(2, ge=1)
    c_prime: float = Field(0.0, ge=0)
    energy_ceiling: float = Field(1.2, gt=0, description="upper end E+ of the Combes-Thomas calibration gaps")
    thirring_instances: int = Field(10_000, ge=1)
    projection_instances: int = Field(1_000, ge=1)
    temple_instances: int = Field(1_000, ge=1)
    chernoff_runs: int = Field(100_000, ge=1)
    tol: float = Field(1e-8, gt=0, lt=1e-2)
    dense_cutoff: int = Field(2000, ge=10)


class ExperimentConfig(Strict):
    kind: Literal["spectrum", "ids", "tail", "lifshitz-fit", "bounds-check", "e0", "lower-bound", "ct-decay", "ilse"]
    seed: int = Field(0, ge=0, lt=2**64)
    samples: int = Field(1000, ge=1)
    n_h: int = Field(8, ge=2, le=64)
    out: str = "results"
    geometry: GeometrySection = GeometrySection()
    background: BackgroundSection = BackgroundSection()
    single_site: SingleSiteSection = SingleSiteSection()
    law: LawSection = LawSection()
    energies: EnergySection = EnergySection()
    params: ParamsSection = ParamsSection()

    def model(self) -> PotentialModel:
        geom = self.geometry.build()
        return PotentialModel(geom, self.single_site.build(), CouplingLaw((self.law.build(),)), self.background.build())

    def canonical(self) -> dict:
        return self.model_dump(mode="json", exclude_none=True)

    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def to_toml(self) -> str:
        return serialize_config(self)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        data = self.canonical()
        data.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig.model_validate(data)


def _describe(err: dict) -> str:
    loc = ".".join(str(p) for p in err["loc"])
    if err["type"] == "extra_forbidden":
        return f"{loc}: unknown key"
    ctx = err.get("ctx") or {}
    bounds = ", ".join(f"{k} {v}" for k, v in ctx.items() if k in ("ge", "gt", "le", "lt"))
    suffix = f" (allowed: {bounds})" if bounds else ""
    return f"{loc}: {err['msg']}{suffix}"


class ConfigError(ConfigurationError):
    """Every schema violation of a configuration, not just the first."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse TOML ``text``; ``[experiment]`` keys are flattened to the top level."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    data = dict(raw)
    exp = data.pop("experiment", {})
    if not isinstance(exp, dict):
        raise ConfigError(["experiment: must be a table"])
    clash = sorted(set(exp) & set(data))
    if clash:
        raise ConfigError([f"{k}: given both in [experiment] and at top level" for k in clash])
    data.update(exp)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError([_describe(e) for e in exc.errors()]) from None


def serialize_config(cfg: ExperimentConfig) -> str:
    data = cfg.canonical()
    top = {k: data.pop(k) for k in ("kind", "seed", "samples", "n_h", "out")}
    return tomli_w.dumps({"experiment": top, **data})


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)
