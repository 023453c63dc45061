"""Experiment configuration: a strict JSON schema with explicit defaults."""
from __future__ import annotations

import hashlib
import json
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .dynamics import IntegratorSpec
from .lattice import LatticeSpec
from .thermostats import reservoir_from_dict

__all__ = ["ExperimentConfig", "ConfigError", "parse_config", "config_hash", "dump_config"]

SCHEMA_VERSION = "nesslab.config/1"


class ConfigError(ValueError):
    """Invalid experiment configuration (message names the offending field path)."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


Pos = Annotated[float, Field(gt=0)]
NonNeg = Annotated[float, Field(ge=0)]


class HarmonicCfg(_Strict):
    kind: Literal["harmonic"] = "harmonic"
    k: Pos = 1.0


class FPUBetaCfg(_Strict):
    kind: Literal["fpu_beta"]
    k2: NonNeg = 1.0
    k4: Pos = 1.0


class RotatorCfg(_Strict):
    kind: Literal["rotator"]
    J: Pos = 1.0


class PinnedCfg(_Strict):
    kind: Literal["pinned_quadratic"]
    omega2: Pos = 1.0


class QuarticCfg(_Strict):
    kind: Literal["quartic_onsite"]
    a2: NonNeg = 0.0
    a4: Pos = 1.0


PairCfg = Annotated[Union[HarmonicCfg, FPUBetaCfg, RotatorCfg], Field(discriminator="kind")]
OnsiteCfg = Annotated[Union[PinnedCfg, QuarticCfg], Field(discriminator="kind")]


class LatticeCfg(_Strict):
    sides: List[Annotated[int, Field(ge=1)]] = Field(min_length=1, max_length=2)
    pair: PairCfg = HarmonicCfg()
    onsite: Optional[OnsiteCfg] = None
    onsite_sites: Optional[List[int]] = None
    mass: Pos = 1.0
    nu: Annotated[int, Field(ge=1)] = 1
    transverse: Literal["free", "periodic"] = "free"
    ends: Literal["free", "fixed", "periodic"] = "free"


class LangevinCfg(_Strict):
    tag: Literal["langevin"]
    T_L: Pos
    T_R: Pos
    lam_L: NonNeg = 1.0
    lam_R: NonNeg = 1.0
    left_sites: Optional[List[int]] = None
    right_sites: Optional[List[int]] = None


class ExtendedCfg(_Strict):
    tag: Literal["extended"]
    T_L: Pos
    T_R: Pos
    lam_L: Pos = 1.0
    lam_R: Pos = 1.0
    gamma_L: NonNeg = 1.0
    gamma_R: NonNeg = 1.0


class NoseHooverCfg(_Strict):
    tag: Literal["nose_hoover"]
    T_L: Pos
    T_R: Pos
    theta: Pos = 1.0
    g_L: Optional[Pos] = None
    g_R: Optional[Pos] = None
    left_sites: Optional[List[int]] = None
    right_sites: Optional[List[int]] = None


class GaussianCfg(_Strict):
    tag: Literal["gaussian"]
    T_L: Pos
    T_R: Pos
    g_L: Optional[Pos] = None
    g_R: Optional[Pos] = None
    left_sites: Optional[List[int]] = None
    right_sites: Optional[List[int]] = None


class NoneCfg(_Strict):
    tag: Literal["none"]


ReservoirCfg = Annotated[Union[LangevinCfg, ExtendedCfg, NoseHooverCfg, GaussianCfg, NoneCfg],
                         Field(discriminator="tag")]


class IntegratorCfg(_Strict):
    dt: Optional[Pos] = None
    total_steps: Annotated[int, Field(ge=1)] = 100_000
    burn_in: Annotated[int, Field(ge=0)] = 10_000
    stride: Annotated[int, Field(ge=1)] = 10
    scheme: Literal["obabo"] = "obabo"
    average: bool = True

    @model_validator(mode="after")
    def _burn(self):
        if self.burn_in >= self.total_steps:
            raise ValueError("burn_in must be smaller than total_steps")
        return self


class KmpCfg(_Strict):
    n: Annotated[int, Field(ge=2)] = 32
    T_L: Pos = 2.0
    T_R: Pos = 1.0
    gamma_ex: Pos = 1.0
    gamma_b: Pos = 1.0
    window: Pos = 20.0
    windows: Annotated[int, Field(ge=64)] = 4096
    burn_time: NonNeg = 1000.0


class ParamsCfg(_Strict):
    lengths: Optional[List[Annotated[int, Field(ge=2)]]] = None
    replicas: Annotated[int, Field(ge=1)] = 1
    n_blocks: Annotated[int, Field(ge=16)] = 32
    exclude_smallest: bool = False
    # Green-Kubo
    T: Optional[Pos] = None
    t_max: NonNeg = 50.0
    total_time: Pos = 10_000.0
    segments: Annotated[int, Field(ge=2)] = 16
    sample_every: Pos = 0.1
    ensemble: Literal["matched", "canonical"] = "matched"
    # fluctuation theorem
    segment_time: Pos = 10.0
    n_segments: Annotated[int, Field(ge=100)] = 10_000
    p_max: Pos = 1.0
    p_bins: Annotated[int, Field(ge=2)] = 20
    normalized: bool = False
    min_count: Annotated[int, Field(ge=1)] = 100
    kmp: KmpCfg = KmpCfg()


class ExperimentConfig(_Strict):
    schema_version: Literal["nesslab.config/1"] = SCHEMA_VERSION
    study: Literal["run", "sweep", "oracle", "gk", "ldf", "kmp"] = "run"
    lattice: LatticeCfg = LatticeCfg(sides=[16])
    reservoir: ReservoirCfg = LangevinCfg(tag="langevin", T_L=1.2, T_R=0.8)
    integrator: IntegratorCfg = IntegratorCfg()
    params: ParamsCfg = ParamsCfg()
    seed: Annotated[int, Field(ge=0, lt=2 ** 64)] = 0
    output: str = "out"

    @model_validator(mode="after")
    def _consistent(self):
        # constructing the runtime objects applies the remaining physical checks
        try:
            self.lattice_spec()
            self.reservoir_spec()
        except ValueError as exc:
            raise ValueError(str(exc)) from None
        if self.study == "sweep" and (not self.params.lengths or len(self.params.lengths) < 3):
            raise ValueError("sweep study needs params.lengths with at least three entries")
        return self

    def lattice_spec(self) -> LatticeSpec:
        return LatticeSpec.from_dict(self.lattice.model_dump())

    def reservoir_spec(self):
        return reservoir_from_dict(self.reservoir.model_dump())

    def integrator_spec(self, seed: Optional[int] = None) -> IntegratorSpec:
        d = self.integrator.model_dump()
        return IntegratorSpec(seed=self.seed if seed is None else seed, **d)


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(x) for x in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Validate a JSON document and fill every default."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, indent=2)


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical config JSON, excluding the output directory."""
    d = cfg.model_dump(mode="json")
    d.pop("output", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()
