"""Request/response models for the HTTP service (and the in-process CLI client)."""

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from ..engine import DEFAULT_MAX_EVENTS
from ..model import DEFAULT_MAX_LOCI


class ModelSpec(BaseModel):
    """Serializable mutation-model spec; mu is supplied separately at run time."""

    kind: Literal["dense", "flip", "single-site"]
    matrix: Optional[list[list[float]]] = None
    loci: Optional[int] = None
    a: Optional[list[float]] = None
    b: Optional[list[float]] = None
    max_loci: int = DEFAULT_MAX_LOCI

    @model_validator(mode="after")
    def _check_fields(self):
        if self.kind == "dense" and self.matrix is None:
            raise ValueError("dense model spec requires 'matrix'")
        if self.kind == "flip" and (self.loci is None or self.a is None or self.b is None):
            raise ValueError("flip model spec requires 'loci', 'a' and 'b'")
        if self.kind == "single-site" and self.loci is None:
            raise ValueError("single-site model spec requires 'loci'")
        return self

    def to_file_dict(self) -> dict:
        if self.kind == "dense":
            return {"kind": "dense", "matrix": self.matrix}
        if self.kind == "flip":
            return {"kind": "flip", "loci": self.loci, "a": self.a, "b": self.b}
        return {"kind": "single-site", "loci": self.loci}


class PopulationIn(BaseModel):
    num_types: int = Field(ge=1)
    counts: list[int]


class EngineOptionsIn(BaseModel):
    stop_size: int = Field(default=1, ge=1)
    proposal: Literal["two-stage", "joint"] = "two-stage"
    final_coalescence: Literal["natural", "forced"] = "natural"
    correction: Literal["stationary-product", "none"] = "stationary-product"
    max_events: int = Field(default=DEFAULT_MAX_EVENTS, ge=1)


class Manifest(BaseModel):
    """Full input echo; sufficient to reproduce a run bit-for-bit
    (timings excluded)."""

    command: str
    version: str
    params: dict
    total_seconds: float


class BuildModelRequest(BaseModel):
    model: ModelSpec
    include_stationary: bool = False


class BuildModelResponse(BaseModel):
    num_types: int
    model: ModelSpec
    stationary: Optional[list[float]] = None
    manifest: Manifest


class SampleRequest(BaseModel):
    model: ModelSpec
    size: int = Field(ge=1)
    seed: int


class SampleResponse(BaseModel):
    population: PopulationIn
    manifest: Manifest


class RecordOut(BaseModel):
    log_weight: float
    log_correction: float
    coalescent_sens: list[int]
    final_counts: list[int]
    event_count: int
    elapsed_seconds: float


class PointOut(BaseModel):
    mu: float
    log_likelihood: float
    std_error: float
    num_sims: int
    mean_sim_seconds: float
    degenerate_count: int


class LikelihoodRequest(BaseModel):
    model: ModelSpec
    population: PopulationIn
    mu: float = Field(gt=0)
    options: EngineOptionsIn = EngineOptionsIn()
    num_sims: int = Field(default=1000, ge=1)
    seed: int
    workers: Optional[int] = Field(default=None, ge=1)
    include_records: bool = False


class LikelihoodResponse(BaseModel):
    point: PointOut
    manifest: Manifest
    records: Optional[list[RecordOut]] = None


class GridSpec(BaseModel):
    lo: float = Field(gt=0)
    hi: float
    count: int = Field(ge=1)


class SurfaceRequest(BaseModel):
    model: ModelSpec
    population: PopulationIn
    grid: Optional[GridSpec] = None
    values: Optional[list[float]] = None
    options: EngineOptionsIn = EngineOptionsIn()
    num_sims: int = Field(default=1000, ge=1)
    seed: int
    workers: Optional[int] = Field(default=None, ge=1)
    crn: bool = True

    @model_validator(mode="after")
    def _check_grid(self):
        if (self.grid is None) == (self.values is None):
            raise ValueError("provide exactly one of 'grid' or 'values'")
        return self


class SurfaceResponse(BaseModel):
    points: list[PointOut]
    manifest: Manifest


class MleRequest(BaseModel):
    model: ModelSpec
    population: PopulationIn
    bounds: tuple[float, float] = (0.1, 30.1)
    tol: float = Field(default=1e-2, gt=0)
    options: EngineOptionsIn = EngineOptionsIn()
    num_sims: int = Field(default=1000, ge=1)
    seed: int
    workers: Optional[int] = Field(default=None, ge=1)


class MleResponse(BaseModel):
    mu_hat: float
    log_likelihood_at_hat: float
    evaluations: int
    bounds: tuple[float, float]
    manifest: Manifest


class TrajectoryRecordIn(BaseModel):
    coalescent_sens: list[int]
    event_count: int


class TrajectoryRequest(BaseModel):
    initial_total: int = Field(ge=1)
    records: list[TrajectoryRecordIn]


class TrajectoryRow(BaseModel):
    sen: int
    median: float
    min: int
    max: int


class TrajectoryResponse(BaseModel):
    rows: list[TrajectoryRow]
    manifest: Manifest


class ExactRequest(BaseModel):
    model: ModelSpec
    population: PopulationIn
    mu: float = Field(gt=0)


class ExactResponse(BaseModel):
    log_likelihood: float
    manifest: Manifest
