"""FastAPI service wrapping the core package.

Every handler is a plain function taking a request model and returning a
response model; the CLI calls these functions in-process by default and
over HTTP when pointed at a running server (``coalsim serve``).
"""

import time
from types import SimpleNamespace

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, estimator, model as model_mod, oracle
from ..engine import EngineOptions
from ..errors import InputError, NumericalError
from ..model import Configuration, MutationModel, StationaryDistribution
from ..rng import derive_stream
from . import schemas

app = FastAPI(title="coalsim", version=__version__)


@app.exception_handler(InputError)
async def _input_error(request: Request, exc: InputError):
    return JSONResponse(
        status_code=422, content={"detail": str(exc), "kind": "input"}
    )


@app.exception_handler(NumericalError)
async def _numerical_error(request: Request, exc: NumericalError):
    return JSONResponse(
        status_code=500, content={"detail": str(exc), "kind": "numerical"}
    )


def _manifest(command: str, params: dict, started: float) -> schemas.Manifest:
    return schemas.Manifest(
        command=command,
        version=__version__,
        params=params,
        total_seconds=time.perf_counter() - started,
    )


def _build_matrix(spec: schemas.ModelSpec):
    return model_mod.build_from_spec(spec.model_dump(), max_loci=spec.max_loci)


def _population(pop: schemas.PopulationIn) -> Configuration:
    return model_mod.population_from_dict(pop.model_dump())


def _options(opts: schemas.EngineOptionsIn) -> EngineOptions:
    return EngineOptions(**opts.model_dump())


def _workers(requested) -> int:
    return requested if requested is not None else estimator.default_workers()


def _point_out(point: estimator.SurfacePoint) -> schemas.PointOut:
    return schemas.PointOut(
        mu=point.mu,
        log_likelihood=point.log_likelihood,
        std_error=point.std_error,
        num_sims=point.num_sims,
        mean_sim_seconds=point.mean_sim_seconds,
        degenerate_count=point.degenerate_count,
    )


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/model/build", response_model=schemas.BuildModelResponse)
def build_model(req: schemas.BuildModelRequest) -> schemas.BuildModelResponse:
    started = time.perf_counter()
    matrix = _build_matrix(req.model)
    pi = None
    if req.include_stationary:
        dist = model_mod.stationary(MutationModel.from_matrix(matrix, 1.0))
        pi = dist.probs.tolist()
    return schemas.BuildModelResponse(
        num_types=matrix.shape[0],
        model=req.model,
        stationary=pi,
        manifest=_manifest("model", req.model_dump(), started),
    )


@app.post("/population/sample", response_model=schemas.SampleResponse)
def sample_population(req: schemas.SampleRequest) -> schemas.SampleResponse:
    started = time.perf_counter()
    matrix = _build_matrix(req.model)
    dist = model_mod.stationary(MutationModel.from_matrix(matrix, 1.0))
    config = model_mod.sample_population(dist, req.size, derive_stream(req.seed, 0))
    return schemas.SampleResponse(
        population=schemas.PopulationIn(**model_mod.population_to_dict(config)),
        manifest=_manifest("sample", req.model_dump(), started),
    )


@app.post("/likelihood", response_model=schemas.LikelihoodResponse)
def likelihood(req: schemas.LikelihoodRequest) -> schemas.LikelihoodResponse:
    started = time.perf_counter()
    matrix = _build_matrix(req.model)
    mm = MutationModel.from_matrix(matrix, req.mu)
    dist = model_mod.stationary(mm)
    config = _population(req.population)
    point, records = estimator.estimate(
        config,
        mm,
        dist,
        _options(req.options),
        req.num_sims,
        req.seed,
        workers=_workers(req.workers),
    )
    records_out = None
    if req.include_records:
        records_out = [
            schemas.RecordOut(
                log_weight=r.log_weight,
                log_correction=r.log_correction,
                coalescent_sens=r.coalescent_sens.tolist(),
                final_counts=r.final_config.counts.tolist(),
                event_count=r.event_count,
                elapsed_seconds=r.elapsed_seconds,
            )
            for r in records
        ]
    return schemas.LikelihoodResponse(
        point=_point_out(point),
        manifest=_manifest("likelihood", req.model_dump(), started),
        records=records_out,
    )


@app.post("/surface", response_model=schemas.SurfaceResponse)
def surface(req: schemas.SurfaceRequest) -> schemas.SurfaceResponse:
    started = time.perf_counter()
    import numpy as np

    if req.grid is not None:
        grid = np.linspace(req.grid.lo, req.grid.hi, req.grid.count)
    else:
        grid = np.asarray(req.values, dtype=float)
    matrix = _build_matrix(req.model)
    mm = MutationModel.from_matrix(matrix, float(grid[0]))
    dist = model_mod.stationary(mm)
    config = _population(req.population)
    points = estimator.surface(
        config,
        mm,
        dist,
        _options(req.options),
        grid,
        req.num_sims,
        req.seed,
        workers=_workers(req.workers),
        crn=req.crn,
    )
    return schemas.SurfaceResponse(
        points=[_point_out(p) for p in points],
        manifest=_manifest("surface", req.model_dump(), started),
    )


@app.post("/mle", response_model=schemas.MleResponse)
def mle(req: schemas.MleRequest) -> schemas.MleResponse:
    started = time.perf_counter()
    matrix = _build_matrix(req.model)
    dist = model_mod.stationary(MutationModel.from_matrix(matrix, 1.0))
    config = _population(req.population)
    result = estimator.mle(
        config,
        matrix,
        dist,
        _options(req.options),
        bounds=req.bounds,
        num_sims=req.num_sims,
        master_seed=req.seed,
        workers=_workers(req.workers),
        tol=req.tol,
    )
    return schemas.MleResponse(
        mu_hat=result.mu_hat,
        log_likelihood_at_hat=result.log_likelihood_at_hat,
        evaluations=result.evaluations,
        bounds=result.bounds,
        manifest=_manifest("mle", req.model_dump(), started),
    )


@app.post("/trajectory", response_model=schemas.TrajectoryResponse)
def trajectory(req: schemas.TrajectoryRequest) -> schemas.TrajectoryResponse:
    started = time.perf_counter()
    import numpy as np

    records = [
        SimpleNamespace(
            coalescent_sens=np.asarray(r.coalescent_sens, dtype=np.int64),
            event_count=r.event_count,
        )
        for r in req.records
    ]
    summary = estimator.trajectory_summary(records, req.initial_total)
    rows = [
        schemas.TrajectoryRow(
            sen=int(summary.sen[k]),
            median=float(summary.median_size[k]),
            min=int(summary.min_size[k]),
            max=int(summary.max_size[k]),
        )
        for k in range(summary.sen.size)
    ]
    return schemas.TrajectoryResponse(
        rows=rows,
        manifest=_manifest("traj", req.model_dump(), started),
    )


@app.post("/exact", response_model=schemas.ExactResponse)
def exact(req: schemas.ExactRequest) -> schemas.ExactResponse:
    started = time.perf_counter()
    matrix = _build_matrix(req.model)
    mm = MutationModel.from_matrix(matrix, req.mu)
    dist = model_mod.stationary(mm)
    config = _population(req.population)
    value = oracle.exact_likelihood(config, mm, dist)
    return schemas.ExactResponse(
        log_likelihood=value,
        manifest=_manifest("exact", req.model_dump(), started),
    )
