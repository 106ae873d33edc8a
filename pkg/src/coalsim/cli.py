"""Command-line front end.

A thin client over the service layer: each subcommand builds a request
model, executes it (in-process by default, or against a remote server via
--url), and writes the response to JSON/CSV files plus a run manifest.

Exit codes: 0 success, 2 validation/guard failure, 3 numerical failure.
"""

import csv
import functools
import json
import sys

import click
import pydantic

from . import __version__
from .errors import InputError, NumericalError
from .service import schemas

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _handlers():
    from .service import app as service_app

    return {
        "/model/build": (service_app.build_model, schemas.BuildModelResponse),
        "/population/sample": (service_app.sample_population, schemas.SampleResponse),
        "/likelihood": (service_app.likelihood, schemas.LikelihoodResponse),
        "/surface": (service_app.surface, schemas.SurfaceResponse),
        "/mle": (service_app.mle, schemas.MleResponse),
        "/trajectory": (service_app.trajectory, schemas.TrajectoryResponse),
        "/exact": (service_app.exact, schemas.ExactResponse),
    }


def call_endpoint(path: str, request: pydantic.BaseModel, url: str | None = None):
    """Execute one service operation, in-process or over HTTP."""
    handler, response_cls = _handlers()[path]
    if url is None:
        return handler(request)
    import httpx

    resp = httpx.post(
        url.rstrip("/") + path, json=request.model_dump(mode="json"), timeout=None
    )
    if resp.status_code >= 400:
        detail = resp.json()
        message = detail.get("detail", resp.text)
        if detail.get("kind") == "numerical":
            raise NumericalError(message)
        raise InputError(str(message))
    return response_cls.model_validate(resp.json())


def _cli_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except pydantic.ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_manifest(out_path: str, manifest: schemas.Manifest) -> None:
    _write_json(out_path + ".manifest.json", manifest.model_dump(mode="json"))


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON file {path}: {exc}")


def _model_spec_from_file(path: str) -> schemas.ModelSpec:
    return schemas.ModelSpec.model_validate(_load_json(path))


def _population_from_file(path: str) -> schemas.PopulationIn:
    return schemas.PopulationIn.model_validate(_load_json(path))


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise InputError(f"cannot parse float list {text!r}")


def _parse_grid(text: str) -> schemas.GridSpec:
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError("--mu-grid must look like lo:hi:count, e.g. 0.1:30.1:60")
    return schemas.GridSpec(lo=float(parts[0]), hi=float(parts[1]), count=int(parts[2]))


def _parse_bounds(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise InputError("--bounds must look like lo:hi, e.g. 0.1:30.1")
    return (float(parts[0]), float(parts[1]))


def _options_from_flags(stop_size, proposal, final_coalescence, correction, max_events):
    return schemas.EngineOptionsIn(
        stop_size=stop_size,
        proposal=proposal,
        final_coalescence=final_coalescence,
        correction=correction,
        max_events=max_events,
    )


def _engine_flags(fn):
    fn = click.option("--stop-size", type=int, default=1, show_default=True,
                      help="Stop when the population reaches this size (1 = full simulation).")(fn)
    fn = click.option("--proposal", type=click.Choice(["two-stage", "joint"]),
                      default="two-stage", show_default=True)(fn)
    fn = click.option("--final-coalescence", type=click.Choice(["natural", "forced"]),
                      default="natural", show_default=True)(fn)
    fn = click.option("--correction", type=click.Choice(["stationary-product", "none"]),
                      default="stationary-product", show_default=True)(fn)
    fn = click.option("--max-events", type=int, default=10_000_000, show_default=True)(fn)
    return fn


def _run_flags(fn):
    fn = click.option("--num-sims", "-M", type=int, default=1000, show_default=True)(fn)
    fn = click.option("--seed", type=int, required=True,
                      help="Master seed; simulation m uses stream (seed, m).")(fn)
    fn = click.option("--workers", type=int, default=None,
                      help="Worker processes (default: machine parallelism).")(fn)
    return fn


_url_option = click.option("--url", default=None, help="Remote coalsim server URL (default: run in-process).")


@click.group()
@click.version_option(version=__version__, prog_name="coalsim")
def main():
    """Coalescent likelihood estimation by backward importance sampling."""


@main.command("model")
@click.option("--kind", type=click.Choice(["dense", "flip", "single-site"]), required=True)
@click.option("--loci", type=int, default=None)
@click.option("--a", "a_text", default=None, help="Comma-separated per-locus 0->1 flip probabilities.")
@click.option("--b", "b_text", default=None, help="Comma-separated per-locus 1->0 flip probabilities.")
@click.option("--matrix", "matrix_path", default=None,
              help="JSON file holding a dense matrix (or a model spec with one).")
@click.option("--max-loci", type=int, default=15, show_default=True,
              help="Memory guard on the number of loci.")
@click.option("--stationary", "stationary_path", default=None,
              help="Also write the stationary distribution as CSV (type_index,prob).")
@click.option("--out", required=True, help="Output model spec JSON file.")
@_url_option
@_cli_errors
def cmd_model(kind, loci, a_text, b_text, matrix_path, max_loci, stationary_path, out, url):
    """Build (and validate) a mutation model spec file."""
    matrix = None
    if kind == "dense":
        if matrix_path is None:
            raise InputError("dense models require --matrix")
        data = _load_json(matrix_path)
        matrix = data["matrix"] if isinstance(data, dict) else data
    spec = schemas.ModelSpec(
        kind=kind,
        matrix=matrix,
        loci=loci,
        a=_parse_floats(a_text) if a_text else None,
        b=_parse_floats(b_text) if b_text else None,
        max_loci=max_loci,
    )
    req = schemas.BuildModelRequest(model=spec, include_stationary=stationary_path is not None)
    resp = call_endpoint("/model/build", req, url)
    _write_json(out, resp.model.to_file_dict())
    _write_manifest(out, resp.manifest)
    if stationary_path is not None:
        with open(stationary_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["type_index", "prob"])
            for t, p in enumerate(resp.stationary):
                writer.writerow([t, repr(p)])
    click.echo(f"wrote model with {resp.num_types} types to {out}")


@main.command("sample")
@click.option("--model", "model_path", required=True)
@click.option("--size", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", required=True, help="Output population JSON file.")
@_url_option
@_cli_errors
def cmd_sample(model_path, size, seed, out, url):
    """Sample a population from the model's stationary distribution."""
    req = schemas.SampleRequest(model=_model_spec_from_file(model_path), size=size, seed=seed)
    resp = call_endpoint("/population/sample", req, url)
    _write_json(out, resp.population.model_dump())
    _write_manifest(out, resp.manifest)
    click.echo(f"wrote population of {sum(resp.population.counts)} individuals to {out}")


@main.command("likelihood")
@click.option("--model", "model_path", required=True)
@click.option("--population", "population_path", required=True)
@click.option("--mu", type=float, required=True)
@_engine_flags
@_run_flags
@click.option("--records", "records_path", default=None,
              help="Also dump per-simulation records as JSON lines.")
@click.option("--out", required=True, help="Output results JSON file.")
@_url_option
@_cli_errors
def cmd_likelihood(model_path, population_path, mu, stop_size, proposal,
                   final_coalescence, correction, max_events, num_sims, seed,
                   workers, records_path, out, url):
    """Estimate the log-likelihood at one value of mu."""
    req = schemas.LikelihoodRequest(
        model=_model_spec_from_file(model_path),
        population=_population_from_file(population_path),
        mu=mu,
        options=_options_from_flags(stop_size, proposal, final_coalescence,
                                    correction, max_events),
        num_sims=num_sims,
        seed=seed,
        workers=workers,
        include_records=records_path is not None,
    )
    resp = call_endpoint("/likelihood", req, url)
    payload = {"point": resp.point.model_dump(), "manifest": resp.manifest.model_dump()}
    _write_json(out, payload)
    _write_manifest(out, resp.manifest)
    if records_path is not None:
        with open(records_path, "w") as fh:
            for record in resp.records:
                fh.write(json.dumps(record.model_dump()))
                fh.write("\n")
    click.echo(f"log-likelihood {resp.point.log_likelihood:.6f} "
               f"(se {resp.point.std_error:.3g}) -> {out}")


@main.command("surface")
@click.option("--model", "model_path", required=True)
@click.option("--population", "population_path", required=True)
@click.option("--mu-grid", "grid_text", required=True, help="Grid as lo:hi:count.")
@click.option("--crn/--no-crn", default=True, show_default=True,
              help="Reuse the same streams at every grid point.")
@_engine_flags
@_run_flags
@click.option("--out", required=True, help="Output surface CSV file.")
@_url_option
@_cli_errors
def cmd_surface(model_path, population_path, grid_text, crn, stop_size, proposal,
                final_coalescence, correction, max_events, num_sims, seed,
                workers, out, url):
    """Estimate the log-likelihood over a grid of mu values."""
    req = schemas.SurfaceRequest(
        model=_model_spec_from_file(model_path),
        population=_population_from_file(population_path),
        grid=_parse_grid(grid_text),
        options=_options_from_flags(stop_size, proposal, final_coalescence,
                                    correction, max_events),
        num_sims=num_sims,
        seed=seed,
        workers=workers,
        crn=crn,
    )
    resp = call_endpoint("/surface", req, url)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "loglik", "se", "num_sims",
                         "mean_sim_seconds", "degenerate_count"])
        for p in resp.points:
            writer.writerow([repr(p.mu), repr(p.log_likelihood), repr(p.std_error),
                             p.num_sims, repr(p.mean_sim_seconds), p.degenerate_count])
    _write_manifest(out, resp.manifest)
    click.echo(f"wrote {len(resp.points)} surface points to {out}")


@main.command("mle")
@click.option("--model", "model_path", required=True)
@click.option("--population", "population_path", required=True)
@click.option("--bounds", "bounds_text", default="0.1:30.1", show_default=True)
@click.option("--tol", type=float, default=1e-2, show_default=True)
@_engine_flags
@_run_flags
@click.option("--out", required=True, help="Output MLE JSON file.")
@_url_option
@_cli_errors
def cmd_mle(model_path, population_path, bounds_text, tol, stop_size, proposal,
            final_coalescence, correction, max_events, num_sims, seed, workers,
            out, url):
    """Maximum-likelihood estimate of the mutation rate."""
    req = schemas.MleRequest(
        model=_model_spec_from_file(model_path),
        population=_population_from_file(population_path),
        bounds=_parse_bounds(bounds_text),
        tol=tol,
        options=_options_from_flags(stop_size, proposal, final_coalescence,
                                    correction, max_events),
        num_sims=num_sims,
        seed=seed,
        workers=workers,
    )
    resp = call_endpoint("/mle", req, url)
    _write_json(out, resp.model_dump())
    _write_manifest(out, resp.manifest)
    click.echo(f"mu_hat {resp.mu_hat:.6f} "
               f"(loglik {resp.log_likelihood_at_hat:.6f}) -> {out}")


@main.command("traj")
@click.option("--records", "records_path", required=True,
              help="JSON-lines records file from `coalsim likelihood --records`.")
@click.option("--out", required=True, help="Output trajectory CSV file.")
@_url_option
@_cli_errors
def cmd_traj(records_path, out, url):
    """Summarise population size per sequential event number across records."""
    records = []
    initial_total = None
    try:
        with open(records_path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                records.append(schemas.TrajectoryRecordIn(
                    coalescent_sens=row["coalescent_sens"],
                    event_count=row["event_count"],
                ))
                if initial_total is None:
                    initial_total = sum(row["final_counts"]) + len(row["coalescent_sens"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise InputError(f"cannot read records file {records_path}: {exc}")
    if not records:
        raise InputError(f"records file {records_path} is empty")
    req = schemas.TrajectoryRequest(initial_total=initial_total, records=records)
    resp = call_endpoint("/trajectory", req, url)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sen", "median", "min", "max"])
        for row in resp.rows:
            writer.writerow([row.sen, repr(row.median), row.min, row.max])
    _write_manifest(out, resp.manifest)
    click.echo(f"wrote {len(resp.rows)} trajectory rows to {out}")


@main.command("exact")
@click.option("--model", "model_path", required=True)
@click.option("--population", "population_path", required=True)
@click.option("--mu", type=float, required=True)
@click.option("--out", required=True, help="Output JSON file.")
@_url_option
@_cli_errors
def cmd_exact(model_path, population_path, mu, out, url):
    """Exact log-likelihood by dynamic programming (small instances only)."""
    req = schemas.ExactRequest(
        model=_model_spec_from_file(model_path),
        population=_population_from_file(population_path),
        mu=mu,
    )
    resp = call_endpoint("/exact", req, url)
    _write_json(out, resp.model_dump())
    _write_manifest(out, resp.manifest)
    click.echo(f"exact log-likelihood {resp.log_likelihood:.9f} -> {out}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def cmd_serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
