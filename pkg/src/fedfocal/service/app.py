"""HTTP facade over the experiment pipeline.

Endpoints execute synchronously: experiments are desk-scale and the CLI
drives one at a time. File paths in requests are interpreted on the
machine the service runs on; artifacts are written server-side and echoed
back in the response.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..config import validate_paths
from ..exceptions import FedFocalError
from .schemas import (
    AblateRequest,
    AblateResponse,
    AblationRow,
    HealthResponse,
    PrepareRequest,
    PrepareResponse,
    ReportRequest,
    ReportResponse,
    RunRequest,
    RunResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(title="fedfocal", version=__version__)

    @app.exception_handler(FedFocalError)
    async def domain_error_handler(_: Request, exc: FedFocalError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/experiments/run", response_model=RunResponse)
    def run_experiment(request: RunRequest) -> RunResponse:
        validate_paths(request.config)
        result = pipeline.run_config(request.config, workers=request.workers)
        summary_path = None
        trace_paths: list[str] = []
        if request.write_artifacts:
            paths = pipeline.write_artifacts(result, request.config.output_dir)
            summary_path = str(paths.summary)
            trace_paths = [str(p) for p in paths.traces]
        return RunResponse(
            name=request.config.name,
            method=result.summary["method"],
            dataset=result.summary["dataset"],
            mean=result.summary["mean"],
            std=result.summary["std"],
            median=result.summary["median"],
            n_seeds=len(request.config.seeds),
            config_hash=result.summary["config_hash"],
            summary=result.summary,
            summary_path=summary_path,
            trace_paths=trace_paths,
        )

    @app.post("/experiments/ablate", response_model=AblateResponse)
    def ablate(request: AblateRequest) -> AblateResponse:
        validate_paths(request.config)
        rows, results = pipeline.run_ablation(
            request.config, request.axis, request.values, workers=request.workers
        )
        csv_text = pipeline.ablation_csv(rows)
        table_path = None
        if request.write_artifacts:
            out = Path(request.config.output_dir)
            for value, result in results.items():
                pipeline.write_artifacts(result, out / f"{request.axis}_{value:g}")
            table_file = out / f"ablation_{request.axis}.csv"
            out.mkdir(parents=True, exist_ok=True)
            table_file.write_text(csv_text)
            table_path = str(table_file)
        return AblateResponse(
            axis=request.axis,
            rows=[AblationRow(**row) for row in rows],
            table_csv=csv_text,
            table_path=table_path,
        )

    @app.post("/datasets/prepare", response_model=PrepareResponse)
    def prepare(request: PrepareRequest) -> PrepareResponse:
        directory, manifest = pipeline.prepare_cache(
            request.name,
            request.source,
            request.transforms,
            request.output_dir,
            seed=request.seed,
        )
        return PrepareResponse(cache_dir=str(directory), manifest=manifest)

    @app.post("/reports/render", response_model=ReportResponse)
    def render(request: ReportRequest) -> ReportResponse:
        summaries = []
        for raw in request.paths:
            path = Path(raw)
            if not path.exists():
                raise FedFocalError(f"summary file not found: {path}")
            summaries.append(json.loads(path.read_text()))
        return ReportResponse(table=pipeline.render_report(summaries), summaries=summaries)

    return app


app = create_app()
