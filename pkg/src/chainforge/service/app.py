"""FastAPI application exposing the pipeline stages over HTTP.

Every endpoint is a thin wrapper over the corresponding
:mod:`chainforge.pipeline` function: paths arrive in the request body,
artifacts are written to disk, and the JSON result is echoed back.
Domain errors map to 400, missing files to 404.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from chainforge import __version__, pipeline
from chainforge.errors import ChainforgeError
from chainforge.service import schemas

logger = logging.getLogger(__name__)


def create_app() -> FastAPI:
    pipeline.configure_logging()
    app = FastAPI(
        title="chainforge",
        version=__version__,
        description="Package supply-chain analysis pipeline",
    )

    @app.exception_handler(ChainforgeError)
    async def chainforge_error(request: Request, exc: ChainforgeError):
        return JSONResponse(
            status_code=400,
            content=schemas.ErrorResponse(
                error=type(exc).__name__, detail=str(exc)
            ).model_dump(),
        )

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=404,
            content=schemas.ErrorResponse(
                error="FileNotFoundError", detail=str(exc)
            ).model_dump(),
        )

    @app.exception_handler(ValueError)
    async def bad_value(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content=schemas.ErrorResponse(
                error=type(exc).__name__, detail=str(exc)
            ).model_dump(),
        )

    @app.get("/healthz", response_model=schemas.HealthResponse)
    async def healthz():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/ingest-db", response_model=schemas.IngestDbResponse)
    async def ingest_db(request: schemas.IngestDbRequest):
        manifest = pipeline.run_ingest_db(
            request.input,
            request.db,
            include_extra_gated=request.include_extra_gated,
            threads=request.threads,
        )
        return schemas.IngestDbResponse(manifest=manifest)

    @app.post("/build-sc", response_model=schemas.BuildScResponse)
    async def build_sc(request: schemas.BuildScRequest):
        stats = pipeline.run_build_sc(
            request.db,
            request.seeds,
            request.out,
            on_missing_seed=request.on_missing_seed,
            stable=request.stable,
        )
        return schemas.BuildScResponse(stats=stats, out=request.out)

    @app.post("/clusters", response_model=schemas.ClustersResponse)
    async def clusters(request: schemas.ClustersRequest):
        report = pipeline.run_clusters(
            request.graph,
            request.out,
            rng_seed=request.rng_seed,
            resolution=request.resolution,
            max_passes=request.max_passes,
            dot_dir=request.dot_dir,
        )
        return schemas.ClustersResponse(report=report)

    @app.post("/disengagement", response_model=schemas.DisengagementResponse)
    async def disengagement(request: schemas.DisengagementRequest):
        report = pipeline.run_disengagement(
            request.graph,
            request.db,
            request.out,
            include_prereleases=request.include_prereleases,
        )
        return schemas.DisengagementResponse(report=report)

    @app.post("/report", response_model=schemas.ReportResponse)
    async def report(request: schemas.ReportRequest):
        summary = pipeline.run_report(
            request.graph,
            request.clusters,
            request.disengagement,
            request.out,
            downloads_path=request.downloads,
            fmt=request.format,
            stable=request.stable,
        )
        return schemas.ReportResponse(summary=summary, out=request.out)

    @app.post("/export", response_model=schemas.ExportResponse)
    async def export(request: schemas.ExportRequest):
        info = pipeline.run_export(request.graph, request.out, request.format)
        return schemas.ExportResponse(**info)

    return app
