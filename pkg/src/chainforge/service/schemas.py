"""Request/response models for the pipeline service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class IngestDbRequest(BaseModel):
    input: str = Field(description="Path to the registry metadata JSONL dump")
    db: str = Field(description="Path to write the dependency database")
    include_extra_gated: bool = True
    threads: int = Field(default=1, ge=1)


class IngestDbResponse(BaseModel):
    manifest: dict


class BuildScRequest(BaseModel):
    db: str
    seeds: list[str] = Field(min_length=1)
    out: str = Field(description="Path to write the graph JSON")
    on_missing_seed: str = Field(default="error", pattern="^(error|skip)$")
    stable: bool = False


class BuildScResponse(BaseModel):
    stats: dict
    out: str


class ClustersRequest(BaseModel):
    graph: str = Field(description="Path to a graph JSON artifact")
    out: str
    rng_seed: int = 0
    resolution: float = Field(default=1.0, gt=0)
    max_passes: int = Field(default=10, ge=1)
    dot_dir: str | None = None


class ClustersResponse(BaseModel):
    report: dict


class DisengagementRequest(BaseModel):
    graph: str
    db: str
    out: str
    include_prereleases: bool = True


class DisengagementResponse(BaseModel):
    report: dict


class ReportRequest(BaseModel):
    graph: str
    clusters: str
    disengagement: str
    out: str
    downloads: str | None = None
    format: str = Field(default="json", pattern="^(json|markdown)$")
    stable: bool = False


class ReportResponse(BaseModel):
    summary: dict
    out: str


class ExportRequest(BaseModel):
    graph: str
    out: str
    format: str


class ExportResponse(BaseModel):
    format: str
    out: str
    bytes: int


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorResponse(BaseModel):
    error: str
    detail: str
