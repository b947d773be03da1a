"""Request/response models for the HTTP API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from ..config import DatasetSource, ExperimentConfig, TransformsSpec


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HealthResponse(StrictModel):
    status: str
    version: str


class RunRequest(StrictModel):
    config: ExperimentConfig
    workers: int = Field(default=1, ge=1)
    write_artifacts: bool = True


class RunResponse(StrictModel):
    name: str
    method: str
    dataset: str
    mean: float
    std: float
    median: float
    n_seeds: int
    config_hash: str
    summary: dict
    summary_path: str | None = None
    trace_paths: list[str] = Field(default_factory=list)


class AblateRequest(StrictModel):
    config: ExperimentConfig
    axis: Literal["gamma", "psi", "client_ratio"]
    values: list[float] = Field(min_length=1)
    workers: int = Field(default=1, ge=1)
    write_artifacts: bool = True


class AblationRow(StrictModel):
    axis: str
    value: float
    mean: float
    std: float
    median: float
    n_seeds: int


class AblateResponse(StrictModel):
    axis: str
    rows: list[AblationRow]
    table_csv: str
    table_path: str | None = None


class PrepareRequest(StrictModel):
    name: str
    source: DatasetSource
    transforms: TransformsSpec = Field(default_factory=TransformsSpec)
    output_dir: str
    seed: int = 0


class PrepareResponse(StrictModel):
    cache_dir: str
    manifest: dict


class ReportRequest(StrictModel):
    paths: list[str] = Field(min_length=1)


class ReportResponse(StrictModel):
    table: str
    summaries: list[dict]
