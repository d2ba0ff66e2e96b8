"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

JobKind = Literal["preprocess", "fit"]
JobState = Literal["queued", "running", "succeeded", "failed"]


class ValidationSummary(BaseModel):
    rows_read: int
    accepted: int
    rejected: int
    reject_reasons: dict[str, int] = Field(default_factory=dict)


class DatasetInfo(BaseModel):
    id: str
    digest: str
    files: list[str]
    validation: ValidationSummary
    preprocessed: bool = False
    dedup_note: str | None = None


class PreprocessRequest(BaseModel):
    seed: int = 0


class SamplerSettings(BaseModel):
    chains: int = 4
    warmup_iters: int = 1000
    sampling_iters: int = 2500
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    init_radius: float = 2.0


class FitRequest(BaseModel):
    dataset_id: str
    spec: dict
    sampler: SamplerSettings = Field(default_factory=SamplerSettings)
    groupings: list[str] | None = None
    ppc_replicates: int = 10


class JobProgress(BaseModel):
    stage: str | None = None
    chain: int | None = None
    iteration: int | None = None
    total: int | None = None


class JobInfo(BaseModel):
    id: str
    kind: JobKind
    state: JobState
    progress: JobProgress = Field(default_factory=JobProgress)
    error: str | None = None
    dataset_id: str | None = None
    fit_id: str | None = None
    created: str
    updated: str


class ErrorDetail(BaseModel):
    field: str | None = None
    msg: str
