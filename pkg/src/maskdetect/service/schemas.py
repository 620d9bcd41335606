"""Request/response models for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str
    model_loaded: bool


class TrainRequest(BaseModel):
    data_dir: str
    out_path: str
    epochs: int = Field(default=10, ge=0)
    batch_size: int = Field(default=16, ge=1)
    learning_rate: float = Field(default=0.001, ge=0)
    seed: int = 42
    shear: float = Field(default=0.2, ge=0)
    zoom_lo: float = Field(default=0.8, gt=0)
    zoom_hi: float = Field(default=1.2, gt=0)
    flip_p: float = Field(default=0.5, ge=0, le=1)


class EpochRow(BaseModel):
    epoch: int
    loss: float
    train_acc: float


class TrainResponse(BaseModel):
    checkpoint: str
    history_path: str
    total_params: int
    class_counts: dict[str, int]
    history: list[EpochRow]


class EvalRequest(BaseModel):
    data_dir: str
    model_path: str
    report_path: str | None = None
    json_path: str | None = None
    conditions: bool = False
    cascade_path: str | None = None
    scale_factor: float = Field(default=1.1, gt=1)
    min_neighbors: int = Field(default=3, ge=0)
    min_size: int = Field(default=30, ge=1)
    margin: int = Field(default=0, ge=0)


class EvalResponse(BaseModel):
    report: str
    accuracy: float | None = None
    details: dict
    files_written: list[str]


class BoxRow(BaseModel):
    frame_id: str
    x: int
    y: int
    w: int
    h: int
    label: str | None = None
    confidence: float | None = None


class FrameFailure(BaseModel):
    frame_id: str
    message: str


class LatencyStats(BaseModel):
    frames: int
    faces: int
    median_total_ms: float | None = None
    p95_total_ms: float | None = None
    median_classify_ms: float | None = None
    p95_classify_ms: float | None = None


class DetectRequest(BaseModel):
    input_path: str
    model_path: str
    cascade_path: str
    out_dir: str | None = None
    scale_factor: float = Field(default=1.1, gt=1)
    min_neighbors: int = Field(default=3, ge=0)
    min_size: int = Field(default=30, ge=1)
    margin: int = Field(default=0, ge=0)
    threads: int | None = Field(default=None, ge=1)


class DetectResponse(BaseModel):
    detections: list[BoxRow]
    errors: list[FrameFailure]
    latency: LatencyStats
    files_written: list[str]


class BenchRequest(BaseModel):
    model_path: str
    iters: int = Field(default=1000, ge=1)
    warmup: int = Field(default=100, ge=0)
    threads: int | None = Field(default=None, ge=1)
    dtype: str = Field(default="float32", pattern="^(float32|float64)$")
    engine: str = Field(default="im2col", pattern="^(im2col|direct)$")


class BenchResponse(BaseModel):
    median_ms: float
    p95_ms: float
    mean_ms: float
    iters: int
    warmup: int
    dtype: str
    engine: str
    threads: int


class LoadModelsRequest(BaseModel):
    model_path: str
    cascade_path: str


class ClassifyResponse(BaseModel):
    detections: list[BoxRow]
    latency: LatencyStats
