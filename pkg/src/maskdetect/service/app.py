"""FastAPI service wrapping the engine.

Endpoints mirror the workflow: /train, /eval, /detect, /bench take
filesystem paths and run synchronously; /classify serves live per-frame
classification against a model + cascade pair loaded into app state
(configure via create_app() arguments, the MASKDETECT_MODEL /
MASKDETECT_CASCADE environment variables, or POST /models/load).

Run standalone with: uvicorn maskdetect.service.app:app
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request

from .. import __version__
from ..augment import AugmentConfig
from ..bench import run_benchmark
from ..dataio import decode_image_bytes, load_dataset, load_model, materialize, natural_key, \
    save_model, write_image
from ..errors import MaskDetectError
from ..haar import parse_cascade_xml
from ..metrics import evaluate_conditions, evaluate_samples, render_condition_table, \
    render_report
from ..network import build_mask_net
from ..pipeline import DetectorParams, FrameError, FrameResult, format_detections, \
    process_frame, process_paths, summarize_latency
from ..training import TrainConfig, format_history, train
from .schemas import (
    BenchRequest,
    BenchResponse,
    BoxRow,
    ClassifyResponse,
    DetectRequest,
    DetectResponse,
    EpochRow,
    EvalRequest,
    EvalResponse,
    FrameFailure,
    HealthResponse,
    LatencyStats,
    LoadModelsRequest,
    TrainRequest,
    TrainResponse,
)

IMAGE_SUFFIXES = (".ppm", ".png", ".jpg", ".jpeg")


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def _load_cascade(path: str):
    try:
        return parse_cascade_xml(Path(path).read_text())
    except (OSError, MaskDetectError) as exc:
        raise _bad_request(exc) from exc


def _load_net(path: str):
    try:
        return load_model(path)
    except (OSError, MaskDetectError) as exc:
        raise _bad_request(exc) from exc


def _frame_paths(input_path: Path) -> list[Path]:
    if input_path.is_dir():
        return sorted(
            (p for p in input_path.iterdir()
             if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
            key=lambda p: natural_key(p.name),
        )
    return [input_path]


def _box_rows(results) -> list[BoxRow]:
    rows = []
    for r in results:
        if isinstance(r, FrameError):
            continue
        for d in r.detections:
            rows.append(BoxRow(
                frame_id=r.frame_id, x=d.x, y=d.y, w=d.w, h=d.h,
                label=d.label.dir_name if d.label is not None else None,
                confidence=d.confidence,
            ))
    return rows


def create_app(model_path: str | None = None, cascade_path: str | None = None) -> FastAPI:
    app = FastAPI(title="maskdetect", version=__version__)
    app.state.net = None
    app.state.cascade = None

    model_path = model_path or os.environ.get("MASKDETECT_MODEL")
    cascade_path = cascade_path or os.environ.get("MASKDETECT_CASCADE")
    if model_path:
        app.state.net = load_model(model_path)
    if cascade_path:
        app.state.cascade = parse_cascade_xml(Path(cascade_path).read_text())

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok",
            version=__version__,
            model_loaded=app.state.net is not None and app.state.cascade is not None,
        )

    @app.post("/models/load", response_model=HealthResponse)
    def load_models(req: LoadModelsRequest) -> HealthResponse:
        app.state.net = _load_net(req.model_path)
        app.state.cascade = _load_cascade(req.cascade_path)
        return health()

    @app.post("/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest) -> TrainResponse:
        try:
            dataset = load_dataset(req.data_dir)
            samples = materialize(dataset)
            cfg = TrainConfig(
                epochs=req.epochs, batch_size=req.batch_size,
                learning_rate=req.learning_rate, seed=req.seed,
            )
            augment = AugmentConfig(
                shear_max=req.shear, zoom_range=(req.zoom_lo, req.zoom_hi),
                flip_probability=req.flip_p, seed=req.seed,
            )
            net = build_mask_net(req.seed)
            history = train(net, samples, cfg, augment)
            metadata = {
                "seed": req.seed,
                "epochs": req.epochs,
                "batch_size": req.batch_size,
                "learning_rate": req.learning_rate,
                "augment": {
                    "shear_max": req.shear,
                    "zoom_range": [req.zoom_lo, req.zoom_hi],
                    "flip_probability": req.flip_p,
                },
            }
            out = Path(req.out_path)
            if out.parent and not out.parent.exists():
                out.parent.mkdir(parents=True)
            save_model(net, out, metadata)
            history_path = out.with_name(out.name + ".history")
            history_path.write_text(format_history(history))
        except (MaskDetectError, ValueError, OSError) as exc:
            raise _bad_request(exc) from exc
        return TrainResponse(
            checkpoint=str(out),
            history_path=str(history_path),
            total_params=net.param_count(),
            class_counts={m.dir_name: c for m, c in dataset.class_counts.items()},
            history=[EpochRow(epoch=e.epoch, loss=e.loss, train_acc=e.train_accuracy)
                     for e in history.epochs],
        )

    @app.post("/eval", response_model=EvalResponse)
    def eval_endpoint(req: EvalRequest) -> EvalResponse:
        files = []
        try:
            net = _load_net(req.model_path)
            if req.conditions:
                if not req.cascade_path:
                    raise ValueError("condition evaluation requires cascade_path")
                cascade = _load_cascade(req.cascade_path)
                params = DetectorParams(req.scale_factor, req.min_neighbors,
                                        req.min_size, req.margin)
                stats = evaluate_conditions(net, cascade, req.data_dir, params)
                report_text = render_condition_table(stats)
                details = {
                    s.condition: {
                        "faces": s.faces,
                        "per_face_accuracy": s.per_face_accuracy,
                        "frames": s.frames,
                        "per_image_accuracy": s.per_image_accuracy,
                    }
                    for s in stats
                }
                accuracy = None
            else:
                dataset = load_dataset(req.data_dir)
                _, report = evaluate_samples(net, materialize(dataset))
                report_text = render_report(report)
                details = report.to_dict()
                accuracy = report.accuracy
            if req.report_path:
                Path(req.report_path).write_text(report_text)
                files.append(req.report_path)
            if req.json_path:
                Path(req.json_path).write_text(json.dumps(details, indent=2, sort_keys=True))
                files.append(req.json_path)
        except HTTPException:
            raise
        except (MaskDetectError, ValueError, OSError) as exc:
            raise _bad_request(exc) from exc
        return EvalResponse(report=report_text, accuracy=accuracy, details=details,
                            files_written=files)

    @app.post("/detect", response_model=DetectResponse)
    def detect_endpoint(req: DetectRequest) -> DetectResponse:
        try:
            net = _load_net(req.model_path)
            cascade = _load_cascade(req.cascade_path)
            input_path = Path(req.input_path)
            if not input_path.exists():
                raise ValueError(f"input path {input_path} does not exist")
            params = DetectorParams(req.scale_factor, req.min_neighbors,
                                    req.min_size, req.margin)
            paths = _frame_paths(input_path)
            results, summary = process_paths(paths, cascade, net, params, threads=req.threads)
            files = []
            if req.out_dir:
                out_dir = Path(req.out_dir)
                out_dir.mkdir(parents=True, exist_ok=True)
                det_path = out_dir / "detections.csv"
                det_path.write_text(format_detections(results))
                files.append(str(det_path))
                for r in results:
                    if isinstance(r, FrameResult):
                        out_img = out_dir / f"{r.frame_id}.annotated.png"
                        write_image(out_img, r.annotated)
                        files.append(str(out_img))
        except HTTPException:
            raise
        except (MaskDetectError, ValueError, OSError) as exc:
            raise _bad_request(exc) from exc
        return DetectResponse(
            detections=_box_rows(results),
            errors=[FrameFailure(frame_id=r.frame_id, message=r.message)
                    for r in results if isinstance(r, FrameError)],
            latency=LatencyStats(**summary.__dict__),
            files_written=files,
        )

    @app.post("/bench", response_model=BenchResponse)
    def bench_endpoint(req: BenchRequest) -> BenchResponse:
        net = _load_net(req.model_path)
        result = run_benchmark(net, iters=req.iters, warmup=req.warmup,
                               dtype=req.dtype, engine=req.engine,
                               threads=req.threads or 1)
        return BenchResponse(
            median_ms=result.median_ms, p95_ms=result.p95_ms, mean_ms=result.mean_ms,
            iters=result.iters, warmup=result.warmup, dtype=result.dtype,
            engine=result.engine, threads=req.threads or 1,
        )

    @app.post("/classify", response_model=ClassifyResponse)
    async def classify_endpoint(request: Request) -> ClassifyResponse:
        if app.state.net is None or app.state.cascade is None:
            raise HTTPException(status_code=409, detail="no model loaded; POST /models/load first")
        data = await request.body()
        if not data:
            raise HTTPException(status_code=400, detail="empty request body")
        try:
            frame = decode_image_bytes(data, "<upload>")
            result = process_frame(frame, app.state.cascade, app.state.net)
        except (MaskDetectError, ValueError) as exc:
            raise _bad_request(exc) from exc
        summary = summarize_latency([result])
        return ClassifyResponse(detections=_box_rows([result]),
                                latency=LatencyStats(**summary.__dict__))

    return app


app = create_app()
