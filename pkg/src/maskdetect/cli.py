"""Command-line client for the service API.

Every subcommand builds a request, sends it to the HTTP API, and
formats the response. By default the app runs in-process (no server
needed); pass --server URL to talk to a remote instance instead. Exit
codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import asyncio
import sys

import httpx


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class ServiceError(RuntimeError):
    pass


def _format_detail(detail) -> str:
    if isinstance(detail, list):  # pydantic validation errors
        return "; ".join(
            f"{'.'.join(str(p) for p in e.get('loc', []))}: {e.get('msg', '')}" for e in detail
        )
    return str(detail)


def call_service(server: str | None, path: str, payload: dict) -> dict:
    if server:
        resp = httpx.post(server.rstrip("/") + path, json=payload, timeout=None)
    else:
        from .service.app import create_app

        async def go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://maskdetect.local", timeout=None
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(go())
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise ServiceError(_format_detail(detail))
    return resp.json()


def build_parser() -> _Parser:
    parser = _Parser(prog="maskdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: run in-process)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a classifier on a three-category dataset")
    p.add_argument("--data", required=True, help="dataset root directory")
    p.add_argument("--out", required=True, help="checkpoint output path (.mfd)")
    p.add_argument("--epochs", type=int, default=10, help="training epochs (default 10)")
    p.add_argument("--batch", type=int, default=16, help="batch size (default 16)")
    p.add_argument("--lr", type=float, default=0.001, help="learning rate (default 0.001)")
    p.add_argument("--seed", type=int, default=42, help="seed for all randomness (default 42)")
    p.add_argument("--shear", type=float, default=0.2, help="max shear angle, radians (default 0.2)")
    p.add_argument("--zoom-lo", type=float, default=0.8, help="zoom range lower bound (default 0.8)")
    p.add_argument("--zoom-hi", type=float, default=1.2, help="zoom range upper bound (default 1.2)")
    p.add_argument("--flip-p", type=float, default=0.5, help="horizontal flip probability (default 0.5)")

    p = sub.add_parser("eval", help="evaluate a checkpoint and print the class report")
    p.add_argument("--data", required=True, help="dataset root (or condition root with --conditions)")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--report", default=None, help="also write the text report here")
    p.add_argument("--json", default=None, help="also write machine-readable results here")
    p.add_argument("--conditions", action="store_true",
                   help="treat --data as per-condition annotated frame directories")
    p.add_argument("--cascade", default=None, help="cascade XML (required with --conditions)")

    p = sub.add_parser("detect", help="detect and classify faces in images")
    p.add_argument("--input", required=True, help="image file or directory of frames")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--cascade", required=True, help="cascade XML path")
    p.add_argument("--out", default=None,
                   help="output directory for annotated frames + detections.csv "
                        "(default: print detections only)")
    p.add_argument("--scale-factor", type=float, default=1.1, help="scan scale step (default 1.1)")
    p.add_argument("--min-neighbors", type=int, default=3, help="grouping threshold (default 3)")
    p.add_argument("--min-size", type=int, default=30, help="minimum face size, px (default 30)")
    p.add_argument("--margin", type=int, default=0, help="crop margin around boxes, px (default 0)")
    p.add_argument("--threads", type=int, default=None, help="frame worker threads (default: cores)")

    p = sub.add_parser("bench", help="measure per-face classification latency")
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--iters", type=int, default=1000, help="measured iterations (default 1000)")
    p.add_argument("--warmup", type=int, default=100, help="warmup iterations (default 100)")
    p.add_argument("--threads", type=int, default=None, help="concurrent workers (default 1)")
    p.add_argument("--dtype", choices=("float32", "float64"), default="float32",
                   help="inference precision (default float32)")
    p.add_argument("--engine", choices=("im2col", "direct"), default="im2col",
                   help="convolution path (default im2col)")
    return parser


def _cmd_train(args) -> int:
    body = call_service(args.server, "/train", {
        "data_dir": args.data, "out_path": args.out, "epochs": args.epochs,
        "batch_size": args.batch, "learning_rate": args.lr, "seed": args.seed,
        "shear": args.shear, "zoom_lo": args.zoom_lo, "zoom_hi": args.zoom_hi,
        "flip_p": args.flip_p,
    })
    counts = body["class_counts"]
    print("training images:", ", ".join(f"{k}={v}" for k, v in counts.items()))
    for row in body["history"]:
        print(f"{row['epoch']},{row['loss']:.6f},{row['train_acc']:.6f}")
    print(f"checkpoint written: {body['checkpoint']} ({body['total_params']} parameters)")
    print(f"history written: {body['history_path']}")
    return 0


def _cmd_eval(args) -> int:
    body = call_service(args.server, "/eval", {
        "data_dir": args.data, "model_path": args.model,
        "report_path": args.report, "json_path": args.json,
        "conditions": args.conditions, "cascade_path": args.cascade,
    })
    print(body["report"], end="")
    for path in body["files_written"]:
        print(f"wrote {path}")
    return 0


def _cmd_detect(args) -> int:
    body = call_service(args.server, "/detect", {
        "input_path": args.input, "model_path": args.model, "cascade_path": args.cascade,
        "out_dir": args.out, "scale_factor": args.scale_factor,
        "min_neighbors": args.min_neighbors, "min_size": args.min_size,
        "margin": args.margin, "threads": args.threads,
    })
    for d in body["detections"]:
        label = d["label"] or ""
        conf = f"{d['confidence']:.6f}" if d["confidence"] is not None else ""
        print(f"{d['frame_id']},{d['x']},{d['y']},{d['w']},{d['h']},{label},{conf}")
    for err in body["errors"]:
        print(f"error: {err['frame_id']}: {err['message']}", file=sys.stderr)
    lat = body["latency"]
    if lat["median_total_ms"] is not None:
        print(f"frames: {lat['frames']}, faces: {lat['faces']}, "
              f"median frame {lat['median_total_ms']:.2f} ms, "
              f"p95 frame {lat['p95_total_ms']:.2f} ms", file=sys.stderr)
    for path in body["files_written"]:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    body = call_service(args.server, "/bench", {
        "model_path": args.model, "iters": args.iters, "warmup": args.warmup,
        "threads": args.threads, "dtype": args.dtype, "engine": args.engine,
    })
    print(f"median {body['median_ms']:.3f} ms")
    print(f"p95 {body['p95_ms']:.3f} ms")
    print(f"({body['engine']}, {body['dtype']}, {body['iters']} iters, "
          f"{body['threads']} thread(s))")
    return 0


_COMMANDS = {"train": _cmd_train, "eval": _cmd_eval, "detect": _cmd_detect, "bench": _cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ServiceError as exc:
        print(f"maskdetect {args.command}: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"maskdetect {args.command}: cannot reach service: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
