"""Single-face classification latency protocol.

Measures steady-state single-image forward passes (the per-face cost in
the live pipeline) after a warmup phase. The optimized configuration is
the im2col engine in float32; the reference configuration is the direct
engine in float64.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .network import Network
from .tensor import FAST_FLOAT, FLOAT


@dataclass
class BenchResult:
    iters: int
    warmup: int
    dtype: str
    engine: str
    median_ms: float
    p95_ms: float
    mean_ms: float


def _timed_forwards(runner: Network, x: np.ndarray, iters: int, warmup: int) -> np.ndarray:
    for _ in range(warmup):
        runner.forward(x)
    times = np.empty(iters)
    for i in range(iters):
        t0 = time.perf_counter()
        runner.forward(x)
        times[i] = (time.perf_counter() - t0) * 1e3
    return times


def run_benchmark(
    net: Network,
    iters: int = 1000,
    warmup: int = 100,
    dtype: str = "float32",
    engine: str = "im2col",
    threads: int = 1,
    seed: int = 0,
) -> BenchResult:
    """With threads > 1, workers share the frozen network and latencies are pooled."""
    if iters < 1 or warmup < 0:
        raise ValueError("iters must be >= 1 and warmup >= 0")
    np_dtype = {"float32": FAST_FLOAT, "float64": FLOAT}[dtype]
    runner = net if net.dtype == np_dtype else net.astype(np_dtype)
    runner.engine = engine
    shape = runner.input_shape or (150, 150, 3)
    x = np.random.default_rng(seed).random((1, *shape), dtype=np.float64).astype(np_dtype)

    if threads <= 1:
        times = _timed_forwards(runner, x, iters, warmup)
    else:
        from concurrent.futures import ThreadPoolExecutor

        per = [iters // threads + (1 if i < iters % threads else 0) for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(
                lambda n: _timed_forwards(runner, x, n, warmup), [n for n in per if n]
            ))
        times = np.concatenate(chunks)
    return BenchResult(
        iters=iters,
        warmup=warmup,
        dtype=dtype,
        engine=engine,
        median_ms=float(np.median(times)),
        p95_ms=float(np.percentile(times, 95)),
        mean_ms=float(times.mean()),
    )


def format_result(result: BenchResult) -> str:
    return (
        f"per-face classification latency ({result.engine}, {result.dtype}, "
        f"{result.iters} iters after {result.warmup} warmup):\n"
        f"  median {result.median_ms:.3f} ms\n"
        f"  p95    {result.p95_ms:.3f} ms\n"
        f"  mean   {result.mean_ms:.3f} ms\n"
    )
