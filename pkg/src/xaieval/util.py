"""Small shared helpers: deterministic reductions and bounded parallel maps."""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def sorted_mean(values: Sequence[float], keys: Sequence[str]) -> float:
    """Mean accumulated in ascending key order (stable for equal keys).

    Fixing the fold order makes the floating-point result identical across
    runs, platforms, and worker counts.
    """
    if len(values) != len(keys):
        raise ValueError("values and keys must align")
    ordered = [v for _, v in sorted(zip(keys, values), key=lambda kv: kv[0])]
    total = 0.0
    for v in ordered:
        total += v
    return total / len(ordered)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> list[R]:
    """Map fn over items with up to `jobs` workers, preserving input order.

    Results are position-stable regardless of worker count, so downstream
    sorted reductions see the same sequence for any --jobs value.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def config_digest(config: dict) -> str:
    """Stable 12-hex-char digest of a canonicalized configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def format_float(value: float, places: int = 4) -> str:
    """Fixed-point rendering used by report tables; never scientific notation."""
    if not math.isfinite(value):
        return "nan"
    return f"{value:.{places}f}"
