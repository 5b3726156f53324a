"""Worker pool with deterministic result order, and seeded random streams."""

from __future__ import annotations

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from typing import TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "ENTROFACT_THREADS"


def resolve_threads(threads: int | None) -> int:
    """Explicit value, else $ENTROFACT_THREADS, else 1."""
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, env)
    return 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1, processes: bool = False) -> list[R]:
    """Map ``fn`` over ``items`` and return results in input order.

    Reductions over the returned list therefore run in a fixed order
    regardless of the worker count.
    """
    work = list(items)
    if threads <= 1 or len(work) <= 1:
        return [fn(item) for item in work]
    executor_cls = ProcessPoolExecutor if processes else ThreadPoolExecutor
    with executor_cls(max_workers=min(threads, len(work))) as pool:
        return list(pool.map(fn, work))


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and an optional stream path."""
    sequence = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(sequence))


def spawn_rngs(seed: int, count: int, *stream: int) -> list[np.random.Generator]:
    """``count`` independent generators, one per replica or start."""
    return [make_rng(seed, *stream, i) for i in range(count)]
