"""Rectangular sampling grids over chart coordinates."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class Grid:
    """Tensor-product grid; points are flattened in C order over ``axes``."""

    axes: tuple
    threads: int = 1

    def __post_init__(self):
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names {names}")
        for a in self.axes:
            if a.n < 1:
                raise ValueError(f"axis {a.name} needs at least one point")

    @classmethod
    def uniform(cls, ranges: Mapping[str, Sequence[float]], n, threads: int = 1) -> "Grid":
        if isinstance(n, int):
            n = {name: n for name in ranges}
        return cls(tuple(Axis(name, float(lo), float(hi), int(n[name])) for name, (lo, hi) in ranges.items()),
                   threads=threads)

    @property
    def names(self) -> tuple:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple:
        return tuple(a.n for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> dict:
        mesh = np.meshgrid(*[a.values() for a in self.axes], indexing="ij")
        return {a.name: m.ravel() for a, m in zip(self.axes, mesh)}

    def spec(self) -> dict:
        return {a.name: {"lo": a.lo, "hi": a.hi, "n": a.n} for a in self.axes}


def subset(points: Mapping[str, np.ndarray], mask: np.ndarray) -> dict:
    return {k: v[mask] for k, v in points.items()}


_THREADS = [1]


class parallel:
    """Context manager bounding the worker threads used by :func:`chunked_map`."""

    def __init__(self, threads: int):
        self.threads = max(1, int(threads))

    def __enter__(self):
        self._saved = _THREADS[0]
        _THREADS[0] = self.threads
        return self

    def __exit__(self, *exc):
        _THREADS[0] = self._saved


def chunked_map(fn, bindings: Mapping, threads: int = None, min_chunk: int = 4096):
    """Apply ``fn`` to chunks of the point arrays in ``bindings``.

    One-dimensional arrays of the common length are split; scalars and
    other values are passed to every chunk unchanged. Results are
    concatenated along their last axis. numpy releases the GIL inside
    ufuncs, so threads give real speedups on large grids.
    """
    threads = _THREADS[0] if threads is None else threads
    sizes = {len(v) for v in bindings.values() if isinstance(v, np.ndarray) and v.ndim == 1}
    if threads <= 1 or len(sizes) != 1:
        return fn(bindings)
    size = sizes.pop()
    if size <= min_chunk:
        return fn(bindings)
    bounds = np.linspace(0, size, threads + 1).astype(int)
    chunks = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > lo:
            chunks.append({k: (v[lo:hi] if isinstance(v, np.ndarray) and v.ndim == 1 and len(v) == size else v)
                           for k, v in bindings.items()})
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(fn, chunks))
    return np.concatenate(parts, axis=-1)
