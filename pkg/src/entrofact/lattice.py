"""Finite regions of Z^d and the geometric constructions built on them."""

from __future__ import annotations

import itertools
import logging
import math
from collections import deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DistanceUndefinedError, PreconditionError

logger = logging.getLogger(__name__)

Point = tuple[int, ...]

# Real-valued rectangle sides are compared against integer extents.
_CONTAINMENT_TOL = 1e-9


@dataclass(frozen=True)
class Region:
    """Finite vertex set in Z^d with canonical (lexicographic) point order.

    The canonical order is the vertex order used by every configuration
    index in the package: vertex ``points[0]`` is the least significant digit.
    """

    dim: int
    points: tuple[Point, ...] = ()

    def __post_init__(self) -> None:
        if self.dim < 1:
            msg = f"Region dimension must be positive, got {self.dim}"
            raise ValueError(msg)
        canonical = tuple(sorted({tuple(int(c) for c in p) for p in self.points}))
        for p in canonical:
            if len(p) != self.dim:
                msg = f"Point {p} does not have {self.dim} coordinates"
                raise ValueError(msg)
        object.__setattr__(self, "points", canonical)

    # --- constructors -------------------------------------------------

    @classmethod
    def empty(cls, dim: int) -> Region:
        return cls(dim, ())

    @classmethod
    def chain(cls, n: int, start: int = 0) -> Region:
        """The 1D interval {start, ..., start + n - 1}."""
        return cls(1, tuple((start + i,) for i in range(n)))

    @classmethod
    def rectangle(cls, shape: Iterable[int], origin: Iterable[int] | None = None) -> Region:
        """Integer box with ``shape[j]`` points along coordinate j."""
        shape = tuple(int(s) for s in shape)
        origin = tuple(int(o) for o in origin) if origin is not None else (0,) * len(shape)
        if len(origin) != len(shape):
            msg = f"Origin {origin} does not match shape {shape}"
            raise ValueError(msg)
        ranges = [range(o, o + s) for o, s in zip(origin, shape, strict=True)]
        return cls(len(shape), tuple(itertools.product(*ranges)))

    @classmethod
    def from_json(cls, data: list[list[int]], dim: int | None = None) -> Region:
        if dim is None:
            if not data:
                msg = "Dimension is required to decode an empty region"
                raise ValueError(msg)
            dim = len(data[0])
        return cls(dim, tuple(tuple(p) for p in data))

    def to_json(self) -> list[list[int]]:
        return [list(p) for p in self.points]

    # --- container protocol ------------------------------------------

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    def __contains__(self, point: object) -> bool:
        return point in self.point_set

    def __bool__(self) -> bool:
        return bool(self.points)

    def __str__(self) -> str:
        if len(self.points) <= 6:
            return "{" + ", ".join(str(p if self.dim > 1 else p[0]) for p in self.points) + "}"
        return f"Region(dim={self.dim}, |V|={len(self.points)})"

    @cached_property
    def point_set(self) -> frozenset[Point]:
        return frozenset(self.points)

    @cached_property
    def index_map(self) -> dict[Point, int]:
        return {p: i for i, p in enumerate(self.points)}

    @cached_property
    def array(self) -> np.ndarray:
        """Points as an (n, d) integer array."""
        return np.array(self.points, dtype=np.int64).reshape(len(self.points), self.dim)

    # --- set algebra --------------------------------------------------

    def _check_dim(self, other: Region) -> None:
        if other.dim != self.dim:
            msg = f"Dimension mismatch: {self.dim} vs {other.dim}"
            raise ValueError(msg)

    def __or__(self, other: Region) -> Region:
        self._check_dim(other)
        return Region(self.dim, self.points + other.points)

    def __and__(self, other: Region) -> Region:
        self._check_dim(other)
        return Region(self.dim, tuple(p for p in self.points if p in other.point_set))

    def __sub__(self, other: Region) -> Region:
        self._check_dim(other)
        return Region(self.dim, tuple(p for p in self.points if p not in other.point_set))

    def __le__(self, other: Region) -> bool:
        self._check_dim(other)
        return self.point_set <= other.point_set

    def issubset(self, other: Region) -> bool:
        return self <= other

    def isdisjoint(self, other: Region) -> bool:
        return self.point_set.isdisjoint(other.point_set)

    def filter(self, predicate: Any) -> Region:
        return Region(self.dim, tuple(p for p in self.points if predicate(p)))

    def indices_in(self, parent: Region) -> np.ndarray:
        """Positions of this region's points inside ``parent``'s canonical order."""
        try:
            return np.array([parent.index_map[p] for p in self.points], dtype=np.int64)
        except KeyError as exc:
            msg = f"Point {exc.args[0]} is not in the parent region"
            raise PreconditionError(msg) from exc

    # --- geometry -----------------------------------------------------

    def translate(self, offset: Iterable[int]) -> Region:
        offset = tuple(offset)
        return Region(self.dim, tuple(tuple(c + o for c, o in zip(p, offset, strict=True)) for p in self.points))

    def permute(self, perm: Iterable[int]) -> Region:
        """Reorder coordinates: new coordinate j is old coordinate ``perm[j]``."""
        perm = tuple(perm)
        return Region(self.dim, tuple(tuple(p[j] for j in perm) for p in self.points))

    def bounding_box(self) -> tuple[Point, Point]:
        if not self.points:
            msg = "Empty region has no bounding box"
            raise ValueError(msg)
        arr = self.array
        return tuple(int(v) for v in arr.min(axis=0)), tuple(int(v) for v in arr.max(axis=0))

    def extents(self) -> Point:
        """Bounding-box side lengths max - min per coordinate."""
        lo, hi = self.bounding_box()
        return tuple(h - low for low, h in zip(lo, hi, strict=True))


def neighbors(point: Point) -> Iterator[Point]:
    """Nearest neighbors of ``point`` in Z^d."""
    for j in range(len(point)):
        for step in (-1, 1):
            yield point[:j] + (point[j] + step,) + point[j + 1 :]


def boundary(region: Region) -> Region:
    """Exterior boundary: lattice points at graph distance 1 from the region."""
    outside = {y for x in region for y in neighbors(x) if y not in region.point_set}
    return Region(region.dim, tuple(outside))


def interior_edges(region: Region) -> np.ndarray:
    """Nearest-neighbor pairs (i, j), i < j, as an (m, 2) array of canonical indices."""
    index = region.index_map
    pairs = [(i, index[y]) for i, x in enumerate(region.points) for y in neighbors(x) if index.get(y, -1) > i]
    return np.array(pairs, dtype=np.int64).reshape(len(pairs), 2)


def boundary_edges(region: Region) -> list[tuple[int, Point]]:
    """Pairs (i, y) with y outside the region adjacent to the i-th vertex."""
    return [(i, y) for i, x in enumerate(region.points) for y in neighbors(x) if y not in region.point_set]


def is_even(point: Point) -> bool:
    return sum(point) % 2 == 0


def even_odd_split(region: Region) -> tuple[Region, Region]:
    """Split by coordinate-sum parity; no edge joins two sites of the same class."""
    return region.filter(is_even), region.filter(lambda p: not is_even(p))


def graph_distance(x: Region, y: Region) -> int:
    """Minimal L1 distance between two nonempty regions."""
    if not x or not y:
        msg = "Graph distance is undefined for an empty region"
        raise DistanceUndefinedError(msg)
    return int(cdist(x.array, y.array, metric="cityblock").min())


def ell(k: float, dim: int) -> float:
    """Scale length (3/2)^(k/d)."""
    return 1.5 ** (k / dim)


@dataclass(frozen=True)
class ScaleClass:
    """The class F_k of regions fitting [0, l_{k+1}] x ... x [0, l_{k+d}]."""

    k: int
    dim: int
    lengths: tuple[float, ...] = field(init=False)

    def __post_init__(self) -> None:
        if self.k < 0:
            msg = f"Scale index must be nonnegative, got {self.k}"
            raise ValueError(msg)
        object.__setattr__(self, "lengths", tuple(ell(self.k + i, self.dim) for i in range(1, self.dim + 1)))

    def contains(self, region: Region) -> bool:
        return in_scale_class(region, self.k)


def in_scale_class(region: Region, k: int) -> bool:
    """Whether the region fits the scale-k box up to translation and coordinate permutation.

    Sorting bounding-box extents ascending and comparing with the ascending
    lengths decides the existential choice of permutation.
    """
    if k < 0:
        msg = f"Scale index must be nonnegative, got {k}"
        raise ValueError(msg)
    if not region:
        return True
    lengths = ScaleClass(k, region.dim).lengths
    return all(e <= length + _CONTAINMENT_TOL for e, length in zip(sorted(region.extents()), lengths, strict=True))


def scale_class_index(region: Region, k_max: int = 128) -> int | None:
    """Smallest k with the region in F_k, or None if none up to ``k_max``."""
    for k in range(k_max + 1):
        if in_scale_class(region, k):
            return k
    return None


def normalize_to_scale_box(region: Region) -> Region:
    """Translate the minimal corner to the origin and order coordinates by ascending extent."""
    lo, _ = region.bounding_box()
    shifted = region.translate(tuple(-c for c in lo))
    order = sorted(range(region.dim), key=lambda j: shifted.extents()[j])
    return shifted.permute(order)


def in_scale_box(region: Region, k: int) -> bool:
    """Literal containment in [0, l_{k+1}] x ... x [0, l_{k+d}] without normalization."""
    lengths = ScaleClass(k, region.dim).lengths
    return all(
        all(-_CONTAINMENT_TOL <= c <= length + _CONTAINMENT_TOL for c, length in zip(p, lengths, strict=True))
        for p in region
    )


def cube(side: int, corner: Point) -> Region:
    """Lattice cube corner + [0, side-1]^d."""
    return Region.rectangle((side,) * len(corner), corner)


def fat_region(side: int, base: Region) -> Region:
    """Union of the cubes Q_L(y) = L*y + [0, L-1]^d over y in ``base``."""
    if side < 1:
        msg = f"Cube side must be at least 1, got {side}"
        raise ValueError(msg)
    points: list[Point] = []
    for y in base:
        points.extend(cube(side, tuple(side * c for c in y)).points)
    return Region(base.dim, tuple(points))


def is_fat(region: Region, side: int) -> bool:
    """Membership in F^(L): the region is exactly a union of aligned L-cubes."""
    if side < 1:
        msg = f"Cube side must be at least 1, got {side}"
        raise ValueError(msg)
    coarse = Region(region.dim, tuple(tuple(c // side for c in p) for p in region))
    return fat_region(side, coarse) == region


@dataclass(frozen=True)
class CesiDecomposition:
    """Overlapping decomposition V = A_i u B at scale k.

    ``blocks_a[i]`` is A_i for i = 1..r+1 and ``gammas[i]`` is A_i \\ A_{i-1}
    for i = 2..r+1; lower indices hold empty padding regions so the
    numbering starts where the construction does.
    """

    region: Region
    k: int
    r: int
    block_b: Region
    blocks_a: tuple[Region, ...]
    gammas: tuple[Region, ...]

    @property
    def top_length(self) -> float:
        return ell(self.k + self.region.dim, self.region.dim)


def strip(region: Region, upper: float, lower: float = -math.inf) -> Region:
    """Points whose last coordinate lies in [lower, upper]."""
    return region.filter(lambda p: lower - _CONTAINMENT_TOL <= p[-1] <= upper + _CONTAINMENT_TOL)


def cesi_decomposition(region: Region, k: int) -> CesiDecomposition:
    """Build B, A_1..A_{r+1} and the layers between them for a region in the scale-k box."""
    if k < 1:
        msg = f"Decomposition needs k >= 1, got {k}"
        raise PreconditionError(msg)
    if not region:
        msg = "Decomposition of an empty region"
        raise PreconditionError(msg)
    if not in_scale_box(region, k):
        lengths = ", ".join(f"{x:.4g}" for x in ScaleClass(k, region.dim).lengths)
        msg = f"Region is not contained in the scale-{k} box with sides ({lengths}); normalize it first"
        raise PreconditionError(msg)
    if in_scale_class(region, k - 1):
        msg = f"Region already belongs to F_{k - 1}; the decomposition at scale {k} does not apply"
        raise PreconditionError(msg)

    top = ell(k + region.dim, region.dim)
    r = math.floor(top / 6 + _CONTAINMENT_TOL)
    even, odd = even_odd_split(region)
    block_b = strip(region, top, lower=top / 3)

    def r_set(i: int, parity: Region) -> Region:
        return strip(parity, top / 2 + i)

    empty = Region.empty(region.dim)
    blocks_a: list[Region] = [empty]
    for i in range(1, r + 2):
        if i % 2 == 0:
            blocks_a.append(r_set(i, even) | r_set(i - 1, odd))
        else:
            blocks_a.append(r_set(i, odd) | r_set(i - 1, even))
    gammas: list[Region] = [empty, empty]
    gammas.extend(blocks_a[i] - blocks_a[i - 1] for i in range(2, r + 2))

    logger.debug("Decomposition at k=%d: |V|=%d, r=%d, |B|=%d", k, len(region), r, len(block_b))
    return CesiDecomposition(
        region=region, k=k, r=r, block_b=block_b, blocks_a=tuple(blocks_a), gammas=tuple(gammas)
    )


def separated(region: Region, source: Region, target: Region, cut: Region) -> bool:
    """Whether every nearest-neighbor path inside ``region`` from source to target meets ``cut``."""
    allowed = region.point_set - cut.point_set
    seen = {p for p in source if p in allowed}
    queue = deque(seen)
    while queue:
        p = queue.popleft()
        if p in target.point_set:
            return False
        for q in neighbors(p):
            if q in allowed and q not in seen:
                seen.add(q)
                queue.append(q)
    return True


@dataclass(frozen=True)
class GeoReport:
    """Per-index outcome of the four decomposition properties."""

    k: int
    r: int
    cover: tuple[bool, ...]
    distance: tuple[bool, ...]
    scale: tuple[bool, ...]
    parity_separation: tuple[bool, ...]
    nested: bool
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "r": self.r,
            "cover": list(self.cover),
            "distance": list(self.distance),
            "scale": list(self.scale),
            "parity_separation": list(self.parity_separation),
            "nested": self.nested,
            "failures": list(self.failures),
        }


def verify_geo(dec: CesiDecomposition) -> GeoReport:
    """Check the four decomposition properties for every i = 1..r."""
    v, b, k = dec.region, dec.block_b, dec.k
    even, odd = even_odd_split(v)
    l_k = ell(k, v.dim)
    cover, distance, scale, parity = [], [], [], []
    failures: list[str] = []

    for i in range(1, dec.r + 1):
        a_i = dec.blocks_a[i]
        ok = (a_i | b) == v and bool(v - b) and bool(v - a_i)
        cover.append(ok)
        if not ok:
            failures.append(f"cover fails at i={i}")

        outside_b, outside_a = v - b, v - a_i
        ok = not outside_b or not outside_a or graph_distance(outside_b, outside_a) >= l_k / 4 - _CONTAINMENT_TOL
        distance.append(ok)
        if not ok:
            failures.append(f"distance fails at i={i}")

        ok = in_scale_class(b, k - 1) and in_scale_class(a_i, k - 1)
        scale.append(ok)
        if not ok:
            failures.append(f"scale class fails at i={i}")

        layer = dec.gammas[i + 1]
        expected = even if i % 2 == 1 else odd
        ok = layer <= expected and separated(v, a_i, v - dec.blocks_a[i + 1], layer)
        parity.append(ok)
        if not ok:
            failures.append(f"parity/separation fails at i={i}")

    nested = all(dec.blocks_a[i] <= dec.blocks_a[i + 1] for i in range(1, dec.r + 1))
    if not nested:
        failures.append("A_i are not nested")
    return GeoReport(
        k=k,
        r=dec.r,
        cover=tuple(cover),
        distance=tuple(distance),
        scale=tuple(scale),
        parity_separation=tuple(parity),
        nested=nested,
        failures=tuple(failures),
    )


def admissible_rectangles(dim: int, k: int) -> list[Region]:
    """All origin-anchored integer boxes inside the scale-k box that are not in F_{k-1}."""
    lengths = ScaleClass(k, dim).lengths
    max_sides = [math.floor(length + _CONTAINMENT_TOL) + 1 for length in lengths]
    found = []
    for shape in itertools.product(*(range(1, m + 1) for m in max_sides)):
        rect = Region.rectangle(shape)
        if not in_scale_class(rect, k - 1):
            found.append(rect)
    return found


def smallest_nontrivial_scales(dim: int, count: int = 2) -> list[int]:
    """The first ``count`` scales k >= 1 whose decomposition has r >= 1."""
    scales: list[int] = []
    k = 1
    while len(scales) < count:
        if math.floor(ell(k + dim, dim) / 6 + _CONTAINMENT_TOL) >= 1:
            scales.append(k)
        k += 1
    return scales
