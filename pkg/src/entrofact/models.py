"""Finite-spin interaction models, boundary conditions and the Hamiltonian.

Potentials follow the sign convention H = -sum U - sum W, so a configuration's
Gibbs log-weight is the plain sum of pair and site potentials. Hard constraints
(U = -inf) are kept in a boolean ``forbidden`` mask next to a finite ``pair``
matrix so no infinity ever enters exp/log arithmetic.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import ConfigurationIncompleteError, StateSpaceTooLargeError
from .lattice import Point, Region, boundary, boundary_edges, interior_edges

logger = logging.getLogger(__name__)

NEG_INF_LITERAL = "-inf"
DEFAULT_CAP_STATES = 2**24


@dataclass(frozen=True, eq=False)
class SpinModel:
    """Alphabet {0..q-1} with symmetric pair potential U and site potential W."""

    q: int
    pair: np.ndarray
    forbidden: np.ndarray
    site: np.ndarray
    symbols: tuple[float, ...] = ()
    name: str = "custom"

    def __post_init__(self) -> None:
        if self.q < 2:
            msg = f"Alphabet size must be at least 2, got {self.q}"
            raise ValueError(msg)
        pair = np.array(self.pair, dtype=np.float64)
        forbidden = np.array(self.forbidden, dtype=bool)
        site = np.array(self.site, dtype=np.float64)
        if pair.shape != (self.q, self.q) or forbidden.shape != (self.q, self.q) or site.shape != (self.q,):
            msg = f"Potential shapes do not match q={self.q}"
            raise ValueError(msg)
        if not np.all(np.isfinite(pair)) or not np.all(np.isfinite(site)):
            msg = "Finite potential entries required; mark hard constraints in the forbidden mask"
            raise ValueError(msg)
        if not (np.array_equal(pair, pair.T) and np.array_equal(forbidden, forbidden.T)):
            msg = "Pair potential must be exactly symmetric"
            raise ValueError(msg)
        if forbidden.all():
            msg = "Every spin pair is forbidden; the model is degenerate"
            raise ValueError(msg)
        pair[forbidden] = 0.0
        for arr in (pair, forbidden, site):
            arr.setflags(write=False)
        symbols = tuple(float(s) for s in self.symbols) if self.symbols else tuple(float(s) for s in range(self.q))
        if len(symbols) != self.q:
            msg = f"Expected {self.q} symbols, got {len(symbols)}"
            raise ValueError(msg)
        object.__setattr__(self, "pair", pair)
        object.__setattr__(self, "forbidden", forbidden)
        object.__setattr__(self, "site", site)
        object.__setattr__(self, "symbols", symbols)

    @classmethod
    def from_potentials(
        cls,
        pair: Sequence[Sequence[float]],
        site: Sequence[float],
        symbols: Sequence[float] = (),
        name: str = "custom",
    ) -> SpinModel:
        """Build from a pair matrix that may contain -inf for hard constraints."""
        raw = np.array(pair, dtype=np.float64)
        if np.any(np.isnan(raw)) or np.any(raw == np.inf):
            msg = "Pair potential may contain -inf but not NaN or +inf"
            raise ValueError(msg)
        forbidden = np.isneginf(raw)
        return cls(
            q=raw.shape[0],
            pair=np.where(forbidden, 0.0, raw),
            forbidden=forbidden,
            site=np.array(site, dtype=np.float64),
            symbols=tuple(symbols),
            name=name,
        )

    @property
    def has_hard_constraints(self) -> bool:
        return bool(self.forbidden.any())

    def pair_with_infinities(self) -> np.ndarray:
        return np.where(self.forbidden, -np.inf, self.pair)

    def symbol_index(self, value: float) -> int:
        for i, s in enumerate(self.symbols):
            if math.isclose(s, float(value)):
                return i
        msg = f"Symbol {value} is not in the alphabet {self.symbols}"
        raise ValueError(msg)

    def to_dict(self) -> dict[str, Any]:
        pair = [
            [NEG_INF_LITERAL if self.forbidden[i, j] else float(self.pair[i, j]) for j in range(self.q)]
            for i in range(self.q)
        ]
        return {
            "name": self.name,
            "q": self.q,
            "pair": pair,
            "site": [float(v) for v in self.site],
            "symbols": list(self.symbols),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SpinModel:
        q = int(data["q"])
        pair = [[-math.inf if v in (NEG_INF_LITERAL, "−inf") else float(v) for v in row] for row in data["pair"]]
        if len(pair) != q:
            msg = f"Model file declares q={q} but pair has {len(pair)} rows"
            raise ValueError(msg)
        return cls.from_potentials(
            pair, data.get("site", [0.0] * q), symbols=data.get("symbols", ()), name=data.get("name", "custom")
        )

    def fingerprint(self) -> str:
        """Stable sha256 of the model's canonical JSON form."""
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_model(path: Path) -> SpinModel:
    """Read a JSON model file {q, pair, site}, accepting the "-inf" literal."""
    try:
        with path.open(encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        msg = f"Invalid model file {path}: {exc}"
        raise ValueError(msg) from exc
    return SpinModel.from_dict(data)


def save_model(model: SpinModel, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, indent=2)


def make_ising(beta: float, h: float = 0.0) -> SpinModel:
    """Ising model on symbols (-1, +1): U = beta*s*s', W = beta*h*s."""
    spins = np.array([-1.0, 1.0])
    return SpinModel(
        q=2,
        pair=beta * np.outer(spins, spins),
        forbidden=np.zeros((2, 2), dtype=bool),
        site=beta * h * spins,
        symbols=(-1.0, 1.0),
        name=f"ising(beta={beta:g},h={h:g})",
    )


def make_potts(q: int, beta: float, h: Sequence[float] | None = None) -> SpinModel:
    """Potts model: U = beta*1{s=s'}, W(s) = beta*h_s."""
    fields = np.zeros(q) if h is None else np.asarray(h, dtype=np.float64)
    if fields.shape != (q,):
        msg = f"Potts field vector must have length {q}"
        raise ValueError(msg)
    return SpinModel(
        q=q,
        pair=beta * np.eye(q),
        forbidden=np.zeros((q, q), dtype=bool),
        site=beta * fields,
        name=f"potts(q={q},beta={beta:g})",
    )


def make_hardcore(lam: float) -> SpinModel:
    """Hard-core gas with fugacity lam: U(1,1) = -inf, W(s) = s*log(lam)."""
    if lam <= 0:
        msg = f"Fugacity must be positive, got {lam}"
        raise ValueError(msg)
    forbidden = np.array([[False, False], [False, True]])
    return SpinModel(
        q=2,
        pair=np.zeros((2, 2)),
        forbidden=forbidden,
        site=np.array([0.0, math.log(lam)]),
        name=f"hardcore(lambda={lam:g})",
    )


def make_colorings(q: int, dim: int | None = None) -> SpinModel:
    """Proper q-colorings: U(s,s) = -inf, all other potentials zero."""
    if dim is not None and q < 2 * dim + 1:
        logger.warning("Colorings with q=%d < 2d+1=%d are not guaranteed permissive", q, 2 * dim + 1)
    return SpinModel(
        q=q,
        pair=np.zeros((q, q)),
        forbidden=np.eye(q, dtype=bool),
        site=np.zeros(q),
        name=f"colorings(q={q})",
    )


@dataclass(frozen=True)
class BoundaryCondition:
    """Spin indices on exterior vertices; ``free`` drops all boundary interactions.

    Vertices beyond the boundary of the region in use are ignored, so a single
    condition can serve nested regions.
    """

    items: tuple[tuple[Point, int], ...] = ()
    free: bool = False
    mapping: dict[Point, int] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        ordered = tuple(sorted((tuple(p), int(s)) for p, s in self.items))
        object.__setattr__(self, "items", ordered)
        object.__setattr__(self, "mapping", dict(ordered))

    @classmethod
    def of(cls, assignment: Mapping[Point, int]) -> BoundaryCondition:
        return cls(tuple(assignment.items()))

    @classmethod
    def constant(cls, spin: int, shell: Region) -> BoundaryCondition:
        return cls(tuple((p, spin) for p in shell))

    @classmethod
    def free_boundary(cls) -> BoundaryCondition:
        return cls((), free=True)

    @classmethod
    def sweep(cls, shell: Region, q: int) -> Iterator[BoundaryCondition]:
        """All q^|shell| assignments on the shell, in mixed-radix order."""
        for spins in itertools.product(range(q), repeat=len(shell)):
            yield cls(tuple(zip(shell.points, reversed(spins), strict=True)))

    def spin_at(self, point: Point) -> int:
        try:
            return self.mapping[point]
        except KeyError:
            msg = f"Boundary condition does not cover vertex {point}"
            raise ConfigurationIncompleteError(msg) from None

    def covers(self, region: Region) -> bool:
        return self.free or all(p in self.mapping for p in boundary(region))

    def with_spin(self, point: Point, spin: int) -> BoundaryCondition:
        updated = dict(self.mapping)
        updated[point] = spin
        return BoundaryCondition(tuple(updated.items()), free=self.free)

    def restricted(self, region: Region) -> BoundaryCondition:
        """Keep only the entries on the boundary of ``region``."""
        if self.free:
            return self
        return BoundaryCondition(tuple((p, self.spin_at(p)) for p in boundary(region)))

    def merged(self, region: Region, spins: Sequence[int]) -> BoundaryCondition:
        """Extend with spins on ``region`` given in canonical order."""
        updated = dict(self.mapping)
        updated.update(zip(region.points, (int(s) for s in spins), strict=True))
        return BoundaryCondition(tuple(updated.items()), free=self.free)

    def to_json(self) -> dict[str, Any]:
        return {"free": self.free, "assignment": [[list(p), s] for p, s in self.items]}

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> BoundaryCondition:
        items = tuple((tuple(p), int(s)) for p, s in data.get("assignment", []))
        return cls(items, free=bool(data.get("free", False)))


def hamiltonian(
    model: SpinModel,
    region: Region,
    tau: BoundaryCondition,
    sigma: Mapping[Point, int] | Sequence[int],
) -> float:
    """H(sigma) under boundary tau; +inf when a hard constraint is violated."""
    if isinstance(sigma, Mapping):
        missing = [p for p in region if p not in sigma]
        if missing:
            msg = f"Configuration misses vertex {missing[0]}"
            raise ConfigurationIncompleteError(msg)
        spins = [int(sigma[p]) for p in region]
    else:
        spins = [int(s) for s in sigma]
        if len(spins) != len(region):
            msg = f"Configuration has {len(spins)} spins for {len(region)} vertices"
            raise ConfigurationIncompleteError(msg)

    log_weight = 0.0
    for i, j in interior_edges(region):
        s, t = spins[i], spins[j]
        if model.forbidden[s, t]:
            return math.inf
        log_weight += model.pair[s, t]
    if not tau.free:
        for i, y in boundary_edges(region):
            s, t = spins[i], tau.spin_at(y)
            if model.forbidden[s, t]:
                return math.inf
            log_weight += model.pair[s, t]
    log_weight += sum(model.site[s] for s in spins)
    return -log_weight


def state_count(q: int, n: int) -> int:
    return q**n


def ensure_cap(q: int, n: int, cap: int, what: str = "state space") -> int:
    count = state_count(q, n)
    if count > cap:
        raise StateSpaceTooLargeError(count, cap, what)
    return count


def digits(indices: np.ndarray, position: int, q: int) -> np.ndarray:
    """Spin at canonical vertex ``position`` for each mixed-radix configuration index."""
    return (indices // (q**position)) % q


def local_fields(model: SpinModel, region: Region, tau: BoundaryCondition) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex site log-weights including boundary pair terms, and their forbidden mask."""
    n = len(region)
    fields = np.tile(model.site, (n, 1))
    blocked = np.zeros((n, model.q), dtype=bool)
    if not tau.free:
        for i, y in boundary_edges(region):
            t = tau.spin_at(y)
            fields[i] += model.pair[:, t]
            blocked[i] |= model.forbidden[:, t]
    return fields, blocked


def log_weight_table(
    model: SpinModel,
    region: Region,
    tau: BoundaryCondition,
    cap: int = DEFAULT_CAP_STATES,
) -> tuple[np.ndarray, np.ndarray]:
    """Finite log-weights -H over all q^|region| configurations plus the allowed mask."""
    q, n = model.q, len(region)
    size = ensure_cap(q, n, cap)
    indices = np.arange(size, dtype=np.int64)
    fields, blocked = local_fields(model, region, tau)
    log_w = np.zeros(size, dtype=np.float64)
    allowed = np.ones(size, dtype=bool)
    spins = [digits(indices, i, q) for i in range(n)]
    for i in range(n):
        log_w += fields[i][spins[i]]
        if blocked[i].any():
            allowed &= ~blocked[i][spins[i]]
    for i, j in interior_edges(region):
        log_w += model.pair[spins[i], spins[j]]
        if model.has_hard_constraints:
            allowed &= ~model.forbidden[spins[i], spins[j]]
    return log_w, allowed


def hamiltonian_table(
    model: SpinModel, region: Region, tau: BoundaryCondition, cap: int = DEFAULT_CAP_STATES
) -> np.ndarray:
    log_w, allowed = log_weight_table(model, region, tau, cap)
    return np.where(allowed, -log_w, np.inf)


def check_permissive(model: SpinModel, region: Region, cap: int = DEFAULT_CAP_STATES) -> bool:
    """Exhaustively check that every boundary assignment admits a positive-mass configuration."""
    shell = boundary(region)
    ensure_cap(model.q, len(shell) + len(region), cap, what="boundary sweep")
    if not model.has_hard_constraints:
        return True
    for tau in BoundaryCondition.sweep(shell, model.q):
        _, allowed = log_weight_table(model, region, tau, cap)
        if not allowed.any():
            logger.info("No admissible configuration for boundary %s", tau.items)
            return False
    return True


def check_irreducible(
    model: SpinModel, region: Region, tau: BoundaryCondition, cap: int = DEFAULT_CAP_STATES
) -> bool:
    """Whether single-site heat-bath moves connect all positive-mass configurations."""
    _, allowed = log_weight_table(model, region, tau, cap)
    support = np.flatnonzero(allowed)
    if support.size <= 1:
        return support.size == 1
    q = model.q
    rows, cols = [], []
    for i in range(len(region)):
        spin = digits(support, i, q)
        for s in range(q):
            target = support + (s - spin) * q**i
            ok = (s != spin) & allowed[target]
            rows.append(support[ok])
            cols.append(target[ok])
    row = np.concatenate(rows)
    col = np.concatenate(cols)
    graph = sparse.coo_matrix((np.ones(row.size), (row, col)), shape=(allowed.size, allowed.size)).tocsr()
    sub = graph[support][:, support]
    n_components, _ = connected_components(sub, directed=False)
    return n_components == 1

