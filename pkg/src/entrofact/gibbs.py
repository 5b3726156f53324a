"""Exact finite-volume Gibbs engine.

Configurations of a region are indexed in mixed radix: the spin at the i-th
canonical vertex is ``(index // q**i) % q``. Every table, function and
conditional expectation in the package shares this bijection.

Conditional expectations work on *fibers*: for a block A inside V, the
configurations sharing the same spins on V \\ A. Each fiber has exactly
q^|A| members, so fibers are stored as an (m, q^|A|) index matrix and every
reduction runs along its rows in a fixed order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy import sparse
from scipy.special import logsumexp, xlogy

from .errors import DomainError, NonPermissiveError, PreconditionError
from .lattice import Region, interior_edges
from .models import DEFAULT_CAP_STATES, BoundaryCondition, SpinModel, digits, local_fields, log_weight_table

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-10
ENTF_MAGIC = b"ENTF1"


@dataclass(frozen=True)
class Fibers:
    """Partition of configuration indices by the spins outside a block."""

    block: Region
    members: np.ndarray
    ids: np.ndarray
    mass: np.ndarray

    @property
    def count(self) -> int:
        return int(self.members.shape[0])

    @property
    def size(self) -> int:
        return int(self.members.shape[1])

    @property
    def null_fibers(self) -> int:
        return int(np.count_nonzero(self.mass <= 0.0))


@dataclass(frozen=True, eq=False)
class GibbsTable:
    """Normalized Gibbs probabilities of a region under a boundary condition."""

    model: SpinModel
    region: Region
    tau: BoundaryCondition
    probs: np.ndarray
    log_z: float
    _fibers: dict[Region, Fibers] = field(default_factory=dict, init=False, repr=False)

    @property
    def q(self) -> int:
        return self.model.q

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @cached_property
    def indices(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)

    @cached_property
    def support(self) -> np.ndarray:
        return self.probs > 0.0

    @cached_property
    def configs(self) -> np.ndarray:
        """(N, n) matrix of spin indices."""
        cols = [digits(self.indices, i, self.q) for i in range(len(self.region))]
        if not cols:
            return np.zeros((self.size, 0), dtype=np.int64)
        return np.stack(cols, axis=1)

    @cached_property
    def min_prob(self) -> float:
        return float(self.probs[self.support].min())

    def spins(self, position: int) -> np.ndarray:
        return digits(self.indices, position, self.q)

    def encode(self, spins: Sequence[int]) -> int:
        return int(sum(int(s) * self.q**i for i, s in enumerate(spins)))

    def block_code(self, block: Region) -> np.ndarray:
        """Mixed-radix code of each configuration restricted to ``block``."""
        positions = block.indices_in(self.region)
        code = np.zeros(self.size, dtype=np.int64)
        for j, pos in enumerate(positions):
            code += self.spins(int(pos)) * self.q**j
        return code

    def fibers(self, block: Region) -> Fibers:
        """Fibers of ``block``, cached per block."""
        cached = self._fibers.get(block)
        if cached is not None:
            return cached
        positions = block.indices_in(self.region)
        q = self.q
        outside_key = self.indices.copy()
        for pos in positions:
            outside_key -= self.spins(int(pos)) * q ** int(pos)
        keys = np.unique(outside_key)
        offsets = np.zeros(1, dtype=np.int64)
        for pos in positions:
            offsets = (offsets[None, :] + (np.arange(q, dtype=np.int64) * q ** int(pos))[:, None]).ravel()
        members = keys[:, None] + np.sort(offsets)[None, :]
        ids = np.searchsorted(keys, outside_key)
        mass = self.probs[members].sum(axis=1)
        result = Fibers(block=block, members=members, ids=ids, mass=mass)
        self._fibers[block] = result
        return result


@dataclass(frozen=True, eq=False)
class ConfigFunction:
    """A function on the configurations of a table's region, tagged with its domain."""

    values: np.ndarray
    region: Region
    tau: BoundaryCondition
    label: str = ""

    @classmethod
    def on(cls, table: GibbsTable, values: np.ndarray, label: str = "") -> ConfigFunction:
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (table.size,):
            msg = f"Function has shape {arr.shape}, expected ({table.size},)"
            raise ValueError(msg)
        return cls(arr, table.region, table.tau, label)

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values, dtype="<f8").tobytes()).hexdigest()[:16]


def gibbs_table(
    model: SpinModel,
    region: Region,
    tau: BoundaryCondition,
    cap: int = DEFAULT_CAP_STATES,
) -> GibbsTable:
    """Exact table of the Gibbs measure of ``region`` under ``tau``."""
    log_w, allowed = log_weight_table(model, region, tau, cap)
    if not allowed.any():
        msg = f"No configuration of positive mass on {region} under the given boundary ({model.name})"
        raise NonPermissiveError(msg)
    log_z = float(logsumexp(log_w[allowed]))
    probs = np.zeros_like(log_w)
    probs[allowed] = np.exp(log_w[allowed] - log_z)
    total = probs.sum()
    if abs(total - 1.0) > 1e-12:
        probs /= total
    logger.debug("Gibbs table %s on |V|=%d: %d states, logZ=%.6g", model.name, len(region), probs.size, log_z)
    return GibbsTable(model=model, region=region, tau=tau, probs=probs, log_z=log_z)


def _values(table: GibbsTable, f: np.ndarray | ConfigFunction) -> np.ndarray:
    arr = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    if arr.shape != (table.size,):
        msg = f"Function has shape {arr.shape}, expected ({table.size},)"
        raise ValueError(msg)
    return arr


def expectation(table: GibbsTable, f: np.ndarray | ConfigFunction) -> float:
    return float(table.probs @ _values(table, f))


def conditional_expectation(table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction) -> np.ndarray:
    """mu_A f as a function on the whole configuration space, constant along each fiber.

    Zero-mass fibers get the value 0; their count is available as
    ``table.fibers(block).null_fibers``.
    """
    values = _values(table, f)
    fib = table.fibers(block)
    weighted = (table.probs[fib.members] * values[fib.members]).sum(axis=1)
    cond = np.divide(weighted, fib.mass, out=np.zeros_like(weighted), where=fib.mass > 0)
    if fib.null_fibers:
        logger.debug("Conditional expectation on %s hit %d zero-mass fibers", block, fib.null_fibers)
    return cond[fib.ids]


def _nonnegative(table: GibbsTable, values: np.ndarray) -> None:
    if np.any(values[table.support] < 0):
        msg = "Entropy needs a nonnegative function on the support of the measure"
        raise DomainError(msg)


def phi(x: np.ndarray) -> np.ndarray:
    """x log x with 0 log 0 = 0."""
    return xlogy(x, x)


def entropy(table: GibbsTable, f: np.ndarray | ConfigFunction) -> float:
    """Ent f = mu[f log(f / mu f)]."""
    values = _values(table, f)
    _nonnegative(table, values)
    mean = expectation(table, values)
    if mean <= 0:
        return 0.0
    p, v = table.probs[table.support], values[table.support]
    return max(float(p @ xlogy(v, v / mean)), 0.0)


def variance(table: GibbsTable, f: np.ndarray | ConfigFunction) -> float:
    values = _values(table, f)
    centered = values - expectation(table, values)
    return float(table.probs @ (centered * centered))


def block_entropy(table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction) -> np.ndarray:
    """Ent_A f as a function constant along the fibers of ``block``."""
    values = _values(table, f)
    _nonnegative(table, values)
    fib = table.fibers(block)
    cond = conditional_expectation(table, block, values)
    ratio = np.divide(values, cond, out=np.ones_like(values), where=(values > 0) & (cond > 0))
    local = table.probs * xlogy(values, ratio)
    per_fiber = local[fib.members].sum(axis=1)
    per_fiber = np.divide(per_fiber, fib.mass, out=np.zeros_like(per_fiber), where=fib.mass > 0)
    return np.maximum(per_fiber, 0.0)[fib.ids]


def expected_block_entropy(table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction) -> float:
    """mu[Ent_A f]."""
    values = _values(table, f)
    _nonnegative(table, values)
    if not block:
        return 0.0
    cond = conditional_expectation(table, block, values)
    ratio = np.divide(values, cond, out=np.ones_like(values), where=(values > 0) & (cond > 0))
    return max(float(table.probs @ xlogy(values, ratio)), 0.0)


def block_variance(table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction) -> np.ndarray:
    """Var_A f as a function constant along fibers."""
    return covariance_block(table, block, f, f)


def covariance_block(
    table: GibbsTable,
    block: Region,
    f: np.ndarray | ConfigFunction,
    g: np.ndarray | ConfigFunction,
) -> np.ndarray:
    """cov_A(f, g) = mu_A[fg] - mu_A[f] mu_A[g] as a function constant along fibers."""
    fv, gv = _values(table, f), _values(table, g)
    fc = fv - conditional_expectation(table, block, fv)
    gc = gv - conditional_expectation(table, block, gv)
    return conditional_expectation(table, block, fc * gc)


def marginal_density(table: GibbsTable, delta: Region) -> np.ndarray:
    """psi over all q^|delta| spin assignments on ``delta`` (mixed radix in delta's order)."""
    code = table.block_code(delta)
    return np.bincount(code, weights=table.probs, minlength=table.q ** len(delta))


def marginal_density_psi(
    model: SpinModel,
    region: Region,
    delta: Region,
    tau: BoundaryCondition,
    sigma_delta: Sequence[int],
    cap: int = DEFAULT_CAP_STATES,
) -> float:
    """Marginal density psi of the Gibbs measure on ``delta`` at the assignment ``sigma_delta``."""
    if not delta <= region:
        msg = "Marginal support must be a subset of the region"
        raise PreconditionError(msg)
    if len(sigma_delta) != len(delta):
        msg = f"Assignment has {len(sigma_delta)} spins for |delta|={len(delta)}"
        raise ValueError(msg)
    table = gibbs_table(model, region, tau, cap)
    code = sum(int(s) * model.q**j for j, s in enumerate(sigma_delta))
    return float(marginal_density(table, delta)[code])


def is_product(table: GibbsTable, parts: Sequence[Region], within: Region | None = None) -> float:
    """Max deviation between mu_U and the product of its conditional marginals on ``parts``.

    ``parts`` must partition ``within`` (default: the whole region). The
    deviation is computed fiber by fiber over the spins outside ``within``.
    """
    within = table.region if within is None else within
    union = Region.empty(table.region.dim)
    for part in parts:
        if not union.isdisjoint(part):
            msg = "Product parts must be disjoint"
            raise PreconditionError(msg)
        union = union | part
    if union != within:
        msg = "Product parts must cover the conditioning block"
        raise PreconditionError(msg)
    fib = table.fibers(within)
    mass = fib.mass[fib.ids]
    joint = np.divide(table.probs, mass, out=np.zeros_like(table.probs), where=mass > 0)
    product = np.ones_like(joint)
    for part in parts:
        code = table.block_code(part)
        radix = table.q ** len(part)
        key = fib.ids * radix + code
        marg = np.bincount(key, weights=joint, minlength=fib.count * radix)
        product *= marg[key]
    deviation = np.abs(joint - product)
    return float(deviation[mass > 0].max()) if np.any(mass > 0) else 0.0


def conditional_operator(table: GibbsTable, block: Region) -> sparse.csr_matrix:
    """Sparse Markov matrix of mu_A: row sigma holds the conditional law on its fiber."""
    fib = table.fibers(block)
    s = fib.size
    rows = np.repeat(fib.members, s, axis=1).ravel()
    cols = np.tile(fib.members, (1, s)).ravel()
    mass = fib.mass[fib.ids[cols]]
    vals = np.divide(table.probs[cols], mass, out=np.zeros(cols.size), where=mass > 0)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(table.size, table.size))


def specification_laws(table: GibbsTable, block: Region) -> tuple[Fibers, np.ndarray]:
    """Gibbs kernel on ``block`` per fiber, one row per spin assignment outside it.

    Only terms touching ``block`` enter, so zero-mass fibers get the law under
    their own outside spins. Rows of positive-mass fibers are the conditional
    laws of the table.
    """
    model, region = table.model, table.region
    fields, blocked = local_fields(model, region, table.tau)
    positions = {int(p) for p in block.indices_in(region)}
    log_w = np.zeros(table.size, dtype=np.float64)
    allowed = np.ones(table.size, dtype=bool)
    for i in positions:
        s = table.spins(i)
        log_w += fields[i][s]
        if blocked[i].any():
            allowed &= ~blocked[i][s]
    for i, j in interior_edges(region):
        if int(i) not in positions and int(j) not in positions:
            continue
        si, sj = table.spins(int(i)), table.spins(int(j))
        log_w += model.pair[si, sj]
        if model.has_hard_constraints:
            allowed &= ~model.forbidden[si, sj]

    fib = table.fibers(block)
    local = np.where(allowed, log_w, -np.inf)[fib.members]
    norm = logsumexp(local, axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        msg = f"Some configuration outside {block} admits no spins on it"
        raise NonPermissiveError(msg)
    return fib, np.exp(local - norm)


def specification_operator(table: GibbsTable, block: Region) -> sparse.csr_matrix:
    """Sparse Markov matrix of the Gibbs kernel on ``block`` with a row for every configuration.

    Agrees with :func:`conditional_operator` on rows of positive mass.
    """
    fib, law = specification_laws(table, block)
    s = fib.size
    rows = np.repeat(fib.members, s, axis=1).ravel()
    cols = np.tile(fib.members, (1, s)).ravel()
    vals = np.tile(law, (1, s)).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(table.size, table.size))


def dlr_check(table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction) -> float:
    """|mu_V(mu_Lambda f) - mu_V f|."""
    values = _values(table, f)
    return abs(expectation(table, conditional_expectation(table, block, values)) - expectation(table, values))


@dataclass(frozen=True)
class TelescopeResidual:
    decomposition: float
    telescoping: float

    @property
    def worst(self) -> float:
        return max(self.decomposition, self.telescoping)


def telescope_check(table: GibbsTable, chain: Sequence[Region], f: np.ndarray | ConfigFunction) -> TelescopeResidual:
    """Residuals of the entropy decomposition and of the telescoping sum along a nested chain."""
    if not chain:
        msg = "Telescoping needs at least one region"
        raise PreconditionError(msg)
    for inner, outer in zip(chain, chain[1:], strict=False):
        if not inner <= outer:
            msg = f"Chain is not nested: {inner} is not inside {outer}"
            raise PreconditionError(msg)
    if not chain[-1] <= table.region:
        msg = "Chain leaves the table's region"
        raise PreconditionError(msg)
    values = _values(table, f)
    total = entropy(table, values)
    decomposition = max(
        abs(
            total
            - expected_block_entropy(table, lam, values)
            - entropy(table, conditional_expectation(table, lam, values))
        )
        for lam in chain
    )
    smoothed = [conditional_expectation(table, lam, values) for lam in chain]
    lhs = sum(expected_block_entropy(table, chain[i], smoothed[i - 1]) for i in range(1, len(chain)))
    rhs = expected_block_entropy(table, chain[-1], smoothed[0]) if len(chain) > 1 else 0.0
    return TelescopeResidual(decomposition=decomposition, telescoping=abs(lhs - rhs))


@dataclass(frozen=True)
class VariationalResult:
    accepted: bool
    lhs: float
    entropy: float

    @property
    def holds(self) -> bool:
        return not self.accepted or self.lhs <= self.entropy + IDENTITY_TOL


def variational_check(
    table: GibbsTable,
    g: np.ndarray | ConfigFunction,
    h: np.ndarray,
    within: Region | None = None,
) -> VariationalResult:
    """Test mu_U(g h) <= Ent_U(g) for a candidate h with mu_U e^h <= 1.

    With ``within`` given, both the constraint and the inequality are taken
    fiber by fiber and the worst fiber gap is reported.
    """
    gv = _values(table, g)
    hv = np.asarray(h, dtype=np.float64)
    _nonnegative(table, gv)
    gh = np.where(gv > 0, gv * hv, 0.0)
    if within is None:
        if expectation(table, np.exp(hv)) > 1.0 + IDENTITY_TOL:
            return VariationalResult(accepted=False, lhs=float("nan"), entropy=float("nan"))
        return VariationalResult(accepted=True, lhs=expectation(table, gh), entropy=entropy(table, gv))
    if np.any(conditional_expectation(table, within, np.exp(hv))[table.support] > 1.0 + IDENTITY_TOL):
        return VariationalResult(accepted=False, lhs=float("nan"), entropy=float("nan"))
    lhs = conditional_expectation(table, within, gh)
    ent = block_entropy(table, within, gv)
    worst = int(np.argmax(np.where(table.support, lhs - ent, -np.inf)))
    return VariationalResult(accepted=True, lhs=float(lhs[worst]), entropy=float(ent[worst]))


def _entf_header(table: GibbsTable, kind: str, extra: dict[str, Any]) -> dict[str, Any]:
    return {
        "kind": kind,
        "region": table.region.to_json(),
        "dim": table.region.dim,
        "q": table.q,
        "model_hash": table.model.fingerprint(),
        "boundary": table.tau.to_json(),
        "length": table.size,
        **extra,
    }


def write_entf(path: Path, header: dict[str, Any], values: np.ndarray) -> None:
    """Write magic, uint32 header length, JSON header, little-endian f64 vector."""
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(ENTF_MAGIC)
        f.write(struct.pack("<I", len(payload)))
        f.write(payload)
        f.write(np.ascontiguousarray(values, dtype="<f8").tobytes())


def read_entf(path: Path) -> tuple[dict[str, Any], np.ndarray]:
    data = path.read_bytes()
    if not data.startswith(ENTF_MAGIC):
        msg = f"{path} is not an ENTF1 file"
        raise ValueError(msg)
    offset = len(ENTF_MAGIC)
    (length,) = struct.unpack_from("<I", data, offset)
    offset += 4
    header = json.loads(data[offset : offset + length].decode("utf-8"))
    values = np.frombuffer(data, dtype="<f8", offset=offset + length)
    if values.size != header.get("length", values.size):
        msg = f"{path}: header announces {header['length']} values, found {values.size}"
        raise ValueError(msg)
    return header, values.astype(np.float64)


def write_table(path: Path, table: GibbsTable) -> None:
    write_entf(path, _entf_header(table, "gibbs", {"log_z": table.log_z}), table.probs)


def write_function(path: Path, table: GibbsTable, f: ConfigFunction) -> None:
    write_entf(path, _entf_header(table, "function", {"label": f.label}), f.values)
