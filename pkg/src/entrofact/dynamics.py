"""Exact alpha-weighted heat-bath block dynamics on a finite table.

The generator acts on functions as L f = sum_A alpha_A (mu_A f - f). It is
reversible for mu, so its spectrum comes from the symmetric matrix
D^(1/2) L D^(-1/2) on the support, and time evolution uses uniformization
P = I + L / R with R = sum_A alpha_A.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np
from scipy import linalg, optimize, sparse, stats
from scipy.sparse.linalg import lobpcg

from .errors import PreconditionError
from .gibbs import GibbsTable, conditional_operator, covariance_block, entropy, expectation, specification_laws
from .inequalities import BlockWeights, rough_entropy_constant
from .lattice import Region
from .optimize import (
    EntropyFunctional,
    EntropyProductionFunctional,
    OptimizerConfig,
    SqrtDirichletFunctional,
    optimize_ratio,
)

logger = logging.getLogger(__name__)

DENSE_CAP = 4096
UNIFORMIZATION_CAP = 1 << 16
POISSON_TAIL = 1e-12
REDUCIBLE_TOL = 1e-10
ITERATIVE_TOL = 1e-9
MIN_START_CHUNK = 16
CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True, eq=False)
class BlockDynamics:
    """Heat-bath resampling of each block A at Poisson rate alpha_A."""

    table: GibbsTable
    weights: BlockWeights

    def __post_init__(self) -> None:
        if self.weights.volume != self.table.region:
            msg = "Block weights must live on the region of the table"
            raise PreconditionError(msg)

    @property
    def rate(self) -> float:
        return self.weights.total_rate

    @cached_property
    def operators(self) -> list[tuple[float, sparse.csr_matrix]]:
        return [(w, conditional_operator(self.table, block)) for block, w in self.weights.positive()]

    @cached_property
    def generator(self) -> sparse.csr_matrix:
        size = self.table.size
        total = sparse.csr_matrix((size, size))
        for w, op in self.operators:
            total = total + w * op
        return (total - self.rate * sparse.identity(size, format="csr")).tocsr()

    @cached_property
    def jump_matrix(self) -> sparse.csr_matrix:
        """Uniformized kernel I + L / R."""
        size = self.table.size
        if self.rate <= 0:
            return sparse.identity(size, format="csr")
        return (sparse.identity(size, format="csr") + self.generator / self.rate).tocsr()

    @cached_property
    def jump_transpose(self) -> sparse.csr_matrix:
        """Transposed jump kernel, which moves distributions forward."""
        return self.jump_matrix.T.tocsr()

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.generator @ np.asarray(f, dtype=np.float64)

    def scaled(self, factor: float) -> BlockDynamics:
        return BlockDynamics(self.table, self.weights.scaled(factor))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(self.table.probs @ (np.asarray(f) * np.asarray(g)))

    def reversibility_residual(self, f: np.ndarray, g: np.ndarray) -> float:
        """|<Lf, g> - <f, Lg>| in L2(mu)."""
        return abs(self.inner(self.apply(f), g) - self.inner(f, self.apply(g)))

    def min_off_diagonal(self) -> float:
        gen = self.generator.tocoo()
        off = gen.data[gen.row != gen.col]
        return float(off.min()) if off.size else 0.0


def dirichlet_form(dyn: BlockDynamics, f: np.ndarray, g: np.ndarray) -> float:
    """E(f, g) = sum_A alpha_A mu[cov_A(f, g)]."""
    return sum(
        w * expectation(dyn.table, covariance_block(dyn.table, block, f, g)) for block, w in dyn.weights.positive()
    )


@dataclass(frozen=True)
class GapResult:
    gap: float
    method: str
    reducible: bool
    residual: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"gap": self.gap, "method": self.method, "reducible": self.reducible, "residual": self.residual}


def _symmetrized(dyn: BlockDynamics) -> tuple[sparse.csr_matrix, np.ndarray]:
    support = np.flatnonzero(dyn.table.support)
    root = np.sqrt(dyn.table.probs[support])
    sub = dyn.generator[support][:, support]
    sym = sparse.diags(root) @ sub @ sparse.diags(1.0 / root)
    return (-(sym + sym.T) / 2.0).tocsr(), root


def spectral_gap(dyn: BlockDynamics, dense_cap: int = DENSE_CAP, seed: int = 0) -> GapResult:
    """Smallest nonzero eigenvalue of -L in L2(mu)."""
    sym, root = _symmetrized(dyn)
    n = root.size
    if n <= 1:
        return GapResult(math.inf, "trivial", False)
    if n <= dense_cap:
        eigenvalues = linalg.eigh(sym.toarray(), eigvals_only=True)
        gap = float(eigenvalues[1])
        method, residual = "dense", 0.0
    else:
        rng = np.random.default_rng(seed)
        constraint = (root / np.linalg.norm(root))[:, None]
        x0 = rng.normal(size=(n, 1))
        values, vectors = lobpcg(sym, x0, Y=constraint, largest=False, tol=ITERATIVE_TOL, maxiter=2000)
        gap = float(values[0])
        v = vectors[:, 0]
        residual = float(np.linalg.norm(sym @ v - gap * v))
        method = "lobpcg"
        if residual > ITERATIVE_TOL * max(1.0, abs(gap)) * 10:
            logger.warning("Iterative gap residual %.3g above tolerance", residual)
    reducible = gap <= REDUCIBLE_TOL
    if reducible:
        logger.warning("Block dynamics is reducible on the support (gap %.3g)", gap)
    return GapResult(max(gap, 0.0), method, reducible, residual)


def check_gap_ordering(gap: float, gamma: float, c_hat: float) -> bool:
    """Measured ordering gap >= gamma / C_hat; a failure is logged, not raised."""
    if c_hat <= 0:
        return True
    holds = gap >= gamma / c_hat - 1e-10
    if not holds:
        logger.warning("Spectral gap %.6g below gamma/C_hat = %.6g", gap, gamma / c_hat)
    return holds


@dataclass(frozen=True)
class MLSIEstimate:
    rho_hat: float
    implied_constant: float
    floor: float
    witness: np.ndarray
    converged: bool
    source: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho_hat": self.rho_hat,
            "implied_constant": self.implied_constant,
            "floor": self.floor,
            "converged": self.converged,
            "source": self.source,
        }


def mlsi_constant(dyn: BlockDynamics, config: OptimizerConfig) -> MLSIEstimate:
    """rho_hat = inf_f E(f, log f) / Ent f, an upper estimate of the MLSI constant."""
    table = dyn.table
    result = optimize_ratio(
        table,
        EntropyProductionFunctional(table, dyn.weights.positive()),
        EntropyFunctional(table),
        "min",
        config,
    )
    rho = result.value
    gap = spectral_gap(dyn).gap
    c0 = rough_entropy_constant(table.min_prob)
    floor = 4.0 * gap / c0 if c0 > 0 and math.isfinite(gap) else 0.0
    if rho < floor - 1e-8:
        logger.warning("MLSI estimate %.6g below the gap-based floor %.6g", rho, floor)
    implied = dyn.weights.gamma / rho if rho > 0 else math.inf
    return MLSIEstimate(rho, implied, floor, result.witness, result.converged, result.source)


def block_min_probability(table: GibbsTable, block: Region) -> float:
    """mu_{A,*}: smallest positive probability of the Gibbs kernel on ``block``.

    The sweep covers every spin assignment on V \\ A, zero-mass ones included;
    spins outside V stay fixed by the table's boundary condition.
    """
    _, law = specification_laws(table, block)
    return float(law[law > 0].min())


@dataclass(frozen=True)
class LSIEstimate:
    s_hat: float
    block_log_inverse: float
    measured_d: float
    witness: np.ndarray
    converged: bool
    source: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "s_hat": self.s_hat,
            "max_log_inverse_block_min": self.block_log_inverse,
            "measured_d": self.measured_d,
            "converged": self.converged,
            "source": self.source,
        }


def lsi_constant(dyn: BlockDynamics, config: OptimizerConfig) -> LSIEstimate:
    """s_hat = sup_f Ent f / E(sqrt f, sqrt f) and the prefactor it implies.

    The prefactor is s_hat gamma(alpha) / max_A log(1 / mu_{A,*}); no value
    is asserted for it.
    """
    table = dyn.table
    result = optimize_ratio(
        table,
        EntropyFunctional(table),
        SqrtDirichletFunctional(table, dyn.weights.positive()),
        "max",
        config,
    )
    logs = [math.log(1.0 / block_min_probability(table, block)) for block, _ in dyn.weights.positive()]
    worst = max(logs, default=0.0)
    measured = result.value * dyn.weights.gamma / worst if worst > 0 else math.inf
    return LSIEstimate(result.value, worst, measured, result.witness, result.converged, result.source)


# --- time evolution ------------------------------------------------------


def _poisson_weights(mean: float) -> np.ndarray:
    if mean <= 0:
        return np.ones(1)
    upper = int(stats.poisson.isf(POISSON_TAIL, mean)) + 1
    return stats.poisson.pmf(np.arange(upper + 1), mean)


def evolve_function(dyn: BlockDynamics, f: np.ndarray, t: float) -> np.ndarray:
    """P_t f = e^{tL} f by uniformization."""
    weights = _poisson_weights(dyn.rate * t)
    current = np.asarray(f, dtype=np.float64).copy()
    out = weights[0] * current
    for w in weights[1:]:
        current = dyn.jump_matrix @ current
        out += w * current
    return out


def _evolve_distributions(dyn: BlockDynamics, starts: np.ndarray, t: float) -> np.ndarray:
    """Rows delta_sigma e^{tL} for the start indices."""
    weights = _poisson_weights(dyn.rate * t)
    current = np.zeros((dyn.table.size, starts.size))
    current[starts, np.arange(starts.size)] = 1.0
    out = weights[0] * current
    for w in weights[1:]:
        current = dyn.jump_transpose @ current
        out += w * current
    return out.T


def _worst_tv(dyn: BlockDynamics, starts: np.ndarray, t: float) -> float:
    worst = 0.0
    chunk = max(MIN_START_CHUNK, CHUNK_ENTRIES // dyn.table.size)
    for lo in range(0, starts.size, chunk):
        dist = _evolve_distributions(dyn, starts[lo : lo + chunk], t)
        tv = 0.5 * np.abs(dist - dyn.table.probs[None, :]).sum(axis=1)
        worst = max(worst, float(tv.max()))
    return worst


def extremal_starts(table: GibbsTable) -> np.ndarray:
    """All-equal configurations that carry mass."""
    n = len(table.region)
    codes = np.array([sum(s * table.q**i for i in range(n)) for s in range(table.q)], dtype=np.int64)
    return codes[table.support[codes]]


@dataclass(frozen=True)
class MixingCurve:
    """Worst-case total variation distance to mu along a time grid."""

    times: np.ndarray
    tv: np.ndarray
    t_mix_quarter: float | None
    exact: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "times": [float(t) for t in self.times],
            "tv": [float(v) for v in self.tv],
            "t_mix_quarter": self.t_mix_quarter,
            "exact": self.exact,
        }


def tv_mixing_curve(
    dyn: BlockDynamics, times: Sequence[float], threshold: float = 0.25, exact_cap: int = UNIFORMIZATION_CAP
) -> MixingCurve:
    """Worst-case TV at each time, with t_mix refined between grid points.

    Every supported start is used up to ``exact_cap`` states; above it the
    all-equal starts give a lower bound labeled not exact.
    """
    table = dyn.table
    exact = table.size <= exact_cap
    starts = np.flatnonzero(table.support) if exact else extremal_starts(table)
    if not exact:
        logger.warning("TV curve over %d extremal starts only: bound not exact", starts.size)
    grid = np.asarray(sorted(float(t) for t in times))
    tv = np.array([_worst_tv(dyn, starts, t) for t in grid])

    t_mix = None
    below = np.flatnonzero(tv <= threshold)
    if below.size:
        i = int(below[0])
        if i == 0:
            t_mix = float(grid[0])
        else:
            t_mix = float(
                optimize.brentq(
                    lambda t: _worst_tv(dyn, starts, t) - threshold, grid[i - 1], grid[i], xtol=1e-12, rtol=1e-12
                )
            )
    return MixingCurve(grid, tv, t_mix, exact)


def product_chain_tv(n: int, q: int, t: float) -> float:
    """Closed-form TV of n independent unit-rate uniform resamplers on q symbols."""
    stay = math.exp(-t)
    match = stay + (1.0 - stay) / q
    miss = (1.0 - stay) / q
    target = float(q) ** (-n)
    return 0.5 * sum(
        math.comb(n, k) * (q - 1) ** (n - k) * abs(match**k * miss ** (n - k) - target) for k in range(n + 1)
    )


@dataclass(frozen=True)
class EntropyDecayReport:
    times: np.ndarray
    entropies: np.ndarray
    rates: np.ndarray
    bound_rate: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        return {
            "times": [float(t) for t in self.times],
            "entropies": [float(e) for e in self.entropies],
            "rates": [float(r) for r in self.rates],
            "bound_rate": self.bound_rate,
            "passed": self.passed,
        }


def entropy_decay_check(
    dyn: BlockDynamics, f0: np.ndarray, times: Sequence[float], c_hat: float, tol: float = 1e-8
) -> EntropyDecayReport:
    """Ent(P_t f0) must decay between grid points at least like exp(-gamma t / C_hat)."""
    grid = np.asarray(sorted(float(t) for t in times))
    ents = np.array([entropy(dyn.table, np.maximum(evolve_function(dyn, f0, t), 0.0)) for t in grid])
    bound = dyn.weights.gamma / c_hat if c_hat > 0 else 0.0
    rates = np.zeros(max(grid.size - 1, 0))
    passed = True
    for i in range(grid.size - 1):
        dt = grid[i + 1] - grid[i]
        if ents[i] <= tol or dt <= 0:
            continue
        if ents[i + 1] > ents[i] * math.exp(-bound * dt) + tol * max(1.0, ents[i]):
            passed = False
        if ents[i + 1] > 0:
            rates[i] = -math.log(ents[i + 1] / ents[i]) / dt
        else:
            rates[i] = math.inf
    if not passed:
        logger.warning("Entropy decay slower than gamma/C_hat = %.6g", bound)
    return EntropyDecayReport(grid, ents, rates, bound, passed)
