"""Extremal ratios of density functionals.

Every functional here is 1-homogeneous in f, so a ratio N(f)/D(f) only
depends on the direction of f. The optimizer therefore works with
x = mu * f on the probability simplex (mu f = 1) and moves by exponentiated
gradient (mirror) steps with a positivity floor, from many seeded Dirichlet
starts plus an exhaustive family of indicator-type candidates on small systems.
Results are bounds witnessed by the returned density, never certified optima.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Literal, Protocol

import numpy as np
from scipy.special import xlogy

from .gibbs import GibbsTable, conditional_expectation, expected_block_entropy
from .lattice import Region
from .workers import make_rng, ordered_map

logger = logging.getLogger(__name__)

Sense = Literal["max", "min"]
WeightedBlocks = Sequence[tuple[Region, float]]

DEGENERATE_TOL = 1e-14


@dataclass(frozen=True)
class OptimizerConfig:
    """Budget of the multi-start ratio optimizer."""

    starts: int = 32
    max_iter: int = 10_000
    floor: float = 1e-12
    step: float = 0.5
    tol: float = 1e-10
    exhaustive_cap: int = 4096
    seed: int | None = None
    threads: int = 1

    def require_seed(self) -> int:
        if self.seed is None:
            msg = "A seed is required for randomized optimization"
            raise ValueError(msg)
        return self.seed


@dataclass(frozen=True)
class OptimizationResult:
    value: float
    witness: np.ndarray
    converged: bool
    iterations: int
    source: str


class Functional(Protocol):
    """A 1-homogeneous functional of a density with its gradient in x = mu * f."""

    def value(self, f: np.ndarray) -> float: ...

    def value_and_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]: ...


def _floored(table: GibbsTable, f: np.ndarray, floor: float) -> np.ndarray:
    return np.where(table.support, np.maximum(f, floor), 1.0)


class EntropyFunctional:
    """Ent f."""

    def __init__(self, table: GibbsTable, scale: float = 1.0) -> None:
        self.table = table
        self.scale = scale

    def value(self, f: np.ndarray) -> float:
        p = self.table.probs
        mean = float(p @ f)
        if mean <= 0:
            return 0.0
        return self.scale * max(float(p @ xlogy(f, f / mean)), 0.0)

    def value_and_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        mean = float(self.table.probs @ f)
        return self.value(f), self.scale * np.log(f / mean)


class BlockEntropyFunctional:
    """sum_A alpha_A mu[Ent_A f]."""

    def __init__(self, table: GibbsTable, blocks: WeightedBlocks, scale: float = 1.0) -> None:
        self.table = table
        self.blocks = [(b, w) for b, w in blocks if w > 0]
        self.scale = scale

    def value(self, f: np.ndarray) -> float:
        return self.scale * sum(w * expected_block_entropy(self.table, b, f) for b, w in self.blocks)

    def value_and_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        total, grad = 0.0, np.zeros_like(f)
        log_f = np.log(f)
        p = self.table.probs
        for block, w in self.blocks:
            cond = conditional_expectation(self.table, block, f)
            log_ratio = log_f - np.log(np.where(cond > 0, cond, 1.0))
            total += w * max(float(p @ (f * log_ratio)), 0.0)
            grad += w * log_ratio
        return self.scale * total, self.scale * grad


class EntropyProductionFunctional:
    """E(f, log f) = sum_A alpha_A mu[cov_A(f, log f)]."""

    def __init__(self, table: GibbsTable, blocks: WeightedBlocks) -> None:
        self.table = table
        self.blocks = [(b, w) for b, w in blocks if w > 0]

    def value(self, f: np.ndarray) -> float:
        return self.value_and_grad(f)[0]

    def value_and_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        p = self.table.probs
        log_f = np.log(f)
        total, grad = 0.0, np.zeros_like(f)
        for block, w in self.blocks:
            cond_f = conditional_expectation(self.table, block, f)
            cond_log = conditional_expectation(self.table, block, log_f)
            total += w * float(p @ (f * log_f - cond_f * cond_log))
            grad += w * (log_f + 1.0 - cond_log - cond_f / f)
        return max(total, 0.0), grad


class SqrtDirichletFunctional:
    """E(sqrt f, sqrt f) = sum_A alpha_A mu[Var_A sqrt f]."""

    def __init__(self, table: GibbsTable, blocks: WeightedBlocks) -> None:
        self.table = table
        self.blocks = [(b, w) for b, w in blocks if w > 0]

    def value(self, f: np.ndarray) -> float:
        return self.value_and_grad(f)[0]

    def value_and_grad(self, f: np.ndarray) -> tuple[float, np.ndarray]:
        p = self.table.probs
        root = np.sqrt(f)
        total, grad = 0.0, np.zeros_like(f)
        for block, w in self.blocks:
            cond = conditional_expectation(self.table, block, root)
            total += w * float(p @ (f - cond * cond))
            grad += w * (1.0 - cond / root)
        return max(total, 0.0), grad


def ratio_value(numerator: float, denominator: float) -> float | None:
    """N/D, +inf for a vanishing denominator, None when both vanish."""
    if denominator <= DEGENERATE_TOL:
        return None if numerator <= DEGENERATE_TOL else math.inf
    return numerator / denominator


def _better(a: float, b: float, sense: Sense) -> bool:
    return a > b if sense == "max" else a < b


def _ascend(
    table: GibbsTable,
    numerator: Functional,
    denominator: Functional,
    x0: np.ndarray,
    sense: Sense,
    config: OptimizerConfig,
) -> tuple[float, np.ndarray, bool, int]:
    """Exponentiated-gradient run from one start; returns (ratio, f, converged, iterations)."""
    p, support = table.probs, table.support
    sign = 1.0 if sense == "max" else -1.0

    def density(x: np.ndarray) -> np.ndarray:
        f = np.divide(x, p, out=np.ones_like(x), where=support)
        f = _floored(table, f, config.floor)
        return f / float(p @ f)

    def evaluate(f: np.ndarray) -> tuple[float | None, np.ndarray]:
        n_val, n_grad = numerator.value_and_grad(f)
        d_val, d_grad = denominator.value_and_grad(f)
        r = ratio_value(n_val, d_val)
        if r is None or math.isinf(r):
            return r, np.zeros_like(f)
        return r, (n_grad - r * d_grad) / d_val

    f = density(x0)
    r, grad = evaluate(f)
    if r is None or math.isinf(r):
        return (math.nan if r is None else r), f, True, 0
    eta, stall = config.step, 0
    for iteration in range(1, config.max_iter + 1):
        logits = np.where(support, sign * eta * grad, -np.inf)
        logits -= logits[support].max()
        x_new = p * f * np.exp(logits)
        x_new /= x_new.sum()
        f_new = density(x_new)
        r_new, grad_new = evaluate(f_new)
        if r_new is not None and (math.isinf(r_new) or _better(r_new, r, sense)):
            if math.isinf(r_new):
                return r_new, f_new, True, iteration
            gain = abs(r_new - r)
            f, r, grad = f_new, r_new, grad_new
            eta = min(eta * 1.25, 1e3)
            stall = stall + 1 if gain <= config.tol * max(1.0, abs(r)) else 0
            if stall >= 5:
                return r, f, True, iteration
        else:
            eta *= 0.5
            if eta < 1e-12:
                return r, f, True, iteration
    return r, f, False, config.max_iter


def indicator_candidates(table: GibbsTable, cap: int) -> list[tuple[str, np.ndarray]]:
    """Point masses and one- and two-site cylinder indicators (systems up to ``cap`` states)."""
    if table.size > cap:
        return []
    candidates: list[tuple[str, np.ndarray]] = []
    for state in np.flatnonzero(table.support):
        f = np.zeros(table.size)
        f[state] = 1.0
        candidates.append((f"point mass {int(state)}", f))
    n = len(table.region)
    spins = [table.spins(i) for i in range(n)]
    for i in range(n):
        for s in range(table.q):
            candidates.append((f"cylinder x{i}={s}", (spins[i] == s).astype(np.float64)))
    for i, j in itertools.combinations(range(n), 2):
        for s, t in itertools.product(range(table.q), repeat=2):
            candidates.append((f"cylinder x{i}={s},x{j}={t}", ((spins[i] == s) & (spins[j] == t)).astype(np.float64)))
    return candidates


def measurable_candidates(table: GibbsTable, block: Region, cap: int) -> list[tuple[str, np.ndarray]]:
    """Indicators of single assignments on ``block`` (functions of the block's spins only)."""
    radix = table.q ** len(block)
    if radix > cap:
        return []
    code = table.block_code(block)
    return [(f"{block}-measurable {c}", (code == c).astype(np.float64)) for c in range(radix)]


def optimize_ratio(
    table: GibbsTable,
    numerator: Functional,
    denominator: Functional,
    sense: Sense,
    config: OptimizerConfig,
    candidates: Sequence[tuple[str, np.ndarray]] = (),
) -> OptimizationResult:
    """Best ratio N(f)/D(f) found over candidates and seeded multi-start ascent."""
    seed = config.require_seed()
    best: OptimizationResult | None = None

    def consider(result: OptimizationResult) -> None:
        nonlocal best
        if math.isnan(result.value):
            return
        if best is None or _better(result.value, best.value, sense):
            best = result

    pool = list(candidates) + indicator_candidates(table, config.exhaustive_cap)
    for label, f in pool:
        f = _floored(table, np.asarray(f, dtype=np.float64), config.floor)
        r = ratio_value(numerator.value(f), denominator.value(f))
        if r is not None:
            consider(OptimizationResult(r, f / float(table.probs @ f), True, 0, f"candidate {label}"))

    support = np.flatnonzero(table.support)

    def run_start(index: int) -> OptimizationResult:
        rng = make_rng(seed, index)
        concentration = (1.0, 0.3, 3.0)[index % 3]
        x0 = np.zeros(table.size)
        x0[support] = rng.dirichlet(np.full(support.size, concentration))
        value, f, converged, iterations = _ascend(table, numerator, denominator, x0, sense, config)
        return OptimizationResult(value, f, converged, iterations, f"start {index}")

    for result in ordered_map(run_start, range(config.starts), threads=config.threads):
        consider(result)

    if best is None:
        msg = "Every candidate density was degenerate (0/0)"
        raise ValueError(msg)
    if not best.converged:
        logger.warning("Ratio optimizer hit %d iterations without converging (best %.6g)", config.max_iter, best.value)
    return best


def random_densities(table: GibbsTable, rng: np.random.Generator, count: int) -> list[np.ndarray]:
    """A mix of nonnegative test functions: lognormal, sparse, product-form and indicator."""
    n, size = len(table.region), table.size
    out: list[np.ndarray] = []
    spins = [table.spins(i) for i in range(n)]
    makers: list[Callable[[], np.ndarray]] = [
        lambda: np.exp(rng.normal(0.0, 0.5, size)),
        lambda: np.exp(rng.normal(0.0, 2.0, size)),
        lambda: rng.random(size) * (rng.random(size) < 0.3),
        lambda: np.prod([rng.random(table.q)[s] + 0.05 for s in spins], axis=0) if n else np.ones(size),
        lambda: (rng.random(size) < 0.5).astype(np.float64),
    ]
    while len(out) < count:
        f = makers[len(out) % len(makers)]()
        if float(table.probs @ f) > 0:
            out.append(f)
    return out
