"""Entropy factorization inequalities: checks and extremal constants."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, NonPermissiveError, PreconditionError, StateSpaceTooLargeError
from .gibbs import (
    ConfigFunction,
    GibbsTable,
    block_entropy,
    conditional_expectation,
    covariance_block,
    entropy,
    expectation,
    expected_block_entropy,
    gibbs_table,
    is_product,
    marginal_density,
    specification_operator,
)
from .lattice import Region, boundary, ell, even_odd_split, in_scale_class
from .models import BoundaryCondition, SpinModel
from .optimize import (
    BlockEntropyFunctional,
    EntropyFunctional,
    OptimizerConfig,
    measurable_candidates,
    optimize_ratio,
)

logger = logging.getLogger(__name__)

CHECK_TOL = 1e-10
SHEARER_TOL = 1e-8
PRODUCT_TOL = 1e-10
DENSE_CAP = 4096
MAX_SUBSET_BLOCKS = 1 << 14


@dataclass(frozen=True)
class BlockWeights:
    """Nonnegative weights alpha_A over blocks A inside a volume V."""

    volume: Region
    blocks: tuple[tuple[Region, float], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[Region, float] = {}
        for block, weight in self.blocks:
            w = float(weight)
            if not math.isfinite(w) or w < 0:
                msg = f"Block weight must be finite and nonnegative, got {weight} for {block}"
                raise ValueError(msg)
            if not block <= self.volume:
                msg = f"Block {block} is not inside the volume"
                raise ValueError(msg)
            merged[block] = merged.get(block, 0.0) + w
        ordered = tuple(sorted(merged.items(), key=lambda item: (len(item[0]), item[0].points)))
        object.__setattr__(self, "blocks", ordered)

    # --- presets --------------------------------------------------------

    @classmethod
    def singletons(cls, volume: Region, weight: float = 1.0) -> BlockWeights:
        return cls(volume, tuple((Region(volume.dim, (p,)), weight) for p in volume))

    @classmethod
    def even_odd(cls, volume: Region) -> BlockWeights:
        even, odd = even_odd_split(volume)
        return cls(volume, tuple((b, 1.0) for b in (even, odd) if b))

    @classmethod
    def full(cls, volume: Region, weight: float = 1.0) -> BlockWeights:
        return cls(volume, ((volume, weight),))

    @classmethod
    def blocks_up_to(cls, volume: Region, max_size: int, weight: float = 1.0) -> BlockWeights:
        """Every nonempty subset of at most ``max_size`` vertices."""
        n = len(volume)
        count = sum(math.comb(n, m) for m in range(1, min(max_size, n) + 1))
        if count > MAX_SUBSET_BLOCKS:
            raise StateSpaceTooLargeError(count, MAX_SUBSET_BLOCKS, what="block family")
        blocks = [
            (Region(volume.dim, combo), weight)
            for m in range(1, min(max_size, n) + 1)
            for combo in itertools.combinations(volume.points, m)
        ]
        return cls(volume, tuple(blocks))

    @classmethod
    def explicit(cls, volume: Region, weights: Mapping[Region, float]) -> BlockWeights:
        return cls(volume, tuple(weights.items()))

    # --- derived ----------------------------------------------------------

    def positive(self) -> list[tuple[Region, float]]:
        return [(b, w) for b, w in self.blocks if w > 0]

    def coverage(self) -> dict[tuple[int, ...], float]:
        cover = dict.fromkeys(self.volume.points, 0.0)
        for block, w in self.blocks:
            for p in block:
                cover[p] += w
        return cover

    @property
    def gamma(self) -> float:
        return gamma(self)

    def argmin_vertices(self) -> list[tuple[int, ...]]:
        cover = self.coverage()
        low = min(cover.values())
        return [p for p, c in cover.items() if c == low]

    @property
    def total_rate(self) -> float:
        return sum(w for _, w in self.blocks)

    def scaled(self, factor: float) -> BlockWeights:
        return BlockWeights(self.volume, tuple((b, w * factor) for b, w in self.blocks))

    def to_dict(self) -> dict[str, Any]:
        return {
            "volume": self.volume.to_json(),
            "blocks": [[b.to_json(), w] for b, w in self.blocks],
            "gamma": self.gamma,
        }


def gamma(weights: BlockWeights) -> float:
    """min over vertices of the total weight of the blocks covering it."""
    if not weights.volume:
        msg = "gamma is undefined on an empty volume"
        raise PreconditionError(msg)
    return min(weights.coverage().values())


@dataclass(frozen=True)
class FactorizationReport:
    """Outcome of one inequality evaluation, lhs <= rhs when ``passed``."""

    name: str
    lhs: float
    rhs: float
    ratio: float | None
    passed: bool | None = None
    witness: ConfigFunction | None = None
    detail: str = ""
    extras: dict[str, float] = field(default_factory=dict)

    @property
    def degenerate(self) -> bool:
        return self.ratio is None

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": _json_float(self.ratio),
            "passed": self.passed,
            "detail": self.detail,
        }
        if self.witness is not None:
            data["witness"] = self.witness.digest()
        data.update({k: _json_float(v) for k, v in sorted(self.extras.items())})
        return data


def _json_float(value: float | None) -> float | str | None:
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return None
    return value


def _ratio(lhs: float, rhs: float) -> float | None:
    if rhs <= CHECK_TOL * 1e-2:
        return None if lhs <= CHECK_TOL * 1e-2 else math.inf
    return lhs / rhs


def _holds(lhs: float, rhs: float, rel: float = CHECK_TOL) -> bool:
    return lhs <= rhs + rel * max(1.0, abs(rhs), abs(lhs))


def weighted_block_entropy(table: GibbsTable, weights: BlockWeights, f: np.ndarray) -> float:
    return sum(w * expected_block_entropy(table, b, f) for b, w in weights.positive())


def check_btc(
    table: GibbsTable,
    weights: BlockWeights,
    f: np.ndarray | ConfigFunction,
    constant: float | None = None,
) -> FactorizationReport:
    """gamma(alpha) Ent f against sum_A alpha_A mu[Ent_A f]; passes iff the ratio is at most ``constant``."""
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    g = weights.gamma
    lhs = g * entropy(table, values)
    rhs = weighted_block_entropy(table, weights, values)
    ratio = _ratio(lhs, rhs)
    detail = ""
    if ratio is None:
        detail = "degenerate: both sides vanish"
    elif math.isinf(ratio):
        detail = "rhs vanishes while lhs is positive"
        logger.warning("Block factorization: %s (gamma=%.6g)", detail, g)
    passed = None
    if constant is not None:
        passed = ratio is None or (not math.isinf(ratio) and _holds(lhs, constant * rhs))
    return FactorizationReport("btc", lhs, rhs, ratio, passed, detail=detail, extras={"gamma": g})


@dataclass(frozen=True)
class ConstantEstimate:
    """Witnessed bound on an extremal ratio."""

    value: float
    witness: np.ndarray
    converged: bool
    source: str

    def to_dict(self) -> dict[str, Any]:
        return {"value": _json_float(self.value), "converged": self.converged, "source": self.source}


def estimate_best_constant(
    table: GibbsTable, weights: BlockWeights, config: OptimizerConfig
) -> ConstantEstimate:
    """Lower bound C_hat on the best block factorization constant, with its witness density."""
    g = weights.gamma
    if g == 0:
        return ConstantEstimate(0.0, np.ones(table.size), True, "gamma is zero")
    result = optimize_ratio(
        table,
        EntropyFunctional(table, scale=g),
        BlockEntropyFunctional(table, weights.positive()),
        "max",
        config,
    )
    return ConstantEstimate(result.value, result.witness, result.converged, result.source)


def require_product(table: GibbsTable, parts: Sequence[Region], within: Region) -> float:
    deviation = is_product(table, parts, within)
    if deviation > PRODUCT_TOL:
        msg = f"Measure on {within} is not a product over the given parts (max deviation {deviation:.3g})"
        raise PreconditionError(msg)
    return deviation


def check_shearer_product(
    table: GibbsTable, weights: BlockWeights, f: np.ndarray | ConfigFunction
) -> FactorizationReport:
    """Weighted Shearer inequality on a volume where the conditional measure is a product over sites.

    Both sides are taken fiber by fiber over the spins outside the volume;
    the report carries the worst fiber.
    """
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    lam = weights.volume
    require_product(table, [Region(lam.dim, (p,)) for p in lam], lam)
    g = weights.gamma
    lhs = g * block_entropy(table, lam, values)
    rhs = np.zeros(table.size)
    for block, w in weights.positive():
        rhs += w * conditional_expectation(table, lam, block_entropy(table, block, values))
    gap = np.where(table.support, lhs - rhs, -np.inf)
    worst = int(np.argmax(gap))
    lhs_w, rhs_w = float(lhs[worst]), float(rhs[worst])
    passed = _holds(lhs_w, rhs_w, rel=SHEARER_TOL)
    return FactorizationReport("shearer", lhs_w, rhs_w, _ratio(lhs_w, rhs_w), passed, extras={"gamma": g})


def reduction_even_odd(
    table: GibbsTable, c_eo: float, weights: BlockWeights, f: np.ndarray | ConfigFunction
) -> FactorizationReport:
    """gamma Ent f <= 2 C_eo sum_A alpha_A mu[Ent_A f], given the even/odd hypothesis for this f."""
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    even, odd = even_odd_split(table.region)
    ent = entropy(table, values)
    eo = expected_block_entropy(table, even, values) + expected_block_entropy(table, odd, values)
    if not _holds(ent, c_eo * eo):
        detail = f"even/odd hypothesis fails for this f: Ent={ent:.6g} > C*{eo:.6g}"
        return FactorizationReport("reduction", ent, c_eo * eo, _ratio(ent, eo), None, detail=detail)
    lhs = weights.gamma * ent
    rhs = 2.0 * c_eo * weighted_block_entropy(table, weights, values)
    return FactorizationReport("reduction", lhs, rhs, _ratio(lhs, rhs), _holds(lhs, rhs), extras={"c_eo": c_eo})


def two_block_kernel(table: GibbsTable, a: Region, b: Region) -> np.ndarray:
    """Dense kernel of mu_B mu_A, with a row for every configuration."""
    if table.size > DENSE_CAP:
        raise StateSpaceTooLargeError(table.size, DENSE_CAP, what="dense two-block kernel")
    return (specification_operator(table, b) @ specification_operator(table, a)).toarray()


def two_block_epsilon(table: GibbsTable, a: Region, b: Region) -> float:
    """Smallest eps with ||mu_B mu_A g - mu g||_inf <= eps mu|g| for all g.

    The sup runs over every configuration eta, including those of zero mass.
    """
    if (a | b) != table.region:
        msg = "Two-block decomposition must cover the region"
        raise PreconditionError(msg)
    kernel = two_block_kernel(table, a, b)
    support = table.support
    density = kernel[:, support] / table.probs[support][None, :]
    return float(np.abs(density - 1.0).max())


def theta(epsilon: float) -> float:
    """84 eps / (1 - eps)^2."""
    if not 0.0 <= epsilon < 1.0:
        msg = f"theta needs 0 <= eps < 1, got {epsilon}"
        raise DomainError(msg)
    return 84.0 * epsilon / (1.0 - epsilon) ** 2


def check_two_block(
    table: GibbsTable,
    a: Region,
    b: Region,
    f: np.ndarray | ConfigFunction,
    epsilon: float | None = None,
) -> list[FactorizationReport]:
    """Both two-block entropy bounds and the smoothed penalty bound at the exact eps."""
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    eps = two_block_epsilon(table, a, b) if epsilon is None else epsilon
    if eps >= 1.0:
        detail = f"eps={eps:.6g} >= 1: two-block bound inapplicable"
        return [FactorizationReport("two_block", math.nan, math.nan, None, None, detail=detail)]
    th = theta(eps)
    ent = entropy(table, values)
    smoothed = conditional_expectation(table, a, values)
    extras = {"epsilon": eps, "theta": th}

    rhs1 = expected_block_entropy(table, a, values) + expected_block_entropy(table, b, values) + th * ent
    rhs2 = (
        expected_block_entropy(table, a, values)
        + expected_block_entropy(table, b, smoothed)
        + th * entropy(table, smoothed)
    )
    mean = expectation(table, values)
    twice = conditional_expectation(table, b, smoothed)
    ratio = np.divide(twice, mean, out=np.ones_like(twice), where=(twice > 0) & (mean > 0))
    penalty = float(table.probs @ np.where(values > 0, values * np.log(ratio), 0.0))
    return [
        FactorizationReport("two_block_plain", ent, rhs1, _ratio(ent, rhs1), _holds(ent, rhs1), extras=extras),
        FactorizationReport("two_block_smoothed", ent, rhs2, _ratio(ent, rhs2), _holds(ent, rhs2), extras=extras),
        FactorizationReport(
            "two_block_penalty", penalty, th * ent, _ratio(penalty, th * ent), _holds(penalty, th * ent), extras=extras
        ),
    ]


def _union(dim: int, regions: Sequence[Region]) -> Region:
    out = Region.empty(dim)
    for r in regions:
        out = out | r
    return out


def check_tensorization(
    table: GibbsTable,
    rows: Sequence[Sequence[Region]],
    f: np.ndarray | ConfigFunction,
    row_constants: Sequence[float] | None = None,
) -> FactorizationReport:
    """Row-wise factorization constants combine into one over the columns.

    ``rows[i][j]`` is the block A_{i,j}; rows R_i are unions over j and columns
    C_j unions over i. Without ``row_constants``, s_i is measured on the
    functions the row-wise bound is applied to, mu_{L_{i-1}} f with L_i the
    union of the first i rows; with them, the row-wise hypothesis is checked
    on those same functions first.
    """
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    dim = table.region.dim
    row_sets = [_union(dim, row) for row in rows]
    lam = _union(dim, row_sets)
    if sum(len(r) for r in row_sets) != len(lam):
        msg = "Rows must be disjoint"
        raise PreconditionError(msg)
    require_product(table, row_sets, lam)

    width = max(len(row) for row in rows)
    columns = [_union(dim, [row[j] for row in rows if j < len(row)]) for j in range(width)]

    measured: list[float] = []
    prefix = Region.empty(dim)
    for i, row in enumerate(rows):
        g = conditional_expectation(table, prefix, values) if prefix else values
        num = expected_block_entropy(table, row_sets[i], g)
        den = sum(expected_block_entropy(table, block, g) for block in row)
        s_i = _ratio(num, den)
        s_i = 0.0 if s_i is None else s_i
        if row_constants is not None:
            if not _holds(num, row_constants[i] * den):
                detail = f"row {i} hypothesis fails: s_{i}={row_constants[i]:.6g} < measured {s_i:.6g}"
                return FactorizationReport("tensorization", num, row_constants[i] * den, s_i, None, detail=detail)
            s_i = row_constants[i]
        measured.append(s_i)
        prefix = prefix | row_sets[i]

    s = max(measured)
    lhs = expected_block_entropy(table, lam, values)
    rhs = s * sum(expected_block_entropy(table, c, values) for c in columns)
    passed = _holds(lhs, rhs) if math.isfinite(s) else True
    extras = {"s": s, **{f"s_{i}": v for i, v in enumerate(measured)}}
    return FactorizationReport("tensorization", lhs, rhs, _ratio(lhs, rhs), passed, extras=extras)


def rough_entropy_constant(mu_star: float) -> float:
    """Constant c with Ent f <= c Var(sqrt f) for a measure with minimal atom ``mu_star``."""
    if not 0.0 < mu_star <= 0.5:
        if mu_star == 1.0:
            return 0.0
        msg = f"Minimal atom must lie in (0, 1/2], got {mu_star}"
        raise DomainError(msg)
    if math.isclose(mu_star, 0.5, rel_tol=1e-12):
        return 2.0
    return math.log(1.0 / mu_star - 1.0) / (1.0 - 2.0 * mu_star)


@dataclass(frozen=True)
class DeltaEstimate:
    """Even/odd factorization constant: optimizer bound plus the analytic lower bound."""

    delta_hat: float
    witness: np.ndarray
    converged: bool
    source: str
    rough_bound: float
    gap_even_odd: float
    mu_star: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "delta_hat": self.delta_hat,
            "converged": self.converged,
            "source": self.source,
            "rough_bound": self.rough_bound,
            "gap_even_odd": self.gap_even_odd,
            "mu_star": self.mu_star,
        }


def even_odd_delta(table: GibbsTable, config: OptimizerConfig) -> DeltaEstimate:
    """inf_f mu[Ent_E f + Ent_O f] / Ent f, estimated from above and bounded from below."""
    from .dynamics import BlockDynamics, spectral_gap

    region = table.region
    weights = BlockWeights.even_odd(region)
    even, odd = even_odd_split(region)
    mu_star = table.min_prob
    if int(table.support.sum()) <= 1:
        return DeltaEstimate(1.0, np.ones(table.size), True, "single admissible configuration", 1.0, 1.0, mu_star)

    candidates = measurable_candidates(table, even, config.exhaustive_cap)
    candidates += measurable_candidates(table, odd, config.exhaustive_cap)
    result = optimize_ratio(
        table,
        BlockEntropyFunctional(table, weights.positive()),
        EntropyFunctional(table),
        "min",
        config,
        candidates=candidates,
    )
    delta_hat = min(result.value, 1.0)
    gap = spectral_gap(BlockDynamics(table, weights)).gap
    c0 = rough_entropy_constant(mu_star)
    rough = gap / c0 if c0 > 0 else 1.0
    if rough > delta_hat + 1e-8:
        logger.warning("Analytic lower bound %.6g exceeds delta_hat %.6g", rough, delta_hat)
    return DeltaEstimate(delta_hat, result.witness, result.converged, result.source, rough, gap, mu_star)


@dataclass(frozen=True)
class ScaleDelta:
    k: int
    delta_hat: float
    worst_region: Region
    worst_boundary: BoundaryCondition
    regions: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "delta_hat": self.delta_hat,
            "worst_region": self.worst_region.to_json(),
            "worst_boundary": self.worst_boundary.to_json(),
            "regions": self.regions,
        }


def scale_delta(model: SpinModel, k: int, config: OptimizerConfig, cap: int = DENSE_CAP) -> ScaleDelta:
    """delta_hat(k) for chains: minimum over intervals in F_k and all boundary spins."""
    best: tuple[float, Region, BoundaryCondition] | None = None
    count = 0
    for n in itertools.count(1):
        region = Region.chain(n)
        if not in_scale_class(region, k) or model.q**n > cap:
            break
        for tau in BoundaryCondition.sweep(boundary(region), model.q):
            try:
                table = gibbs_table(model, region, tau, cap)
            except NonPermissiveError:
                continue
            count += 1
            value = even_odd_delta(table, config).delta_hat
            if best is None or value < best[0]:
                best = (value, region, tau)
    if best is None:
        msg = f"No admissible interval at scale {k}"
        raise PreconditionError(msg)
    return ScaleDelta(k, best[0], best[1], best[2], count)


def epsilon_k(dim: int, big_k: float, a: float, l_k: float) -> float:
    """5^d K l_k^(d-1) exp(-a l_k / 4)."""
    return 5.0**dim * big_k * l_k ** (dim - 1) * math.exp(-a * l_k / 4.0)


@dataclass(frozen=True)
class RecursionReport:
    k: int
    l_k: float
    delta_prev: float
    delta_k: float
    bound: float
    holds: bool
    epsilon_k: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "k": self.k,
            "l_k": self.l_k,
            "delta_prev": self.delta_prev,
            "delta_k": self.delta_k,
            "bound": self.bound,
            "holds": self.holds,
            "epsilon_k": self.epsilon_k,
        }


def recursion_consistency(
    delta_prev: float, delta_k: float, k: int, dim: int = 1, eps_k: float | None = None
) -> RecursionReport:
    """Compare delta(k) with (1 - 10 / (l_k delta(k-1))) delta(k-1); informational only."""
    l_k = ell(k, dim)
    bound = (1.0 - 10.0 / (l_k * delta_prev)) * delta_prev
    holds = delta_k >= bound - 1e-12
    if not holds:
        logger.warning("Recursion bound fails at k=%d: delta=%.6g < %.6g", k, delta_k, bound)
    return RecursionReport(k, l_k, delta_prev, delta_k, bound, holds, eps_k)


def jensen_check(
    table: GibbsTable, block: Region, f: np.ndarray | ConfigFunction, floor: float = 1e-12
) -> FactorizationReport:
    """Ent_A f <= cov_A(f, log f) on every fiber, with f clamped at ``floor``."""
    values = f.values if isinstance(f, ConfigFunction) else np.asarray(f, dtype=np.float64)
    values = np.maximum(values, floor)
    lhs = block_entropy(table, block, values)
    rhs = covariance_block(table, block, values, np.log(values))
    gap = np.where(table.support, lhs - rhs, -np.inf)
    worst = int(np.argmax(gap))
    lhs_w, rhs_w = float(lhs[worst]), float(rhs[worst])
    return FactorizationReport("jensen", lhs_w, rhs_w, _ratio(lhs_w, rhs_w), _holds(lhs_w, rhs_w))


@dataclass(frozen=True)
class TwoBlockBound:
    """Exact two-block eps next to its boundary-interpolation bounds."""

    exact: float
    psi_sup: float
    single_flip: float
    flips: int
    interpolation: float

    @property
    def ordered(self) -> bool:
        tol = 1e-10
        return self.exact <= self.psi_sup + tol and self.psi_sup <= self.interpolation + tol

    def to_dict(self) -> dict[str, Any]:
        return {
            "exact": self.exact,
            "psi_sup": _json_float(self.psi_sup),
            "single_flip": _json_float(self.single_flip),
            "flips": self.flips,
            "interpolation": _json_float(self.interpolation),
            "ordered": self.ordered,
        }


def _psi_ratio_deviation(psi: np.ndarray, reference: np.ndarray) -> float:
    both_zero = (psi == 0) & (reference == 0)
    if np.any((reference == 0) & (psi > 0)):
        return math.inf
    ratio = np.divide(psi, reference, out=np.ones_like(psi), where=~both_zero)
    return float(np.abs(ratio - 1.0).max())


def ssm_two_block_bound(model: SpinModel, table: GibbsTable, a: Region, b: Region) -> TwoBlockBound:
    """Bound the two-block eps through marginal densities on B under changes of its boundary inside V.

    With D = V \\ A inside B and N_B the boundary of B inside V, eps is at most
    the sup over boundary pairs of |psi'/psi - 1| on D, which is in turn at most
    (1 + eps_0)^m - 1 where eps_0 is the worst single-site flip on N_B.
    """
    region, tau = table.region, table.tau
    if tau.free:
        msg = "Boundary interpolation needs a fixed boundary condition"
        raise PreconditionError(msg)
    delta = region - a
    if not delta <= b:
        msg = "The complement of A must lie inside B"
        raise PreconditionError(msg)
    exact = two_block_epsilon(table, a, b)
    shell = boundary(b) & region
    if not delta:
        return TwoBlockBound(exact, 0.0, 0.0, len(shell), 0.0)

    psis: dict[tuple[int, ...], np.ndarray] = {}
    for spins in itertools.product(range(model.q), repeat=len(shell)):
        eta = tau.merged(shell, spins)
        try:
            sub = gibbs_table(model, b, eta.restricted(b), cap=DENSE_CAP)
            psis[spins] = marginal_density(sub, delta)
        except NonPermissiveError:
            psis[spins] = np.zeros(model.q ** len(delta))

    psi_sup = 0.0
    single = 0.0
    for s1, s2 in itertools.permutations(psis, 2):
        dev = _psi_ratio_deviation(psis[s1], psis[s2]) if psis[s2].any() or psis[s1].any() else 0.0
        psi_sup = max(psi_sup, dev)
        if sum(x != y for x, y in zip(s1, s2, strict=True)) == 1:
            single = max(single, dev)
    m = len(shell)
    interpolation = (1.0 + single) ** m - 1.0 if math.isfinite(single) else math.inf
    return TwoBlockBound(exact, psi_sup, single, m, interpolation)


def shannon_entropy(p: np.ndarray) -> float:
    """-sum p log p, used for product-case cross checks."""
    return float(-xlogy(p, p).sum())
