"""Strong spatial mixing: boundary-flip deviations of marginal densities and their decay."""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from .errors import NonPermissiveError, PreconditionError, StateSpaceTooLargeError
from .gibbs import GibbsTable, gibbs_table, marginal_density
from .lattice import Point, Region, boundary, graph_distance
from .models import DEFAULT_CAP_STATES, BoundaryCondition, SpinModel
from .workers import make_rng, ordered_map

logger = logging.getLogger(__name__)

DEVIATION_FLOOR = 1e-13
MIN_FIT_DISTANCE = 2
MIN_FIT_POINTS = 4
EXHAUSTIVE_SITES = 12
BOUNDARY_SWEEP_CAP = 1 << 10


def _flip_tables(
    model: SpinModel, region: Region, tau: BoundaryCondition, x: Point, cap: int
) -> list[GibbsTable | None]:
    """Tables for every spin at ``x``; None where no configuration has mass."""
    tables: list[GibbsTable | None] = []
    for s in range(model.q):
        try:
            tables.append(gibbs_table(model, region, tau.with_spin(x, s), cap))
        except NonPermissiveError:
            tables.append(None)
    return tables


def _ratio_deviation(num: np.ndarray, den: np.ndarray) -> float:
    """sup over den > 0 of |num/den - 1|; inf when num charges a null point of den."""
    if np.any((den == 0) & (num > 0)):
        return math.inf
    mask = den > 0
    if not mask.any():
        return 0.0
    return float(np.abs(num[mask] / den[mask] - 1.0).max())


def _deviation_from_tables(tables: Sequence[GibbsTable | None], delta: Region) -> float:
    psis = [marginal_density(t, delta) if t is not None else None for t in tables]
    if any(p is None for p in psis) and any(p is not None for p in psis):
        return math.inf
    worst = 0.0
    for a, b in itertools.permutations([p for p in psis if p is not None], 2):
        worst = max(worst, _ratio_deviation(a, b))
    return worst


def psi_deviation(
    model: SpinModel,
    region: Region,
    delta: Region,
    x: Point,
    tau: BoundaryCondition,
    cap: int = DEFAULT_CAP_STATES,
    relax_side: int | None = None,
) -> float:
    """sup over spin pairs at ``x`` and assignments on ``delta`` of |psi'/psi - 1|.

    Returns inf when one flip charges an assignment the other gives zero mass
    (absolute continuity fails). With ``relax_side`` L, hard-constraint models
    are only evaluated at distance at least L/2.
    """
    if not delta <= region:
        msg = "Marginal support must lie inside the region"
        raise PreconditionError(msg)
    if x not in boundary(region):
        msg = f"Flip vertex {x} is not on the boundary of the region"
        raise PreconditionError(msg)
    if tau.free:
        msg = "Boundary flips need a fixed boundary condition"
        raise PreconditionError(msg)
    distance = graph_distance(Region(region.dim, (x,)), delta)
    if relax_side is not None and model.has_hard_constraints and distance < relax_side / 2:
        msg = f"Distance {distance} below L/2 = {relax_side / 2} for a hard-constraint model"
        raise PreconditionError(msg)
    value = _deviation_from_tables(_flip_tables(model, region, tau, x, cap), delta)
    if math.isinf(value):
        logger.warning("Absolute continuity fails for flips at %s (delta %s)", x, delta)
    return value


@dataclass(frozen=True)
class PsiSample:
    delta: Region
    x: Point
    distance: int
    deviation: float

    def to_dict(self) -> dict[str, Any]:
        dev: float | str = self.deviation if math.isfinite(self.deviation) else "inf"
        return {"delta": self.delta.to_json(), "x": list(self.x), "distance": self.distance, "deviation": dev}


def collect_samples(
    model: SpinModel,
    region: Region,
    deltas: Iterable[Region],
    tau: BoundaryCondition,
    points: Iterable[Point] | None = None,
    cap: int = DEFAULT_CAP_STATES,
    threads: int = 1,
) -> list[PsiSample]:
    """Deviation for every (delta, x) pair, flip tables shared per x."""
    xs = list(boundary(region)) if points is None else list(points)
    delta_list = list(deltas)

    def per_point(x: Point) -> list[PsiSample]:
        tables = _flip_tables(model, region, tau, x, cap)
        x_region = Region(region.dim, (x,))
        return [
            PsiSample(d, x, graph_distance(x_region, d), _deviation_from_tables(tables, d)) for d in delta_list
        ]

    return [s for chunk in ordered_map(per_point, xs, threads=threads) for s in chunk]


@dataclass(frozen=True)
class SweepPlan:
    """Which regions, marginal sets and flip vertices a sweep visits."""

    name: str
    entries: tuple[tuple[Region, Region, Point, BoundaryCondition], ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "entries": [
                {"region": r.to_json(), "delta": d.to_json(), "x": list(x), "tau": t.to_json()}
                for r, d, x, t in self.entries
            ],
        }


def chain_sweep(n_max: int, left_spin: int = 0, right_spin: int = 0, n_min: int = 1) -> SweepPlan:
    """Chains 0..n-1 with delta at site 0 and the flip at n, so d(x, delta) = n."""
    entries = []
    for n in range(n_min, n_max + 1):
        region = Region.chain(n)
        tau = BoundaryCondition.of({(-1,): left_spin, (n,): right_spin})
        entries.append((region, Region(1, ((0,),)), (n,), tau))
    return SweepPlan(f"chain {n_min}..{n_max}", tuple(entries))


@dataclass(frozen=True)
class SSMEstimate:
    """Fit of log(deviation) = log K - a d over the sampled distances."""

    samples: tuple[tuple[int, float], ...]
    k_hat: float | None
    a_hat: float | None
    residual: float | None
    excluded: int = 0
    too_fast: bool = False
    plan: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "samples": [[d, v if math.isfinite(v) else "inf"] for d, v in self.samples],
            "k_hat": self.k_hat,
            "a_hat": self.a_hat,
            "residual": self.residual,
            "excluded": self.excluded,
            "too_fast": self.too_fast,
            "plan": self.plan,
        }


def fit_decay(
    samples: Iterable[tuple[int, float]],
    floor: float = DEVIATION_FLOOR,
    min_distance: int = MIN_FIT_DISTANCE,
    plan: dict[str, Any] | None = None,
) -> SSMEstimate:
    """Least-squares fit on the worst deviation per distance."""
    rows = sorted((int(d), float(v)) for d, v in samples)
    if any(v < 0 for _, v in rows):
        msg = "Deviations must be nonnegative"
        raise ValueError(msg)
    worst: dict[int, float] = {}
    for d, v in rows:
        if d >= min_distance:
            worst[d] = max(worst.get(d, 0.0), v)
    usable = {d: v for d, v in worst.items() if floor < v < math.inf}
    excluded = len(worst) - len(usable)
    plan = plan or {}
    if not usable:
        logger.info("All %d deviations below floor %.0e: decay too fast to fit", len(worst), floor)
        return SSMEstimate(tuple(rows), None, None, None, excluded, too_fast=True, plan=plan)
    if len(usable) < MIN_FIT_POINTS:
        msg = f"Need at least {MIN_FIT_POINTS} distances with positive deviation, got {len(usable)}"
        raise PreconditionError(msg)
    d = np.array(sorted(usable), dtype=np.float64)
    y = np.log([usable[int(k)] for k in d])
    fit = stats.linregress(d, y)
    resid = y - (fit.intercept + fit.slope * d)
    return SSMEstimate(
        tuple(rows),
        float(math.exp(fit.intercept)),
        float(-fit.slope),
        float(np.sqrt(np.mean(resid * resid))),
        excluded,
        plan=plan,
    )


def fit_ssm(
    model: SpinModel, plan: SweepPlan, cap: int = DEFAULT_CAP_STATES, threads: int = 1
) -> SSMEstimate:
    """Evaluate every entry of the plan and fit (K, a)."""

    def evaluate(entry: tuple[Region, Region, Point, BoundaryCondition]) -> tuple[int, float]:
        region, delta, x, tau = entry
        tables = _flip_tables(model, region, tau, x, cap)
        return graph_distance(Region(region.dim, (x,)), delta), _deviation_from_tables(tables, delta)

    samples = ordered_map(evaluate, plan.entries, threads=threads)
    return fit_decay(samples, plan=plan.to_dict())


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    worst_margin: float
    worst: PsiSample | None
    evaluated: int
    exhaustive: bool
    boundaries: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "worst_margin": self.worst_margin if math.isfinite(self.worst_margin) else "-inf",
            "worst": self.worst.to_dict() if self.worst else None,
            "evaluated": self.evaluated,
            "exhaustive": self.exhaustive,
            "boundaries": self.boundaries,
        }


def _subsets(region: Region) -> Iterable[Region]:
    for m in range(1, len(region) + 1):
        for combo in itertools.combinations(region.points, m):
            yield Region(region.dim, combo)


def check_condition(
    model: SpinModel,
    region: Region,
    big_k: float,
    a: float,
    tau: BoundaryCondition | None = None,
    budget: int = 256,
    seed: int | None = None,
    relax_side: int | None = None,
    cap: int = DEFAULT_CAP_STATES,
) -> ConditionReport:
    """Deviation <= K exp(-a d(x, delta)) for all delta and boundary flips x.

    Every nonempty delta is visited up to ``EXHAUSTIVE_SITES`` vertices,
    otherwise ``budget`` random ones drawn with ``seed``. Without ``tau``
    all boundary conditions are swept.
    """
    if len(region) <= EXHAUSTIVE_SITES:
        deltas = list(_subsets(region))
        exhaustive = True
    else:
        if seed is None:
            msg = "A seed is required for a sampled condition sweep"
            raise ValueError(msg)
        rng = make_rng(seed, 7)
        deltas = []
        for _ in range(budget):
            mask = rng.random(len(region)) < 0.5
            if not mask.any():
                mask[rng.integers(len(region))] = True
            deltas.append(Region(region.dim, tuple(p for p, keep in zip(region.points, mask, strict=True) if keep)))
        exhaustive = False

    shell = boundary(region)
    if tau is None:
        if model.q ** len(shell) > BOUNDARY_SWEEP_CAP:
            raise StateSpaceTooLargeError(model.q ** len(shell), BOUNDARY_SWEEP_CAP, what="boundary sweep")
        boundaries = list(BoundaryCondition.sweep(shell, model.q))
    else:
        boundaries = [tau]

    worst: PsiSample | None = None
    worst_margin = math.inf
    evaluated = 0
    for eta in boundaries:
        for sample in collect_samples(model, region, deltas, eta, cap=cap):
            if relax_side is not None and model.has_hard_constraints and sample.distance < relax_side / 2:
                continue
            evaluated += 1
            margin = big_k * math.exp(-a * sample.distance) - sample.deviation
            if margin < worst_margin:
                worst_margin, worst = margin, sample
    passed = worst_margin >= -1e-12
    if not passed and worst is not None:
        logger.info("Condition fails at delta=%s x=%s (margin %.3g)", worst.delta, worst.x, worst_margin)
    return ConditionReport(passed, worst_margin, worst, evaluated, exhaustive, len(boundaries))
