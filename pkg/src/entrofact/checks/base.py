"""Base protocol and types for verification checks."""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Any, Literal, Protocol, runtime_checkable

import numpy as np

from ..gibbs import GibbsTable, gibbs_table
from ..inequalities import BlockWeights, FactorizationReport
from ..lattice import Region
from ..models import BoundaryCondition, SpinModel
from ..optimize import OptimizerConfig, random_densities
from ..workers import make_rng, resolve_threads

if TYPE_CHECKING:
    from ..artifacts import ArtifactWriter
    from ..config import ExperimentConfig

Status = Literal["pass", "fail", "skipped", "error"]


@dataclass(frozen=True)
class CheckReport:
    """Immutable outcome of one check, with the numbers that decided it."""

    check: str
    status: Status
    metrics: dict[str, Any] = field(default_factory=dict)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("pass", "skipped")

    def to_dict(self) -> dict[str, Any]:
        return {"check": self.check, "status": self.status, "metrics": self.metrics, "detail": self.detail}


@dataclass
class CheckContext:
    """Everything a check reads: resolved model, region, tables and random streams."""

    config: ExperimentConfig
    writer: ArtifactWriter | None = None

    @cached_property
    def model(self) -> SpinModel:
        return self.config.build_model()

    @cached_property
    def region(self) -> Region:
        return self.config.build_region()

    @cached_property
    def boundaries(self) -> list[BoundaryCondition]:
        return self.config.build_boundaries(self.region)

    @cached_property
    def weights(self) -> BlockWeights:
        return self.config.build_weights(self.region)

    @cached_property
    def optimizer(self) -> OptimizerConfig:
        return self.config.optimizer_config()

    @cached_property
    def tables(self) -> list[GibbsTable]:
        return [gibbs_table(self.model, self.region, tau, self.cap) for tau in self.boundaries]

    @property
    def cap(self) -> int:
        return self.config.cap_states

    @property
    def threads(self) -> int:
        return resolve_threads(self.config.threads)

    @property
    def samples(self) -> int:
        return self.config.samples

    def rng(self, *stream: int) -> np.random.Generator:
        return make_rng(self.optimizer.require_seed(), *stream)

    def densities(self, table: GibbsTable, stream: int, count: int | None = None) -> list[np.ndarray]:
        return random_densities(table, self.rng(stream), self.samples if count is None else count)

    def write_series(self, name: str, columns: Mapping[str, Sequence[float] | np.ndarray]) -> None:
        if self.writer is not None:
            self.writer.write_series(name, columns)


@runtime_checkable
class VerificationCheck(Protocol):
    """Interface for pluggable verification checks."""

    CHECK_ENABLED: bool
    name: str
    stochastic: bool
    in_default_suite: bool

    def run(self, ctx: CheckContext) -> CheckReport:
        """Evaluate the check on the context.

        Mathematical failures come back as status "fail"; a precondition that
        does not hold for this context raises ``PreconditionError`` and is
        recorded as "skipped" by the runner.
        """
        ...


def random_subsets(region: Region, rng: np.random.Generator, count: int) -> list[Region]:
    """Nonempty random blocks of the region."""
    out = []
    pts = region.points
    for _ in range(count):
        mask = rng.random(len(pts)) < 0.5
        if not mask.any():
            mask[rng.integers(len(pts))] = True
        out.append(Region(region.dim, tuple(p for p, keep in zip(pts, mask, strict=True) if keep)))
    return out


def random_weights(region: Region, rng: np.random.Generator, blocks: int = 4) -> BlockWeights:
    """Random fractional weights over random blocks plus light singletons."""
    chosen = [(b, float(rng.uniform(0.1, 2.0))) for b in random_subsets(region, rng, blocks)]
    singles = [(Region(region.dim, (p,)), float(rng.uniform(0.0, 0.5))) for p in region]
    return BlockWeights(region, tuple(chosen + singles))


def overlapping_halves(region: Region) -> tuple[Region, Region]:
    """Two blocks covering the region in canonical order, sharing the middle vertex."""
    pts = region.points
    half = len(pts) // 2
    return Region(region.dim, pts[: half + 1]), Region(region.dim, pts[half:])


def summarize(name: str, reports: Iterable[FactorizationReport], **metrics: Any) -> CheckReport:
    """Pass iff no evaluated report failed; hypotheses not met are counted as skipped."""
    evaluated = violations = skipped = degenerate = 0
    worst = -math.inf
    first_failure = ""
    for rep in reports:
        if rep.passed is None:
            skipped += 1
            continue
        evaluated += 1
        if rep.ratio is None:
            degenerate += 1
        elif math.isfinite(rep.ratio):
            worst = max(worst, rep.ratio)
        if not rep.passed:
            violations += 1
            if not first_failure:
                first_failure = f"{rep.name}: lhs={rep.lhs:.6g} rhs={rep.rhs:.6g} {rep.detail}".strip()
    summary = {
        "evaluated": evaluated,
        "violations": violations,
        "skipped": skipped,
        "degenerate": degenerate,
        "worst_ratio": worst if evaluated > degenerate else None,
        **metrics,
    }
    status: Status = "pass" if violations == 0 else "fail"
    return CheckReport(name, status, summary, first_failure)


def flatten(groups: Iterable[Iterable[FactorizationReport]]) -> list[FactorizationReport]:
    return list(itertools.chain.from_iterable(groups))
