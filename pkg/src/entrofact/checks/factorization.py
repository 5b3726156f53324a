"""Entropy factorization checks: block, Shearer, two-block, tensorization, reduction and Jensen."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np

from ..errors import PreconditionError
from ..gibbs import gibbs_table, is_product
from ..inequalities import (
    PRODUCT_TOL,
    BlockWeights,
    FactorizationReport,
    check_btc,
    check_shearer_product,
    check_tensorization,
    check_two_block,
    estimate_best_constant,
    even_odd_delta,
    jensen_check,
    reduction_even_odd,
    ssm_two_block_bound,
    two_block_epsilon,
)
from ..lattice import Region, boundary
from ..models import BoundaryCondition
from .base import CheckContext, CheckReport, overlapping_halves, random_subsets, random_weights, summarize

if TYPE_CHECKING:
    from ..config import ExperimentConfig

logger = logging.getLogger(__name__)

EPS_ZERO = 1e-12
DELTA_PRODUCT_TOL = 1e-4


class _BlockFactorization:
    """Shared body of the block and approximate tensorization checks."""

    CHECK_ENABLED: bool = False
    name: str = ""
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def weights(self, ctx: CheckContext) -> BlockWeights:
        raise NotImplementedError

    def run(self, ctx: CheckContext) -> CheckReport:
        weights = self.weights(ctx)
        constants: list[float] = []
        worst_sampled = 0.0
        infinite = 0
        for t, table in enumerate(ctx.tables):
            estimate = estimate_best_constant(table, weights, ctx.optimizer)
            constants.append(estimate.value)
            for f in ctx.densities(table, 20 + t):
                rep = check_btc(table, weights, f)
                if rep.ratio is None:
                    continue
                if math.isinf(rep.ratio):
                    infinite += 1
                else:
                    worst_sampled = max(worst_sampled, rep.ratio)
        metrics = {
            "c_hat": max(constants),
            "c_hat_per_boundary": constants,
            "worst_sampled_ratio": worst_sampled,
            "gamma": weights.gamma,
            "infinite_ratios": infinite,
        }
        if infinite:
            return CheckReport(self.name, "fail", metrics, "some block never sees a coordinate that f depends on")
        return CheckReport(self.name, "pass", metrics)


class BTCCheck(_BlockFactorization):
    """Best constant C_hat in gamma Ent f <= C sum_A alpha_A mu[Ent_A f] for the configured weights."""

    CHECK_ENABLED: bool = True
    name: str = "btc"

    def weights(self, ctx: CheckContext) -> BlockWeights:
        return ctx.weights


class ATCCheck(_BlockFactorization):
    """Approximate tensorization: block factorization with singleton weights."""

    CHECK_ENABLED: bool = True
    name: str = "atc"

    def weights(self, ctx: CheckContext) -> BlockWeights:
        return BlockWeights.singletons(ctx.region)


class ShearerCheck:
    """Weighted Shearer inequality for random fractional covers; needs a product measure."""

    CHECK_ENABLED: bool = True
    name: str = "shearer"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        reports: list[FactorizationReport] = []
        for t, table in enumerate(ctx.tables):
            rng = ctx.rng(30, t)
            for f in ctx.densities(table, 31 + t):
                reports.append(check_shearer_product(table, random_weights(table.region, rng), f))
        return summarize(self.name, reports)


class TwoBlockCheck:
    """Both two-block entropy bounds on overlapping halves at the exact eps."""

    CHECK_ENABLED: bool = True
    name: str = "two-block"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        if len(ctx.region) < 2:
            msg = "Two overlapping blocks need at least two sites"
            raise PreconditionError(msg)
        a, b = overlapping_halves(ctx.region)
        reports: list[FactorizationReport] = []
        epsilons: list[float] = []
        bounds: list[dict] = []
        for t, table in enumerate(ctx.tables):
            eps = two_block_epsilon(table, a, b)
            epsilons.append(eps)
            if eps <= EPS_ZERO:
                eps = 0.0
            for f in ctx.densities(table, 40 + t):
                reports.extend(check_two_block(table, a, b, f, epsilon=eps))
            if not table.tau.free:
                try:
                    bound = ssm_two_block_bound(ctx.model, table, a, b)
                except PreconditionError as exc:
                    logger.info("Two-block interpolation bound skipped: %s", exc)
                    continue
                bounds.append(bound.to_dict())
        report = summarize(self.name, reports, epsilon=epsilons, interpolation=bounds)
        unordered = [i for i, bd in enumerate(bounds) if not bd["ordered"]]
        if unordered and report.status == "pass":
            detail = f"interpolation bound below the exact eps for boundary {unordered[0]}"
            return CheckReport(self.name, "fail", report.metrics, detail)
        return report


def two_row_construction(width: int = 3) -> tuple[Region, list[list[Region]]]:
    """Rows at y=0 and y=2 with overlapping blocks of two adjacent sites in each row."""
    rows = []
    points = []
    for y in (0, 2):
        row_points = [(x, y) for x in range(width)]
        points.extend(row_points)
        rows.append([Region(2, (row_points[j], row_points[j + 1])) for j in range(width - 1)])
    return Region(2, tuple(points)), rows


class TensorizationCheck:
    """Row-wise constants combine into a column factorization with s = max s_i."""

    CHECK_ENABLED: bool = True
    name: str = "tensorization"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        region, rows = two_row_construction()
        tau = BoundaryCondition.constant(self.config.boundary_spin, boundary(region))
        table = gibbs_table(ctx.model, region, tau, ctx.cap)
        reports = [check_tensorization(table, rows, f) for f in ctx.densities(table, 50)]
        worst_s = max((r.extras.get("s", 0.0) for r in reports), default=0.0)
        return summarize(self.name, reports, region=region.to_json(), worst_s=worst_s)


class ReductionCheck:
    """gamma Ent f <= 2 C_eo sum_A alpha_A mu[Ent_A f] with C_eo = 1 / delta_hat."""

    CHECK_ENABLED: bool = True
    name: str = "reduction"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        reports: list[FactorizationReport] = []
        c_values = []
        for t, table in enumerate(ctx.tables):
            delta = even_odd_delta(table, ctx.optimizer).delta_hat
            if delta <= 0:
                msg = "Even/odd constant is zero; the reduction has no hypothesis to use"
                raise PreconditionError(msg)
            c_eo = 1.0 / delta
            c_values.append(c_eo)
            rng = ctx.rng(60, t)
            for f in ctx.densities(table, 61 + t):
                reports.append(reduction_even_odd(table, c_eo, random_weights(table.region, rng), f))
        return summarize(self.name, reports, c_eo=c_values)


class DeltaCheck:
    """Even/odd factorization constant: delta_hat in (0, 1] above its analytic lower bound."""

    CHECK_ENABLED: bool = True
    name: str = "delta"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        estimates = []
        failures = []
        for table in ctx.tables:
            est = even_odd_delta(table, ctx.optimizer)
            estimates.append(est.to_dict())
            if not 0.0 < est.delta_hat <= 1.0:
                failures.append(f"delta_hat={est.delta_hat:.6g} outside (0, 1]")
            if est.rough_bound > est.delta_hat + 1e-8:
                failures.append(f"analytic bound {est.rough_bound:.6g} above delta_hat {est.delta_hat:.6g}")
            singles = [Region(table.region.dim, (p,)) for p in table.region]
            if is_product(table, singles, table.region) <= PRODUCT_TOL and abs(est.delta_hat - 1.0) > DELTA_PRODUCT_TOL:
                failures.append(f"product measure but delta_hat={est.delta_hat:.6g}")
        metrics = {"estimates": estimates, "delta_min": min(e["delta_hat"] for e in estimates)}
        if failures:
            return CheckReport(self.name, "fail", metrics, failures[0])
        return CheckReport(self.name, "pass", metrics)


class JensenCheck:
    """Ent_A f <= cov_A(f, log f) on every fiber."""

    CHECK_ENABLED: bool = True
    name: str = "jensen"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        reports: list[FactorizationReport] = []
        floor = self.config.optimizer_floor
        for t, table in enumerate(ctx.tables):
            blocks = random_subsets(table.region, ctx.rng(70, t), ctx.samples)
            for block, f in zip(blocks, ctx.densities(table, 71 + t), strict=True):
                reports.append(jensen_check(table, block, np.maximum(f, floor), floor))
        return summarize(self.name, reports)
