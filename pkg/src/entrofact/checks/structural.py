"""Exact identities: DLR, telescoping, the variational principle and generator consistency."""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from ..dynamics import BlockDynamics, dirichlet_form
from ..gibbs import IDENTITY_TOL, dlr_check, expectation, telescope_check, variational_check
from ..lattice import Region
from .base import CheckContext, CheckReport, random_subsets

if TYPE_CHECKING:
    from ..config import ExperimentConfig


def _identity_report(name: str, worst: float, evaluated: int, tol: float = IDENTITY_TOL) -> CheckReport:
    status = "pass" if worst <= tol else "fail"
    detail = "" if status == "pass" else f"worst residual {worst:.3g} above {tol:.0e}"
    return CheckReport(name, status, {"worst_residual": worst, "evaluated": evaluated, "tolerance": tol}, detail)


class DLRCheck:
    """mu_V (mu_A f) = mu_V f for random blocks and functions."""

    CHECK_ENABLED: bool = True
    name: str = "dlr"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        worst, count = 0.0, 0
        for t, table in enumerate(ctx.tables):
            rng = ctx.rng(1, t)
            blocks = random_subsets(table.region, rng, ctx.samples)
            for block, f in zip(blocks, ctx.densities(table, 2 + t), strict=True):
                worst = max(worst, dlr_check(table, block, f))
                count += 1
        return _identity_report(self.name, worst, count)


class TelescopeCheck:
    """Entropy decomposition and telescoping along nested chains of blocks."""

    CHECK_ENABLED: bool = True
    name: str = "telescope"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        worst, count = 0.0, 0
        for t, table in enumerate(ctx.tables):
            rng = ctx.rng(3, t)
            for f in ctx.densities(table, 4 + t):
                order = rng.permutation(len(table.region))
                pts = [table.region.points[i] for i in order]
                chain = [Region(table.region.dim, tuple(pts[: m + 1])) for m in range(len(pts))]
                worst = max(worst, telescope_check(table, chain, f).worst)
                count += 1
        return _identity_report(self.name, worst, count)


class VariationalCheck:
    """mu(g h) <= Ent g whenever mu e^h <= 1, with equality at h = log(g / mu g)."""

    CHECK_ENABLED: bool = True
    name: str = "variational"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        violations, count, gap_at_optimum = 0, 0, 0.0
        for t, table in enumerate(ctx.tables):
            gs = ctx.densities(table, 5 + t)
            hs = ctx.densities(table, 6 + t)
            for g, other in zip(gs, hs, strict=True):
                other = np.maximum(other, 1e-300)
                h = np.log(other / expectation(table, other))
                if not variational_check(table, g, h).holds:
                    violations += 1
                positive = np.maximum(g, 1e-300)
                h_star = np.log(positive / expectation(table, positive))
                optimum = variational_check(table, positive, h_star)
                gap_at_optimum = max(gap_at_optimum, abs(optimum.lhs - optimum.entropy))
                count += 1
        status = "pass" if violations == 0 and gap_at_optimum <= 1e-8 else "fail"
        metrics = {"evaluated": count, "violations": violations, "gap_at_optimum": gap_at_optimum}
        return CheckReport(self.name, status, metrics)


class GeneratorCheck:
    """Reversibility, E(f, f) = <f, -Lf>, E(f, 1) = 0 and nonnegative rates."""

    CHECK_ENABLED: bool = True
    name: str = "generator"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        worst, count, min_rate = 0.0, 0, 0.0
        for t, table in enumerate(ctx.tables):
            dyn = BlockDynamics(table, ctx.weights)
            rng = ctx.rng(7, t)
            ones = np.ones(table.size)
            min_rate = min(min_rate, dyn.min_off_diagonal())
            for _ in range(ctx.samples):
                f, g = rng.normal(size=table.size), rng.normal(size=table.size)
                identity = abs(dirichlet_form(dyn, f, f) - dyn.inner(f, -dyn.apply(f)))
                worst = max(worst, dyn.reversibility_residual(f, g), identity, abs(dirichlet_form(dyn, f, ones)))
                count += 1
        report = _identity_report(self.name, worst, count)
        if min_rate < 0:
            return CheckReport(self.name, "fail", {**report.metrics, "min_rate": min_rate}, "negative jump rate")
        return report
