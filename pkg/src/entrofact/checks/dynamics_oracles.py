"""Closed-form oracles for the block dynamics.

Resampling the whole volume at rate one (alpha_V = 1) has
P_t = e^{-t} I + (1 - e^{-t}) mu, so its gap, mixing time, MLSI ratio and
entropy decay are known exactly. Independent uniform sites give the
product-chain TV formula.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from ..dynamics import (
    DENSE_CAP,
    BlockDynamics,
    check_gap_ordering,
    entropy_decay_check,
    lsi_constant,
    mlsi_constant,
    product_chain_tv,
    spectral_gap,
    tv_mixing_curve,
)
from ..errors import PreconditionError
from ..gibbs import GibbsTable, gibbs_table
from ..inequalities import BlockWeights, estimate_best_constant, rough_entropy_constant
from ..lattice import Region
from ..models import BoundaryCondition, make_potts
from .base import CheckContext, CheckReport

if TYPE_CHECKING:
    from ..config import ExperimentConfig

GAP_TOL = 1e-10
TMIX_TOL = 1e-6
PRODUCT_TV_TOL = 1e-8
MLSI_TOL = 1e-8


def _nontrivial(ctx: CheckContext) -> list[GibbsTable]:
    tables = [t for t in ctx.tables if int(t.support.sum()) > 1]
    if not tables:
        msg = "Every boundary condition leaves a single admissible configuration"
        raise PreconditionError(msg)
    return tables


def _full(table: GibbsTable) -> BlockDynamics:
    return BlockDynamics(table, BlockWeights.full(table.region))


def _verdict(name: str, failures: list[str], metrics: dict) -> CheckReport:
    if failures:
        return CheckReport(name, "fail", metrics, failures[0])
    return CheckReport(name, "pass", metrics)


class GapCheck:
    """Spectral gap of the configured dynamics; alpha_V = 1 must give exactly 1."""

    CHECK_ENABLED: bool = True
    name: str = "gap"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        failures: list[str] = []
        gaps, orderings = [], []
        for table in _nontrivial(ctx):
            oracle = spectral_gap(_full(table)).gap
            if abs(oracle - 1.0) > GAP_TOL:
                failures.append(f"full-volume gap {oracle:.12g} != 1")
            result = spectral_gap(BlockDynamics(table, ctx.weights), seed=ctx.optimizer.require_seed())
            gaps.append(result.to_dict())
            c_hat = estimate_best_constant(table, ctx.weights, ctx.optimizer).value
            orderings.append(check_gap_ordering(result.gap, ctx.weights.gamma, c_hat))
        return _verdict(self.name, failures, {"gaps": gaps, "gap_ordering": orderings})


class MixingOracleCheck:
    """t_mix(1/4) of the full-volume dynamics equals log(4 TV(0)) with TV(0) = 1 - mu_min."""

    CHECK_ENABLED: bool = True
    name: str = "tv-oracle"
    stochastic: bool = False
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        failures: list[str] = []
        measured = []
        for t, table in enumerate(_nontrivial(ctx)):
            if table.size > DENSE_CAP:
                msg = f"Full-volume resampling has a dense kernel: needs at most {DENSE_CAP} states"
                raise PreconditionError(msg)
            tv0 = 1.0 - table.min_prob
            expected = max(math.log(4.0 * tv0), 0.0)
            grid = np.linspace(0.0, expected + 2.0, 21)
            curve = tv_mixing_curve(_full(table), grid)
            ctx.write_series(f"tv_oracle_{t}", {"t": curve.times, "tv": curve.tv})
            got = curve.t_mix_quarter
            measured.append({"expected": expected, "t_mix": got})
            if got is None or abs(got - expected) > TMIX_TOL:
                failures.append(f"t_mix {got} != log(4 * {tv0:.6g}) = {expected:.9g}")
        return _verdict(self.name, failures, {"t_mix": measured})


class ProductChainCheck:
    """Singleton dynamics of q-state uniform sites matches the product TV formula."""

    CHECK_ENABLED: bool = True
    name: str = "product-chain"
    stochastic: bool = False
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        q = ctx.model.q
        n = min(len(ctx.region), int(math.log(DENSE_CAP) / math.log(q)))
        region = Region.chain(n)
        table = gibbs_table(make_potts(q, 0.0), region, BoundaryCondition.free_boundary(), ctx.cap)
        dyn = BlockDynamics(table, BlockWeights.singletons(region))
        curve = tv_mixing_curve(dyn, self.config.tv_times)
        expected = np.array([product_chain_tv(n, q, t) for t in curve.times])
        ctx.write_series("product_chain", {"t": curve.times, "tv": curve.tv, "closed_form": expected})
        worst = float(np.abs(curve.tv - expected).max())
        metrics = {"sites": n, "q": q, "worst_abs_error": worst}
        failures = [] if worst <= PRODUCT_TV_TOL else [f"TV curve off the closed form by {worst:.3g}"]
        return _verdict(self.name, failures, metrics)


class MLSICheck:
    """MLSI ratio of the configured dynamics; alpha_V = 1 gives at least 1."""

    CHECK_ENABLED: bool = True
    name: str = "mlsi"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        failures: list[str] = []
        estimates = []
        for table in _nontrivial(ctx):
            oracle = mlsi_constant(_full(table), ctx.optimizer).rho_hat
            if oracle < 1.0 - MLSI_TOL:
                failures.append(f"full-volume MLSI ratio {oracle:.12g} below 1")
            configured = mlsi_constant(BlockDynamics(table, ctx.weights), ctx.optimizer)
            estimates.append({"full_volume": oracle, **configured.to_dict()})
        return _verdict(self.name, failures, {"estimates": estimates})


class LSICheck:
    """LSI ratio of the configured dynamics; alpha_V = 1 stays below the two-point constant."""

    CHECK_ENABLED: bool = True
    name: str = "lsi"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        failures: list[str] = []
        estimates = []
        for table in _nontrivial(ctx):
            bound = rough_entropy_constant(table.min_prob)
            oracle = lsi_constant(_full(table), ctx.optimizer).s_hat
            if oracle > bound * (1.0 + MLSI_TOL) + MLSI_TOL:
                failures.append(f"full-volume LSI ratio {oracle:.9g} above {bound:.9g}")
            configured = lsi_constant(BlockDynamics(table, ctx.weights), ctx.optimizer)
            estimates.append({"full_volume": oracle, "bound": bound, **configured.to_dict()})
        return _verdict(self.name, failures, {"estimates": estimates})


class EntropyDecayCheck:
    """Ent(P_t f) <= e^{-t} Ent f for the full-volume dynamics."""

    CHECK_ENABLED: bool = True
    name: str = "entropy-decay"
    stochastic: bool = True
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        failures: list[str] = []
        checked = 0
        for t, table in enumerate(_nontrivial(ctx)):
            dyn = _full(table)
            for i, f in enumerate(ctx.densities(table, 80 + t, count=min(ctx.samples, 20))):
                report = entropy_decay_check(dyn, f, self.config.tv_times, c_hat=1.0)
                checked += 1
                if i == 0:
                    ctx.write_series(f"entropy_decay_{t}", {"t": report.times, "entropy": report.entropies})
                if not report.passed:
                    failures.append(f"entropy decays slower than e^-t on boundary {t}")
        return _verdict(self.name, failures, {"evaluated": checked})
