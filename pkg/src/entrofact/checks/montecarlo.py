"""Monte Carlo validation against exact chain values."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING

import numpy as np

from ..errors import PreconditionError
from ..inequalities import BlockWeights
from ..lattice import Region
from ..simulation import BlockSampler, mc_simulate, mc_standard_error, uniformity_pvalue
from ..transfer import ChainTransferMatrix
from .base import CheckContext, CheckReport
from .ssm import is_chain

if TYPE_CHECKING:
    from ..config import ExperimentConfig

logger = logging.getLogger(__name__)

STANDARD_ERRORS = 3.0
UNIFORMITY_P = 1e-3
BURN_IN_FRACTION = 0.1


class MCMagnetizationCheck:
    """Simulated magnetization within three standard errors of the transfer-matrix value."""

    CHECK_ENABLED: bool = True
    name: str = "mc-magnetization"
    stochastic: bool = True
    in_default_suite: bool = False

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        region = ctx.region
        if not is_chain(region):
            msg = "The magnetization oracle needs a one-dimensional chain"
            raise PreconditionError(msg)
        tau = ctx.boundaries[0]
        n = len(region)
        left = None if tau.free else tau.spin_at((-1,))
        right = None if tau.free else tau.spin_at((n,))
        exact = ChainTransferMatrix(ctx.model).magnetization(n, left, right)

        series = mc_simulate(
            ctx.model,
            region,
            tau,
            BlockWeights.singletons(region),
            self.config.horizon,
            ctx.optimizer.require_seed(),
            interval=self.config.interval,
        )
        values = series.column("magnetization")
        values = values[int(BURN_IN_FRACTION * values.size) :]
        ctx.write_series("mc_magnetization", {"t": series.times, "magnetization": series.column("magnetization")})
        mean = float(values.mean())
        se = mc_standard_error(values)
        metrics = {"exact": exact, "mean": mean, "standard_error": se, "events": series.events}
        failures = []
        if abs(mean - exact) > STANDARD_ERRORS * se:
            failures.append(f"magnetization {mean:.6g} vs exact {exact:.6g} (se {se:.3g})")

        model = ctx.model
        decoupled = np.ptp(model.pair) == 0 and np.ptp(model.site) == 0 and not model.has_hard_constraints
        if decoupled:
            sampler = BlockSampler(model, region, tau, Region(region.dim, (region.points[0],)))
            rng = ctx.rng(90)
            state = np.zeros(n, dtype=np.int64)
            counts = np.zeros(model.q, dtype=np.int64)
            for _ in range(max(ctx.samples, 50) * model.q):
                sampler.resample(state, rng)
                counts[state[0]] += 1
            pvalue = uniformity_pvalue(counts)
            metrics["uniformity_pvalue"] = pvalue
            if pvalue <= UNIFORMITY_P:
                failures.append(f"block resampling not uniform (p={pvalue:.3g})")

        if failures:
            return CheckReport(self.name, "fail", metrics, failures[0])
        return CheckReport(self.name, "pass", metrics)
