"""Strong spatial mixing rate on chains against the transfer-matrix decay rate."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

from ..errors import PreconditionError
from ..lattice import Region
from ..mixing import chain_sweep, fit_ssm
from ..transfer import ChainTransferMatrix
from .base import CheckContext, CheckReport

if TYPE_CHECKING:
    from ..config import ExperimentConfig

RATE_REL_TOL = 0.10


def is_chain(region: Region) -> bool:
    return region.dim == 1 and region == Region.chain(len(region))


class SSMCheck:
    """Fitted decay rate a_hat within 10% of log(lambda_1 / lambda_2)."""

    CHECK_ENABLED: bool = True
    name: str = "ssm"
    stochastic: bool = False
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        if not is_chain(ctx.region):
            msg = "The decay-rate oracle needs a one-dimensional chain"
            raise PreconditionError(msg)
        spin = self.config.boundary_spin
        plan = chain_sweep(self.config.ssm_max_distance, spin, spin)
        estimate = fit_ssm(ctx.model, plan, ctx.cap, ctx.threads)
        oracle = ChainTransferMatrix(ctx.model).decay_rate()
        metrics = {**estimate.to_dict(), "oracle_rate": oracle}
        distances = [d for d, _ in estimate.samples]
        ctx.write_series("ssm_deviation", {"distance": distances, "deviation": [v for _, v in estimate.samples]})
        if estimate.too_fast or estimate.a_hat is None:
            return CheckReport(self.name, "pass", metrics, "all deviations below the fitting floor")
        if not math.isfinite(oracle):
            return CheckReport(self.name, "fail", metrics, "deviations persist although the chain decouples")
        rel = abs(estimate.a_hat - oracle) / oracle
        metrics["relative_error"] = rel
        if rel > RATE_REL_TOL:
            return CheckReport(self.name, "fail", metrics, f"a_hat={estimate.a_hat:.6g} vs oracle {oracle:.6g}")
        return CheckReport(self.name, "pass", metrics)
