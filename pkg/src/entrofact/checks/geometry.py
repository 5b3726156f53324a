"""Decomposition geometry over every admissible rectangle."""

from __future__ import annotations

from typing import TYPE_CHECKING

from ..lattice import admissible_rectangles, cesi_decomposition, smallest_nontrivial_scales, verify_geo
from .base import CheckContext, CheckReport

if TYPE_CHECKING:
    from ..config import ExperimentConfig

GEOMETRY_DIM = 2
GEOMETRY_SCALES = 2


class GeometryCheck:
    """All four decomposition properties for d=2 rectangles at the smallest two scales."""

    CHECK_ENABLED: bool = True
    name: str = "geometry"
    stochastic: bool = False
    in_default_suite: bool = True

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def run(self, ctx: CheckContext) -> CheckReport:
        per_scale: dict[str, int] = {}
        failures: list[str] = []
        for k in smallest_nontrivial_scales(GEOMETRY_DIM, GEOMETRY_SCALES):
            rectangles = admissible_rectangles(GEOMETRY_DIM, k)
            per_scale[str(k)] = len(rectangles)
            for rect in rectangles:
                report = verify_geo(cesi_decomposition(rect, k))
                failures.extend(f"k={k} shape={rect.extents()}: {msg}" for msg in report.failures)
        metrics = {"rectangles": per_scale, "failures": len(failures)}
        if failures:
            return CheckReport(self.name, "fail", metrics, failures[0])
        return CheckReport(self.name, "pass", metrics)
