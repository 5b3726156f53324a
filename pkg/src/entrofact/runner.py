"""Batch experiment driver: runs the selected checks and writes the run directory."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import TYPE_CHECKING

from rich.console import Console
from rich.logging import RichHandler

from .artifacts import ArtifactWriter
from .checks import discover_checks, select_checks
from .checks.base import CheckContext, CheckReport
from .errors import EXIT_ASSERTION, EXIT_OK, ConfigError, PreconditionError, StateSpaceTooLargeError

if TYPE_CHECKING:
    from .checks.base import VerificationCheck
    from .config import ExperimentConfig

LOGGER_NAME = "entrofact"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"
LOG_NAME = "run.log"
# Checks that never build a Gibbs table of the configured region.
TABLE_FREE_CHECKS = frozenset({"geometry", "ssm", "product-chain", "tensorization"})


def setup_logging(level: str, log_file: Path | None = None) -> logging.Logger:
    """Rich console handler at INFO, plus a DEBUG file handler when ``log_file`` is given."""
    logger = logging.getLogger(LOGGER_NAME)

    valid_levels = logging.getLevelNamesMapping()
    if level not in valid_levels:
        msg = f"Invalid log_level '{level}', expected one of {sorted(valid_levels)}"
        raise ConfigError(msg)
    logger.setLevel(valid_levels[level])

    if logger.handlers:
        for handler in logger.handlers:
            handler.close()
        logger.handlers.clear()

    console_handler = RichHandler(console=Console(stderr=True), show_time=True, show_path=False)
    console_handler.setLevel(logging.INFO)
    logger.addHandler(console_handler)

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="w", encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)

    return logger


@dataclass
class RunStats:
    """Counters for a single run."""

    start_time: datetime
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    errors: int = 0
    durations: dict[str, float] = field(default_factory=dict)

    def record(self, report: CheckReport, seconds: float) -> None:
        self.durations[report.check] = seconds
        match report.status:
            case "pass":
                self.passed += 1
            case "fail":
                self.failed += 1
            case "skipped":
                self.skipped += 1
            case _:
                self.errors += 1

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.errors == 0


class ExperimentRunner:
    """Runs one configured experiment into ``output_dir / <config hash prefix>``."""

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.config_hash = config.config_hash()
        self.run_dir = config.output_dir / self.config_hash[:12]
        self.logger = setup_logging(config.log_level, self.run_dir / LOG_NAME)
        self.stats = RunStats(start_time=datetime.now())
        self.reports: list[CheckReport] = []

        available = discover_checks(config)
        self.checks: list[VerificationCheck] = select_checks(config, available)
        self.logger.info("Selected %d checks: %s", len(self.checks), ", ".join(c.name for c in self.checks))

    def preflight(self) -> None:
        """Refuse before any heavy compute: missing seed, or a state space above the cap."""
        stochastic = [c.name for c in self.checks if c.stochastic]
        if stochastic and self.config.seed is None:
            msg = f"A seed is required for stochastic checks: {', '.join(stochastic)}"
            raise ConfigError(msg)
        if any(c.name not in TABLE_FREE_CHECKS for c in self.checks):
            predicted = self.config.predicted_states()
            if predicted > self.config.cap_states:
                raise StateSpaceTooLargeError(predicted, self.config.cap_states)

    def _run_check(self, check: VerificationCheck, ctx: CheckContext) -> CheckReport:
        try:
            return check.run(ctx)
        except PreconditionError as exc:
            self.logger.info("Skipping %s: %s", check.name, exc)
            return CheckReport(check.name, "skipped", detail=str(exc))
        except StateSpaceTooLargeError:
            raise
        except Exception as exc:
            self.logger.error("Check %s raised an error", check.name, exc_info=True)
            return CheckReport(check.name, "error", detail=f"{type(exc).__name__}: {exc}")

    def run(self) -> int:
        """Execute the selected checks in order; 0 iff none failed or errored."""
        self.preflight()
        writer = ArtifactWriter(self.run_dir, self.config.to_dict(), self.config_hash)
        ctx = CheckContext(self.config, writer)

        for check in self.checks:
            self.logger.info("Running %s", check.name)
            started = time.perf_counter()
            report = self._run_check(check, ctx)
            self.stats.record(report, time.perf_counter() - started)
            self.reports.append(report)
            writer.append(report.to_dict())
            log = self.logger.info if report.ok else self.logger.warning
            log("%s: %s %s", check.name, report.status, report.detail)

        writer.write_summary(self.summary_lines())
        self.logger.info(
            "Run finished. Stats: passed=%d, failed=%d, skipped=%d, errors=%d",
            self.stats.passed,
            self.stats.failed,
            self.stats.skipped,
            self.stats.errors,
        )
        self.logger.debug("Durations: %s", self.stats.durations)
        return EXIT_OK if self.stats.ok else EXIT_ASSERTION

    def summary_lines(self) -> list[str]:
        lines = [f"{r.check:<18} {r.status:<8} {r.detail}".rstrip() for r in self.reports]
        lines.append(
            f"passed={self.stats.passed} failed={self.stats.failed} "
            f"skipped={self.stats.skipped} errors={self.stats.errors}"
        )
        return lines
