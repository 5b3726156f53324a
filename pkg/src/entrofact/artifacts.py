"""Run directory layout and report writers.

A run writes ``report.jsonl`` (a config header line, then one object per
check), ``summary.txt`` and ``series/*.csv``. Nothing time-dependent goes
into these files, so identical config and seed give identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

REPORT_NAME = "report.jsonl"
SUMMARY_NAME = "summary.txt"
SERIES_DIR = "series"


def jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(value, Path):
        return str(value)
    return value


def dumps(record: Mapping[str, Any]) -> str:
    return json.dumps(jsonable(record), sort_keys=True, separators=(",", ":"))


class ArtifactWriter:
    """Writes the artifacts of one run directory."""

    def __init__(self, run_dir: Path, config: Mapping[str, Any], config_hash: str) -> None:
        self.run_dir = run_dir
        self.config_hash = config_hash
        run_dir.mkdir(parents=True, exist_ok=True)
        self.report_path = run_dir / REPORT_NAME
        header = {"kind": "config", "config": dict(config), "config_hash": config_hash}
        self.report_path.write_text(dumps(header) + "\n", encoding="utf-8")
        self._lines: list[dict[str, Any]] = []

    def append(self, record: Mapping[str, Any]) -> None:
        line = {"kind": "check", "config_hash": self.config_hash, **record}
        with self.report_path.open("a", encoding="utf-8") as f:
            f.write(dumps(line) + "\n")
        self._lines.append(line)

    def write_series(self, name: str, columns: Mapping[str, Sequence[float] | np.ndarray]) -> Path:
        """CSV with one column per key; the first line carries the config hash."""
        series_dir = self.run_dir / SERIES_DIR
        series_dir.mkdir(exist_ok=True)
        path = series_dir / f"{name}.csv"
        keys = list(columns)
        length = min((len(columns[k]) for k in keys), default=0)
        with path.open("w", encoding="utf-8", newline="") as f:
            f.write(f"# config_hash={self.config_hash}\n")
            writer = csv.writer(f)
            writer.writerow(keys)
            for i in range(length):
                writer.writerow([repr(float(columns[k][i])) for k in keys])
        return path

    def write_json(self, name: str, payload: Mapping[str, Any]) -> Path:
        series_dir = self.run_dir / SERIES_DIR
        series_dir.mkdir(exist_ok=True)
        path = series_dir / f"{name}.json"
        path.write_text(dumps({"config_hash": self.config_hash, **payload}) + "\n", encoding="utf-8")
        return path

    def write_summary(self, lines: Iterable[str]) -> Path:
        path = self.run_dir / SUMMARY_NAME
        body = [f"config_hash: {self.config_hash}", *lines]
        path.write_text("\n".join(body) + "\n", encoding="utf-8")
        return path

    @property
    def records(self) -> list[dict[str, Any]]:
        return list(self._lines)


def read_report(path: Path) -> list[dict[str, Any]]:
    with path.open(encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def aggregate_reports(paths: Iterable[Path]) -> list[dict[str, Any]]:
    """Check records of several reports; refuses reports from different configs."""
    hashes: set[str] = set()
    records: list[dict[str, Any]] = []
    for path in paths:
        lines = read_report(path)
        for line in lines:
            hashes.add(str(line.get("config_hash")))
            if line.get("kind") == "check":
                records.append(line)
    if len(hashes) > 1:
        msg = f"Refusing to aggregate reports with {len(hashes)} different config hashes"
        raise ConfigError(msg)
    logger.debug("Aggregated %d check records", len(records))
    return records
