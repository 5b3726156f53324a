"""Pluggable verification checks with auto-discovery."""

from __future__ import annotations

import importlib
import logging
import pkgutil
import types
from typing import TYPE_CHECKING

from ..errors import ConfigError
from .base import CheckContext, CheckReport, VerificationCheck

if TYPE_CHECKING:
    from ..config import ExperimentConfig

logger = logging.getLogger(__name__)

__all__ = ["PRESETS", "CheckContext", "CheckReport", "VerificationCheck", "discover_checks", "select_checks"]

PRESETS: dict[str, tuple[str, ...]] = {
    "product-ground-truth": ("shearer", "tensorization", "two-block", "delta"),
    "two-block": ("two-block",),
    "tensorization": ("tensorization",),
    "reduction": ("delta", "reduction"),
    "jensen": ("jensen",),
    "dynamics-oracles": ("gap", "tv-oracle", "product-chain", "mlsi", "lsi", "entropy-decay"),
    "geometry": ("geometry",),
    "structural": ("dlr", "telescope", "variational", "generator"),
    "constants": ("btc", "atc", "delta"),
}


def discover_checks(config: ExperimentConfig) -> dict[str, VerificationCheck]:
    """Discover and instantiate every check class with CHECK_ENABLED = True.

    Scans the checks package, instantiates each class with the config and
    drops the ones listed in ``checks_disabled``.
    """
    found: dict[str, VerificationCheck] = {}
    package = importlib.import_module(__package__ or "entrofact.checks")

    for _finder, module_name, _is_pkg in pkgutil.iter_modules(package.__path__):
        if module_name == "base":
            continue
        try:
            mod = importlib.import_module(f"{__package__}.{module_name}")
        except ImportError:
            logger.warning("Failed to import check module: %s", module_name, exc_info=True)
            continue
        for check in _find_check_classes(mod, config):
            found[check.name] = check
    return dict(sorted(found.items()))


def _find_check_classes(mod: types.ModuleType, config: ExperimentConfig) -> list[VerificationCheck]:
    """Instantiate all enabled check classes defined in the given Python module."""
    found: list[VerificationCheck] = []

    for attr_name in dir(mod):
        attr = getattr(mod, attr_name)
        if not (isinstance(attr, type) and getattr(attr, "CHECK_ENABLED", False) is True):
            continue
        if attr.__module__ != mod.__name__:
            continue

        try:
            instance = attr(config)
        except (TypeError, ValueError):
            logger.warning("Failed to instantiate check: %s", attr_name, exc_info=True)
            continue

        if instance.name in config.checks_disabled:
            logger.info("Check disabled by config: %s", instance.name)
            continue

        found.append(instance)
        logger.debug("Loaded check: %s", instance.name)

    return found


def select_checks(config: ExperimentConfig, available: dict[str, VerificationCheck]) -> list[VerificationCheck]:
    """Requested checks in request order, presets expanded, duplicates dropped."""
    if not config.checks:
        return [c for c in available.values() if c.in_default_suite]
    names: list[str] = []
    for item in config.checks:
        expanded = PRESETS.get(item, (item,))
        names.extend(n for n in expanded if n not in names)
    selected = []
    for name in names:
        if name in config.checks_disabled:
            continue
        if name not in available:
            msg = f"Unknown check or preset '{name}'; known checks: {', '.join(available)}"
            raise ConfigError(msg)
        selected.append(available[name])
    return selected
