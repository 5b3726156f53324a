"""Transfer-matrix oracle for nearest-neighbour chains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import linalg

from .models import SpinModel


@dataclass(frozen=True, eq=False)
class ChainTransferMatrix:
    """Exact one-point marginals, magnetization and decay rate of a chain 0..n-1.

    A boundary spin of ``None`` means the corresponding end is free.
    """

    model: SpinModel

    @cached_property
    def coupling(self) -> np.ndarray:
        return np.where(self.model.forbidden, 0.0, np.exp(self.model.pair))

    @cached_property
    def site_weight(self) -> np.ndarray:
        return np.exp(self.model.site)

    def _end(self, spin: int | None) -> np.ndarray:
        if spin is None:
            return np.ones(self.model.q)
        return self.coupling[:, spin].copy()

    def _sweeps(self, n: int, left: int | None, right: int | None) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Normalized forward and backward messages; products give marginals."""
        d = self.site_weight
        forward = [self._end(left) * d]
        for _ in range(1, n):
            nxt = (forward[-1] @ self.coupling) * d
            forward.append(nxt / nxt.sum())
        backward = [self._end(right)]
        for _ in range(1, n):
            prev = self.coupling @ (d * backward[-1])
            backward.append(prev / prev.sum())
        backward.reverse()
        return forward, backward

    def marginals(self, n: int, left: int | None = None, right: int | None = None) -> np.ndarray:
        """(n, q) matrix of single-site marginal laws."""
        if n < 1:
            msg = f"Chain length must be positive, got {n}"
            raise ValueError(msg)
        forward, backward = self._sweeps(n, left, right)
        rows = np.array([f * b for f, b in zip(forward, backward, strict=True)])
        return rows / rows.sum(axis=1, keepdims=True)

    def log_partition(self, n: int, left: int | None = None, right: int | None = None) -> float:
        d = self.site_weight
        vec = self._end(left) * d
        log_z = 0.0
        for _ in range(1, n):
            vec = (vec @ self.coupling) * d
            scale = vec.sum()
            log_z += math.log(scale)
            vec = vec / scale
        return log_z + math.log(float(vec @ self._end(right)))

    def magnetization(self, n: int, left: int | None = None, right: int | None = None) -> float:
        """Expected average of the physical spin symbols."""
        symbols = np.asarray(self.model.symbols, dtype=np.float64)
        return float((self.marginals(n, left, right) @ symbols).mean())

    def first_site_deviation(self, n: int, left: int | None) -> float:
        """Sup over symbol pairs at the right boundary of |psi'/psi - 1| for the first site."""
        laws = [self.marginals(n, left, s)[0] for s in range(self.model.q)]
        worst = 0.0
        for a in laws:
            for b in laws:
                mask = b > 0
                worst = max(worst, float(np.abs(a[mask] / b[mask] - 1.0).max()))
        return worst

    def decay_rate(self) -> float:
        """-log(lambda_2 / lambda_1) of the symmetric transfer matrix."""
        root = np.sqrt(self.site_weight)
        sym = root[:, None] * self.coupling * root[None, :]
        eigenvalues = np.sort(np.abs(linalg.eigvalsh(sym)))[::-1]
        if eigenvalues.size < 2 or eigenvalues[1] <= 0:
            return math.inf
        return math.log(eigenvalues[0] / eigenvalues[1])
