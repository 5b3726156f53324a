"""Event-driven Monte Carlo for the block dynamics, and mixing-time scaling."""

from __future__ import annotations

import functools
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats

from .dynamics import UNIFORMIZATION_CAP, BlockDynamics, tv_mixing_curve
from .errors import NonPermissiveError, PreconditionError
from .gibbs import gibbs_table
from .inequalities import BlockWeights
from .lattice import Region, boundary_edges
from .models import BoundaryCondition, SpinModel, digits, ensure_cap, log_weight_table
from .workers import make_rng, ordered_map

logger = logging.getLogger(__name__)

BLOCK_CAP = 1 << 20
CACHE_SIZE = 4096
TMIX_KIND = "t_mix"
PROXY_KIND = "tau_auto (proxy)"
ObservableFn = Callable[[np.ndarray], float]


class AliasTable:
    """O(1) sampling from a fixed discrete distribution (Vose's alias method)."""

    def __init__(self, weights: Sequence[float] | np.ndarray) -> None:
        w = np.asarray(weights, dtype=np.float64)
        total = w.sum()
        if w.ndim != 1 or w.size == 0 or np.any(w < 0) or total <= 0:
            msg = "Alias table needs a nonempty nonnegative weight vector with positive sum"
            raise ValueError(msg)
        n = w.size
        scaled = w * (n / total)
        self.prob = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = scaled[s]
            self.alias[s] = g
            scaled[g] -= 1.0 - scaled[s]
            (small if scaled[g] < 1.0 else large).append(g)
        self.n = n

    def sample(self, rng: np.random.Generator) -> int:
        i = int(rng.integers(self.n))
        return i if rng.random() < self.prob[i] else int(self.alias[i])

    def probabilities(self) -> np.ndarray:
        """Distribution implied by the table."""
        out = self.prob / self.n
        np.add.at(out, self.alias, (1.0 - self.prob) / self.n)
        return out


class BlockSampler:
    """Exact heat-bath resampling of one block, with conditional tables cached per neighbour spins."""

    def __init__(
        self,
        model: SpinModel,
        region: Region,
        tau: BoundaryCondition,
        block: Region,
        cache_size: int = CACHE_SIZE,
    ) -> None:
        ensure_cap(model.q, len(block), BLOCK_CAP, what="block resampling table")
        self.model = model
        self.block = block
        self.positions = block.indices_in(region)
        self.base_log_w, self.base_allowed = log_weight_table(model, block, BoundaryCondition.free_boundary())
        codes = np.arange(model.q ** len(block), dtype=np.int64)
        self.block_spins = np.stack([digits(codes, i, model.q) for i in range(len(block))], axis=1)
        self.inside: list[tuple[int, int]] = []
        self.fixed: list[tuple[int, int]] = []
        index = region.index_map
        for i, y in boundary_edges(block):
            if y in index:
                self.inside.append((i, index[y]))
            elif not tau.free:
                self.fixed.append((i, tau.spin_at(y)))
        self._conditional = functools.lru_cache(maxsize=cache_size)(self._build)

    def _build(self, key: tuple[int, ...]) -> AliasTable:
        model = self.model
        log_w = self.base_log_w.copy()
        allowed = self.base_allowed.copy()
        pairs = [(i, t) for (i, _), t in zip(self.inside, key, strict=True)] + self.fixed
        for i, t in pairs:
            spins = self.block_spins[:, i]
            log_w += model.pair[spins, t]
            if model.has_hard_constraints:
                allowed &= ~model.forbidden[spins, t]
        if not allowed.any():
            msg = f"Block {self.block} has no configuration of positive mass given neighbour spins {key}"
            raise NonPermissiveError(msg)
        shifted = np.where(allowed, np.exp(log_w - log_w[allowed].max()), 0.0)
        return AliasTable(shifted)

    def key(self, state: np.ndarray) -> tuple[int, ...]:
        return tuple(int(state[j]) for _, j in self.inside)

    def resample(self, state: np.ndarray, rng: np.random.Generator) -> None:
        code = self._conditional(self.key(state)).sample(rng)
        state[self.positions] = self.block_spins[code]

    def cache_info(self) -> Any:
        return self._conditional.cache_info()


def greedy_configuration(model: SpinModel, region: Region, tau: BoundaryCondition) -> np.ndarray:
    """First admissible spin per vertex in canonical order."""
    state = np.full(len(region), -1, dtype=np.int64)
    index = region.index_map
    for pos, point in enumerate(region):
        single = Region(region.dim, (point,))
        for s in range(model.q):
            ok = True
            for _, y in boundary_edges(single):
                if y in index:
                    t = int(state[index[y]])
                    if t < 0:
                        continue
                elif tau.free:
                    continue
                else:
                    t = tau.spin_at(y)
                if model.forbidden[s, t]:
                    ok = False
                    break
            if ok:
                state[pos] = s
                break
        if state[pos] < 0:
            msg = f"Greedy start found no admissible spin at {point}"
            raise NonPermissiveError(msg)
    return state


def magnetization(model: SpinModel) -> ObservableFn:
    symbols = np.asarray(model.symbols, dtype=np.float64)
    return lambda state: float(symbols[state].mean())


def state_code(model: SpinModel) -> ObservableFn:
    q = model.q
    return lambda state: float(state @ (q ** np.arange(state.size, dtype=np.int64)))


OBSERVABLES: dict[str, Callable[[SpinModel], ObservableFn]] = {
    "magnetization": magnetization,
    "state": state_code,
}


@dataclass(frozen=True)
class TimeSeries:
    """Observables recorded on a regular time grid."""

    times: np.ndarray
    columns: dict[str, np.ndarray]
    events: int
    seed: int
    replica: int = 0
    block_counts: dict[str, int] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]


def mc_simulate(
    model: SpinModel,
    region: Region,
    tau: BoundaryCondition,
    weights: BlockWeights,
    horizon: float,
    seed: int,
    observables: Sequence[str] = ("magnetization",),
    interval: float = 1.0,
    initial: np.ndarray | None = None,
    replica: int = 0,
    extra: dict[str, ObservableFn] | None = None,
) -> TimeSeries:
    """Continuous-time run: one global exponential clock, block chosen with probability alpha_A / R."""
    if weights.volume != region:
        msg = "Block weights must live on the simulated region"
        raise PreconditionError(msg)
    blocks = weights.positive()
    if not blocks:
        msg = "No block has positive weight"
        raise PreconditionError(msg)
    if weights.gamma <= 0:
        logger.warning("gamma(alpha) = 0: some vertex is never resampled")
    rng = make_rng(seed, replica)
    samplers = [BlockSampler(model, region, tau, b) for b, _ in blocks]
    chooser = AliasTable([w for _, w in blocks])
    rate = sum(w for _, w in blocks)

    fns = {name: OBSERVABLES[name](model) for name in observables}
    fns.update(extra or {})
    state = greedy_configuration(model, region, tau) if initial is None else np.array(initial, dtype=np.int64)
    grid = np.arange(0.0, horizon + interval / 2, interval)
    columns = {name: np.zeros(grid.size) for name in fns}
    counts = np.zeros(len(blocks), dtype=np.int64)

    t, k, events = 0.0, 0, 0
    while k < grid.size:
        t_next = t + rng.exponential(1.0 / rate)
        while k < grid.size and grid[k] < t_next:
            for name, fn in fns.items():
                columns[name][k] = fn(state)
            k += 1
        if k >= grid.size:
            break
        j = chooser.sample(rng)
        samplers[j].resample(state, rng)
        counts[j] += 1
        events += 1
        t = t_next
    logger.debug("Simulated %d events up to t=%.3g (replica %d)", events, horizon, replica)
    block_counts = {str(b): int(c) for (b, _), c in zip(blocks, counts, strict=True)}
    return TimeSeries(grid, columns, events, seed, replica, block_counts)


def _replica_task(
    job: tuple[SpinModel, Region, BoundaryCondition, BlockWeights, float, int, tuple[str, ...], float, int],
) -> TimeSeries:
    model, region, tau, weights, horizon, seed, observables, interval, replica = job
    return mc_simulate(model, region, tau, weights, horizon, seed, observables, interval, replica=replica)


def run_replicas(
    model: SpinModel,
    region: Region,
    tau: BoundaryCondition,
    weights: BlockWeights,
    horizon: float,
    seed: int,
    replicas: int,
    observables: Sequence[str] = ("magnetization",),
    interval: float = 1.0,
    threads: int = 1,
) -> list[TimeSeries]:
    """Independent replicas on separate random streams, returned in replica order."""
    jobs = [(model, region, tau, weights, horizon, seed, tuple(observables), interval, r) for r in range(replicas)]
    return ordered_map(_replica_task, jobs, threads=threads, processes=threads > 1)


def integrated_autocorrelation_time(series: np.ndarray, window_factor: float = 5.0) -> float:
    """tau_int in samples, with the smallest window M satisfying M >= c tau(M)."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 2:
        return 1.0
    x = x - x.mean()
    var = float(x @ x) / n
    if var <= 0:
        return 1.0
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n] / (n * var)
    tau = 1.0
    for m in range(1, n):
        tau += 2.0 * acf[m]
        if m >= window_factor * tau:
            break
    return max(tau, 1.0)


def mc_standard_error(series: np.ndarray) -> float:
    """Standard error of the mean corrected by the integrated autocorrelation time."""
    x = np.asarray(series, dtype=np.float64)
    if x.size < 2:
        return math.inf
    return math.sqrt(float(x.var()) * integrated_autocorrelation_time(x) / x.size)


def uniformity_pvalue(counts: np.ndarray) -> float:
    """Chi-square p-value of counts against the uniform law."""
    return float(stats.chisquare(np.asarray(counts, dtype=np.float64)).pvalue)


@dataclass(frozen=True)
class ScalingRow:
    size: int
    value: float
    kind: str
    gamma: float

    def to_dict(self) -> dict[str, Any]:
        return {"size": self.size, "value": self.value, "kind": self.kind, "gamma": self.gamma}


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line of one kind of row against log |V|."""

    kind: str
    slope: float
    intercept: float
    residuals: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "slope": self.slope,
            "intercept": self.intercept,
            "residuals": list(self.residuals),
        }


@dataclass(frozen=True)
class ScalingTable:
    """Mixing times against log |V| with the fitted prefactor.

    Exact t_mix rows and autocorrelation-time proxy rows are fitted
    separately; ``slope`` and ``intercept`` belong to the t_mix fit.
    """

    rows: tuple[ScalingRow, ...]
    fits: tuple[ScalingFit, ...] = ()

    def fit(self, kind: str = TMIX_KIND) -> ScalingFit | None:
        return next((f for f in self.fits if f.kind == kind), None)

    @property
    def slope(self) -> float | None:
        fit = self.fit()
        return fit.slope if fit else None

    @property
    def intercept(self) -> float | None:
        fit = self.fit()
        return fit.intercept if fit else None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "fits": [f.to_dict() for f in self.fits],
        }


def _fit_rows(kind: str, rows: Sequence[ScalingRow]) -> ScalingFit | None:
    picked = [r for r in rows if r.kind == kind]
    if len(picked) < 2:
        return None
    x = np.log([r.size for r in picked])
    y = np.array([r.value for r in picked])
    line = stats.linregress(x, y)
    residuals = tuple(float(v) for v in y - (line.intercept + line.slope * x))
    return ScalingFit(kind, float(line.slope), float(line.intercept), residuals)


def exact_mixing_time(dyn: BlockDynamics, threshold: float = 0.25, points: int = 33) -> float:
    """t_mix from exact TV curves, doubling the horizon until the threshold is crossed."""
    horizon = 2.0 / max(dyn.weights.gamma, 1e-12)
    for _ in range(30):
        curve = tv_mixing_curve(dyn, np.linspace(0.0, horizon, points), threshold)
        if curve.t_mix_quarter is not None:
            return curve.t_mix_quarter
        horizon *= 2.0
    msg = "TV distance never reached the threshold"
    raise PreconditionError(msg)


def mixing_time_scaling(
    model: SpinModel,
    regions: Sequence[Region],
    weight_rule: Callable[[Region], BlockWeights],
    seed: int,
    tau: BoundaryCondition | None = None,
    replicas: int = 4,
    horizon: float = 2000.0,
    exact_cap: int = UNIFORMIZATION_CAP,
    threads: int = 1,
) -> ScalingTable:
    """t_mix per region where exact, autocorrelation time of the magnetization beyond."""
    tau = BoundaryCondition.free_boundary() if tau is None else tau
    rows = []
    for region in regions:
        weights = weight_rule(region)
        if model.q ** len(region) <= exact_cap:
            dyn = BlockDynamics(gibbs_table(model, region, tau, exact_cap), weights)
            rows.append(ScalingRow(len(region), exact_mixing_time(dyn), TMIX_KIND, weights.gamma))
            continue
        runs = run_replicas(model, region, tau, weights, horizon, seed, replicas, threads=threads)
        taus = [integrated_autocorrelation_time(r.column("magnetization")) for r in runs]
        rows.append(ScalingRow(len(region), float(np.mean(taus)), PROXY_KIND, weights.gamma))
    fits = tuple(fit for kind in (TMIX_KIND, PROXY_KIND) if (fit := _fit_rows(kind, rows)) is not None)
    return ScalingTable(tuple(rows), fits)
