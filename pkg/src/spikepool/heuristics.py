"""ISI distributions and the scale/radius tuning sweep.

A sweep samples groups of inter-spike intervals, turns each group into phase-
shifted periodic spike trains, filters them into currents, and compares each
pooling net's steady-state output with the true max (and the plain average)
of those currents across groups.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDistributionError
from .pooling import PoolMethod, PoolParams, pool_window_currents
from .sim import SynapseFilter, TimeBase, filter_spikes, steady_state_mean


@dataclass
class IsiDistribution:
    isis: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        self.isis = np.asarray(self.isis, dtype=int)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.isis.size == 0:
            raise EmptyDistributionError("ISI distribution has no support")
        if self.isis.shape != self.probs.shape:
            raise ValueError("isis and probs must have the same length")
        if np.any(self.isis < 1) or np.any(self.probs < 0):
            raise ValueError("ISIs must be >= 1 and masses non-negative")
        total = self.probs.sum()
        if total <= 0:
            raise EmptyDistributionError("ISI distribution has zero total mass")
        order = np.argsort(self.isis)
        self.isis, self.probs = self.isis[order], self.probs[order] / total

    @classmethod
    def from_pmf(cls, isis, weights) -> "IsiDistribution":
        return cls(np.asarray(isis), np.asarray(weights, dtype=np.float64))

    def mass(self, isi: int) -> float:
        hit = self.isis == isi
        return float(self.probs[hit].sum())

    @property
    def mean(self) -> float:
        return float((self.isis * self.probs).sum())


def light_tailed(max_isi: int = 40) -> IsiDistribution:
    """Stand-in for conv layers whose neurons mostly fire every 2-6 steps."""
    k = np.arange(1, max_isi + 1)
    return IsiDistribution.from_pmf(k, k ** 2 * np.exp(-k / 1.2))


def fat_tailed(max_isi: int = 200, exponent: float = 1.5) -> IsiDistribution:
    """Stand-in for conv layers with widely varying, often long ISIs."""
    k = np.arange(1, max_isi + 1)
    return IsiDistribution.from_pmf(k, k ** -exponent)


def uniform(lo: int, hi: int) -> IsiDistribution:
    k = np.arange(lo, hi + 1)
    return IsiDistribution.from_pmf(k, np.ones(k.size))


PRESETS = {"light": light_tailed, "fat": fat_tailed}


def load_isi_file(path) -> IsiDistribution:
    """Read a two-column CSV histogram (``isi,mass``; a header row is optional)."""
    isis, masses = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            try:
                isi, mass = int(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not isis:  # header
                    continue
                raise ValueError(f"{path}: malformed row {row!r}") from None
            isis.append(isi)
            masses.append(mass)
    if not isis:
        raise EmptyDistributionError(f"{path}: no ISI rows")
    return IsiDistribution.from_pmf(isis, masses)


def resolve_distribution(spec) -> IsiDistribution:
    """A preset name (``light``/``fat``), a histogram file path, or a distribution."""
    if isinstance(spec, IsiDistribution):
        return spec
    if spec in PRESETS:
        return PRESETS[spec]()
    return load_isi_file(Path(spec))


def collect_isi(trains) -> IsiDistribution:
    """Pool the inter-spike gaps of every train (columns of a 2-D array, or a list)."""
    if isinstance(trains, np.ndarray):
        columns = [trains] if trains.ndim == 1 else list(trains.T)
    else:
        columns = [np.asarray(t) for t in trains]
    gaps = [np.diff(np.flatnonzero(np.asarray(col) > 0)) for col in columns]
    gaps = np.concatenate(gaps) if gaps else np.array([], dtype=int)
    if gaps.size == 0:
        raise EmptyDistributionError("no train has two or more spikes")
    values, counts = np.unique(gaps, return_counts=True)
    return IsiDistribution(values, counts.astype(np.float64))


@dataclass
class SweepConfig:
    dist: IsiDistribution = field(default_factory=light_tailed)
    grid: tuple = ()
    n_groups: int = 256
    group_size: int = 4
    seed: int = 0
    tb: TimeBase = field(default_factory=lambda: TimeBase(300))
    f_in: SynapseFilter = field(default_factory=lambda: SynapseFilter(0.005))
    f_out: SynapseFilter = field(default_factory=lambda: SynapseFilter(0.005))
    phi: float = 500.0
    tau_e: float = 0.001
    soma_decay: float = 0.0
    align_phases: bool = False

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValueError("n_groups must be at least 1")
        if self.group_size < 1:
            raise ValueError("group_size must be at least 1")


DEFAULT_GRIDS = {PoolMethod.MJOP: (1.0, 2.0, 5.0), PoolMethod.AVAM: (0.20, 0.25, 0.30, 1.0)}
GRID_PARAM = {PoolMethod.MJOP: "scale", PoolMethod.AVAM: "radius"}


@dataclass
class SweepResult:
    method: PoolMethod
    grid: np.ndarray
    isis: np.ndarray            # (n_groups, group_size)
    true_max: np.ndarray        # (n_groups,) steady-state means
    avg: np.ndarray
    estimates: np.ndarray       # (n_grid, n_groups)
    correlations: np.ndarray    # (n_grid,), NaN where undefined
    slopes: np.ndarray
    true_max_trace: np.ndarray  # (n_steps, n_groups)
    avg_trace: np.ndarray

    @property
    def param(self) -> str:
        return GRID_PARAM[self.method]

    @property
    def correlation_defined(self) -> np.ndarray:
        return np.isfinite(self.correlations)

    def best(self) -> int:
        """Index of the grid value with the highest defined correlation (-1 if none)."""
        if not self.correlation_defined.any():
            return -1
        return int(np.nanargmax(self.correlations))


def sample_groups(dist: IsiDistribution, cfg: SweepConfig, rng=None) -> np.ndarray:
    """``(n_groups, group_size)`` i.i.d. ISIs drawn from ``dist``."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    return rng.choice(dist.isis, size=(cfg.n_groups, cfg.group_size), p=dist.probs)


def group_trains(isis, phases, tb: TimeBase) -> np.ndarray:
    """Unit-amplitude periodic trains, shape ``(n_steps, n_groups, group_size)``."""
    t = np.arange(tb.n_steps)[:, None, None]
    return ((t >= phases) & ((t - phases) % isis == 0)).astype(np.float64)


def pearson(x, y) -> float:
    """Pearson correlation, NaN when either series has zero variance."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt((dx * dx).sum()), np.sqrt((dy * dy).sum())
    if x.size < 2 or sx <= 1e-12 * max(1.0, np.abs(x).max()) or sy <= 1e-12 * max(1.0, np.abs(y).max()):
        return float("nan")
    return float(np.clip((dx * dy).sum() / (sx * sy), -1.0, 1.0))


def regression_slope(x, y) -> float:
    """Least-squares slope of ``y`` on ``x``; NaN when ``x`` is constant."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    dx = x - x.mean()
    var = (dx * dx).sum()
    if x.size < 2 or var <= 1e-24 * max(1.0, np.abs(x).max()) ** 2:
        return float("nan")
    return float((dx * (y - y.mean())).sum() / var)


def evaluate_sweep(cfg: SweepConfig, method: PoolMethod) -> SweepResult:
    method = PoolMethod(method)
    if method not in GRID_PARAM:
        raise ValueError(f"sweeps are defined for MJOP and AVAM, not {method.value}")
    grid = np.asarray(cfg.grid if len(cfg.grid) else DEFAULT_GRIDS[method], dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    isis = sample_groups(cfg.dist, cfg, rng)
    # unaligned spike trains, one random phase per group member
    phases = rng.integers(0, isis)
    if cfg.align_phases:
        phases = np.zeros_like(isis)
    tb = cfg.tb
    trains = group_trains(isis, phases, tb)
    currents = filter_spikes(trains.reshape(tb.n_steps, -1), cfg.f_in, tb).reshape(trains.shape)
    true_tr = currents.max(axis=-1)
    avg_tr = currents.mean(axis=-1)
    estimates = []
    for value in grid:
        params = PoolParams(f_in=cfg.f_in, f_out=cfg.f_out, soma_decay=cfg.soma_decay,
                            phi=cfg.phi, tau_e=cfg.tau_e)
        if method is PoolMethod.MJOP:
            params.scale = float(value)
        else:
            params.radius = float(value)
        est = pool_window_currents(currents, method, params, tb)
        estimates.append(steady_state_mean(est))
    estimates = np.array(estimates)
    true_mean, avg_mean = steady_state_mean(true_tr), steady_state_mean(avg_tr)
    return SweepResult(
        method=method,
        grid=grid,
        isis=isis,
        true_max=true_mean,
        avg=avg_mean,
        estimates=estimates,
        correlations=np.array([pearson(true_mean, e) for e in estimates]),
        slopes=np.array([regression_slope(true_mean, e) for e in estimates]),
        true_max_trace=true_tr,
        avg_trace=avg_tr,
    )


def true_max_oracle(traces) -> np.ndarray:
    """Elementwise max over a list of equal-length current traces."""
    traces = [np.asarray(t, dtype=np.float64) for t in traces]
    if not traces:
        raise ValueError("need at least one trace")
    if len({t.shape for t in traces}) != 1:
        raise ValueError("traces must have equal lengths")
    return np.maximum.reduce(traces)


def exact_max_oracle(trains, f: SynapseFilter, tb: TimeBase) -> np.ndarray:
    """Filtered current of the train with the most spikes (lowest index on ties)."""
    trains = [np.asarray(t, dtype=np.float64) for t in trains]
    if not trains:
        raise ValueError("need at least one spike train")
    if len({t.shape for t in trains}) != 1:
        raise ValueError("spike trains must have equal lengths")
    counts = [np.count_nonzero(t) for t in trains]
    return filter_spikes(trains[int(np.argmax(counts))], f, tb)
