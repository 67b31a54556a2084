"""Ensemble statistics over stochastic runs and comparison against ODE solutions."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .engine.core import RunSpec, Trajectory, derive_seed, run
from .model import Configuration, GcpsModel
from .odelimit import OdeTrajectory


def resample_trajectory(t: Trajectory, grid) -> np.ndarray:
    """Cell sizes held piecewise-constant between events, sampled at ``grid``.

    The value at ``g`` is the state after the last recorded event with time
    ``<= g``; grid points past the last event hold the final state.
    """
    if len(t) == 0:
        raise ValueError("empty trajectory")
    grid = np.asarray(grid, dtype=float)
    rows = np.searchsorted(t.times, grid, side="right") - 1
    if (rows < 0).any():
        raise ValueError("grid starts before the trajectory")
    return t.cell_counts()[rows]


class Moments:
    """Running mean and sum of squared deviations (Welford), mergeable (Chan et al.)."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def add(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.n += 1
        d = x - self.mean
        self.mean = self.mean + d / self.n
        self.m2 = self.m2 + d * (x - self.mean)

    def merge(self, other: Moments) -> Moments:
        out = Moments(self.mean.shape)
        out.n = self.n + other.n
        if out.n == 0:
            return out
        d = other.mean - self.mean
        out.mean = self.mean + d * (other.n / out.n)
        out.m2 = self.m2 + other.m2 + d * d * (self.n * other.n / out.n)
        return out

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.m2 / self.n, 0.0)) if self.n else np.zeros_like(self.m2)


@dataclass(frozen=True, eq=False)
class EnsembleSeries:
    times: np.ndarray
    mean: np.ndarray    # (len(times), n_cells)
    std: np.ndarray     # population standard deviation across runs
    runs: int
    master_seed: int

    def to_csv(self) -> str:
        n = self.mean.shape[1]
        head = ["time"] + [f"{k}_cell_{q}" for q in range(1, n + 1) for k in ("mean", "std")]
        lines = [",".join(head)]
        for t, mu, sd in zip(self.times, self.mean, self.std):
            vals = [repr(float(t))]
            for q in range(n):
                vals += [repr(float(mu[q])), repr(float(sd[q]))]
            lines.append(",".join(vals))
        return "\n".join(lines) + "\n"


def _one_run(args) -> np.ndarray:
    m, u0, spec, grid, backend = args
    return resample_trajectory(run(m, u0, spec, backend), grid)


def ensemble(m: GcpsModel, u0: Configuration | None, spec: RunSpec, runs: int, grid,
             jobs: int = 1, backend: str | None = None) -> EnsembleSeries:
    """Mean and standard deviation of ``runs`` independent runs on ``grid``.

    Run ``i`` uses seed ``derive_seed(spec.seed, i)``; results are accumulated
    in run order, so the output does not depend on ``jobs``.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    grid = np.asarray(grid, dtype=float)
    tasks = [(m, u0, replace(spec, seed=derive_seed(spec.seed, i)), grid, backend)
             for i in range(runs)]
    acc = Moments((len(grid), m.n_cells))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for series in pool.map(_one_run, tasks, chunksize=max(1, runs // (4 * jobs))):
                acc.add(series)
    else:
        for task in tasks:
            acc.add(_one_run(task))
    return EnsembleSeries(grid, acc.mean, acc.std, runs, int(spec.seed))


@dataclass(frozen=True, eq=False)
class RatioSeries:
    values: np.ndarray     # NaN where flagged
    flagged: np.ndarray    # True where the denominator is zero

    @property
    def ok(self) -> bool:
        return not self.flagged.any()


def ratio_series(series, numerator, denominator) -> RatioSeries:
    """Pointwise ``sum(numerator cells) / sum(denominator cells)`` (1-based cell indices).

    ``series`` is an :class:`EnsembleSeries` (its mean is used), an
    :class:`OdeTrajectory`, or a ``(points, cells)`` array.
    """
    if isinstance(series, EnsembleSeries):
        data = series.mean
    elif isinstance(series, OdeTrajectory):
        data = series.values
    else:
        data = np.asarray(series, dtype=float)
    data = np.atleast_2d(data)
    num = data[:, [q - 1 for q in numerator]].sum(axis=1)
    den = data[:, [q - 1 for q in denominator]].sum(axis=1)
    flagged = den == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(flagged, np.nan, num / np.where(flagged, 1.0, den))
    return RatioSeries(values, flagged)


@dataclass(frozen=True)
class Comparison:
    rmse: list[float]
    max_rel_dev: list[float]
    grid: int

    def to_json(self) -> str:
        return json.dumps({"rmse": self.rmse, "max_rel_dev": self.max_rel_dev,
                           "grid": self.grid}, indent=1) + "\n"


def compare_series(times_a, values_a, times_b, values_b) -> Comparison:
    times_a = np.asarray(times_a, dtype=float)
    times_b = np.asarray(times_b, dtype=float)
    values_a = np.atleast_2d(np.asarray(values_a, dtype=float))
    values_b = np.atleast_2d(np.asarray(values_b, dtype=float))
    if times_a.shape != times_b.shape or not np.allclose(times_a, times_b, rtol=1e-9,
                                                          atol=1e-12):
        raise ValueError("grid mismatch between the two series")
    if values_a.shape != values_b.shape:
        raise ValueError(f"shape mismatch {values_a.shape} vs {values_b.shape}")
    diff = values_a - values_b
    rmse = np.sqrt((diff ** 2).mean(axis=0))
    scale = np.abs(values_b)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale > 0, np.abs(diff) / scale, np.where(diff == 0, 0.0, np.inf))
    return Comparison([float(x) for x in rmse], [float(x) for x in rel.max(axis=0)],
                      len(times_a))


def compare_to_ode(e: EnsembleSeries, o: OdeTrajectory) -> Comparison:
    """RMSE and maximum relative deviation of the ensemble mean from the ODE, per variable.

    The relative deviation is ``|mean - Y| / |Y|`` (infinite where ``Y = 0``
    and the two differ).
    """
    return compare_series(e.times, e.mean, o.times, o.values)


def time_averaged_ratio(t: Trajectory, numerator, denominator, cutoff: float | None = None
                        ) -> float:
    """Time average of ``sum(numerator) / sum(denominator)`` along one trajectory.

    The state is held constant between recorded events. Averaging starts at
    ``cutoff`` (default: half the final time) and ends at the last event.
    Segments with an empty denominator are skipped.
    """
    counts = t.cell_counts().astype(float)
    times = np.asarray(t.times, dtype=float)
    t_end = times[-1]
    start = t_end / 2 if cutoff is None else float(cutoff)
    if not start < t_end:
        raise ValueError("cutoff must precede the last event")
    num = counts[:, [q - 1 for q in numerator]].sum(axis=1)
    den = counts[:, [q - 1 for q in denominator]].sum(axis=1)
    left = np.clip(times[:-1], start, t_end)
    right = np.clip(times[1:], start, t_end)
    width = right - left
    ok = den[:-1] > 0
    total = width[ok].sum()
    if total <= 0:
        raise ValueError("no time with a positive denominator after the cutoff")
    return float((num[:-1][ok] / den[:-1][ok] * width[ok]).sum() / total)
