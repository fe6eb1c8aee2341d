"""Phase partitions, per-phase fitting, and exponent-surface sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ModelError, ModelSpec, param_names
from .data import BattleSeries, DataError, DayWindow
from .estimation import (
    EstimationError,
    FitConfig,
    FitResult,
    concentrated_rates,
    fit,
    least_squares_rates,
    log_likelihood,
)
from .gof import GofReport, gof_bundle

SCHEMES = ("whole", "five_phase", "per_day", "custom")

# first day of each phase after the opening one, in the five-phase split
FIVE_PHASE_STARTS = (4, 7, 9, 12)


class PartitionError(DataError):
    pass


@dataclass(frozen=True)
class PhasePartition:
    """Contiguous, ordered, non-overlapping day windows."""

    windows: tuple[DayWindow, ...]

    def __post_init__(self):
        windows = tuple(self.windows)
        object.__setattr__(self, "windows", windows)
        if not windows:
            raise PartitionError("a partition needs at least one window")
        for prev, nxt in zip(windows, windows[1:]):
            if nxt.first <= prev.last:
                raise PartitionError(f"windows {prev} and {nxt} overlap or are out of order")
            if nxt.first != prev.last + 1:
                raise PartitionError(f"gap between windows {prev} and {nxt}")

    @property
    def window(self) -> DayWindow:
        return DayWindow(self.windows[0].first, self.windows[-1].last)

    def __len__(self) -> int:
        return len(self.windows)

    def __iter__(self):
        return iter(self.windows)


def parse_windows(text: str) -> list[DayWindow]:
    """``"2-3,4-6,7-14"`` (``:`` also accepted inside a range)."""
    out = []
    for part in text.split(","):
        part = part.strip().replace("-", ":")
        if ":" not in part:
            if not part.isdigit():
                raise PartitionError(f"malformed phase {part!r}")
            part = f"{part}:{part}"
        out.append(DayWindow.parse(part))
    return out


def make_partition(scheme: str, window: DayWindow,
                   custom: Sequence[DayWindow] | str | None = None) -> PhasePartition:
    if scheme == "whole":
        return PhasePartition((window,))
    if scheme == "per_day":
        return PhasePartition(tuple(DayWindow(d, d) for d in range(window.first, window.last + 1)))
    if scheme == "five_phase":
        starts = [window.first] + [d for d in FIVE_PHASE_STARTS if window.first < d <= window.last]
        ends = [s - 1 for s in starts[1:]] + [window.last]
        return PhasePartition(tuple(DayWindow(a, b) for a, b in zip(starts, ends)))
    if scheme == "custom":
        if custom is None:
            raise PartitionError("custom partition needs a window list")
        windows = parse_windows(custom) if isinstance(custom, str) else list(custom)
        part = PhasePartition(tuple(windows))
        if part.window != window:
            raise PartitionError(f"custom partition covers {part.window}, expected {window}")
        return part
    raise PartitionError(f"unknown partition scheme {scheme!r}; choose from {SCHEMES}")


@dataclass(frozen=True)
class PhaseFit:
    """Per-phase results and the statistics of the stitched-together fit."""

    partition: PhasePartition
    results: tuple[FitResult, ...]
    gof: GofReport

    @property
    def days(self) -> tuple[int, ...]:
        return tuple(d for r in self.results for d in r.days)

    @property
    def total_objective(self) -> float:
        return float(sum(r.objective_value for r in self.results))

    @property
    def total_ssr(self) -> float:
        return float(sum(r.ssr for r in self.results))

    @property
    def converged(self) -> bool:
        return all(r.converged for r in self.results)

    def stacked(self, attr: str) -> np.ndarray:
        return np.concatenate([getattr(r, attr) for r in self.results])


def fit_phases(series: BattleSeries, partition: PhasePartition,
               config: FitConfig | None = None) -> PhaseFit:
    """Fit every phase independently and pool the fitted days."""
    config = config or FitConfig()
    w = partition.window
    if w.first < series.days[0] or w.last > series.days[-1]:
        raise PartitionError(f"partition {w} outside series days {series.window}")
    results = []
    for k, window in enumerate(partition, start=1):
        try:
            results.append(fit(series.slice(window), config))
        except (EstimationError, ModelError, DataError) as exc:
            raise EstimationError(f"phase {k} ({window}) failed: {exc}") from exc
    ox = np.concatenate([r.observed_x for r in results])
    oy = np.concatenate([r.observed_y for r in results])
    fx = np.concatenate([r.fitted.x_total for r in results])
    fy = np.concatenate([r.fitted.y_total for r in results])
    return PhaseFit(partition, tuple(results), gof_bundle(ox, oy, fx, fy))


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

def axis_values(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive lattice ``lo, lo + step, ..., hi``."""
    if not step > 0:
        raise ValueError(f"axis step must be positive, got {step}")
    if lo > hi:
        raise ValueError(f"axis minimum {lo} exceeds maximum {hi}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(n)


@dataclass(frozen=True)
class SweepGrid:
    """Objective over a 2-D lattice of exponent values.

    ``values[i, j]`` belongs to ``axis1[i]``, ``axis2[j]``; invalid cells hold
    NaN with ``valid[i, j]`` False and a reason in ``reasons``.
    """

    axis1_name: str
    axis1: np.ndarray
    axis2_name: str
    axis2: np.ndarray
    objective: str
    values: np.ndarray
    a_hats: np.ndarray
    b_hats: np.ndarray
    valid: np.ndarray
    fixed: dict
    reasons: dict

    @property
    def F(self) -> int:
        return self.a_hats.shape[-1]

    def best(self) -> tuple[int, int, float]:
        """Index and value of the best valid cell (min SSR / max log-likelihood)."""
        if not self.valid.any():
            raise ValueError("sweep has no valid cells")
        vals = np.where(self.valid, self.values, np.nan)
        idx = np.nanargmin(vals) if self.objective == "ssr" else np.nanargmax(vals)
        i, j = np.unravel_index(idx, vals.shape)
        return int(i), int(j), float(vals[i, j])

    def rows(self):
        for i, v1 in enumerate(self.axis1):
            for j, v2 in enumerate(self.axis2):
                yield (float(v1), float(v2), float(self.values[i, j]),
                       self.a_hats[i, j].tolist(), self.b_hats[i, j].tolist(),
                       bool(self.valid[i, j]))


def sweep(series: BattleSeries, axes: Mapping[str, Sequence[float]], fixed: Mapping[str, float],
          objective: str = "loglik", shooters: Sequence[str] = ("tank", "artillery"),
          target: str = "tank", s: float = 1.0, likelihood: str = "total",
          per_component_rates: bool = False, rate_bounds=(0.0, np.inf)) -> SweepGrid:
    """Evaluate the objective on a lattice over two exponents.

    Rates are concentrated out at every cell: closed-form estimates for
    ``"loglik"``, bounded linear least squares for ``"ssr"``.
    """
    if len(axes) != 2:
        raise ValueError(f"a sweep needs exactly two axes, got {list(axes)}")
    shooters = tuple(shooters)
    F = len(shooters)
    exponents = [n for n in param_names(F) if n[0] in "pq"]
    (n1, v1), (n2, v2) = axes.items()
    for name in (n1, n2):
        if name not in exponents:
            raise ValueError(f"axis {name!r} is not an exponent; choose from {exponents}")
    if n1 == n2:
        raise ValueError("the two axes must differ")
    missing = [n for n in exponents if n not in (n1, n2) and n not in fixed]
    if missing:
        raise ValueError(f"fixed values required for {missing}")
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.size == 0 or v2.size == 0:
        raise ValueError("sweep axes must be non-empty")

    shape = (v1.size, v2.size)
    values = np.full(shape, np.nan)
    a_hats = np.full(shape + (F,), np.nan)
    b_hats = np.full(shape + (F,), np.nan)
    valid = np.zeros(shape, dtype=bool)
    reasons = {}
    point = {n: float(fixed[n]) for n in exponents if n not in (n1, n2)}
    for i, x1 in enumerate(v1):
        for j, x2 in enumerate(v2):
            point[n1], point[n2] = float(x1), float(x2)
            p = [point[f"p{k}"] for k in range(1, F + 1)]
            q = [point[f"q{k}"] for k in range(1, F + 1)]
            try:
                with np.errstate(all="ignore"):
                    if objective == "loglik":
                        a, b = concentrated_rates(p, q, series, shooters, target, s,
                                                  per_component=per_component_rates)
                        model = ModelSpec(shooters, a=a, b=b, p=p, q=q, target=target, s=s)
                        value = log_likelihood(model, series, form=likelihood)
                    elif objective == "ssr":
                        a, b, value = least_squares_rates(p, q, series, shooters, target,
                                                          bounds=rate_bounds)
                        if a is None:
                            raise ModelError("non-finite regressors or no feasible rates")
                    else:
                        raise ValueError(f"unknown objective {objective!r}")
            except ModelError as exc:
                reasons[(i, j)] = str(exc)
                continue
            if not math.isfinite(value):
                reasons[(i, j)] = "non-finite objective"
                continue
            values[i, j] = value
            a_hats[i, j] = a
            b_hats[i, j] = b
            valid[i, j] = True
    return SweepGrid(n1, v1, n2, v2, objective, values, a_hats, b_hats, valid,
                     dict(fixed), reasons)
