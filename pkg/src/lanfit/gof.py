"""Goodness-of-fit statistics for two-sided daily loss fits.

All functions take observed and fitted losses per side as equal-length
arrays: ``(obs_x, obs_y, fit_x, fit_y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm


class GofError(ValueError):
    pass


def _arrays(obs_x, obs_y, fit_x, fit_y):
    arrs = [np.asarray(v, dtype=float).ravel() for v in (obs_x, obs_y, fit_x, fit_y)]
    if len({a.size for a in arrs}) != 1:
        raise GofError("observed and fitted series must have equal lengths")
    return arrs


def sum_squared_residuals(obs_x, obs_y, fit_x, fit_y) -> float:
    ox, oy, fx, fy = _arrays(obs_x, obs_y, fit_x, fit_y)
    return float(np.sum((ox - fx) ** 2) + np.sum((oy - fy) ** 2))


def r_squared(obs_x, obs_y, fit_x, fit_y) -> float:
    """``1 - SSR/SST`` with SST taken about each side's own mean."""
    ox, oy, fx, fy = _arrays(obs_x, obs_y, fit_x, fit_y)
    if ox.size < 2:
        raise GofError("R^2 needs at least 2 days")
    sst = float(np.sum((ox - ox.mean()) ** 2) + np.sum((oy - oy.mean()) ** 2))
    if sst == 0:
        raise GofError("R^2 undefined: observations are constant (SST = 0)")
    return 1.0 - sum_squared_residuals(ox, oy, fx, fy) / sst


def rmse(ssr_value: float, n_days: int) -> float:
    """Root mean squared error per day (the SSR of both sides over ``n_days``)."""
    if n_days < 1:
        raise GofError("n_days must be >= 1")
    return math.sqrt(ssr_value / n_days)


def ks_statistic(obs_x, obs_y, fit_x, fit_y) -> float:
    """One-sample KS distance of the pooled, standardised residuals from N(0, 1).

    Residuals of both sides are pooled, centred on their sample mean and
    divided by their sample standard deviation. A spread below 1e-12 returns 0.
    """
    ox, oy, fx, fy = _arrays(obs_x, obs_y, fit_x, fit_y)
    res = np.concatenate([ox - fx, oy - fy])
    n = res.size
    if n < 2:
        raise GofError("KS statistic needs at least 2 residuals")
    sd = res.std(ddof=1)
    if not sd >= 1e-12:
        return 0.0
    z = np.sort((res - res.mean()) / sd)
    cdf = norm.cdf(z)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def chi_square(obs_x, obs_y, fit_x, fit_y) -> float:
    ox, oy, fx, fy = _arrays(obs_x, obs_y, fit_x, fit_y)
    if np.any(fx <= 0) or np.any(fy <= 0):
        raise GofError("chi-square needs strictly positive fitted values")
    return float(np.sum((ox - fx) ** 2 / fx) + np.sum((oy - fy) ** 2 / fy))


def efficiency(rmse_value: float, rmse_reference: float) -> float:
    """Reference RMSE divided by this fit's RMSE."""
    if rmse_value == 0:
        if rmse_reference == 0:
            return 1.0
        raise GofError("efficiency undefined for a zero RMSE against a non-zero reference")
    if rmse_value < 0:
        raise GofError("RMSE must be non-negative")
    return rmse_reference / rmse_value


@dataclass(frozen=True)
class GofReport:
    """Bundle of fit statistics; a field that could not be computed is None
    and its reason is recorded in ``errors``."""

    ssr: float | None
    r_squared: float | None
    rmse: float | None
    ks: float | None
    chi_square: float | None
    efficiency: float | None
    n_days: int
    n_residuals: int
    errors: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "ssr": self.ssr, "r_squared": self.r_squared, "rmse": self.rmse, "ks": self.ks,
            "chi_square": self.chi_square, "efficiency": self.efficiency,
            "n_days": self.n_days, "n_residuals": self.n_residuals, "errors": dict(self.errors),
        }


def gof_bundle(obs_x, obs_y, fit_x, fit_y, rmse_reference: float | None = None) -> GofReport:
    ox, oy, fx, fy = _arrays(obs_x, obs_y, fit_x, fit_y)
    errors = {}

    def attempt(name, fn, *args):
        try:
            return fn(*args)
        except (GofError, ValueError, ZeroDivisionError) as exc:
            errors[name] = str(exc)
            return None

    ssr_value = sum_squared_residuals(ox, oy, fx, fy)
    rmse_value = attempt("rmse", rmse, ssr_value, ox.size)
    eff = None
    if rmse_reference is not None and rmse_value is not None:
        eff = attempt("efficiency", efficiency, rmse_value, rmse_reference)
    return GofReport(
        ssr=ssr_value,
        r_squared=attempt("r_squared", r_squared, ox, oy, fx, fy),
        rmse=rmse_value,
        ks=attempt("ks", ks_statistic, ox, oy, fx, fy),
        chi_square=attempt("chi_square", chi_square, ox, oy, fx, fy),
        efficiency=eff,
        n_days=int(ox.size),
        n_residuals=int(2 * ox.size),
        errors=errors,
    )
