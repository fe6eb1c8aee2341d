"""Objective functions and parameter estimation for Lanchester models.

Two objectives are supported: the sum of squared residuals of the target
category's daily losses (``"ssr"``) and the Poisson-process log-likelihood of
those losses (``"loglik"``).

The log-likelihood comes in two forms:

``"total"`` (default)
    Each side's daily losses are Poisson with mean equal to the summed
    component rate: ``L_t * ln(sum_i lam_it) - sum_i lam_it * s``. With one
    component this is the only form; with several it is the form whose
    per-day maxima equal ``L ln L - L`` and whose fitted components add up to
    the observed losses.
``"componentwise"``
    ``sum_i [L_t * ln(lam_it) - lam_it * s]``, i.e. every component is weighted
    by the full observed loss.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .core import (
    LossBreakdown,
    ModelError,
    ModelSpec,
    param_names,
    predict_series,
    regressors,
    series_strengths,
    target_losses,
)
from .data import BattleSeries, DataError
from .gof import GofReport, gof_bundle

log = logging.getLogger(__name__)

OBJECTIVES = ("ssr", "loglik")
LIKELIHOOD_FORMS = ("total", "componentwise")


class LikelihoodDomainError(ModelError):
    """A non-positive rate inside a logarithm."""


class EstimationError(RuntimeError):
    """Fitting failed; ``diagnostics`` carries per-restart details."""

    def __init__(self, message: str, diagnostics=None, last=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
        self.last = last


class IllConditionedError(EstimationError):
    pass


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def residuals(model: ModelSpec, series: BattleSeries) -> tuple[np.ndarray, np.ndarray]:
    """Observed minus fitted target-category losses, per side."""
    fitted = predict_series(model, series)
    ox, oy = target_losses(model, series)
    return ox - fitted.x_total, oy - fitted.y_total


def ssr(model: ModelSpec, series: BattleSeries) -> float:
    rx, ry = residuals(model, series)
    return float(np.sum(rx ** 2) + np.sum(ry ** 2))


def _loglik_terms(lx, ly, ox, oy, s, form, days):
    """Log-likelihood from component rates ``lx``/``ly`` of shape (n, F)."""
    for side, lam in (("X", lx), ("Y", ly)):
        bad = ~(lam > 0)
        if np.any(bad):
            t, i = np.argwhere(bad)[0]
            raise LikelihoodDomainError(
                f"non-positive {side} rate on day {days[t]}, component {i + 1}: {lam[t, i]}")
    if form == "total":
        tx = lx.sum(axis=1)
        ty = ly.sum(axis=1)
        value = np.sum(ox * np.log(tx) - tx * s) + np.sum(oy * np.log(ty) - ty * s)
    elif form == "componentwise":
        value = (np.sum(ox[:, None] * np.log(lx) - lx * s)
                 + np.sum(oy[:, None] * np.log(ly) - ly * s))
    else:
        raise ValueError(f"likelihood form must be one of {LIKELIHOOD_FORMS}, got {form!r}")
    return float(value)


def log_likelihood(model: ModelSpec, series: BattleSeries, form: str = "total") -> float:
    """Log-likelihood of the target-category losses (constant terms dropped)."""
    bad = [(n, v) for n, v in zip(["a"] * model.F + ["b"] * model.F, model.a + model.b)
           if not v > 0]
    if bad:
        raise LikelihoodDomainError(f"attrition rates must be positive for the likelihood, got {bad}")
    fitted = predict_series(model, series)
    ox, oy = target_losses(model, series)
    return _loglik_terms(fitted.x_components, fitted.y_components, ox, oy, model.s, form,
                         series.days)


def _shooters_for(F: int, series: BattleSeries, target: str, shooters):
    if shooters is not None:
        shooters = tuple(shooters)
        if len(shooters) != F:
            raise ModelError(f"{len(shooters)} shooter categories for {F} exponents")
        return shooters
    if F == 1:
        return (target,)
    if F == len(series.categories):
        return series.categories
    raise ModelError("shooter categories must be given when F differs from the series")


def concentrated_rates(p: Sequence[float], q: Sequence[float], series: BattleSeries,
                       shooters: Sequence[str] | None = None, target: str = "tank",
                       s: float = 1.0, per_component: bool = False):
    """Closed-form attrition rates at fixed exponents.

    By default every component shares the denominator
    ``sum_t sum_i X_t**q_i * Y_it**p_i * s``, so all ``a_i`` coincide; this is
    the likelihood maximiser when the components are tied to one common rate.
    ``per_component=True`` divides by each component's own sum instead, which
    maximises the componentwise likelihood in each rate separately.

    Returns ``(a_hat, b_hat)`` as arrays of length F.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if p.shape != q.shape:
        raise ModelError("p and q must have the same length")
    shooters = _shooters_for(len(p), series, target, shooters)
    probe = ModelSpec(shooters, a=[0.0] * len(p), b=[0.0] * len(p), p=p, q=q, target=target, s=s)
    xt, yt, xs, ys = series_strengths(probe, series)
    gx, gy = regressors(p, q, xt, yt, xs, ys)
    ox, oy = target_losses(probe, series)
    if per_component:
        dx = gx.sum(axis=0) * s
        dy = gy.sum(axis=0) * s
    else:
        dx = np.full(len(p), gx.sum() * s)
        dy = np.full(len(p), gy.sum() * s)
    for side, d in (("X", dx), ("Y", dy)):
        if np.any(d == 0):
            raise ModelError(f"concentrated {side} rate undefined: zero denominator")
        if not np.all(np.isfinite(d)):
            raise ModelError(f"concentrated {side} rate undefined: denominator overflow")
    return ox.sum() / dx, oy.sum() / dy


def _box_lstsq(G: np.ndarray, y: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Exact minimiser of ``|y - G c|^2`` subject to ``lo <= c <= hi``.

    Enumerates active sets (3**F of them), which is cheap for the handful of
    components these models use.
    """
    n = G.shape[1]
    norms = np.linalg.norm(G, axis=0)
    norms[norms == 0] = 1.0
    Gs = G / norms
    # convex problem: a feasible unconstrained solution is the answer
    sol = np.linalg.lstsq(Gs, y, rcond=None)[0] / norms
    if np.all(sol >= lo) and np.all(sol <= hi):
        res = y - G @ sol
        return sol, float(res @ res)
    best_cost, best = np.inf, None
    for state in itertools.product((0, 1, 2), repeat=n):
        if not any(state):
            continue
        state = np.array(state)
        c = np.where(state == 1, lo, hi).astype(float)
        free = np.flatnonzero(state == 0)
        fixed = np.flatnonzero(state != 0)
        if np.any(~np.isfinite(c[fixed])):
            continue
        r = y - G[:, fixed] @ c[fixed]
        if free.size:
            sol = np.linalg.lstsq(Gs[:, free], r, rcond=None)[0] / norms[free]
            if np.any(sol < lo[free]) or np.any(sol > hi[free]):
                continue
            c[free] = sol
        res = y - G @ c
        cost = float(res @ res)
        if cost < best_cost:
            best_cost, best = cost, c
    return best, best_cost


def least_squares_rates(p, q, series: BattleSeries, shooters=None, target: str = "tank",
                        bounds=(0.0, np.inf)):
    """Rates minimising the SSR at fixed exponents (box-constrained, per side).

    ``bounds`` is either one ``(lo, hi)`` pair for every rate or a pair of
    arrays ``((a_lo, b_lo), (a_hi, b_hi))`` each of length F.
    Returns ``(a, b, ssr)``.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    F = len(p)
    shooters = _shooters_for(F, series, target, shooters)
    probe = ModelSpec(shooters, a=[0.0] * F, b=[0.0] * F, p=p, q=q, target=target)
    xt, yt, xs, ys = series_strengths(probe, series)
    gx, gy = regressors(p, q, xt, yt, xs, ys)
    if not (np.all(np.isfinite(gx)) and np.all(np.isfinite(gy))):
        return None, None, math.inf
    ox, oy = target_losses(probe, series)
    lo, hi = bounds
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (2, F)) if np.ndim(lo) else np.full((2, F), lo)
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (2, F)) if np.ndim(hi) else np.full((2, F), hi)
    with np.errstate(all="ignore"):
        a, cx = _box_lstsq(gx, ox, lo[0], hi[0])
        b, cy = _box_lstsq(gy, oy, lo[1], hi[1])
    total = cx + cy
    if a is None or b is None or not math.isfinite(total):
        return None, None, math.inf
    return a, b, total


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

class VectorObjective:
    """SSR or negative log-likelihood as a function of a flat parameter vector.

    The vector is ordered ``a_1..a_F, b_1..b_F, p_1..p_F, q_1..q_F``. Invalid
    points (singular powers, non-positive likelihood rates, overflow) map to
    ``inf``; no bound checking is done here.
    """

    def __init__(self, series: BattleSeries, shooters: Sequence[str], target: str = "tank",
                 s: float = 1.0, objective: str = "ssr", likelihood: str = "total"):
        self.F = F = len(shooters)
        probe = ModelSpec(tuple(shooters), a=[0.0] * F, b=[0.0] * F, p=[0.0] * F,
                          q=[0.0] * F, target=target, s=s)
        self.xt, self.yt, self.xs, self.ys = series_strengths(probe, series)
        self.ox, self.oy = target_losses(probe, series)
        self.days = series.days
        self.s = s
        self.objective = objective
        self.likelihood = likelihood

    def __call__(self, x) -> float:
        F = self.F
        x = np.asarray(x, dtype=float)
        try:
            with np.errstate(all="ignore"):
                gx, gy = regressors(x[2 * F:3 * F], x[3 * F:], self.xt, self.yt, self.xs, self.ys)
                lx = x[:F] * gx
                ly = x[F:2 * F] * gy
                if self.objective == "ssr":
                    rx = self.ox - lx.sum(axis=1)
                    ry = self.oy - ly.sum(axis=1)
                    v = float(np.sum(rx ** 2) + np.sum(ry ** 2))
                else:
                    v = -_loglik_terms(lx, ly, self.ox, self.oy, self.s, self.likelihood,
                                       self.days)
        except ModelError:
            return math.inf
        return v if math.isfinite(v) else math.inf


DEFAULT_EXPONENT_BOUNDS = (-10.0, 50.0)
DEFAULT_RATE_BOUNDS = {"ssr": (0.0, 100.0), "loglik": (1e-9, 100.0)}
DEFAULT_INIT = {"ssr": 0.0, "loglik": 0.5}


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit`.

    ``bounds`` and ``init`` map parameter names (``a1``, ``b2``, ``p1``, ...)
    to overrides; anything not listed takes the objective's default. A bound
    with ``lo == hi`` pins that parameter.

    ``profile_rates`` optimises the exponents only, with rates solved at each
    step: bounded linear least squares for ``"ssr"``, the closed-form
    concentrated estimates for ``"loglik"``. Defaults to on for ``"ssr"``.
    """

    objective: str = "ssr"
    shooters: tuple[str, ...] = ("tank", "artillery")
    target: str = "tank"
    s: float = 1.0
    bounds: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    max_iter: int = 4000
    tol: float = 1e-10
    restarts: int = 8
    seed: int = 0
    profile_rates: bool | None = None
    likelihood: str = "total"
    per_component_rates: bool = False

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.likelihood not in LIKELIHOOD_FORMS:
            raise ValueError(f"likelihood must be one of {LIKELIHOOD_FORMS}")
        object.__setattr__(self, "shooters", tuple(self.shooters))
        if not self.shooters:
            raise ValueError("at least one shooter category is required")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1 or self.restarts < 1:
            raise ValueError("max_iter and restarts must be >= 1")
        names = set(self.names)
        for key in list(self.bounds) + list(self.init):
            if key not in names:
                raise ValueError(f"unknown parameter {key!r}; expected one of {sorted(names)}")
        for key, (lo, hi) in self.bounds.items():
            if not lo <= hi:
                raise ValueError(f"empty bound interval for {key}: [{lo}, {hi}]")
            if key[0] in "ab" and lo < 0:
                raise ValueError(f"rate bound for {key} must be >= 0")

    @property
    def F(self) -> int:
        return len(self.shooters)

    @property
    def names(self) -> list[str]:
        return param_names(self.F)

    @property
    def profiling(self) -> bool:
        return self.objective == "ssr" if self.profile_rates is None else self.profile_rates

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = [], []
        for name in self.names:
            default = DEFAULT_RATE_BOUNDS[self.objective] if name[0] in "ab" else DEFAULT_EXPONENT_BOUNDS
            b = self.bounds.get(name, default)
            lo.append(float(b[0]))
            hi.append(float(b[1]))
        return np.array(lo), np.array(hi)

    def init_array(self) -> np.ndarray:
        lo, hi = self.bound_arrays()
        x = np.array([float(self.init.get(n, DEFAULT_INIT[self.objective])) for n in self.names])
        return np.clip(x, lo, hi)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a fit. ``objective_value`` is the SSR or the log-likelihood."""

    model: ModelSpec
    objective: str
    objective_value: float
    fitted: LossBreakdown
    observed_x: np.ndarray
    observed_y: np.ndarray
    residuals_x: np.ndarray
    residuals_y: np.ndarray
    converged: bool
    iterations: int
    evaluations: int = 0
    history: tuple[float, ...] = ()
    restart_values: tuple[float, ...] = ()
    gof: GofReport | None = None

    @property
    def days(self) -> tuple[int, ...]:
        return self.fitted.days

    @property
    def ssr(self) -> float:
        return float(np.sum(self.residuals_x ** 2) + np.sum(self.residuals_y ** 2))

    @property
    def params(self) -> dict[str, float]:
        return self.model.params()


def make_result(model: ModelSpec, series: BattleSeries, objective: str, *,
                converged: bool, iterations: int, evaluations: int = 0,
                history=(), restart_values=(), likelihood: str = "total") -> FitResult:
    fitted = predict_series(model, series)
    ox, oy = target_losses(model, series)
    rx = ox - fitted.x_total
    ry = oy - fitted.y_total
    if objective == "ssr":
        value = float(np.sum(rx ** 2) + np.sum(ry ** 2))
    else:
        value = log_likelihood(model, series, form=likelihood)
    if not math.isfinite(value):
        raise EstimationError(f"non-finite objective {value} at the final parameters")
    return FitResult(
        model=model, objective=objective, objective_value=value, fitted=fitted,
        observed_x=np.asarray(ox), observed_y=np.asarray(oy),
        residuals_x=rx, residuals_y=ry, converged=converged, iterations=iterations,
        evaluations=evaluations, history=tuple(history), restart_values=tuple(restart_values),
        gof=gof_bundle(ox, oy, fitted.x_total, fitted.y_total),
    )


class _Problem:
    """Minimisation target over the free coordinates of a fit."""

    def __init__(self, series: BattleSeries, config: FitConfig):
        self.series = series
        self.config = config
        self.F = config.F
        self.lo, self.hi = config.bound_arrays()
        self.objective = VectorObjective(series, config.shooters, config.target, config.s,
                                         config.objective, config.likelihood)
        free = np.arange(2 * self.F, 4 * self.F) if config.profiling else np.arange(4 * self.F)
        # pinned coordinates (lo == hi) stay at their bound
        self.free = free[self.lo[free] < self.hi[free]]
        self.evals = 0
        self.best = math.inf
        self.trace: list[float] = []

    def rates(self, p, q):
        c = self.config
        F = self.F
        if c.objective == "ssr":
            a, b, _ = least_squares_rates(
                p, q, self.series, c.shooters, c.target,
                bounds=((self.lo[:F], self.lo[F:2 * F]), (self.hi[:F], self.hi[F:2 * F])))
            return a, b
        try:
            a, b = concentrated_rates(p, q, self.series, c.shooters, c.target, c.s,
                                      per_component=c.per_component_rates)
        except ModelError:
            return None, None
        return np.clip(a, self.lo[:F], self.hi[:F]), np.clip(b, self.lo[F:2 * F], self.hi[F:2 * F])

    def full(self, z: np.ndarray, base: np.ndarray) -> np.ndarray | None:
        x = base.copy()
        x[self.free] = z
        if self.config.profiling:
            F = self.F
            with np.errstate(all="ignore"):
                a, b = self.rates(x[2 * F:3 * F], x[3 * F:])
            if a is None:
                return None
            x[:F], x[F:2 * F] = a, b
        return x

    def __call__(self, z: np.ndarray, base: np.ndarray) -> float:
        self.evals += 1
        z = np.clip(z, self.lo[self.free], self.hi[self.free])
        x = self.full(z, base)
        v = math.inf if x is None else self.objective(x)
        if v < self.best:
            self.best = v
        self.trace.append(self.best)
        return v


def _local_search(problem: _Problem, z0: np.ndarray, base: np.ndarray, tol: float,
                  max_iter: int):
    """Bounded Nelder-Mead, polished with L-BFGS-B, repeated until stable."""
    lo = problem.lo[problem.free]
    hi = problem.hi[problem.free]
    bounds = list(zip(lo, hi))
    z = np.clip(z0, lo, hi)
    fz = problem(z, base)
    if z.size == 0:
        return z, fz, 0, math.isfinite(fz)
    iterations = 0
    nm_ok = False
    stable = False
    for _ in range(8):
        start = fz
        nm = minimize(problem, z, args=(base,), method="Nelder-Mead", bounds=bounds,
                      options=dict(maxiter=max_iter, maxfev=4 * max_iter, adaptive=True,
                                   xatol=1e-10, fatol=tol * max(1.0, abs(fz))))
        iterations += nm.nit
        nm_ok = bool(nm.success)
        if nm.fun < fz:
            z, fz = np.clip(nm.x, lo, hi), float(nm.fun)
        if math.isfinite(fz):
            polish = minimize(problem, z, args=(base,), method="L-BFGS-B", jac="3-point",
                              bounds=bounds, options=dict(maxiter=max_iter, ftol=tol, gtol=1e-12))
            iterations += polish.nit
            if polish.fun < fz:
                z, fz = np.clip(polish.x, lo, hi), float(polish.fun)
        if not math.isfinite(fz) or start - fz <= tol * max(1.0, abs(fz)):
            stable = math.isfinite(fz)
            break
    return z, fz, iterations, nm_ok and stable


def fit(series: BattleSeries, config: FitConfig | None = None) -> FitResult:
    """Bounded multi-start fit of a heterogeneous Lanchester model.

    Restart 0 starts from ``config.init``; later restarts draw each free
    coordinate uniformly inside its bounds (rates inside ``[lo, min(hi, 2)]``)
    from a generator seeded with ``config.seed``. The best restart wins.
    """
    config = config or FitConfig()
    problem = _Problem(series, config)
    rng = np.random.default_rng(config.seed)
    base = config.init_array()
    free = problem.free
    lo, hi = problem.lo[free], problem.hi[free]
    start_hi = np.where(free < 2 * config.F, np.minimum(hi, 2.0), hi)

    best = None
    diagnostics = []
    restart_values = []
    iterations = 0
    for k in range(config.restarts):
        z0 = base[free] if k == 0 else rng.uniform(lo, start_hi)
        if not math.isfinite(problem(z0, base)):
            diagnostics.append((k, "non-finite objective at start"))
            restart_values.append(math.inf)
            continue
        z, fz, nit, ok = _local_search(problem, z0, base, config.tol, config.max_iter)
        iterations += nit
        restart_values.append(fz)
        diagnostics.append((k, fz, ok))
        log.debug("restart %d: objective %.10g converged=%s", k, fz, ok)
        if math.isfinite(fz) and (best is None or fz < best[1]):
            best = (z, fz, ok)

    if best is None:
        raise EstimationError("all restarts produced a non-finite objective", diagnostics)
    x = problem.full(best[0], base)
    model = ModelSpec.from_vector(x, config.shooters, config.target, config.s)
    sign = 1.0 if config.objective == "ssr" else -1.0
    history = [sign * v for v in problem.trace if math.isfinite(v)]
    return make_result(
        model, series, config.objective, converged=best[2], iterations=iterations,
        evaluations=problem.evals, history=history,
        restart_values=[sign * v for v in restart_values], likelihood=config.likelihood)


# ---------------------------------------------------------------------------
# Log-linear regression (homogeneous, one component)
# ---------------------------------------------------------------------------

def loglinear_fit(series: BattleSeries, category: str = "tank") -> ModelSpec:
    """OLS of ``ln(loss)`` on ``[1, ln(own strength), ln(enemy strength)]`` per side.

    The two sides are regressed separately, so the returned model carries
    Y-side exponents in ``p_y``/``q_y`` whenever they differ from the X side.
    """
    if series.n_days < 3:
        raise EstimationError(f"insufficient observations: {series.n_days} days, need >= 3")
    j = series.category_index(category)
    cols = {
        "X": (series.x_losses[:, j], series.x_on_hand[:, j], series.y_on_hand[:, j]),
        "Y": (series.y_losses[:, j], series.y_on_hand[:, j], series.x_on_hand[:, j]),
    }
    coef = {}
    for side, (loss, own, enemy) in cols.items():
        for name, arr in (("losses", loss), ("own strength", own), ("enemy strength", enemy)):
            zero = np.flatnonzero(arr <= 0)
            if zero.size:
                raise LikelihoodDomainError(
                    f"log undefined: side {side} {name} is zero on day {series.days[zero[0]]}")
        design = np.column_stack([np.ones(series.n_days), np.log(own), np.log(enemy)])
        if np.linalg.matrix_rank(design) < 3:
            raise EstimationError(f"rank-deficient design for side {side}")
        beta = np.linalg.lstsq(design, np.log(loss), rcond=None)[0]
        coef[side] = beta
    ax, qx, px = coef["X"]
    by, qy, py = coef["Y"]
    asym = not (np.isclose(px, py, rtol=0, atol=1e-12) and np.isclose(qx, qy, rtol=0, atol=1e-12))
    return ModelSpec(
        shooters=(category,), a=(math.exp(ax),), b=(math.exp(by),), p=(px,), q=(qx,),
        target=category, p_y=(py,) if asym else None, q_y=(qy,) if asym else None,
        name="loglinear",
    )


# ---------------------------------------------------------------------------
# Newton-Raphson on the SSR
# ---------------------------------------------------------------------------

def _scales(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(x), 1.0)


def fd_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient with steps ``h * max(|x_i|, 1)``."""
    x = np.asarray(x, dtype=float)
    steps = h * _scales(x)
    g = np.empty_like(x)
    for i, hi in enumerate(steps):
        e = np.zeros_like(x)
        e[i] = hi
        g[i] = (f(x + e) - f(x - e)) / (2 * hi)
    return g


def fd_hessian(f, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with steps ``h * max(|x_i|, 1)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    steps = h * _scales(x)
    f0 = f(x)
    H = np.empty((n, n))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = steps[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * steps[i] * steps[j])
    return H


def newton_minimize(f, x0, h: float = 1e-6, gtol: float = 1e-8, max_iter: int = 100,
                    cond_limit: float = 1e12, bounds=None, h_hess: float = 1e-4):
    """Damped Newton iterations on ``f`` in scaled coordinates.

    ``h`` is the relative gradient step and ``h_hess`` the Hessian step; the
    larger Hessian step keeps second-difference rounding error near 1e-8.

    Coordinates are scaled by ``max(|x0_i|, 1)`` and the objective by
    ``max(|f(x0)|, 1)``, so ``gtol`` applies to a dimensionless gradient.
    Returns ``(x, f(x), iterations, gradient_norm, converged)``.
    """
    x0 = np.asarray(x0, dtype=float)
    xs = _scales(x0)
    fs = max(abs(f(x0)), 1.0)
    lo = None if bounds is None else np.asarray(bounds[0], dtype=float) / xs
    hi = None if bounds is None else np.asarray(bounds[1], dtype=float) / xs

    def phi(u):
        return f(u * xs) / fs

    u = x0 / xs
    fu = phi(u)
    gnorm = math.inf
    for it in range(max_iter + 1):
        g = fd_gradient(phi, u, h)
        gnorm = float(np.linalg.norm(g))
        if gnorm < gtol:
            return u * xs, fu * fs, it, gnorm, True
        if it == max_iter:
            break
        H = fd_hessian(phi, u, h_hess)
        cond = np.linalg.cond(H) if np.all(np.isfinite(H)) else math.inf
        if not cond <= cond_limit:
            raise IllConditionedError(
                f"Hessian condition estimate {cond:.3g} exceeds {cond_limit:.0e}",
                last=u * xs)
        step = -np.linalg.solve(H, g)
        t = 1.0
        while True:
            cand = u + t * step
            if lo is not None:
                cand = np.clip(cand, lo, hi)
            fc = phi(cand)
            if fc <= fu or t < 1e-10:
                break
            t *= 0.5
        if fc > fu:
            break
        u, fu = cand, fc
    return u * xs, fu * fs, max_iter, gnorm, False


def newton_raphson_fit(series: BattleSeries, init, shooters: Sequence[str] = ("tank",),
                       target: str = "tank", s: float = 1.0, gtol: float = 1e-8,
                       max_iter: int = 100, bounds=None) -> FitResult:
    """Newton-Raphson minimisation of the SSR over the full parameter vector.

    ``init`` is a vector ordered ``a_1..a_F, b_1..b_F, p_1..p_F, q_1..q_F`` or
    a ModelSpec. Raises IllConditionedError (with ``last``) when the
    finite-difference Hessian is numerically singular.
    """
    if isinstance(init, ModelSpec):
        shooters, target, s = init.shooters, init.target, init.s
        init = init.to_vector()
    shooters = tuple(shooters)
    x0 = np.asarray(init, dtype=float)
    if bounds is not None:
        if np.any(x0 < bounds[0]) or np.any(x0 > bounds[1]):
            raise EstimationError("initial point lies outside the bounds")
    F = len(shooters)
    objective = VectorObjective(series, shooters, target, s, "ssr")

    x, _, iterations, gnorm, converged = newton_minimize(
        objective, x0, gtol=gtol, max_iter=max_iter, bounds=bounds)
    if np.any(x[:2 * F] < 0):
        log.warning("Newton-Raphson ended with a negative rate; clipping to 0")
        x[:2 * F] = np.maximum(x[:2 * F], 0.0)
    model = ModelSpec.from_vector(x, shooters, target, s)
    return make_result(model, series, "ssr", converged=converged, iterations=iterations)


def gradient_norm(model: ModelSpec, series: BattleSeries, objective: str = "ssr",
                  likelihood: str = "total", h: float = 1e-6) -> float:
    """Scaled finite-difference gradient norm of an objective at ``model``.

    Same scaling as :func:`newton_minimize`: coordinates by ``max(|x_i|, 1)``,
    the objective by ``max(|f|, 1)``.
    """
    x0 = model.to_vector()
    f = VectorObjective(series, model.shooters, model.target, model.s, objective, likelihood)
    xs = _scales(x0)
    fs = max(abs(f(x0)), 1.0)
    return float(np.linalg.norm(fd_gradient(lambda u: f(u * xs) / fs, x0 / xs, h)))
