"""Lanchester loss-rate laws, state equation and closed-form trajectories.

Orientation used throughout: for shooter category ``i``

    X losses = sum_i a_i * X_target**q_i * Y_i**p_i
    Y losses = sum_i b_i * Y_target**q_i * X_i**p_i

``q`` powers the suffering side's target-category strength and ``p`` the
shooting side's category-``i`` strength.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .data import BattleSeries, DataError


class ModelError(ValueError):
    """Invalid model parameters or a model incompatible with the data."""


class SingularityError(ModelError):
    """A zero strength raised to a negative exponent."""


class UndefinedStateError(ModelError):
    """State ratio with a zero denominator."""


def _tuple(values) -> tuple[float, ...]:
    if np.isscalar(values):
        values = (values,)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ModelSpec:
    """Heterogeneous Lanchester model with ``F = len(shooters)`` components.

    ``p_y``/``q_y`` override the exponents of the Y-side equation; they are
    only set for asymmetric laws such as the ambush preset.
    """

    shooters: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]
    p: tuple[float, ...]
    q: tuple[float, ...]
    target: str = "tank"
    s: float = 1.0
    p_y: tuple[float, ...] | None = None
    q_y: tuple[float, ...] | None = None
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        shooters = (self.shooters,) if isinstance(self.shooters, str) else tuple(self.shooters)
        object.__setattr__(self, "shooters", tuple(str(c) for c in shooters))
        F = len(self.shooters)
        if F < 1:
            raise ModelError("a model needs at least one shooter category")
        if len(set(self.shooters)) != F:
            raise ModelError(f"shooter categories must be unique, got {self.shooters}")
        for name in ("a", "b", "p", "q", "p_y", "q_y"):
            value = getattr(self, name)
            if value is None:
                continue
            value = _tuple(value)
            if len(value) != F:
                raise ModelError(f"{name} has {len(value)} entries, expected F={F}")
            if not all(math.isfinite(v) for v in value):
                raise ModelError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if any(v < 0 for v in self.a + self.b):
            raise ModelError(f"attrition rates must be >= 0, got a={self.a}, b={self.b}")
        if not (self.s > 0 and math.isfinite(self.s)):
            raise ModelError(f"time step s must be positive, got {self.s}")

    @property
    def F(self) -> int:
        return len(self.shooters)

    @property
    def asymmetric(self) -> bool:
        return self.p_y is not None or self.q_y is not None

    @property
    def y_exponents(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        return (self.p_y if self.p_y is not None else self.p,
                self.q_y if self.q_y is not None else self.q)

    def with_rates(self, a: Sequence[float], b: Sequence[float]) -> ModelSpec:
        return replace(self, a=_tuple(a), b=_tuple(b))

    # parameter-vector view, ordered a_1..a_F, b_1..b_F, p_1..p_F, q_1..q_F

    def param_names(self) -> list[str]:
        return param_names(self.F)

    def to_vector(self) -> np.ndarray:
        if self.asymmetric:
            raise ModelError("asymmetric models have no flat parameter vector")
        return np.array(self.a + self.b + self.p + self.q)

    @classmethod
    def from_vector(cls, vector, shooters: Sequence[str], target: str = "tank",
                    s: float = 1.0) -> ModelSpec:
        F = len(shooters)
        v = np.asarray(vector, dtype=float)
        if v.shape != (4 * F,):
            raise ModelError(f"parameter vector must have {4 * F} entries, got {v.shape}")
        return cls(shooters=tuple(shooters), a=v[:F], b=v[F:2 * F], p=v[2 * F:3 * F],
                   q=v[3 * F:], target=target, s=s)

    def params(self) -> dict[str, float]:
        return dict(zip(self.param_names(), self.to_vector().tolist()))


def param_names(F: int) -> list[str]:
    return [f"{kind}{i}" for kind in "abpq" for i in range(1, F + 1)]


@dataclass(frozen=True)
class LossBreakdown:
    """Fitted daily losses per side, with per-shooter components (``[day, i]``)."""

    days: tuple[int, ...]
    shooters: tuple[str, ...]
    x_components: np.ndarray
    y_components: np.ndarray

    @property
    def x_total(self) -> np.ndarray:
        return self.x_components.sum(axis=1)

    @property
    def y_total(self) -> np.ndarray:
        return self.y_components.sum(axis=1)


@dataclass(frozen=True)
class LossRates:
    x_loss: float
    y_loss: float
    x_components: tuple[float, ...]
    y_components: tuple[float, ...]


# ---------------------------------------------------------------------------
# Loss-rate evaluation
# ---------------------------------------------------------------------------

def power(base, exponent) -> np.ndarray:
    """Elementwise ``base**exponent`` with ``0**0 == 1``.

    Raises SingularityError for a zero base with a negative exponent.
    Overflow yields ``inf`` rather than an exception.
    """
    base = np.asarray(base, dtype=float)
    exponent = np.asarray(exponent, dtype=float)
    if np.any(base < 0):
        raise ModelError("strengths must be non-negative")
    if np.any((base == 0) & (exponent < 0)):
        raise SingularityError("zero strength raised to a negative exponent")
    with np.errstate(over="ignore"):
        return np.power(base, exponent)


def regressors(p, q, x_target, y_target, x_shooters, y_shooters, p_y=None, q_y=None):
    """Per-component strength products, each of shape ``(n, F)``.

    ``x_target``/``y_target`` have shape ``(n,)``; ``x_shooters``/``y_shooters``
    have shape ``(n, F)``. Multiply column ``i`` by ``a_i`` (or ``b_i``) to get
    the component losses.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p_y = p if p_y is None else np.asarray(p_y, dtype=float)
    q_y = q if q_y is None else np.asarray(q_y, dtype=float)
    xt = np.asarray(x_target, dtype=float)[:, None]
    yt = np.asarray(y_target, dtype=float)[:, None]
    with np.errstate(over="ignore", invalid="ignore"):
        gx = power(xt, q) * power(y_shooters, p)
        gy = power(yt, q_y) * power(x_shooters, p_y)
    return gx, gy


def series_strengths(model: ModelSpec, series: BattleSeries):
    """Target and shooter strength arrays of ``series`` for ``model``."""
    try:
        idx = [series.category_index(c) for c in model.shooters]
        t = series.category_index(model.target)
    except DataError as exc:
        raise ModelError(f"category mismatch: {exc}") from None
    return (series.x_on_hand[:, t], series.y_on_hand[:, t],
            series.x_on_hand[:, idx], series.y_on_hand[:, idx])


def target_losses(model: ModelSpec, series: BattleSeries) -> tuple[np.ndarray, np.ndarray]:
    t = series.category_index(model.target)
    return series.x_losses[:, t], series.y_losses[:, t]


def loss_rates(model: ModelSpec, x_strengths: Mapping[str, float],
               y_strengths: Mapping[str, float]) -> LossRates:
    """Instantaneous loss rates for one set of strengths, keyed by category."""
    try:
        xs = np.array([[x_strengths[c] for c in model.shooters]], dtype=float)
        ys = np.array([[y_strengths[c] for c in model.shooters]], dtype=float)
        xt = np.array([x_strengths[model.target]], dtype=float)
        yt = np.array([y_strengths[model.target]], dtype=float)
    except KeyError as exc:
        raise ModelError(f"missing strength for category {exc.args[0]!r}") from None
    if np.any(xs < 0) or np.any(ys < 0) or xt[0] < 0 or yt[0] < 0:
        raise ModelError("strengths must be non-negative")
    py, qy = model.y_exponents
    gx, gy = regressors(model.p, model.q, xt, yt, xs, ys, py, qy)
    xc = np.asarray(model.a) * gx[0]
    yc = np.asarray(model.b) * gy[0]
    return LossRates(float(xc.sum()), float(yc.sum()), tuple(xc.tolist()), tuple(yc.tolist()))


def predict_series(model: ModelSpec, series: BattleSeries) -> LossBreakdown:
    """One-step-ahead fitted losses from each day's observed strengths."""
    xt, yt, xs, ys = series_strengths(model, series)
    py, qy = model.y_exponents
    gx, gy = regressors(model.p, model.q, xt, yt, xs, ys, py, qy)
    xc = np.asarray(model.a) * gx
    yc = np.asarray(model.b) * gy
    xc.setflags(write=False)
    yc.setflags(write=False)
    return LossBreakdown(series.days, model.shooters, xc, yc)


# ---------------------------------------------------------------------------
# State equation, victory condition, closed form
# ---------------------------------------------------------------------------

def state_ratio(p: float, q: float, x0: float, y0: float, xt: float, yt: float) -> float:
    """Ratio of powered losses; equals b/a along an exact trajectory."""
    if min(x0, y0, xt, yt) < 0:
        raise ModelError("strengths must be non-negative")
    x0p, x0q, y0p, y0q, xtp, xtq, ytp, ytq = (
        float(power(v, e)) for v, e in
        ((x0, p), (x0, q), (y0, p), (y0, q), (xt, p), (xt, q), (yt, p), (yt, q))
    )
    num = y0p * x0q - ytp * xtq
    den = x0p * y0q - xtp * ytq
    if den == 0:
        raise UndefinedStateError(
            f"state ratio undefined: denominator is zero (numerator {num})")
    return num / den


def victory_check(p: float, q: float, x0: float, y0: float, xt: float, yt: float,
                  a: float, b: float) -> bool:
    """True when the state ratio has reached the breakpoint ``b / a``."""
    if not a > 0:
        raise ModelError(f"a must be positive, got {a}")
    return state_ratio(p, q, x0, y0, xt, yt) >= b / a


def closed_form_trajectory(p: float, q: float, a: float, b: float, x0: float, y0: float,
                           t) -> tuple[np.ndarray | float, np.ndarray | float]:
    """Powered strengths ``(X**p, Y**q)`` at time(s) ``t`` in hyperbolic form."""
    if not (a > 0 and b > 0):
        raise ModelError(f"rates must be positive, got a={a}, b={b}")
    if not (x0 > 0 and y0 > 0):
        raise ModelError(f"initial strengths must be positive, got x0={x0}, y0={y0}")
    t_arr = np.asarray(t, dtype=float)
    xp0 = x0 ** p
    yq0 = y0 ** q
    k = math.sqrt(a * b)
    ra = math.sqrt(a / b)
    rb = math.sqrt(b / a)
    # cosh/sinh form of the exponential pair; exact at t = 0
    c = np.cosh(t_arr * k)
    sh = np.sinh(t_arr * k)
    xp = xp0 * c - yq0 * ra * sh
    yq = yq0 * c - xp0 * rb * sh
    if t_arr.ndim == 0:
        return float(xp), float(yq)
    return xp, yq


# ---------------------------------------------------------------------------
# Homogeneous presets
# ---------------------------------------------------------------------------

PRESETS = {
    # name: (p, q, p_y, q_y)
    "linear": (1.0, 1.0, None, None),
    "square": (0.0, 1.0, None, None),
    # area fire on the X side, aimed fire on the Y side
    "ambush": (1.0, 1.0, 1.0, 0.0),
}


def homogeneous_preset(name: str, category: str = "tank", a: float = 0.0,
                       b: float = 0.0) -> ModelSpec:
    try:
        p, q, p_y, q_y = PRESETS[name]
    except KeyError:
        raise ModelError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return ModelSpec(
        shooters=(category,), a=(a,), b=(b,), p=(p,), q=(q,), target=category,
        p_y=None if p_y is None else (p_y,), q_y=None if q_y is None else (q_y,),
        name=name,
    )
