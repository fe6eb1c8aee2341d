import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from conftest import PUBLISHED_FIT, PUBLISHED_PARAMS, published_day_model
from lanfit.core import (
    ModelError, ModelSpec, PRESETS, SingularityError, UndefinedStateError,
    closed_form_trajectory, homogeneous_preset, loss_rates, power, predict_series,
    state_ratio, victory_check,
)
from lanfit.data import DayWindow

DAY2_X = {"tank": 2367, "artillery": 676}
DAY2_Y = {"tank": 749, "artillery": 1161}


def test_day2_components_from_phase_two_parameters():
    r = loss_rates(published_day_model(2), DAY2_X, DAY2_Y)
    np.testing.assert_allclose(r.x_components, (116.12, 0.88), rtol=0.01)
    np.testing.assert_allclose(r.y_components, (246.47, 1.53), rtol=0.01)
    assert r.x_loss == pytest.approx(sum(r.x_components))


def test_day2_components_hand_computed():
    a1, a2, b1, b2, p1, p2, q1, q2 = PUBLISHED_PARAMS[1]
    r = loss_rates(published_day_model(2), DAY2_X, DAY2_Y)
    assert r.x_components[0] == pytest.approx(a1 * 2367 ** q1 * 749 ** p1, rel=1e-12)
    assert r.x_components[1] == pytest.approx(a2 * 2367 ** q2 * 1161 ** p2, rel=1e-12)
    assert r.y_components[0] == pytest.approx(b1 * 749 ** q1 * 2367 ** p1, rel=1e-12)
    assert r.y_components[1] == pytest.approx(b2 * 749 ** q2 * 676 ** p2, rel=1e-12)


def test_zero_rates_give_zero_losses():
    m = ModelSpec(("tank", "artillery"), a=(0, 0), b=(0, 0), p=(1, 2), q=(0.5, 1))
    r = loss_rates(m, DAY2_X, DAY2_Y)
    assert (r.x_loss, r.y_loss) == (0.0, 0.0)


@given(st.floats(0, 1e5), st.floats(0, 1e5))
def test_zero_exponents_give_unit_regressor(x, y):
    m = ModelSpec(("tank",), a=(1,), b=(1,), p=(0,), q=(0,))
    r = loss_rates(m, {"tank": x}, {"tank": y})
    assert (r.x_loss, r.y_loss) == (1.0, 1.0)


def test_power_rules():
    assert power(0.0, 0.0) == 1.0
    with pytest.raises(SingularityError):
        power(0.0, -1.0)
    with pytest.raises(ModelError):
        power(-1.0, 2.0)
    assert math.isinf(power(1e300, 50.0))


def test_missing_strength():
    with pytest.raises(ModelError, match="artillery"):
        loss_rates(published_day_model(2), {"tank": 1}, DAY2_Y)


@pytest.mark.parametrize("kwargs", [
    dict(a=(1,), b=(1, 1), p=(1, 1), q=(1, 1)),
    dict(a=(-1, 1), b=(1, 1), p=(1, 1), q=(1, 1)),
    dict(a=(1, 1), b=(1, 1), p=(math.nan, 1), q=(1, 1)),
])
def test_model_validation(kwargs):
    with pytest.raises(ModelError):
        ModelSpec(("tank", "artillery"), **kwargs)


def test_vector_round_trip():
    m = published_day_model(5)
    v = m.to_vector()
    assert m.param_names() == ["a1", "a2", "b1", "b2", "p1", "p2", "q1", "q2"]
    assert ModelSpec.from_vector(v, m.shooters) == m


def test_published_fit_reproduced_from_day_parameters(kursk):
    for day in range(1, 15):
        fitted = predict_series(published_day_model(day), kursk.slice(DayWindow(day, day)))
        row = PUBLISHED_FIT[day - 1]
        got = [fitted.x_total[0], *fitted.x_components[0], fitted.y_total[0],
               *fitted.y_components[0]]
        np.testing.assert_allclose(got, row[1:], rtol=0.01, err_msg=f"day {day}")


def test_published_single_phase_model_is_finite(kursk):
    m = ModelSpec(("tank", "artillery"), a=(1.46, 0.906), b=(0.704, 0.953),
                  p=(0.129, 0.138), q=(0.404, 0.136))
    f = predict_series(m, kursk.slice(DayWindow(2, 14)))
    assert np.all(np.isfinite(f.x_total)) and np.all(np.isfinite(f.y_total))
    assert f.x_total.shape == (13,)


def test_predictions_are_read_only(kursk):
    f = predict_series(published_day_model(3), kursk)
    with pytest.raises(ValueError):
        f.x_components[0, 0] = 0


# state equation and victory condition

def test_state_ratio_hand_value():
    assert state_ratio(0, 1, 100, 90, 80, 60) == pytest.approx(2 / 3)


@given(st.floats(1, 1e3), st.floats(1, 1e3), st.floats(1, 1e3), st.floats(1, 1e3))
def test_state_ratio_linear_law_is_one(x0, y0, xt, yt):
    assume(abs(x0 * y0 - xt * yt) > 1e-6 * x0 * y0)
    assert state_ratio(1, 1, x0, y0, xt, yt) == pytest.approx(1.0, rel=1e-6)


def test_state_ratio_without_attrition():
    with pytest.raises(UndefinedStateError):
        state_ratio(0, 1, 100, 90, 100, 90)


def test_victory_examples():
    assert victory_check(0, 1, 100, 90, 80, 60, a=1, b=0.5)
    assert not victory_check(0, 1, 100, 90, 80, 60, a=1, b=1.0)
    assert victory_check(0, 1, 100, 90, 80, 60, a=1, b=0.0)


# closed form

def test_trajectory_initial_condition():
    assert closed_form_trajectory(0.5, 1.5, 0.3, 0.7, 50, 80, 0.0) == (50 ** 0.5, 80 ** 1.5)


def test_trajectory_slope_at_zero():
    p, q, a, b, x0, y0 = 0.7, 0.4, 0.02, 0.03, 100.0, 120.0
    h = 1e-6
    xp, _ = closed_form_trajectory(p, q, a, b, x0, y0, h)
    xm, _ = closed_form_trajectory(p, q, a, b, x0, y0, -h)
    slope = (xp - xm) / (2 * h)
    assert slope == pytest.approx(-a * y0 ** q, rel=1e-4)


def test_trajectory_symmetry_linear():
    t = np.linspace(0, 5, 51)
    x, y = closed_form_trajectory(1, 1, 1, 1, 100, 100, t)
    np.testing.assert_allclose(x, y, rtol=1e-12)


@settings(max_examples=200)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.01, 2), st.floats(0.01, 2),
       st.floats(1, 1e3), st.floats(1, 1e3))
def test_trajectory_conserves_square_law_quantity(p, q, a, b, x0, y0):
    # b*X^2 - a*Y^2 is invariant along the hyperbolic solution
    t = np.array([0.0, 0.3])
    x, y = closed_form_trajectory(p, q, a, b, x0, y0, t)
    inv = b * x ** 2 - a * y ** 2
    scale = b * x[0] ** 2 + a * y[0] ** 2
    assert abs(inv[1] - inv[0]) <= 1e-9 * scale


def test_trajectory_rejects_bad_inputs():
    with pytest.raises(ModelError):
        closed_form_trajectory(1, 1, 0, 1, 10, 10, 1.0)
    with pytest.raises(ModelError):
        closed_form_trajectory(1, 1, 1, 1, 0, 10, 1.0)


# presets

def test_presets():
    assert (homogeneous_preset("linear").p, homogeneous_preset("linear").q) == ((1.0,), (1.0,))
    assert (homogeneous_preset("square").p, homogeneous_preset("square").q) == ((0.0,), (1.0,))
    ambush = homogeneous_preset("ambush")
    assert ambush.asymmetric and not homogeneous_preset("linear").asymmetric
    assert ambush.y_exponents == ((1.0,), (0.0,))
    assert set(PRESETS) == {"linear", "square", "ambush"}
    with pytest.raises(ModelError):
        homogeneous_preset("guerrilla")
