import numpy as np
import pytest

from lanfit.data import kursk_dataset

# Published per-day fitted values: day, X fit, X tank, X arty, Y fit, Y tank, Y arty.
PUBLISHED_FIT = np.array([
    [1, 105.00, 1.01, 103.99, 198.00, 1.02, 196.98],
    [2, 117.00, 116.12, 0.88, 248.00, 246.47, 1.53],
    [3, 259.00, 10.34, 248.66, 121.00, 5.81, 115.19],
    [4, 315.00, 2.29, 312.71, 108.00, 1.79, 106.21],
    [5, 289.00, 287.95, 1.04, 139.00, 137.86, 1.14],
    [6, 157.00, 155.19, 1.81, 36.00, 34.20, 1.81],
    [7, 135.00, 134.04, 0.96, 63.00, 61.96, 1.04],
    [8, 414.00, 47.77, 366.23, 98.00, 15.18, 82.82],
    [9, 117.00, 115.91, 1.09, 57.00, 55.83, 1.17],
    [10, 118.00, 114.91, 3.09, 46.00, 43.08, 2.92],
    [11, 96.00, 88.11, 7.89, 79.00, 72.21, 6.79],
    [12, 27.00, 25.55, 1.45, 23.00, 21.50, 1.50],
    [13, 42.00, 41.09, 0.91, 7.00, 6.06, 0.94],
    [14, 85.00, 83.94, 1.06, 6.00, 4.91, 1.09],
])

# Published per-day parameters: a1, a2, b1, b2, p1, p2, q1, q2.
PUBLISHED_PARAMS = np.array([
    [0.929, 0.456, 0.935, 1.395, 0.011, 0.467, 5e-11, 0.273],
    [0.795, 0.670, 1.119, 1.188, 0.539, 0.039, 0.182, 0.000],
    [1.062, 1.021, 0.808, 0.887, 0.015, 0.371, 0.285, 0.377],
    [0.989, 1.133, 0.870, 0.753, 0.000, 0.352, 0.113, 0.418],
    [1.140, 0.882, 0.815, 0.979, 0.215, 0.024, 0.574, 0.000],
    [1.301, 0.897, 0.534, 0.967, 0.000, 0.055, 0.660, 0.043],
    [1.151, 0.886, 0.724, 0.972, 0.164, 0.011, 0.516, 0.000],
    [1.290, 1.332, 0.568, 0.516, 0.020, 0.388, 0.507, 0.416],
    [1.196, 0.889, 0.714, 0.967, 0.184, 0.000, 0.498, 0.030],
    [1.270, 0.906, 0.612, 0.960, 0.140, 0.072, 0.535, 0.106],
    [1.017, 0.904, 0.888, 0.972, 0.300, 0.138, 0.390, 0.176],
    [0.996, 0.891, 0.885, 0.968, 0.210, 0.022, 0.282, 0.048],
    [1.369, 0.907, 0.266, 0.936, 0.002, 0.000, 0.492, 0.000],
    [1.550, 0.911, 0.119, 0.945, 0.007, 0.005, 0.576, 0.018],
])

PUBLISHED_LOGLIK = np.array([
    1232.743, 1559.505, 1639.509, 1894.731, 1895.489, 729.8373, 725.2296,
    2432.035, 613.6283, 575.0583, 608.3638, 111.104, 121.6035, 297.3759,
])


def published_day_model(day):
    from lanfit.core import ModelSpec
    a1, a2, b1, b2, p1, p2, q1, q2 = PUBLISHED_PARAMS[day - 1]
    return ModelSpec(("tank", "artillery"), a=(a1, a2), b=(b1, b2), p=(p1, p2), q=(q1, q2))


@pytest.fixture(scope="session")
def kursk():
    return kursk_dataset()


def synthetic_series(model, base=None):
    """Kursk strengths with target losses replaced by the model's exact predictions."""
    from lanfit.core import predict_series
    from lanfit.data import BattleSeries
    base = base if base is not None else kursk_dataset()
    f = predict_series(model, base)
    t = base.category_index(model.target)
    xl = base.x_losses.copy()
    yl = base.y_losses.copy()
    xl[:, t] = f.x_total
    yl[:, t] = f.y_total
    return BattleSeries(base.days, base.categories, base.x_on_hand, xl, base.y_on_hand, yl)


def golden_max(f, lo, hi, tol=1e-12):
    """Maximiser of a unimodal f on [lo, hi] by golden-section search."""
    invphi = (5 ** 0.5 - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
