import numpy as np
import pytest
from scipy import integrate

from slipflow.data import FourierBoundary, GaussianSwirl, RingMultipole, force_from_config


def _div(F, x, y, h=1e-6):
    return ((F(x + h, y)[0] - F(x - h, y)[0]) + (F(x, y + h)[1] - F(x, y - h)[1])) / (2 * h)


@pytest.mark.parametrize("F", [RingMultipole(), GaussianSwirl()])
def test_forces_are_divergence_free(F):
    pts = np.random.default_rng(0).uniform(-3, 3, (2, 50))
    assert np.max(np.abs(_div(F, *pts))) < 1e-6


def test_ring_multipole_has_no_net_force_or_torque():
    F = RingMultipole()

    def polar(k):
        def f(t, r):
            x, y = r * np.cos(t), r * np.sin(t)
            fx, fy = F(x, y)
            return [fx, fy, x * fy - y * fx][k] * r
        return integrate.dblquad(f, 0.5, 4.0, 0, 2 * np.pi, epsabs=1e-10)[0]

    assert all(abs(polar(k)) < 1e-8 for k in range(3))


def test_fourier_boundary():
    b = FourierBoundary((1.0,), (0.0, 0.0, 2.0))
    assert b(np.pi / 4) == pytest.approx(3.0)
    assert FourierBoundary().is_zero and not b.is_zero


def test_force_lookup():
    assert force_from_config("zero")(1.0, 2.0) == (0.0, 0.0)
    f = force_from_config({"name": "gaussian_swirl", "center": [1, 1]})
    assert f.center == (1, 1)
    with pytest.raises(ValueError):
        force_from_config({"name": "tornado"})
