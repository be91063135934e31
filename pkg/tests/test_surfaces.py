"""Height functions: values, gradients, periodicity, bookkeeping."""
import numpy as np
import pytest

from multiscat.surfaces import HeightFunction


def test_flat_is_constant():
    g = HeightFunction.flat(1.0, offset=-0.3)
    x = np.linspace(-2, 2, 17)
    assert np.all(g(x, x) == -0.3)
    gx, gy = g.grad(x, x)
    assert np.all(gx == 0.0) and np.all(gy == 0.0)
    assert g.is_flat
    assert g.min_max() == (-0.3, -0.3)


def test_sinusoid_value():
    d, A = 1.0, 0.2
    g = HeightFunction.sinusoid(d, A, offset=0.5)
    x, y = 0.13, -0.29
    expect = A * np.sin(2 * np.pi * x / d) * np.cos(2 * np.pi * y / d) + 0.5
    assert g(x, y) == pytest.approx(expect, abs=1e-15)
    assert not g.is_flat


def test_periodicity():
    g = HeightFunction.sinusoid(0.7, 0.11, offset=1.0)
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 50)
    y = rng.uniform(-1, 1, 50)
    np.testing.assert_allclose(g(x + 0.7, y - 1.4), g(x, y), atol=1e-12)
    gx1, gy1 = g.grad(x, y)
    gx2, gy2 = g.grad(x - 0.7, y + 0.7)
    np.testing.assert_allclose(gx1, gx2, atol=1e-12)
    np.testing.assert_allclose(gy1, gy2, atol=1e-12)


def test_gradient_matches_finite_differences():
    g = HeightFunction(d=1.0, offset=0.0,
                       terms=((0.1, 1, 1, "sincos"), (0.05, 2, 1, "coscos"),
                              (0.02, 1, 2, "sinsin")))
    rng = np.random.default_rng(7)
    x = rng.uniform(-0.5, 0.5, 40)
    y = rng.uniform(-0.5, 0.5, 40)
    eps = 1e-6
    gx, gy = g.grad(x, y)
    fx = (g(x + eps, y) - g(x - eps, y)) / (2 * eps)
    fy = (g(x, y + eps) - g(x, y - eps)) / (2 * eps)
    np.testing.assert_allclose(gx, fx, atol=1e-8)
    np.testing.assert_allclose(gy, fy, atol=1e-8)


def test_min_max_bounds_sinusoid():
    g = HeightFunction.sinusoid(1.0, 0.2)
    lo, hi = g.min_max()
    assert lo == pytest.approx(-0.2, abs=1e-3)
    assert hi == pytest.approx(0.2, abs=1e-3)


def test_shape_key_ignores_offset():
    a = HeightFunction.sinusoid(1.0, 0.2, offset=0.0)
    b = a.shifted(-3.0)
    assert a.shape_key() == b.shape_key()
    assert b.offset == -3.0
    c = HeightFunction.sinusoid(1.0, 0.25)
    assert a.shape_key() != c.shape_key()


def test_zero_amplitude_sinusoid_is_flat():
    g = HeightFunction.sinusoid(1.0, 0.0, offset=2.0)
    assert g.is_flat


def test_bad_term_rejected():
    with pytest.raises(ValueError):
        HeightFunction(d=1.0, terms=((0.1, 1, 1, "tancos"),))
    with pytest.raises(ValueError):
        HeightFunction(d=-1.0)
