import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demcrack.material import (
    MaterialError,
    MaterialModel,
    antiplane,
    energy_density,
    from_young_poisson,
    stiffness_action,
    strain_from_gradient,
)


def lame(lam, mu):
    return MaterialModel(E=1.0, nu=0.0, Gc=1.0, lam=lam, mu=mu)


def test_steel_lame_constants():
    m = from_young_poisson(210.0, 0.3, 2.7e-3)
    assert m.mu == pytest.approx(80.7692, abs=1e-4)
    assert m.lam == pytest.approx(121.154, abs=1e-3)


def test_zero_poisson():
    m = from_young_poisson(3.0, 0.0, 1.0)
    assert m.lam == 0.0 and m.mu == 1.5


@pytest.mark.parametrize("nu", [0.5, 0.7, -1.0, -2.0])
def test_poisson_out_of_range(nu):
    with pytest.raises(MaterialError, match="Poisson"):
        from_young_poisson(1.0, nu, 1.0)


@pytest.mark.parametrize("kw", [dict(E=0.0, nu=0.3, Gc=1.0), dict(E=1.0, nu=0.3, Gc=0.0),
                                dict(E=1.0, nu=0.3, Gc=1.0, mode="plane_stress")])
def test_invalid_inputs(kw):
    with pytest.raises(MaterialError):
        from_young_poisson(**kw)


def test_stiffness_examples():
    assert np.allclose(stiffness_action(lame(2, 3), np.zeros((2, 2))), 0.0)
    assert np.allclose(stiffness_action(lame(2, 3), np.eye(2)), 10 * np.eye(2))
    g = 0.25
    assert np.allclose(stiffness_action(lame(2, 3), [[0, g], [g, 0]]), [[0, 6 * g], [6 * g, 0]])


def test_gradient_to_stress():
    # lam tr(eps) I + 2 mu eps with tr(I) = 2
    m = lame(1, 1)
    assert np.allclose(stiffness_action(m, strain_from_gradient(m, np.eye(2))), 4 * np.eye(2))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert np.allclose(strain_from_gradient(m, rot), 0.0)


def test_antiplane_flux():
    m = antiplane(0.2)
    assert m.dim == 1
    assert np.allclose(stiffness_action(m, [1.0, 0.0]), [0.2, 0.0])
    assert energy_density(m, np.array([[[1.0, 2.0]]]))[0] == pytest.approx(1.0)


sym = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(
    lambda a: np.array([[a[0], a[1]], [a[1], a[2]]]))


@settings(max_examples=100, deadline=None)
@given(e1=sym, e2=sym, nu=st.floats(-0.99, 0.49), E=st.floats(0.1, 1e3))
def test_stiffness_symmetric(e1, e2, nu, E):
    m = from_young_poisson(E, nu, 1.0)
    a = np.sum(e1 * stiffness_action(m, e2))
    b = np.sum(e2 * stiffness_action(m, e1))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a), abs(b))


@settings(max_examples=100, deadline=None)
@given(e=sym, nu=st.floats(-0.99, 0.49))
def test_stiffness_positive(e, nu):
    m = from_young_poisson(1.0, nu, 1.0)
    scale = np.abs(e).max()
    if scale == 0:
        assert float(energy_density(m, e)) == 0.0
    else:
        assert float(energy_density(m, e / scale)) > 0.0
