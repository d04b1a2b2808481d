import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from antixxz import thermo as t
from antixxz.model import ValidationError

ETA = 0.75


@pytest.mark.parametrize("kind,col", [("a", 0), ("b", 1), ("c", 2)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_kernel_transforms_match_quadrature(kind, col, n):
    for k in (-3, -1, 0, 2, 5):
        num = t.fourier_coefficient(lambda x: t.kernels(n, x, ETA)[col], k)
        assert abs(num - t.kernel_transform(kind, n, k, ETA)) <= 1e-10


def test_kernel_transform_values():
    assert t.kernel_transform("a", 1, 2, ETA) == pytest.approx(2j * np.pi * np.exp(-1.5))
    assert t.kernel_transform("b", 1, 2, ETA) == pytest.approx(-2j * np.pi * np.exp(-1.5))
    assert t.kernel_transform("b", 4, 0, ETA) == 0
    assert t.kernel_transform("c", 1, 3, ETA) == pytest.approx(-2j * np.pi * np.exp(-2.25))


def test_kernel_parity_and_zero():
    x = np.linspace(-1.2, 1.2, 7)
    a, b, c = t.kernels(2, x, ETA)
    a2, b2, c2 = t.kernels(2, -x, ETA)
    assert np.allclose(a, a2) and np.allclose(b, -b2) and np.allclose(c, -c2)
    assert abs(t.kernels(3, 0.0, ETA)[1]) <= 1e-15


def test_kernel_transform_unknown():
    with pytest.raises(ValidationError):
        t.kernel_transform("d", 1, 1, ETA)


def _specs():
    return [t.ExcitationSpec("ferro-ground"),
            t.ExcitationSpec("ferro-excited", n=3, alpha=0.4),
            t.ExcitationSpec("af-even", beta=-0.6),
            t.ExcitationSpec("af-odd-ground"),
            t.ExcitationSpec("af-odd-excited", p=0.2, q=-1.1)]


@pytest.mark.parametrize("spec", _specs(), ids=lambda s: s.case)
def test_generic_solve_equals_closed_form(spec):
    a = t.solve_density(spec, ETA, 10)
    b = t.closed_form_density(spec, ETA, 10)
    assert a.truncation == b.truncation
    assert np.abs(a.coefficients - b.coefficients).max() <= 1e-15


@pytest.mark.parametrize("spec", _specs(), ids=lambda s: s.case)
def test_density_round_trip(spec):
    prof = t.closed_form_density(spec, ETA, 10)
    ks = np.arange(-8, 9)
    got = t.analyse_density(prof, ks)
    assert np.abs(got - prof.coefficients[ks + prof.truncation]).max() <= 1e-10
    assert prof.coefficient(0) == pytest.approx(t.normalization(spec, 10))


def test_normalizations():
    n = 10
    vals = [t.normalization(s, n) for s in _specs()]
    assert vals == pytest.approx([0.9, 0.7, 0.4, 0.45, 0.35])


def test_ferro_ground_density_closed_form_real_space():
    prof = t.closed_form_density(t.ExcitationSpec("ferro-ground"), ETA, 10)
    x = np.linspace(-1.5, 1.5, 9)
    rho = t.density_at(prof, x)
    # sum e^{-eta|k|} e^{2ikx} = sinh(eta) / (cosh(eta) - cos 2x), with k = 0 replaced by (N-1)/N
    exact = (np.sinh(ETA) / (np.cosh(ETA) - np.cos(2 * x)) - 1 + 0.9) / np.pi
    assert np.allclose(rho, exact, atol=1e-13)


def test_spec_validation():
    with pytest.raises(ValidationError):
        t.ExcitationSpec("periodic")
    with pytest.raises(ValidationError):
        t.ExcitationSpec("ferro-excited", n=1)
    with pytest.raises(ValidationError):
        t.ExcitationSpec("af-even", beta=np.pi / 2)
    with pytest.raises(ValidationError):
        t.density_at(t.closed_form_density(t.ExcitationSpec("ferro-ground"), ETA, 6), 2.0)


def test_ground_energy_integral_form():
    for n in (6, 10, 40):
        assert t.ferro_ground_energy_integral(n, ETA) == pytest.approx(
            t.ferro_ground_energy(n, ETA), abs=1e-8)


def test_ground_energies_frozen():
    assert t.ground_energy("af-odd", 9, ETA) == pytest.approx(-17.59734888277204, abs=1e-12)
    assert t.ground_energy("af-even", 10, ETA) == pytest.approx(-19.51435607088097, abs=1e-12)
    assert t.ground_energy("ferro", 10, ETA) == pytest.approx(-11.302199382896788, abs=1e-12)
    with pytest.raises(ValidationError):
        t.ground_energy("xy", 4, ETA)


def test_delta_e1_variants():
    corrected = t.delta_e1(2, np.pi / 2, ETA, "minimum-consistent")
    printed = t.delta_e1(2, np.pi / 2, ETA, "printed")
    assert corrected == pytest.approx(t.delta_e1_min(ETA), rel=1e-14)
    assert printed == pytest.approx(0.8209648687830684, rel=1e-12)
    alphas = np.linspace(-1.5, 1.5, 31)
    assert t.delta_e1(2, alphas, ETA).min() >= corrected - 1e-12


def test_delta_e2_quadratic_and_zero():
    assert abs(t.delta_e2(0.0, ETA)) <= 1e-14
    ratio = t.delta_e2(1e-3, ETA) / t.delta_e2(2e-3, ETA)
    assert ratio == pytest.approx(0.25, rel=1e-3)


def test_delta_e3_min():
    v = t.delta_e3_min(ETA, 200)
    assert v == pytest.approx(0.07650759773147553, abs=1e-14)
    assert abs(v - t.delta_e3_min(ETA, 400)) <= 1e-10
    assert t.delta_e3(0.0, 0.0, ETA) == pytest.approx(v, abs=1e-12)


def test_truncation_rule():
    assert t.truncation(0.75) == 48
    assert t.truncation(1e-6) == t.SERIES_KMAX
    with pytest.raises(ValidationError):
        t.truncation(0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(0.3, 2.0))
def test_zeta_symmetry(x, eta):
    assert t.zeta(x, eta) + t.zeta(-x, eta) == pytest.approx(np.pi, abs=1e-12)
    assert t.epsilon(x, eta) == pytest.approx(t.epsilon(-x, eta), abs=1e-12)


def test_zeta_branch():
    assert t.zeta(0.0, ETA) == pytest.approx(np.pi / 2, abs=1e-15)
    ts = np.linspace(-1.5, 1.5, 101)
    z = t.zeta(ts, ETA)
    assert np.all(np.diff(z) > 0)
    assert np.allclose(z, [t.zeta(x, ETA) for x in ts], atol=1e-12)


@pytest.mark.parametrize("p,q", [(0.2, -0.5), (1.1, 0.7), (-1.4, 0.0)])
def test_momentum_limit_consistency(p, q):
    eta = 0.75
    exc = t.ExcitationSpec("af-odd-excited", p=p, q=q)
    total = t.finite_momentum_limit(exc, t.closed_form_density(exc, eta, 9), eta)
    ground = t.momentum_bulk(t.closed_form_density(t.ExcitationSpec("af-odd-ground"), eta, 9), eta)
    assert total - ground == pytest.approx(t.zeta(p, eta) + t.zeta(q, eta), abs=1e-8)


def test_ground_momentum_bulk_vanishes():
    prof = t.closed_form_density(t.ExcitationSpec("af-odd-ground"), 0.75, 11)
    assert abs(t.momentum_bulk(prof, 0.75)) <= 1e-12
    with pytest.raises(ValidationError):
        t.finite_momentum_limit(t.ExcitationSpec("af-even"), prof, 0.75)


def test_dispersion_minimum_at_zero():
    ts = np.linspace(-1.5, 1.5, 61)
    eps, _ = t.dispersion(ts, 1.31696)
    assert ts[np.argmin(eps)] == pytest.approx(0.0, abs=1e-12)
