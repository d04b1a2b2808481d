"""Thermodynamic-limit densities, energies, gaps and momenta.

Densities live on x in [-pi/2, pi/2) with the transform pair
    f~(k) = int f(x) e^{-2ikx} dx,    f(x) = (1/pi) sum_k f~(k) e^{2ikx}.
Every series below decays at least like e^{-eta k}, so truncation is chosen
from that bound.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ValidationError

SERIES_TOL = 1e-15
SERIES_KMAX = 10_000
GAUSS_NODES = 256

CASES = ("ferro-ground", "ferro-excited", "af-even", "af-odd-ground", "af-odd-excited")


def truncation(rate: float, tol: float = SERIES_TOL) -> int:
    """Smallest K with e^{-rate K} < tol, capped at SERIES_KMAX."""
    if rate <= 0:
        raise ValidationError("series rate must be positive")
    return int(min(SERIES_KMAX, np.ceil(np.log(1 / tol) / rate) + 1))


def gauss_nodes(n: int = GAUSS_NODES):
    x, w = np.polynomial.legendre.leggauss(n)
    return x * np.pi / 2, w * np.pi / 2


# --- kernels -----------------------------------------------------------------

def kernels(n: int, x, eta: float):
    """(a_n, b_n, c_n) at real x for real positive eta."""
    x = np.asarray(x, dtype=float)
    h = 0.5j * n * eta
    if min(np.abs(np.sin(x + h)).min(), np.abs(np.cos(x + h)).min()) < 1e-12:
        raise ValidationError("evaluation point too close to a kernel pole")
    cot = lambda z: np.cos(z) / np.sin(z)  # noqa: E731
    a = cot(x - h) - cot(x + h)
    b = cot(x + h) + cot(x - h)
    c = np.tan(x + h) + np.tan(x - h)
    return a, b, c


def kernel_transform(kind: str, n: int, k, eta: float):
    """Fourier coefficients of the kernels; a_n is even in x, b_n and c_n are odd."""
    k = np.asarray(k)
    base = 2j * np.pi * np.exp(-n * eta * np.abs(k))
    if kind == "a":
        return base
    if kind == "b":
        return -np.sign(k) * base
    if kind == "c":
        return (-1.0) ** np.abs(k) * np.sign(k) * base
    raise ValidationError(f"unknown kernel {kind!r}")


def fourier_coefficient(f, k: int, nodes: int = GAUSS_NODES) -> complex:
    x, w = gauss_nodes(nodes)
    return complex(np.sum(w * f(x) * np.exp(-2j * k * x)))


# --- densities ---------------------------------------------------------------

@dataclass(frozen=True)
class ExcitationSpec:
    case: str
    n: int = 2
    alpha: float = 0.0
    beta: float = 0.0
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        if self.case not in CASES:
            raise ValidationError(f"unknown case {self.case!r}")
        if self.n < 2:
            raise ValidationError("string label n must be >= 2")
        for name in ("alpha", "beta", "p", "q"):
            v = getattr(self, name)
            if not -np.pi / 2 <= v < np.pi / 2:
                raise ValidationError(f"{name}={v} outside [-pi/2, pi/2)")


def normalization(spec: ExcitationSpec, n_sites: int) -> float:
    n = n_sites
    return {
        "ferro-ground": (n - 1) / n,
        "ferro-excited": 1 - 3 / n,
        "af-even": 0.5 - 1 / n,
        "af-odd-ground": (n - 1) / (2 * n),
        "af-odd-excited": (n - 3) / (2 * n),
    }[spec.case]


@dataclass(frozen=True)
class DensityProfile:
    coefficients: np.ndarray  # index k + K for k = -K..K
    truncation: int
    spec: ExcitationSpec
    n_sites: int
    eta: float

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.truncation, self.truncation + 1)

    def coefficient(self, k: int) -> complex:
        return complex(self.coefficients[k + self.truncation])


def _homogeneous_sigma(k):
    return np.ones(np.shape(k), dtype=complex)


def solve_density(spec: ExcitationSpec, eta: float, n_sites: int, truncation_k: int | None = None,
                  sigma=None) -> DensityProfile:
    """Mode-by-mode solution of the linear Fourier-space relation for each case.

    eta is the real anisotropy (Re eta in the antiferromagnetic regime); sigma maps
    k to the inhomogeneity transform and defaults to 1 (the homogeneous limit).
    """
    kmax = truncation_k or truncation(eta)
    ks = np.arange(-kmax, kmax + 1)
    nz = ks != 0
    k = ks[nz]
    sig = (sigma or _homogeneous_sigma)(k)
    n = n_sites
    tb = lambda m: kernel_transform("b", m, k, eta)  # noqa: E731
    tc = lambda m: kernel_transform("c", m, k, eta)  # noqa: E731
    c = spec.case
    if c == "ferro-ground":
        rho = tb(2) * sig / tb(1)
    elif c == "ferro-excited":
        drive = np.exp(-2j * k * spec.alpha) * (tb(spec.n - 1) + tb(spec.n + 1))
        rho = (n * tb(2) * sig - drive) / (n * tb(1))
    else:
        if c == "af-even":
            drive = np.exp(-2j * k * spec.beta) * tc(1)
        elif c == "af-odd-ground":
            drive = 0 * k
        else:
            drive = (np.exp(-2j * k * spec.p) + np.exp(-2j * k * spec.q)) * tc(1)
        rho = -(n * tb(2) * sig + drive) / (n * (tc(1) + tc(3)))
    out = np.empty(len(ks), dtype=complex)
    out[nz] = rho
    out[~nz] = normalization(spec, n)
    return DensityProfile(out, kmax, spec, n, eta)


def closed_form_density(spec: ExcitationSpec, eta: float, n_sites: int,
                        truncation_k: int | None = None) -> DensityProfile:
    """Closed-form coefficients in the homogeneous limit."""
    kmax = truncation_k or truncation(eta)
    ks = np.arange(-kmax, kmax + 1)
    k = ks.astype(float)
    ak = np.abs(k)
    n = n_sites
    sgn = (-1.0) ** ak
    c = spec.case
    with np.errstate(over="ignore"):
        if c == "ferro-ground":
            rho = np.exp(-eta * ak)
        elif c == "ferro-excited":
            rho = np.exp(-eta * ak) - np.exp(-2j * k * spec.alpha) / n * (
                np.exp(-spec.n * eta * ak) + np.exp(-(spec.n - 2) * eta * ak))
        elif c == "af-even":
            pos = -(np.exp(-2j * k * spec.beta) / n - sgn * np.exp(-eta * k)) / (1 + np.exp(-2 * eta * k))
            neg = -(np.exp(-2j * k * spec.beta) / n + (-1.0) ** (ak + 1) * np.exp(eta * k)) / (
                1 + np.exp(2 * eta * k))
            rho = np.where(k > 0, pos, neg)
        elif c == "af-odd-ground":
            pos = sgn * np.exp(-eta * k) / (1 + np.exp(-2 * eta * k))
            neg = sgn * np.exp(eta * k) / (1 + np.exp(2 * eta * k))
            rho = np.where(k > 0, pos, neg)
        else:
            rho = (sgn * np.exp(-eta * ak)
                   - (np.exp(-2j * k * spec.p) + np.exp(-2j * k * spec.q)) / n) / (
                1 + np.exp(-2 * eta * ak))
    rho = np.asarray(rho, dtype=complex)
    rho[ks == 0] = normalization(spec, n)
    return DensityProfile(rho, kmax, spec, n, eta)


def density_at(profile: DensityProfile, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > np.pi / 2 + 1e-12):
        raise ValidationError("x outside [-pi/2, pi/2]")
    ks = profile.ks
    vals = np.exp(2j * np.multiply.outer(x, ks)) @ profile.coefficients / np.pi
    if np.abs(vals.imag).max(initial=0.0) > 1e-12:
        raise ValidationError("density synthesis is not real")
    return vals.real


def analyse_density(profile: DensityProfile, ks, nodes: int = GAUSS_NODES) -> np.ndarray:
    """Fourier coefficients of density_at by Gauss-Legendre quadrature."""
    x, w = gauss_nodes(nodes)
    rho = density_at(profile, x)
    return np.array([np.sum(w * rho * np.exp(-2j * k * x)) for k in ks])


# --- energies ----------------------------------------------------------------

def _ktab(eta, kmax=None):
    return np.arange(1, (kmax or truncation(eta)) + 1, dtype=float)


def ferro_ground_energy(n_sites: int, eta: float) -> float:
    return float(-n_sites * np.cosh(eta) + 2 * np.sinh(eta))


def ferro_ground_energy_integral(n_sites: int, eta: float, nodes: int = GAUSS_NODES) -> float:
    """Energy as N times the density-weighted bare energy, by quadrature."""
    prof = closed_form_density(ExcitationSpec("ferro-ground"), eta, n_sites)
    x, w = gauss_nodes(nodes)
    coth = 1 / np.tanh(1j * x - eta / 2)
    val = 2 * n_sites * np.sinh(eta) * np.sum(w * coth * density_at(prof, x)) + n_sites * np.cosh(eta)
    return float(val.real)


def af_even_ground_energy(n_sites: int, eta_plus: float) -> float:
    e = eta_plus
    k = _ktab(e)
    s1 = np.sum(np.exp(-2 * e * k) * np.tanh(e * k))
    s2 = np.sum((-1.0) ** (k + 1) * np.exp(-e * k) * np.tanh(e * k))
    return float(-4 * n_sites * np.sinh(e) * s1 - 4 * np.sinh(e) * s2
                 + 2 * np.sinh(e) * np.tanh(e / 2) - n_sites * np.cosh(e))


def af_odd_ground_energy(n_sites: int, eta_plus: float) -> float:
    e = eta_plus
    k = _ktab(e)
    s1 = np.sum(np.exp(-2 * e * k) * np.tanh(e * k))
    return float(-4 * n_sites * np.sinh(e) * s1 - n_sites * np.cosh(e))


def ground_energy(case: str, n_sites: int, eta_real: float) -> float:
    if case == "ferro":
        return ferro_ground_energy(n_sites, eta_real)
    if case == "af-even":
        return af_even_ground_energy(n_sites, eta_real)
    if case == "af-odd":
        return af_odd_ground_energy(n_sites, eta_real)
    raise ValidationError(f"unknown ground-state case {case!r}")


def delta_e1(n: int, alpha, eta: float, variant: str = "minimum-consistent"):
    """Pair excitation energy in the ferromagnetic regime.

    variant "printed" keeps the coefficient 2 on cos(2 alpha) as typeset;
    "minimum-consistent" uses coefficient 1, the only choice that reproduces
    the stated minimum 4 sinh(eta) tanh(eta/2) at n = 2, alpha = pi/2.
    """
    coef = {"printed": 2.0, "minimum-consistent": 1.0}[variant]
    m = (n - 1) * eta
    return 4 * np.sinh(eta) * np.sinh(m) / (np.cosh(m) - coef * np.cos(2 * np.asarray(alpha)))


def delta_e1_min(eta: float) -> float:
    return float(4 * np.sinh(eta) * np.tanh(eta / 2))


def delta_e2(beta, eta_plus: float):
    e = eta_plus
    beta = np.asarray(beta, dtype=float)
    k = _ktab(e)
    terms = (-1.0) ** (k + 1) * np.exp(-e * k) * np.tanh(e * k)
    series = (np.cos(2 * np.multiply.outer(beta, k)) - 1) @ terms
    return (-4 * np.sinh(e) * series
            - 2 * np.sinh(e) * (np.tanh(e / 2) - np.sinh(e) / (np.cosh(e) + np.cos(2 * beta))))


def epsilon(t, eta_plus: float, kmax: int | None = None):
    e = eta_plus
    t = np.asarray(t, dtype=float)
    k = _ktab(e, kmax)
    terms = (-1.0) ** (k + 1) * np.exp(-e * k) * np.tanh(e * k)
    series = np.cos(2 * np.multiply.outer(t, k)) @ terms
    return -4 * np.sinh(e) * series + 2 * np.sinh(e) * np.sinh(e) / (np.cosh(e) + np.cos(2 * t))


def delta_e3(p: float, q: float, eta_plus: float) -> float:
    return float(epsilon(p, eta_plus) + epsilon(q, eta_plus))


def delta_e3_min(eta_plus: float, kmax: int | None = None) -> float:
    e = eta_plus
    k = _ktab(e, kmax)
    s = np.sum((-1.0) ** (k + 1) * np.exp(-e * k) * np.tanh(e * k))
    return float(-8 * np.sinh(e) * s + 4 * np.sinh(e) * np.tanh(e / 2))


# --- momentum ----------------------------------------------------------------

def _psi(c: float, x):
    """arg cosh(c + i x), continuous on |x| <= pi/2."""
    x = np.asarray(x, dtype=float)
    return np.arctan2(np.sinh(c) * np.sin(x), np.cosh(c) * np.cos(x))


def zeta_log_term(t, eta_plus: float):
    """-(i/2) ln[-cosh(it + eta/2) / cosh(it - eta/2)] on the principal branch."""
    t = np.asarray(t, dtype=float)
    a = eta_plus / 2
    ratio = -np.cosh(1j * t + a) / np.cosh(1j * t - a)
    return (-0.5j * np.log(ratio)).real


def zeta(t, eta_plus: float):
    """Momentum of one hole at position t; the log branch gives zeta(0) = pi/2.

    Arrays are unwrapped in steps of pi and anchored at the sample closest to 0,
    so a sweep is continuous whatever the principal-branch cuts do.
    """
    e = eta_plus
    t_arr = np.asarray(t, dtype=float)
    k = _ktab(e)
    coef = (-1.0) ** k / k * np.exp(-e * k) * np.tanh(e * k)
    series = np.sin(2 * np.multiply.outer(t_arr, k)) @ coef
    log_term = zeta_log_term(t_arr, e)
    if t_arr.ndim == 0:
        log_term = _psi(e / 2, t_arr) + np.pi / 2
    else:
        order = np.argsort(t_arr)
        unwrapped = np.empty_like(log_term)
        unwrapped[order] = np.unwrap(log_term[order], period=np.pi)
        anchor = np.argmin(np.abs(t_arr))
        target = _psi(e / 2, t_arr[anchor]) + np.pi / 2
        unwrapped += np.pi * np.round((target - unwrapped[anchor]) / np.pi)
        log_term = unwrapped
    return series + log_term


def momentum_bulk(profile: DensityProfile, eta_plus: float, nodes: int = GAUSS_NODES) -> float:
    """N times the density-weighted momentum of one pair of roots at Re z = +-eta_plus."""
    a = eta_plus / 2
    x, w = gauss_nodes(nodes)
    integrand = _psi(3 * a, x) - _psi(a, x)
    return float(profile.n_sites * np.sum(w * integrand * density_at(profile, x)))


def finite_momentum_limit(spec: ExcitationSpec, profile: DensityProfile, eta_plus: float,
                          nodes: int = GAUSS_NODES) -> float:
    """Bulk integral plus the boundary terms of the two imaginary roots p, q."""
    if not spec.case.startswith("af-odd"):
        raise ValidationError("momentum limit is implemented for the odd-N antiferromagnetic cases")
    bulk = momentum_bulk(profile, eta_plus, nodes)
    if spec.case == "af-odd-ground":
        return bulk
    a = eta_plus / 2
    return float(bulk + sum(_psi(a, t) + np.pi / 2 for t in (spec.p, spec.q)))


def dispersion(ts, eta_plus: float):
    ts = np.asarray(ts, dtype=float)
    return epsilon(ts, eta_plus), zeta(ts, eta_plus)
