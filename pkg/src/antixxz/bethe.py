"""Functional-relation solver with theta continuation, T-Q relation and Bethe equations.

The continuation works on the Laurent coefficients c_k of
Lambda(u) = sum_k c_k exp((2k - N + 1) u), which stay smooth when zero roots
collide. The N constraints Lambda(theta_j) Lambda(theta_j - eta) = -a d are
imposed as Newton divided differences over the nodes theta_j, so the system
keeps full rank when the nodes coalesce at theta = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt

from .model import ModelParams, ValidationError, apply_transfer
from .spectra import RootSet, reduce_strip


class ContinuationError(RuntimeError):
    def __init__(self, msg, last_theta=None):
        super().__init__(msg)
        self.last_theta = last_theta


@dataclass(frozen=True)
class TTSystem:
    params: ModelParams
    lambda0: complex
    roots: np.ndarray

    @classmethod
    def from_rootset(cls, params: ModelParams, rs: RootSet) -> "TTSystem":
        return cls(params, complex(rs.lambda0), np.asarray(rs.roots, dtype=complex))

    @property
    def residual_scale(self) -> np.ndarray:
        return np.abs(_ad_products(self.params))

    def to_rootset(self) -> RootSet:
        return RootSet(self.lambda0, reduce_strip(self.roots), eta_half=self.params.eta / 2)


def _ad_products(params: ModelParams) -> np.ndarray:
    th, eta, n = params.theta_array, params.eta, params.n_sites
    diff = th[:, None] - th[None, :]
    return np.prod(np.sinh(diff + eta) * np.sinh(diff - eta), axis=1) / np.sinh(eta) ** (2 * n)


def tt_residual(system: TTSystem) -> np.ndarray:
    p = system.params
    th, eta = p.theta_array, p.eta
    z = system.roots
    lhs = system.lambda0 ** 2 * np.prod(
        np.sinh(th[:, None] - z + eta / 2) * np.sinh(th[:, None] - z - eta / 2), axis=1)
    ad = _ad_products(p)
    return (lhs + ad) / np.abs(ad)


# --- coefficient parametrisation ---------------------------------------------

def laurent_coefficients(lambda0: complex, roots, eta: complex) -> np.ndarray:
    """c_k with Lambda(u) = sum_k c_k e^{(2k-N+1)u}, k = 0..N-1."""
    p = np.array([1.0 + 0j])
    for z in np.asarray(roots, dtype=complex):
        a = z - eta / 2  # sinh(u - a) = (e^{u-a} - e^{a-u}) / 2
        p = np.convolve(p, np.array([-np.exp(a) / 2, np.exp(-a) / 2]))
    return lambda0 * p


def roots_from_coefficients(c, eta: complex) -> tuple[complex, np.ndarray]:
    c = np.asarray(c, dtype=complex)
    n = len(c)
    w = np.roots(c[::-1])
    z = reduce_strip(np.log(w) / 2 + eta / 2)
    lam0 = c[-1] * 2 ** (n - 1) * np.prod(np.exp(z - eta / 2))
    return complex(lam0), z


def _node_matrix(thetas) -> np.ndarray:
    n = len(thetas)
    return np.diag(np.asarray(thetas, dtype=complex)) + np.diag(np.ones(n - 1), -1)


def confluent_residual(c, thetas, eta, jac: bool = False):
    """Divided differences of Lambda(u)Lambda(u-eta) + a(u)d(u-eta) over the theta nodes.

    For a lower bidiagonal Z with the nodes on its diagonal, the first column of
    f(Z) holds the divided differences f[t1], f[t1,t2], ..., which reduce to
    Taylor coefficients when nodes coincide.
    """
    thetas = np.asarray(thetas, dtype=complex)
    n = len(thetas)
    zmat = _node_matrix(thetas)
    ep, em = sla.expm(zmat), sla.expm(-zmat)

    def sinh_shift(shift):
        return (np.exp(shift) * ep - np.exp(-shift) * em) / 2

    ad = np.eye(n, dtype=complex)
    for tl in thetas:
        ad = ad @ sinh_shift(eta - tl) @ sinh_shift(-eta - tl)
    ad /= np.sinh(eta) ** (2 * n)
    expo = 2 * np.arange(n) - n + 1
    basis = [sla.expm(a * zmat) for a in expo]
    shifted = np.exp(-expo * eta)
    l1 = sum(ck * b for ck, b in zip(c, basis))
    l2 = sum(ck * s * b for ck, s, b in zip(c, shifted, basis))
    scale = np.abs(ad[:, 0]).max()
    f = (l1 @ l2 + ad)[:, 0] / scale
    if not jac:
        return f
    j = np.column_stack([(b @ l2 + s * (l1 @ b))[:, 0] for s, b in zip(shifted, basis)]) / scale
    return f, j


def _corrector(c, thetas, eta, tol, maxit):
    for it in range(maxit):
        f, j = confluent_residual(c, thetas, eta, jac=True)
        if np.abs(f).max() < tol:
            return c, True
        try:
            c = c + np.linalg.solve(j, -f)
        except np.linalg.LinAlgError:
            return c, False
    return c, np.abs(confluent_residual(c, thetas, eta)).max() < tol


def linear_theta_path(start, end, steps: int = 8) -> list:
    start = np.asarray(start, dtype=complex)
    end = np.asarray(end, dtype=complex)
    return [tuple(start + s * (end - start)) for s in np.linspace(0, 1, steps + 1)[1:]]


def solve_tt(seed: TTSystem, theta_path, tol: float = 1e-10, max_depth: int = 12,
             maxit: int = 10) -> TTSystem:
    """Continue a solution of the functional relations along a list of theta configurations.

    Each path segment is subdivided by halving when the corrector fails or jumps;
    predictions use secant extrapolation through the last two accepted points.
    """
    path = [np.asarray(t, dtype=complex) for t in theta_path]
    if not path:
        return seed
    if np.abs(tt_residual(seed)).max() > 1e-2:
        raise ValidationError("seed residual above 1e-2 at path start")
    eta = seed.params.eta
    cur = seed.params.theta_array
    c = laurent_coefficients(seed.lambda0, seed.roots, eta)
    c, ok = _corrector(c, cur, eta, tol, maxit)
    if not ok:
        raise ContinuationError("seed does not converge at path start", tuple(cur))
    hist = [(0.0, c)]
    s_total = 0.0
    for target in path:
        start = cur
        s, h = 0.0, 1.0
        while s < 1.0 - 1e-14:
            hs = min(h, 1.0 - s)
            th = start + (s + hs) * (target - start)
            if len(hist) >= 2:
                (s1, c1), (s2, c2) = hist[-2], hist[-1]
                pred = c2 + (c2 - c1) * hs / (s2 - s1)
            else:
                pred = c
            cn, ok = _corrector(pred, th, eta, tol, maxit)
            step = np.linalg.norm(pred - c)
            corr = np.linalg.norm(cn - pred)
            good = (ok and np.linalg.norm(cn - c) <= 0.2 * np.linalg.norm(c)
                    and (len(hist) < 2 or corr <= 0.3 * step + 1e-9 * np.linalg.norm(c)))
            if good:
                c = cn
                s += hs
                s_total += hs
                hist.append((s_total, c))
                h = min(1.0, 2 * h)
            else:
                h /= 2
                if h < 2.0 ** -max_depth:
                    raise ContinuationError(
                        f"continuation stalled; last good theta reached at fraction {s:.4g}",
                        tuple(start + s * (target - start)))
        cur = target
    lam0, z = roots_from_coefficients(c, eta)
    return TTSystem(seed.params.with_thetas(tuple(cur)), lam0, z)


def match_multisets(a, b) -> float:
    """Largest distance under the optimal one-to-one matching of two root lists."""
    a, b = np.asarray(a), np.asarray(b)
    if len(a) != len(b):
        return np.inf
    d = np.abs(a[:, None] - b[None, :])
    rows, cols = sopt.linear_sum_assignment(d)
    return float(d[rows, cols].max()) if len(a) else 0.0


# --- T-Q relation and Bethe equations ------------------------------------------

@dataclass(frozen=True)
class BetheRoots:
    lambdas: np.ndarray
    string_tags: tuple | None = field(default=None)

    @classmethod
    def from_u(cls, u, eta) -> "BetheRoots":
        return cls(1j * np.asarray(u, dtype=complex) - eta / 2)

    def u(self, eta) -> np.ndarray:
        return (self.lambdas + eta / 2) / 1j


def tq_lambda(bethe: BetheRoots, params: ModelParams, u: complex) -> complex:
    eta, th = params.eta, params.theta_array
    lam = np.asarray(bethe.lambdas, dtype=complex)
    s = np.sinh(eta)

    def q(x):
        return np.prod(np.sinh(x - lam) / s)

    qu = q(u)
    if abs(qu) < 1e-12:
        raise ValidationError("u collides with a Bethe root; shift the evaluation point")
    a = np.prod(np.sinh(u - th + eta) / s)
    d = np.prod(np.sinh(u - th) / s)
    shift = np.sum(th - lam)
    c = np.exp(u - params.n_sites * eta + shift) - np.exp(-u - eta - shift)
    return complex(np.exp(u) * a * q(u - eta) / qu - np.exp(-u - eta) * d * q(u + eta) / qu
                   - c * a * d / qu)


def _require_homogeneous(params):
    if not params.homogeneous:
        raise ValidationError("Bethe equations are implemented for theta = 0 only")


def bae_residual(bethe: BetheRoots, params: ModelParams) -> np.ndarray:
    _require_homogeneous(params)
    eta, n = params.eta, params.n_sites
    u = bethe.u(eta)
    du = u[:, None] - u[None, :]
    if np.any(np.abs(du[~np.eye(n, dtype=bool)]) < 1e-10):
        raise ValidationError("coinciding Bethe roots")
    lhs = np.exp(1j * u) * (np.sin(u - 0.5j * eta) / np.sin(u + 0.5j * eta)) ** n
    rhs = (np.exp(-1j * u) * np.prod(np.sin(du - 1j * eta) / np.sin(du + 1j * eta), axis=1)
           + 2j * np.exp(-0.5 * n * eta) * np.sin(u - u.sum())
           * np.prod(np.sin(u - 0.5j * eta)[:, None] / np.sin(du + 1j * eta), axis=1))
    return lhs - rhs


def _bae_terms(u, eta, n):
    du = u[:, None] - u[None, :]
    sm, sp = np.sin(u - 0.5j * eta) ** n, np.sin(u + 0.5j * eta) ** n
    return (np.exp(1j * u) * sm * np.prod(np.sin(du + 1j * eta), axis=1),
            np.exp(-1j * u) * sp * np.prod(np.sin(du - 1j * eta), axis=1),
            2j * np.exp(-0.5 * n * eta) * np.sin(u - u.sum()) * sm * sp)


def bae_cleared_residual(u, eta, n) -> np.ndarray:
    """Bethe equations multiplied through by their denominators.

    Scaled by a bound on the term sizes that stays finite on exact strings,
    where all three terms vanish together.
    """
    u = np.asarray(u, dtype=complex)
    t1, t2, t3 = _bae_terms(u, eta, n)
    du = u[:, None] - u[None, :]
    bound = ((np.abs(np.sin(u - 0.5j * eta)) + np.abs(np.sin(u + 0.5j * eta))) ** n
             * np.prod(np.abs(np.sin(du + 1j * eta)) + np.abs(np.sin(du - 1j * eta)), axis=1))
    return (t1 - t2 - t3) / bound


@dataclass(frozen=True)
class BaeResult:
    solutions: list
    coverage: float
    levels_matched: tuple
    seed: int
    singular: tuple = ()  # indices into solutions where the printed equations read 0/0


def _random_seed(rng, n, eta):
    if rng.random() < 0.5:
        n_pairs = rng.integers(0, n // 2 + 1)
        re = rng.uniform(-np.pi / 2, np.pi / 2, n - n_pairs)
        im = np.zeros(n - n_pairs)
        im[:n_pairs] = rng.uniform(0, 2 * eta.real, n_pairs)
        u = re + 1j * im
        return np.concatenate([u, np.conj(u[:n_pairs])])
    # string configurations u0 + i eta ((m+1)/2 - j); parity favours centres at 0 or pi/2
    out = []
    while len(out) < n:
        m = int(rng.integers(1, n - len(out) + 1))
        centre = rng.uniform(-np.pi / 2, np.pi / 2)
        if rng.random() < 0.5:
            centre = np.pi / 2 * np.round(centre / (np.pi / 2))
        out.extend(centre + 1j * eta * ((m + 1) / 2 - np.arange(1, m + 1)))
    u = np.array(out)
    return u + rng.normal(0, 0.02, n) + 1j * rng.normal(0, 0.02, n)


def _same_roots(a, b, tol=1e-6):
    d = a[:, None] - b[None, :]
    d = np.hypot((d.real + np.pi / 2) % np.pi - np.pi / 2, d.imag)
    rows, cols = sopt.linear_sum_assignment(d)
    return d[rows, cols].max() < tol


def _snap_strings(u, eta, tol=1e-3, centres=False):
    """Put near-exact two-strings u_j - u_l ~ i eta onto exact spacing.

    Every exact two-string solves the cleared equations whatever its centre, so
    Newton stalls somewhere on that family; with centres=True the centre is also
    moved to the nearest parity-symmetric point 0 or +-pi/2.
    """
    u = u.copy()
    for j in range(len(u)):
        for l in range(len(u)):
            d = u[j] - u[l] - 1j * eta
            d = (d.real + np.pi / 2) % np.pi - np.pi / 2 + 1j * d.imag
            if j != l and abs(d) < tol:
                centre = u[j] - 0.5j * eta - d / 2
                if centres:
                    snapped = np.pi / 2 * np.round(centre.real / (np.pi / 2))
                    if abs(centre - snapped) < tol:
                        centre = snapped
                u[j], u[l] = centre + 0.5j * eta, centre - 0.5j * eta
    return u


def _validate(state, u):
    params, u0, u1, tol, ev, vecs = (state[k] for k in ("params", "u0", "u1", "tol", "ev", "vecs"))
    n, eta = params.n_sites, params.eta
    if not np.abs(bae_cleared_residual(u, eta, n)).max() <= tol:
        return None
    br = BetheRoots.from_u(u, eta)
    try:
        lam_u0 = tq_lambda(br, params, u0)
        lam_u1 = tq_lambda(br, params, u1)
    except ValidationError:
        return None
    dist = np.abs(ev - lam_u0)
    lvl = int(np.argmin(dist))
    v = vecs[:, lvl]
    ref_u1 = np.vdot(v, apply_transfer(params, u1, v))
    if not (dist[lvl] <= 1e-6 * max(1.0, abs(lam_u0))
            and abs(ref_u1 - lam_u1) <= 1e-6 * max(1.0, abs(lam_u1))):
        return None
    return u, br, lvl


def _bae_attempt(state, rng):
    params, tol = state["params"], state["tol"]
    n, eta = params.n_sites, params.eta
    u_init = _random_seed(rng, n, eta)

    def fun(x):
        f = bae_cleared_residual(x[:n] + 1j * x[n:], eta, n)
        return np.concatenate([f.real, f.imag])

    sol = sopt.root(fun, np.concatenate([u_init.real, u_init.imag]), method="hybr")
    u = sol.x[:n] + 1j * sol.x[n:]
    # shifting one u_j by pi leaves the equations and Lambda unchanged
    u = (u.real + np.pi / 2) % np.pi - np.pi / 2 + 1j * u.imag
    for cand in (u, _snap_strings(u, eta), _snap_strings(u, eta, centres=True)):
        hit = _validate(state, cand)
        if hit is not None:
            break
    else:
        return
    u, br, lvl = hit
    if any(_same_roots(u, k.u(eta)) for k in state["found"]):
        return
    try:
        regular = np.abs(bae_residual(br, params)).max() <= tol
    except ValidationError:
        regular = False
    if not regular:
        state["singular"].append(len(state["found"]))
    state["found"].append(br)
    state["matched"].add(lvl)


def solve_bae(params: ModelParams, n_starts: int = 200, seed: int = 0,
              u0: complex = 0.17 + 0.09j, tol: float = 1e-9) -> BaeResult:
    """Multi-start Newton on the Bethe equations, validated against eigenvalues of t(u).

    Solutions are accepted when the denominator-cleared equations hold and the
    T-Q eigenvalue matches an eigenvalue of t at two probe points.
    """
    _require_homogeneous(params)
    n = params.n_sites
    if n > 6:
        raise ValidationError("solve_bae is limited to N <= 6")
    ev, vecs = np.linalg.eig(apply_transfer(params, u0, np.eye(params.dim, dtype=complex)))
    vecs /= np.linalg.norm(vecs, axis=0)
    state = {"params": params, "u0": u0, "u1": -0.23 + 0.41j, "tol": tol, "ev": ev,
             "vecs": vecs, "found": [], "singular": [], "matched": set()}
    rng = np.random.default_rng(seed)
    with np.errstate(all="ignore"):
        for _ in range(n_starts):
            _bae_attempt(state, rng)
    matched = state["matched"]
    # distinct levels of t(u0), counting numerically equal eigenvalues once
    distinct = []
    for e in ev:
        if all(abs(e - d) > 1e-8 * max(1.0, abs(e)) for d in distinct):
            distinct.append(e)
    covered = {int(np.argmin([abs(ev[m] - d) for d in distinct])) for m in matched}
    return BaeResult(state["found"], len(covered) / len(distinct), tuple(sorted(matched)), seed,
                     tuple(state["singular"]))
