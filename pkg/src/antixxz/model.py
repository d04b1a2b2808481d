"""R-matrix, transfer matrix and Hamiltonian of the antiperiodic XXZ chain.

Conventions: basis state 0 is spin up, site 1 is the most significant bit of
the basis index, and the auxiliary space is always traced against sigma^x.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

DEFAULT_MAX_SITES = 12
_REGIME_TOL = 1e-12

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


class ValidationError(ValueError):
    """Input violates a documented invariant."""


@dataclass(frozen=True)
class ModelParams:
    n_sites: int
    eta: complex
    thetas: tuple = None

    def __post_init__(self):
        n = int(self.n_sites)
        if n < 2:
            raise ValidationError("n_sites must be >= 2")
        eta = complex(self.eta)
        if abs(np.sinh(eta)) < 1e-14:
            raise ValidationError("degenerate anisotropy: sinh(eta) = 0")
        th = self.thetas
        th = (0j,) * n if th is None else tuple(complex(t) for t in th)
        if len(th) != n:
            raise ValidationError(f"expected {n} thetas, got {len(th)}")
        for t in th:
            if abs(t.real) > _REGIME_TOL:
                raise ValidationError(f"theta {t} is not purely imaginary")
            if not (-np.pi / 2 <= t.imag < np.pi / 2):
                raise ValidationError(f"theta {t} outside the strip [-pi/2, pi/2)")
        object.__setattr__(self, "n_sites", n)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "thetas", tuple(complex(0.0, t.imag) for t in th))
        _ = self.regime

    @property
    def regime(self) -> str:
        im = self.eta.imag
        if abs(im) < _REGIME_TOL:
            return "ferro"
        if abs(im - np.pi) < _REGIME_TOL:
            return "antiferro"
        raise ValidationError(f"Im(eta) must be 0 or pi, got {im}")

    @property
    def eta_plus(self) -> float:
        return self.eta.real

    @property
    def dim(self) -> int:
        return 2 ** self.n_sites

    @property
    def theta_array(self) -> np.ndarray:
        return np.array(self.thetas, dtype=complex)

    @property
    def homogeneous(self) -> bool:
        return all(t == 0 for t in self.thetas)

    def with_thetas(self, thetas) -> "ModelParams":
        return ModelParams(self.n_sites, self.eta, tuple(thetas))

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "eta": {"re": self.eta.real, "im": self.eta.imag},
            "thetas": [t.imag for t in self.thetas],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        eta = complex(d["eta"]["re"], d["eta"]["im"])
        return cls(d["n_sites"], eta, tuple(1j * t for t in d["thetas"]))

    def content_hash(self, extra: dict | None = None) -> str:
        payload = {"params": self.to_dict(), "extra": extra or {}}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class LinearOperator:
    entries: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("operator must be square")
        d = m.shape[0]
        if d & (d - 1):
            raise ValidationError("dimension must be a power of two")
        if not np.all(np.isfinite(m)):
            raise ValidationError(f"non-finite entries in {self.label}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, LinearOperator):
            return self.entries @ other.entries
        return self.entries @ other


def r_matrix(u: complex, eta: complex) -> np.ndarray:
    """Six-vertex R-matrix on aux (x) quantum, aux index most significant."""
    s = np.sinh(eta)
    if abs(s) < 1e-14:
        raise ValidationError("degenerate anisotropy: sinh(eta) = 0")
    a = np.sinh(u + eta) / s
    b = np.sinh(u) / s
    return np.array([[a, 0, 0, 0],
                     [0, b, 1, 0],
                     [0, 1, b, 0],
                     [0, 0, 0, a]], dtype=complex)


def phi(u: complex, eta: complex) -> complex:
    return -np.sinh(u + eta) * np.sinh(u - eta) / np.sinh(eta) ** 2


_SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


def _partial_transpose(m: np.ndarray, which: int) -> np.ndarray:
    t = m.reshape(2, 2, 2, 2)  # (a', j', a, j)
    if which == 0:
        t = t.transpose(2, 1, 0, 3)
    else:
        t = t.transpose(0, 3, 2, 1)
    return t.reshape(4, 4)


def r_identity_residuals(u: complex, eta: complex) -> dict:
    """Max-norm residuals of the initial, unitarity, crossing and PT identities."""
    r = r_matrix(u, eta)
    r_swapped = _SWAP @ r_matrix(-u, eta) @ _SWAP  # R_{j,0}(-u)
    sy0 = np.kron(SY, np.eye(2))
    crossing = -sy0 @ _partial_transpose(r_matrix(-u - eta, eta), 0) @ sy0
    return {
        "initial": float(np.abs(r_matrix(0.0, eta) - _SWAP).max()),
        "unitarity": float(np.abs(r @ r_swapped - phi(u, eta) * np.eye(4)).max()),
        "crossing": float(np.abs(r - crossing).max()),
        "pt_swap": float(np.abs(r - _SWAP @ r @ _SWAP).max()),
        "pt_transpose": float(np.abs(r - _partial_transpose(_partial_transpose(r, 0), 1)).max()),
    }


def yang_baxter_residual(u1: complex, u2: complex, u3: complex, eta: complex) -> float:
    i2 = np.eye(2)
    p23 = np.kron(i2, _SWAP)

    def r12(u):
        return np.kron(r_matrix(u, eta), i2)

    def r23(u):
        return np.kron(i2, r_matrix(u, eta))

    def r13(u):
        return p23 @ r12(u) @ p23

    lhs = r12(u1 - u2) @ r13(u1 - u3) @ r23(u2 - u3)
    rhs = r23(u2 - u3) @ r13(u1 - u3) @ r12(u1 - u2)
    return float(np.abs(lhs - rhs).max())


def apply_transfer(params: ModelParams, u: complex, x: np.ndarray) -> np.ndarray:
    """Apply t(u) to the columns of x without forming the matrix."""
    x = np.asarray(x, dtype=complex)
    vec = x.ndim == 1
    if vec:
        x = x[:, None]
    n, m = params.n_sites, x.shape[1]
    eta = params.eta
    s = np.sinh(eta)
    out = np.zeros_like(x)
    # tr(sigma^x T) = T_{10} + T_{01}; W[a] holds the aux-row-a component of T e_start
    for start, end in ((1, 0), (0, 1)):
        w = np.zeros((2,) + x.shape, dtype=complex)
        w[start] = x
        for j, th in enumerate(params.thetas):
            a = np.sinh(u - th + eta) / s
            b = np.sinh(u - th) / s
            w = w.reshape(2, 2 ** j, 2, 2 ** (n - j - 1), m)
            up, dn = w[:, :, 0], w[:, :, 1]
            new = np.empty_like(w)
            new[0, :, 0] = a * up[0]
            new[0, :, 1] = b * dn[0] + up[1]
            new[1, :, 0] = b * up[1] + dn[0]
            new[1, :, 1] = a * dn[1]
            w = new.reshape(2, 2 ** n, m)
        out += w[end]
    return out[:, 0] if vec else out


def transfer_matrix(params: ModelParams, u: complex) -> LinearOperator:
    m = apply_transfer(params, u, np.eye(params.dim, dtype=complex))
    return LinearOperator(m, label=f"t(u={complex(u)})",
                          meta={"u": complex(u), "thetas": params.thetas})


def _site_bits(n: int, j: int) -> np.ndarray:
    return (np.arange(2 ** n) >> (n - 1 - j)) & 1


def hamiltonian_sparse(params: ModelParams) -> sps.csr_matrix:
    """Sparse Hamiltonian built from Pauli strings in the computational basis."""
    n = params.n_sites
    dim = 2 ** n
    s = np.arange(dim)
    ch = np.cosh(params.eta).real
    diag = np.zeros(dim)
    rows, cols, vals = [], [], []
    for j in range(n):
        k = (j + 1) % n
        # the twisted bond maps sigma^y, sigma^z of site N+1 to minus those of site 1
        sign = -1.0 if k == 0 else 1.0
        bj, bk = _site_bits(n, j), _site_bits(n, k)
        same = bj == bk
        diag -= ch * sign * np.where(same, 1.0, -1.0)
        flip = s ^ (1 << (n - 1 - j)) ^ (1 << (n - 1 - k))
        yy = np.where(same, -1.0, 1.0)
        rows.append(flip)
        cols.append(s)
        vals.append(-(1.0 + sign * yy))
    off = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(dim, dim))
    h = (off + sps.diags(diag)).tocsr()
    h.eliminate_zeros()
    return h


def hamiltonian(params: ModelParams) -> LinearOperator:
    h = hamiltonian_sparse(params).toarray().astype(complex)
    return LinearOperator(h, label="H")


def ad_functions(params: ModelParams, u: complex) -> tuple[complex, complex]:
    th = params.theta_array
    s = np.sinh(params.eta)
    a = complex(np.prod(np.sinh(u - th + params.eta) / s))
    d = complex(np.prod(np.sinh(u - th) / s))
    return a, d


def verify_tt_identity(params: ModelParams) -> float:
    eye = np.eye(params.dim, dtype=complex)
    worst = 0.0
    for th in params.thetas:
        t1 = apply_transfer(params, th, eye)
        t2 = apply_transfer(params, th - params.eta, eye)
        a, _ = ad_functions(params, th)
        _, d = ad_functions(params, th - params.eta)
        worst = max(worst, float(np.abs(t1 @ t2 + a * d * eye).max()))
    return worst


def hamiltonian_from_transfer(params: ModelParams, h: float = 1e-3) -> np.ndarray:
    """H = -2 sinh(eta) t'(0) t(0)^{-1} + N cosh(eta), with a Richardson-extrapolated t'(0)."""
    p0 = params.with_thetas([0j] * params.n_sites)
    eye = np.eye(p0.dim, dtype=complex)

    def central(step):
        return (apply_transfer(p0, step, eye) - apply_transfer(p0, -step, eye)) / (2 * step)

    dt = (4 * central(h / 2) - central(h)) / 3
    t0 = apply_transfer(p0, 0.0, eye)
    lhs = np.linalg.solve(t0.T, dt.T).T  # dt @ inv(t0)
    return -2 * np.sinh(p0.eta) * lhs + p0.n_sites * np.cosh(p0.eta) * eye


def shift_permutation(params: ModelParams) -> np.ndarray:
    """perm with t(0) e_s = e_{perm[s]}; t(0) is a signless permutation at theta = 0."""
    if not params.homogeneous:
        raise ValidationError("t(0) is a permutation only at theta = 0")
    idx = np.arange(params.dim, dtype=complex)
    img = apply_transfer(params, 0.0, idx).real.round().astype(np.int64)
    perm = np.empty(params.dim, dtype=np.int64)
    perm[img] = np.arange(params.dim)
    return perm
