"""Joint eigenbasis of t(u) and H, zero-root extraction and classification."""
from __future__ import annotations

import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.optimize as sopt

from . import __version__
from .model import (ModelParams, ValidationError, apply_transfer, hamiltonian_sparse,
                    shift_permutation)

DEFAULT_PROBE = 0.17 + 0.09j
PROBE_STEP = 0.013
COLLISION_TOL = 1e-8


class RootExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class RootTag:
    kind: str  # "imaginary" | "pair" | "unpaired"
    partner: int | None = None
    n: int | None = None  # |Re z| ~ (n+1) Re(eta)/2
    n_alt: int | None = None  # same pair labelled as |Re z| ~ n_alt Re(eta)/2
    offset: float | None = None  # |Re z| minus the ideal string position

    def to_dict(self) -> dict:
        return {"kind": self.kind, "partner": self.partner, "n": self.n,
                "n_alt": self.n_alt, "offset": self.offset}


@dataclass(frozen=True)
class ClassificationReport:
    tags: tuple
    tol: float

    @property
    def n_pairs(self) -> int:
        return sum(t.kind == "pair" for t in self.tags) // 2

    @property
    def n_imaginary(self) -> int:
        return sum(t.kind == "imaginary" for t in self.tags)

    @property
    def n_unpaired(self) -> int:
        return sum(t.kind == "unpaired" for t in self.tags)


@dataclass(frozen=True)
class RootSet:
    lambda0: complex
    roots: np.ndarray
    residual: float = float("nan")
    classification: ClassificationReport | None = None
    eta_half: complex = 0j

    def lambda_at(self, u):
        u = np.asarray(u, dtype=complex)
        return self.lambda0 * np.prod(np.sinh(u[..., None] - self.roots + self.eta_half), axis=-1)

    def sorted_roots(self) -> np.ndarray:
        return self.roots[np.lexsort((self.roots.imag, self.roots.real))]


@dataclass(frozen=True)
class EigenRecord:
    index: int
    energy: float
    vector: np.ndarray = field(repr=False)
    params: ModelParams = field(repr=False)
    momentum: float = float("nan")
    roots: RootSet | None = None
    sector: float | None = None

    def lambda_at(self, u):
        """Lambda(u) = v^H t(u) v for the unit-norm eigenvector v."""
        scalar = np.ndim(u) == 0
        us = np.atleast_1d(np.asarray(u, dtype=complex))
        v = self.vector
        out = np.array([np.vdot(v, apply_transfer(self.params, uu, v)) for uu in us])
        return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class FitResult:
    model: str
    amplitude: float
    rate: float
    rms_residual: float

    def predict(self, n):
        n = np.asarray(n, dtype=float)
        if self.model == "exponential":
            return self.amplitude * np.exp(-self.rate * n)
        return self.amplitude * n ** (-self.rate)

    def to_dict(self) -> dict:
        return {"model": self.model, "amplitude": self.amplitude, "rate": self.rate,
                "rms_residual": self.rms_residual}


def reduce_strip(z):
    z = np.asarray(z, dtype=complex)
    return z.real + 1j * ((z.imag + np.pi / 2) % np.pi - np.pi / 2)


def momentum_sectors(params: ModelParams):
    """Orthonormal bases of the eigenspaces of t(0) at theta = 0, keyed by k = pi m / N."""
    n, dim = params.n_sites, params.dim
    perm = shift_permutation(params)
    seen = np.zeros(dim, dtype=bool)
    orbits = []
    for s in range(dim):
        if seen[s]:
            continue
        orb = [s]
        seen[s] = True
        x = perm[s]
        while x != s:
            orb.append(x)
            seen[x] = True
            x = perm[x]
        orbits.append(np.array(orb))
    out = []
    for m in range(2 * n):
        k = np.pi * m / n
        usable = [o for o in orbits if abs(np.exp(1j * k * len(o)) - 1) < 1e-9]
        if not usable:
            continue
        basis = np.zeros((dim, len(usable)), dtype=complex)
        for col, o in enumerate(usable):
            basis[o, col] = np.exp(-1j * k * np.arange(len(o))) / np.sqrt(len(o))
        out.append((k, basis))
    return out


def _min_separation(ev):
    if len(ev) < 2:
        return np.inf
    d = np.abs(ev[:, None] - ev[None, :])
    np.fill_diagonal(d, np.inf)
    return d.min()


def _refine_clusters(params, basis, ev, vecs, u1):
    """Split clusters of t(u0) eigenvalues by diagonalising t(u1) inside each cluster."""
    scale = max(1.0, np.abs(ev).max())
    order = np.argsort(ev.real)
    used = np.zeros(len(ev), dtype=bool)
    out = vecs.copy()
    for i in order:
        if used[i]:
            continue
        cl = np.where((np.abs(ev - ev[i]) < COLLISION_TOL * scale) & ~used)[0]
        used[cl] = True
        if len(cl) < 2:
            continue
        q, _ = np.linalg.qr(vecs[:, cl])
        w = basis @ q
        m = q.conj().T @ (basis.conj().T @ apply_transfer(params, u1, w))
        _, sub = np.linalg.eig(m)
        out[:, cl] = q @ sub
    return out


def joint_eigenbasis(params: ModelParams, u0: complex = DEFAULT_PROBE,
                     max_retries: int = 5) -> list[EigenRecord]:
    """Diagonalise t(u0) and attach H Rayleigh energies; sorted by energy then momentum."""
    h = hamiltonian_sparse(params)
    blocks = momentum_sectors(params) if params.homogeneous else [
        (None, np.eye(params.dim, dtype=complex))]
    records = []
    for k, basis in blocks:
        probe = u0
        for attempt in range(max_retries + 1):
            m = basis.conj().T @ apply_transfer(params, probe, basis)
            ev, vecs = np.linalg.eig(m)
            scale = max(1.0, np.abs(ev).max())
            if _min_separation(ev) >= COLLISION_TOL * scale:
                break
            if attempt < max_retries:
                probe = u0 + PROBE_STEP * (attempt + 1)
        else:
            warnings.warn(f"persistent t(u0) degeneracy in sector k={k}; two-probe refinement")
            vecs = _refine_clusters(params, basis, ev, vecs, probe + 0.31 + 0.07j)
        w = basis @ vecs
        w /= np.linalg.norm(w, axis=0)
        hw = h @ w
        energies = np.einsum("ij,ij->j", w.conj(), hw)
        bad = np.abs(energies.imag).max() if len(energies) else 0.0
        if bad > 1e-9 * max(1.0, np.abs(energies.real).max()):
            raise ValidationError(f"Rayleigh energies not real: {bad}")
        for col in range(w.shape[1]):
            records.append((energies[col].real, k, w[:, col]))
    out = []
    for e, k, v in records:
        rec = EigenRecord(index=-1, energy=float(e), vector=v, params=params, sector=k)
        # inside a sector t(0) acts as e^{ik}
        mom = k if k is not None else float(np.angle(rec.lambda_at(0.0)) % (2 * np.pi))
        out.append(replace(rec, momentum=mom))
    out.sort(key=lambda r: (round(r.energy, 9), r.momentum))
    return [replace(r, index=i) for i, r in enumerate(out)]


def ground_record(records: list[EigenRecord], tol: float = 1e-9) -> EigenRecord:
    e0 = min(r.energy for r in records)
    ties = [r for r in records if r.energy - e0 <= tol]
    return min(ties, key=lambda r: r.momentum)


def hermitian_spectrum(params: ModelParams) -> np.ndarray:
    """Eigenvalues of H, block-diagonalised by momentum sectors."""
    h = hamiltonian_sparse(params)
    if params.n_sites <= 8:
        return np.linalg.eigvalsh(h.toarray())
    p0 = params.with_thetas([0j] * params.n_sites)
    ev = [np.linalg.eigvalsh(b.conj().T @ (h @ b)) for _, b in momentum_sectors(p0)]
    return np.sort(np.concatenate(ev))


def follow_state(params_from: ModelParams, vector: np.ndarray, params_to: ModelParams,
                 steps: int = 20, u0: complex = DEFAULT_PROBE) -> EigenRecord:
    """Track an eigenvector of t(u0) along a straight theta path by maximal overlap."""
    th0, th1 = params_from.theta_array, params_to.theta_array
    h = hamiltonian_sparse(params_to)
    v = vector / np.linalg.norm(vector)
    p = params_from
    for s in np.linspace(0.0, 1.0, steps + 1)[1:]:
        p = params_from.with_thetas(th0 + s * (th1 - th0))
        t = apply_transfer(p, u0, np.eye(p.dim, dtype=complex))
        _, vecs = np.linalg.eig(t)
        vecs /= np.linalg.norm(vecs, axis=0)
        v = vecs[:, np.argmax(np.abs(vecs.conj().T @ v))]
    energy = float(np.vdot(v, h @ v).real)
    rec = EigenRecord(index=0, energy=energy, vector=v, params=p)
    return replace(rec, momentum=float(np.angle(rec.lambda_at(0.0)) % (2 * np.pi)))


def _fit_grid(n, re=0.0, shift=0.0):
    m = 4 * n
    y = -np.pi / 2 + np.pi * (np.arange(m) + shift) / m
    return re + 1j * y


def _lambda0_from(lead, z, eta, n):
    return lead * 2 ** (n - 1) * np.prod(np.exp(z - eta / 2))


def _reconstruction_residual(rs: RootSet, rec: EigenRecord, grid) -> float:
    lam = rec.lambda_at(grid)
    return float(np.abs(rs.lambda_at(grid) - lam).max() / np.abs(lam).max())


def extract_roots(record: EigenRecord, params: ModelParams | None = None,
                  classify: bool = True) -> RootSet:
    """Fit Lambda(u) e^{(N-1)u} as a polynomial in e^{2u} and return its zero roots."""
    params = params or record.params
    n, eta = params.n_sites, params.eta
    grid = _fit_grid(n)
    vals = record.lambda_at(grid) * np.exp((n - 1) * grid)
    w = np.exp(2 * grid)
    coef, *_ = np.linalg.lstsq(np.vander(w, n, increasing=True), vals, rcond=None)
    poly = coef[::-1]
    dpoly = np.polyder(poly)
    wr = np.roots(poly)
    for _ in range(3):  # polish against the fitted polynomial
        step = np.polyval(poly, wr) / np.polyval(dpoly, wr)
        wr = np.where(np.isfinite(step), wr - step, wr)
    z = reduce_strip(np.log(wr) / 2 + eta / 2)
    rs = RootSet(complex(_lambda0_from(poly[0], z, eta, n)), z, eta_half=eta / 2)
    check = _fit_grid(n, re=0.05, shift=0.5)
    res = _reconstruction_residual(rs, record, check)
    if res > 1e-6:
        rs = _polish_on_lambda(rs, record, check)
        res = _reconstruction_residual(rs, record, check)
        if res > 1e-6:
            raise RootExtractionError(f"reconstruction residual {res:.3e} after polishing")
    rs = replace(rs, residual=res)
    if classify:
        rs = replace(rs, classification=classify_roots(rs, params))
    return rs


def _polish_on_lambda(rs: RootSet, record: EigenRecord, grid) -> RootSet:
    eta_half = rs.eta_half
    z = []
    for z0 in rs.roots:
        f = lambda zz: record.lambda_at(zz - eta_half)  # noqa: E731
        try:
            z.append(sopt.newton(f, z0, tol=1e-14, maxiter=50))
        except RuntimeError:
            z.append(z0)
    z = reduce_strip(np.array(z))
    basis = np.prod(np.sinh(grid[:, None] - z + eta_half), axis=1)
    lam = record.lambda_at(grid)
    lam0 = np.vdot(basis, lam) / np.vdot(basis, basis)
    return replace(rs, lambda0=complex(lam0), roots=z)


def energy_from_roots(rootset: RootSet, params: ModelParams) -> float:
    eta = params.eta
    arg = rootset.roots - eta / 2
    if np.any(np.abs(np.sinh(arg)) < 1e-12):
        raise ValidationError("a root sits on the pole z = eta/2")
    e = 2 * np.sinh(eta) * np.sum(1 / np.tanh(arg)) + params.n_sites * np.cosh(eta)
    if abs(e.imag) > 1e-8 * max(1.0, abs(e.real)):
        raise ValidationError(f"energy from roots has imaginary part {e.imag:.3e}")
    return float(e.real)


def lambda_zero(rootset: RootSet, params: ModelParams) -> complex:
    arg = params.eta / 2 - rootset.roots
    if np.any(np.abs(np.sinh(arg)) < 1e-12):
        raise ValidationError("a root sits on the pole z = eta/2")
    return complex(rootset.lambda0 * np.prod(np.sinh(arg)))


def momentum_from_roots(rootset: RootSet, params: ModelParams) -> float:
    """k = -i ln Lambda(0) with Lambda(0) rebuilt from Lambda_0 and the roots, in [0, 2pi)."""
    return float(np.angle(lambda_zero(rootset, params)) % (2 * np.pi))


def momentum_ratio_form(rootset: RootSet, params: ModelParams) -> float:
    """Roots-only expression -(i/2) ln prod sinh(z+eta/2)/sinh(z-eta/2) + parity shift.

    Only fixed mod pi and opposite in sign to -i ln Lambda(0); kept for comparison.
    """
    eta, n = params.eta, params.n_sites
    ratio = np.prod(np.sinh(rootset.roots + eta / 2) / np.sinh(rootset.roots - eta / 2))
    k = -0.5j * np.log(ratio) + np.pi / 4 * (1 - (-1) ** (n - 1))
    return float(k.real % (2 * np.pi))


def default_pair_tol(params: ModelParams) -> float:
    return 10 * np.exp(-params.eta.real * params.n_sites / 2)


def classify_roots(rootset: RootSet, params: ModelParams,
                   tol: float | None = None) -> ClassificationReport:
    tol = default_pair_tol(params) if tol is None else tol
    z = rootset.roots
    re_eta = params.eta.real
    tags: list[RootTag | None] = [None] * len(z)
    for j, zj in enumerate(z):
        if abs(zj.real) <= tol:
            tags[j] = RootTag("imaginary")
    for j, zj in enumerate(z):
        if tags[j] is not None:
            continue
        best, best_d = None, np.inf
        for l, zl in enumerate(z):
            if l == j or tags[l] is not None:
                continue
            dim_ = (zj.imag - zl.imag + np.pi / 2) % np.pi - np.pi / 2
            d = np.hypot(zj.real + zl.real, dim_)
            if d < best_d:
                best, best_d = l, d
        if best is None or best_d > tol:
            tags[j] = RootTag("unpaired")
            continue
        for a, b in ((j, best), (best, j)):
            x = abs(z[a].real)
            n = max(1, int(round(2 * x / re_eta - 1)))
            tags[a] = RootTag("pair", partner=b, n=n, n_alt=n + 1,
                              offset=float(x - (n + 1) * re_eta / 2))
    return ClassificationReport(tuple(tags), float(tol))


def fit_decay(data, model: str = "exponential") -> FitResult:
    """Least-squares fit of log(deviation) against N or log N."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise ValidationError("need at least three (N, deviation) points")
    n, dev = arr[:, 0], arr[:, 1]
    if np.any(dev <= 0):
        raise ValidationError("non-positive deviation; tolerance floor reached")
    if model == "exponential":
        x = n
    elif model == "power":
        x = np.log(n)
    else:
        raise ValidationError(f"unknown model {model!r}")
    a = np.column_stack([np.ones_like(x), -x])
    (log_amp, rate), *_ = np.linalg.lstsq(a, np.log(dev), rcond=None)
    resid = np.log(dev) - a @ np.array([log_amp, rate])
    return FitResult(model, float(np.exp(log_amp)), float(rate),
                     float(np.sqrt(np.mean(resid ** 2))))


# --- persistence -----------------------------------------------------------

def record_to_dict(rec: EigenRecord) -> dict:
    d = {"index": rec.index, "energy": rec.energy, "momentum": rec.momentum}
    if rec.roots is not None:
        rs = rec.roots
        d["lambda0"] = {"re": rs.lambda0.real, "im": rs.lambda0.imag}
        d["roots"] = [{"re": z.real, "im": z.imag} for z in rs.sorted_roots()]
        d["residual"] = rs.residual
        order = np.lexsort((rs.roots.imag, rs.roots.real))
        inv = np.empty_like(order)
        inv[order] = np.arange(len(order))
        cls = []
        if rs.classification is not None:
            for j in order:
                t = rs.classification.tags[j]
                td = t.to_dict()
                if td["partner"] is not None:
                    td["partner"] = int(inv[td["partner"]])
                cls.append(td)
        d["classification"] = cls
    return d


def records_to_json(params: ModelParams, records: list[EigenRecord], extra: dict | None = None) -> dict:
    doc = {"params": params.to_dict(), "version": __version__,
           "records": [record_to_dict(r) for r in records]}
    if extra:
        doc["meta"] = extra
    return doc


def load_schema(name: str = "spectrum.schema.json") -> dict:
    text = resources.files("antixxz").joinpath("schemas", name).read_text()
    return json.loads(text)


def validate_document(doc: dict, name: str = "spectrum.schema.json") -> None:
    import jsonschema
    jsonschema.validate(doc, load_schema(name))


def cache_dir() -> Path:
    root = os.environ.get("ANTIXXZ_CACHE_DIR")
    return Path(root) if root else Path.home() / ".cache" / "antixxz"


def cache_key(params: ModelParams, tolerances: dict) -> str:
    return params.content_hash({"tolerances": tolerances, "version": __version__})


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
