"""Command-line front end.

Every option can also come from a TOML file passed with --config; each
subcommand reads the flat table of the same name, and flags win over the file.
Exit codes: 0 success, 1 invalid input, 2 numerical failure or failed checks.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, replace
from pathlib import Path

import click
import numpy as np

from . import __version__, thermo
from .bethe import (ContinuationError, TTSystem, linear_theta_path, match_multisets, solve_bae,
                    solve_tt, tq_lambda, tt_residual)
from .model import DEFAULT_MAX_SITES, ModelParams, ValidationError
from .pipelines import (REFERENCE_THETAS, FIGURES, FIT_CASES, ROOT_COLUMNS, Cache, af_odd_excited_state,
                        dispersion_grid, fit_case, first_pair_state, ground_state, make_params,
                        reproduce, root_rows)
from .spectra import (DEFAULT_PROBE, RootExtractionError, atomic_write_text, cache_key, classify_roots,
                      dumps, extract_roots, joint_eigenbasis, record_to_dict, records_to_json,
                      validate_document)
from .spectra import cache_dir as default_cache_dir
from .tables import csv_text

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class NumericalFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n_sites: int
    eta: float
    regime: str = "ferro"
    thetas: tuple | None = None  # imaginary parts
    theta_seed: int | None = None
    max_sites: int = DEFAULT_MAX_SITES

    def params(self) -> ModelParams:
        if self.n_sites > self.max_sites:
            raise ValidationError(f"N={self.n_sites} exceeds the cap of {self.max_sites} sites")
        th = self.thetas
        if th is None and self.theta_seed is not None:
            th = tuple(np.random.default_rng(self.theta_seed).uniform(-0.8, 0.8, self.n_sites))
        return make_params(self.n_sites, self.eta, self.regime, th)


def _float_list(text):
    if text is None or text == "":
        return None
    if text == "reference":
        return REFERENCE_THETAS
    try:
        return tuple(float(t) for t in str(text).split(","))
    except ValueError as exc:
        raise ValidationError(f"cannot parse list {text!r}") from exc


def _load_config(path) -> dict:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    out = {}
    for cmd, table in raw.items():
        if not isinstance(table, dict):
            raise ValidationError(f"config entry {cmd!r} must be a table")
        conv = {}
        for k, v in table.items():
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            conv[k.replace("-", "_")] = v
        out[cmd] = conv
    return out


def _emit(text: str, out: str) -> None:
    if out == "-":
        click.echo(text, nl=False)
    else:
        atomic_write_text(Path(out), text)


def _cache(ctx) -> Cache:
    return Cache(ctx.obj["cache_dir"])


def model_options(f):
    opts = [
        click.option("--n-sites", type=int, default=9, show_default=True, help="Chain length N."),
        click.option("--eta", type=float, default=0.75, show_default=True, help="Re(eta)."),
        click.option("--regime", type=click.Choice(["ferro", "antiferro"]), default="ferro",
                     show_default=True, help="Im(eta) = 0 or pi."),
        click.option("--thetas", default=None,
                     help="Comma-separated Im(theta_j), or 'reference' for the nine reference values."),
        click.option("--theta-seed", type=int, default=None, help="Random imaginary thetas from this seed."),
        click.option("--max-sites", type=int, default=DEFAULT_MAX_SITES, show_default=True),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _config(n_sites, eta, regime, thetas, theta_seed, max_sites) -> RunConfig:
    th = _float_list(thetas)
    if th is not None and len(th) > n_sites:
        th = th[:n_sites]
    return RunConfig(n_sites, eta, regime, th, theta_seed, max_sites)


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="TOML file with one table per subcommand.")
@click.option("--cache-dir", type=click.Path(file_okay=False), default=None,
              help="Overrides ANTIXXZ_CACHE_DIR.")
@click.option("--no-cache", is_flag=True, help="Neither read nor write cached results.")
@click.pass_context
def cli(ctx, config_path, cache_dir, no_cache):
    """Antiperiodic XXZ chain: spectra, root patterns and thermodynamic limits."""
    ctx.ensure_object(dict)
    if config_path:
        ctx.default_map = _load_config(config_path)
    ctx.obj["cache_dir"] = None if no_cache else (Path(cache_dir) if cache_dir else default_cache_dir())


@cli.command()
@model_options
@click.option("--levels", type=int, default=0, show_default=True, help="Lowest records to keep; 0 keeps all.")
@click.option("--pair-tol", type=float, default=None, help="Pairing tolerance; default 10 exp(-Re(eta) N / 2).")
@click.option("--out", default="-", show_default=True)
@click.pass_context
def spectrum(ctx, n_sites, eta, regime, thetas, theta_seed, max_sites, levels, pair_tol, out):
    """Joint eigenbasis, roots and their classification as JSON."""
    params = _config(n_sites, eta, regime, thetas, theta_seed, max_sites).params()
    tol = {"pair_tol": pair_tol, "levels": levels, "probe": [DEFAULT_PROBE.real, DEFAULT_PROBE.imag]}
    key = cache_key(params, tol)
    cache = _cache(ctx)
    text = cache.get_text(key, "spectrum")
    if text is None:
        recs = joint_eigenbasis(params)
        if levels:
            recs = recs[:levels]
        done = []
        for r in recs:
            rs = extract_roots(r, params, classify=False)
            rs = replace(rs, classification=classify_roots(rs, params, pair_tol))
            done.append(replace(r, roots=rs))
        meta = {"pair_tol": pair_tol}
        if not params.homogeneous:
            rec, rs = ground_state(params)
            meta["tracked_ground"] = record_to_dict(replace(rec, roots=rs))
        doc = records_to_json(params, done, meta)
        validate_document(doc)
        text = dumps(doc)
        cache.put_text(key, "spectrum", text)
    _emit(text, out)


STATES = ("ground", "first-pair", "af-odd-excited")


@cli.command()
@model_options
@click.option("--state", default="ground", show_default=True,
              help="ground, first-pair, af-odd-excited or a record index.")
@click.option("--out", default="-", show_default=True)
def roots(n_sites, eta, regime, thetas, theta_seed, max_sites, state, out):
    """Zero roots of one state as CSV."""
    params = _config(n_sites, eta, regime, thetas, theta_seed, max_sites).params()
    if state == "ground":
        rec, rs = ground_state(params)
    elif state == "first-pair":
        rec, rs = first_pair_state(params)
    elif state == "af-odd-excited":
        rec, rs = af_odd_excited_state(params)
    else:
        try:
            idx = int(state)
        except ValueError as exc:
            raise ValidationError(f"state must be one of {STATES} or an integer") from exc
        recs = joint_eigenbasis(params)
        if not 0 <= idx < len(recs):
            raise ValidationError(f"record index {idx} out of range")
        rec = recs[idx]
        rs = extract_roots(rec, params)
    meta = {"state": state, "index": rec.index, "energy": rec.energy, "N": params.n_sites,
            "eta_re": params.eta.real, "eta_im": params.eta.imag}
    _emit(csv_text(meta, ROOT_COLUMNS, root_rows(rs)), out)


@cli.command("continue")
@model_options
@click.option("--steps", type=int, default=8, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--out", default="-", show_default=True)
def continue_cmd(n_sites, eta, regime, thetas, theta_seed, max_sites, steps, tol, out):
    """Seed from ED at the given thetas and continue the ground state to theta = 0."""
    cfg = _config(n_sites, eta, regime, thetas if thetas else "reference", theta_seed, max_sites)
    params = cfg.params()
    rec, rs = ground_state(params)
    seed = TTSystem.from_rootset(params, rs)
    path = linear_theta_path(params.theta_array, np.zeros(params.n_sites), steps)
    final = solve_tt(seed, path, tol=tol)
    p0 = final.params
    rec0, rs0 = ground_state(p0)
    dist = match_multisets(final.roots, rs0.roots)
    end_rs = final.to_rootset()
    end_rs = replace(end_rs, residual=float(np.abs(tt_residual(final)).max()),
                     classification=classify_roots(end_rs, p0))
    # energy and momentum of the continued state are those of the matching ED record
    end_rec = replace(rec0, index=0, roots=end_rs)
    doc = records_to_json(p0, [end_rec], {
        "start": record_to_dict(replace(rec, index=0, roots=rs)),
        "start_thetas": [t.imag for t in params.thetas], "steps": steps,
        "match_to_ed": dist})
    validate_document(doc)
    _emit(dumps(doc), out)
    if dist > 1e-6:
        raise NumericalFailure(f"continued roots differ from ED at theta = 0 by {dist:.3e}")


@cli.command()
@model_options
@click.option("--n-starts", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="-", show_default=True)
def bae(n_sites, eta, regime, thetas, theta_seed, max_sites, n_starts, seed, out):
    """Multi-start solve of the Bethe equations (N <= 6, theta = 0)."""
    params = _config(n_sites, eta, regime, thetas, theta_seed, max_sites).params()
    res = solve_bae(params, n_starts=n_starts, seed=seed)
    sols = []
    for j, br in enumerate(res.solutions):
        u = br.u(params.eta)
        lam = tq_lambda(br, params, DEFAULT_PROBE)
        sols.append({"u": [{"re": z.real, "im": z.imag} for z in u],
                     "lambda_u0": {"re": lam.real, "im": lam.imag}, "singular": j in res.singular})
    doc = {"params": params.to_dict(), "seed": seed, "n_starts": n_starts, "coverage": res.coverage,
           "solutions": sols, "version": __version__}
    validate_document(doc, "bae.schema.json")
    _emit(dumps(doc), out)


@cli.command("thermo")
@click.option("--case", type=click.Choice(thermo.CASES), default="ferro-ground", show_default=True)
@click.option("--table", type=click.Choice(["density", "delta-e2"]), default="density", show_default=True)
@click.option("--eta", type=float, default=0.75, show_default=True, help="Re(eta).")
@click.option("--n-sites", type=int, default=10, show_default=True)
@click.option("--n", "n_label", type=int, default=2, show_default=True, help="String label of the pair.")
@click.option("--alpha", type=float, default=0.0)
@click.option("--beta", type=float, default=0.0)
@click.option("--p", type=float, default=0.0)
@click.option("--q", type=float, default=0.0)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--truncation", type=int, default=None, help="Fourier cutoff K.")
@click.option("--out", default="-", show_default=True)
def thermo_cmd(case, table, eta, n_sites, n_label, alpha, beta, p, q, points, truncation, out):
    """Density profile or the even-N gap curve as CSV."""
    if table == "delta-e2":
        bs = dispersion_grid(points)
        meta = {"case": "af-even", "table": table, "eta_plus": eta, "points": points}
        _emit(csv_text(meta, ["beta", "delta_e2"], zip(bs, thermo.delta_e2(bs, eta))), out)
        return
    spec = thermo.ExcitationSpec(case, n_label, alpha, beta, p, q)
    prof = thermo.closed_form_density(spec, eta, n_sites, truncation)
    xs = dispersion_grid(points)
    meta = {"case": case, "eta": eta, "N": n_sites, "n": n_label, "alpha": alpha, "beta": beta,
            "p": p, "q": q, "K": prof.truncation}
    _emit(csv_text(meta, ["x", "rho"], zip(xs, thermo.density_at(prof, xs))), out)


@cli.command()
@click.option("--case", type=click.Choice(sorted(FIT_CASES)), default="ferro-ground", show_default=True)
@click.option("--sizes", default="6,8,10,12", show_default=True)
@click.option("--eta", type=float, default=0.75, show_default=True, help="Re(eta).")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--max-sites", type=int, default=DEFAULT_MAX_SITES, show_default=True)
@click.option("--out", default="-", show_default=True, help="Fit JSON.")
@click.option("--csv", "csv_out", default=None, help="Table of (N, deviation).")
@click.pass_context
def fit(ctx, case, sizes, eta, workers, max_sites, out, csv_out):
    """Finite-size deviations from the thermodynamic formulas and their decay fit."""
    ns = [int(x) for x in _float_list(sizes)]
    if max(ns) > max_sites:
        raise ValidationError(f"N={max(ns)} exceeds the cap of {max_sites} sites")
    doc = fit_case(case, ns, eta, ctx.obj["cache_dir"], workers)
    validate_document(doc, "fit.schema.json")
    _emit(dumps(doc), out)
    if csv_out:
        rows = [(pt["n_sites"], pt["e_ed"], pt["e_formula"], pt["deviation"]) for pt in doc["points"]]
        _emit(csv_text({"case": case, "eta": eta}, ["N", "e_ed", "e_formula", "deviation"], rows), csv_out)


@cli.command()
@click.option("--eta-plus", type=float, default=1.31696, show_default=True)
@click.option("--points", type=int, default=201, show_default=True)
@click.option("--out", default="-", show_default=True)
def dispersion(eta_plus, points, out):
    """Single-excitation dispersion (t, epsilon, zeta) as CSV."""
    ts = dispersion_grid(points)
    eps, zeta = thermo.dispersion(ts, eta_plus)
    meta = {"case": "af-odd-excited", "eta_plus": eta_plus, "points": points}
    _emit(csv_text(meta, ["t", "epsilon", "zeta"], zip(ts, eps, zeta)), out)


@cli.command("reproduce")
@click.argument("figure", type=click.Choice(FIGURES))
@click.option("--out", default="figures", show_default=True, help="Output directory.")
@click.pass_context
def reproduce_cmd(ctx, figure, out):
    """Plot-ready data and a manifest of checks for one figure."""
    target = Path(out) / figure
    manifest = reproduce(figure, target, ctx.obj["cache_dir"])
    validate_document(manifest, "manifest.schema.json")
    for c in manifest["checks"]:
        click.echo(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['value']} ({c['target']})")
    if not manifest["passed"]:
        raise NumericalFailure(f"{figure}: some checks failed; see {target / 'manifest.json'}")


def main(argv=None) -> int:
    import jsonschema

    try:
        cli.main(args=argv, prog_name="antixxz", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (ValidationError, jsonschema.ValidationError, OSError, tomllib.TOMLDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except (NumericalFailure, ContinuationError, RootExtractionError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    return 0


def entry() -> None:
    sys.exit(main())
