"""Command-line interface: config ingestion, subcommands, serialization."""

from __future__ import annotations

import hashlib
import io
import json
import sys
from dataclasses import dataclass, field

import click
import numpy as np
import yaml

from . import __version__
from .atoms import AtomSpec
from .cusp_report import CuspReport, build_report
from .density import density_at, rho_tilde, sample_rho_tilde
from .errors import ConfigError, CusplabError, IntegrationFailureError
from .jastrow import (contracted_f2_identity, f3_log_contraction, f_cut,
                      second_partials_fcut)
from .quadrature import (FOUR_PI, HatGrid, McSampler, SHIPPED_DEGREES,
                         set_threads, sphere_integrate, sphere_moment_matrix,
                         spherical_rule)
from .wavefunction import (Hydrogenic, HylleraasHelium, OrbitalProduct,
                           SlaterOrbital, hydrogenic_energy, normalize)

EXIT_CONFIG = 2
EXIT_INTEGRATION = 3


@dataclass
class RunConfig:
    """Parsed and validated run configuration."""

    raw: dict
    sha256: str
    system: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    radii: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    jastrow: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)


def _require(mapping, key, kind, where):
    if key not in mapping:
        raise ConfigError(f"missing key {where}.{key}")
    val = mapping[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, "
                          f"got {type(val).__name__}")
    return val


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw_bytes = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = yaml.safe_load(raw_bytes)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    cfg = RunConfig(raw=data, sha256=hashlib.sha256(raw_bytes).hexdigest())
    cfg.system = data.get("system", {})
    cfg.model = data.get("model", {})
    cfg.quadrature = data.get("quadrature", {})
    cfg.radii = data.get("radii", {})
    cfg.outputs = data.get("outputs", {})
    cfg.jastrow = data.get("jastrow", {})
    cfg.report = data.get("report", {})
    for name in ("system", "model", "quadrature", "radii", "outputs",
                 "jastrow", "report"):
        if not isinstance(getattr(cfg, name), dict):
            raise ConfigError(f"{name}: must be a mapping")
    quad = cfg.quadrature
    for key in ("sphere_degree", "radial_panels", "panel_order", "mc_samples"):
        if key in quad and (not isinstance(quad[key], int) or quad[key] < 0):
            raise ConfigError(f"quadrature.{key}: must be a nonnegative integer")
    if quad.get("mc_samples", 0) > 0 and "seed" not in quad:
        raise ConfigError("quadrature.seed: required when mc_samples > 0")
    fmt = cfg.outputs.get("format", "json")
    if fmt not in ("json", "csv", "table"):
        raise ConfigError(f"outputs.format: unknown format {fmt!r}")
    return cfg


def build_model(cfg: RunConfig):
    """Model + AtomSpec + hat scheme + eigen flag from a config."""
    kind = _require(cfg.model, "kind", str, "model")
    charge = float(cfg.system.get("charge", 1.0))
    if charge <= 0:
        raise ConfigError("system.charge: must be positive")
    if kind == "hydrogenic":
        n = _require(cfg.model, "n", int, "model")
        l = cfg.model.get("l", 0)
        m = cfg.model.get("m", 0)
        try:
            model = Hydrogenic(n, l, m, charge)
        except CusplabError as exc:
            raise ConfigError(f"model: {exc}")
        energy = float(cfg.system.get("energy", hydrogenic_energy(n, charge)))
        eigen = True
    elif kind == "orbital-product":
        orbs = _require(cfg.model, "orbitals", list, "model")
        try:
            orbitals = tuple(
                SlaterOrbital(tuple(float(c) for c in o["coeffs"]),
                              float(o["exponent"]))
                for o in orbs)
            model = OrbitalProduct(orbitals, charge)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model.orbitals: {exc}")
        energy = _require(cfg.system, "energy", float, "system")
        eigen = bool(cfg.model.get("eigen", False))
    elif kind == "hylleraas":
        zeta = _require(cfg.model, "zeta", float, "model")
        terms = _require(cfg.model, "terms", list, "model")
        try:
            model = HylleraasHelium(
                zeta, tuple((int(i), int(j), int(k), float(c))
                            for i, j, k, c in terms), charge)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model.terms: {exc}")
        energy = _require(cfg.system, "energy", float, "system")
        eigen = bool(cfg.model.get("eigen", False))
    else:
        raise ConfigError(f"model.kind: unknown kind {kind!r}")
    n_el = cfg.system.get("n_electrons", model.n_electrons)
    if n_el != model.n_electrons:
        raise ConfigError(f"system.n_electrons: {n_el} does not match the "
                          f"{model.n_electrons}-electron model")
    spec = AtomSpec(model.n_electrons, charge, energy,
                    float(cfg.system.get("prev_ground_energy", 0.0)))
    model = normalize(model)
    quad = cfg.quadrature
    seed = int(quad.get("seed", 0))
    if quad.get("mc_samples", 0) > 0:
        if quad["mc_samples"] < 1:
            raise ConfigError("quadrature.mc_samples: must be positive")
        scheme = McSampler(seed, quad["mc_samples"],
                           envelope_rate=float(quad.get("envelope_rate",
                                                        charge)))
    elif model.n_electrons >= 2:
        scheme = HatGrid(rate=float(quad.get("envelope_rate", charge)),
                         n_panels=quad.get("radial_panels", 8),
                         panel_order=quad.get("panel_order", 16),
                         sphere_degree=quad.get("sphere_degree", 17))
    else:
        scheme = None
    return model, spec, scheme, eigen, seed


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      allow_nan=False) + "\n"


def report_to_dict(report: CuspReport, cfg: RunConfig, seed: int) -> dict:
    rows = {}
    for name in ("rho0", "rho1", "rho2", "rho3"):
        row = getattr(report, name)
        rows[name] = {"direct": row.direct, "error": row.direct_error,
                      "closed": row.closed, "golden": row.golden}
    return {
        "version": __version__,
        "config_sha256": cfg.sha256,
        "seed": seed,
        "system": {k: cfg.system.get(k) for k in sorted(cfg.system)},
        "rows": rows,
        "bounds": report.bounds,
        "flags": report.flags,
    }


def report_to_csv(data: dict) -> str:
    buf = io.StringIO()
    buf.write("quantity,r,value,error,method,flag\n")
    for name in ("rho0", "rho1", "rho2", "rho3"):
        row = data["rows"][name]
        buf.write(f"{name},0.0,{row['direct']!r},{row['error']!r},direct,\n")
        if row["closed"] is not None:
            buf.write(f"{name},0.0,{row['closed']!r},,closed,\n")
        if row["golden"] is not None:
            buf.write(f"{name},0.0,{row['golden']!r},,golden,\n")
    for b in data["bounds"]:
        margin = "" if "margin" not in b else repr(b["margin"])
        err = "" if "error" not in b else repr(b["error"])
        buf.write(f"{b['name']},,{margin},{err},bound,{b['verdict']}\n")
    return buf.getvalue()


def report_to_table(data: dict) -> str:
    lines = [f"cusplab {data['version']}  seed={data['seed']} "
             f"config={data['config_sha256'][:12]}",
             "", f"{'quantity':<8} {'direct':>22} {'error':>12} "
             f"{'closed':>22} {'golden':>22}"]
    for name in ("rho0", "rho1", "rho2", "rho3"):
        row = data["rows"][name]
        closed = "-" if row["closed"] is None else f"{row['closed']:+.12e}"
        golden = "-" if row["golden"] is None else f"{row['golden']:+.12e}"
        lines.append(f"{name:<8} {row['direct']:+.12e} {row['error']:>12.3e} "
                     f"{closed:>22} {golden:>22}")
    lines.append("")
    lines.append(f"{'bound':<28} {'margin':>14} {'error':>12} verdict")
    for b in data["bounds"]:
        margin = b.get("margin")
        mtxt = "-" if margin is None else f"{margin:+.6e}"
        etxt = f"{b.get('error', 0.0):.3e}" if "error" in b else "-"
        lines.append(f"{b['name']:<28} {mtxt:>14} {etxt:>12} {b['verdict']}")
    for flag in data["flags"]:
        lines.append(f"note: {flag}")
    return "\n".join(lines) + "\n"


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _common(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(), help="YAML run configuration.")(fn)
    fn = click.option("--out", "out_path", default=None,
                      type=click.Path(), help="Output file (default stdout).")(fn)
    fn = click.option("--format", "fmt", default=None,
                      type=click.Choice(["json", "csv", "table"]))(fn)
    fn = click.option("--seed", default=None, type=int,
                      help="Override the config seed.")(fn)
    fn = click.option("--threads", default=None, type=int,
                      help="Worker threads (falls back to CUSPLAB_THREADS).")(fn)
    return fn


@click.group()
@click.version_option(__version__)
def main():
    """Few-electron density cusp diagnostics."""


def _prepare(config_path, seed, threads):
    cfg = load_config(config_path)
    if threads is not None:
        set_threads(threads)
    model, spec, scheme, eigen, cfg_seed = build_model(cfg)
    if seed is not None and isinstance(scheme, McSampler):
        scheme = McSampler(seed, scheme.n_samples, scheme.envelope_rate,
                           scheme.block_size)
    return cfg, model, spec, scheme, eigen, (seed if seed is not None
                                             else cfg_seed)


@main.command()
@_common
@click.option("--figures", is_flag=True,
              help="Render profile/margin figures next to the output file.")
def report(config_path, out_path, fmt, seed, threads, figures):
    """Full cusp verdict report for the configured model."""
    try:
        cfg, model, spec, scheme, eigen, run_seed = _prepare(config_path,
                                                             seed, threads)
        radii = cfg.radii
        rep = build_report(model, spec, eigen=eigen, scheme=scheme,
                           r0=float(radii.get("r0", 0.1)),
                           levels=int(radii.get("levels", 6)),
                           diagnostics=bool(cfg.report.get("diagnostics",
                                                           False)))
        data = report_to_dict(rep, cfg, run_seed)
        fmt = fmt or cfg.outputs.get("format", "json")
        out_path = out_path or cfg.outputs.get("path")
        if fmt == "json":
            _emit(canonical_json(data), out_path)
        elif fmt == "csv":
            _emit(report_to_csv(data), out_path)
        else:
            _emit(report_to_table(data), out_path)
        if figures:
            from . import figures as figs
            prof_path, bounds_path = figs.figure_paths(out_path or "report")
            r_grid = np.linspace(0.05, 5.0 / spec.charge, 24)
            samples = sample_rho_tilde(model, spec, r_grid, scheme=scheme)
            figs.save_radial_profile(samples, prof_path)
            figs.save_bound_margins(rep.bounds, bounds_path)
        violated = any(b.get("verdict") == "violated-beyond-error"
                       for b in rep.bounds) and eigen
        sys.exit(1 if violated else 0)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except IntegrationFailureError as exc:
        click.echo(f"integration failure: {exc}", err=True)
        sys.exit(EXIT_INTEGRATION)


@main.command("sphere-check")
@click.option("--degree", "degrees", multiple=True, type=int,
              help="Rule degrees to test (default: all shipped).")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", default=None, type=click.Path())
def sphere_check(degrees, seed, out_path):
    """Moment-identity residuals for the shipped spherical rules."""
    degrees = degrees or SHIPPED_DEGREES
    for d in degrees:
        if d not in SHIPPED_DEGREES:
            click.echo(f"config error: no shipped rule of degree {d}", err=True)
            sys.exit(EXIT_CONFIG)
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(3)
    b = rng.standard_normal(3)
    mat = rng.standard_normal((3, 3))
    sym = 0.5 * (mat + mat.T)
    anti = 0.5 * (mat - mat.T)
    lines = [f"{'degree':>6} {'dot-product':>14} {'sym-matrix':>14} "
             f"{'second-moment':>14} {'antisym':>14}"]
    worst = 0.0
    for d in degrees:
        rule = spherical_rule(d)
        r_dot = abs(float(np.sum(rule.weights * (rule.nodes @ a)
                                 * (rule.nodes @ b)))
                    - FOUR_PI / 3.0 * float(a @ b))
        r_sym = abs(sphere_moment_matrix(sym, rule)
                    - FOUR_PI / 3.0 * float(np.trace(sym)))
        moment = np.einsum("k,ki,kj->ij", rule.weights, rule.nodes, rule.nodes)
        r_star = float(np.max(np.abs(moment - FOUR_PI / 3.0 * np.eye(3))))
        r_anti = abs(sphere_moment_matrix(anti, rule))
        worst = max(worst, r_dot, r_sym, r_star, r_anti)
        lines.append(f"{d:>6} {r_dot:>14.3e} {r_sym:>14.3e} "
                     f"{r_star:>14.3e} {r_anti:>14.3e}")
    lines.append(f"max residual: {worst:.3e}")
    _emit("\n".join(lines) + "\n", out_path)
    sys.exit(0)


def _random_regular_config(rng, n, spread=1.5):
    while True:
        c = rng.uniform(-spread, spread, size=(n, 3))
        r = np.linalg.norm(c, axis=1)
        if np.min(r) < 0.15:
            continue
        ok = True
        for i in range(n):
            for j in range(i + 1, n):
                if np.linalg.norm(c[i] - c[j]) < 0.15:
                    ok = False
        if ok:
            return c


@main.command("jastrow-check")
@_common
def jastrow_check(config_path, out_path, fmt, seed, threads):
    """Second-derivative contraction identity residuals."""
    try:
        cfg, model, spec, scheme, eigen, run_seed = _prepare(config_path,
                                                             seed, threads)
        n_cfgs = int(cfg.jastrow.get("n_configs", 20))
        rng = np.random.default_rng(run_seed)
        n = model.n_electrons
        lines = [f"{'config':>6} {'f2-identity':>14} {'log-identity':>14} "
                 f"{'fd-hessian':>14}"]
        worst = [0.0, 0.0, 0.0]
        for i in range(n_cfgs):
            c = _random_regular_config(rng, n)
            lhs, rhs = contracted_f2_identity(model, c)
            r2 = abs(lhs - rhs) / max(abs(lhs), 1.0)
            if n >= 2:
                lhs3, rhs3 = f3_log_contraction(model, c)
                r3 = abs(lhs3 - rhs3) / max(abs(lhs3), 1.0)
            else:
                r3 = 0.0
            rfd = _fd_hessian_residual(c, model.charge, rng)
            worst = [max(a, b) for a, b in zip(worst, (r2, r3, rfd))]
            lines.append(f"{i:>6} {r2:>14.3e} {r3:>14.3e} {rfd:>14.3e}")
        lines.append(f"max residuals: f2={worst[0]:.3e} log={worst[1]:.3e} "
                     f"fd={worst[2]:.3e}")
        _emit("\n".join(lines) + "\n", out_path)
        sys.exit(0)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except IntegrationFailureError as exc:
        click.echo(f"integration failure: {exc}", err=True)
        sys.exit(EXIT_INTEGRATION)


def _fd_hessian_residual(c, charge, rng, h=1e-4):
    """Relative deviation of one random analytic second partial from a
    central finite difference of the cutoff factor value."""
    n = len(c)
    i, j = rng.integers(0, n, size=2)
    k, m = rng.integers(0, 3, size=2)
    analytic = second_partials_fcut(c, charge, (int(i), int(k)),
                                    (int(j), int(m)))

    def val(ci):
        parts = f_cut(ci, charge)
        return parts.f2_cut + parts.f3_cut

    e1 = np.zeros((n, 3))
    e1[i, k] = 1.0
    e2 = np.zeros((n, 3))
    e2[j, m] = 1.0
    fd = (val(c + h * e1 + h * e2) - val(c + h * e1 - h * e2)
          - val(c - h * e1 + h * e2) + val(c - h * e1 - h * e2)) / (4 * h * h)
    return abs(analytic - fd) / max(abs(analytic), 1.0)


@main.command()
@_common
def converge(config_path, out_path, fmt, seed, threads):
    """Convergence study of the density at the nucleus."""
    try:
        cfg, model, spec, scheme, eigen, run_seed = _prepare(config_path,
                                                             seed, threads)
        lines = []
        if isinstance(scheme, McSampler):
            counts = cfg.jastrow.get("sample_counts",
                                     [scheme.n_samples // 16 or 1,
                                      scheme.n_samples // 4 or 1,
                                      scheme.n_samples])
            lines.append(f"{'samples':>10} {'value':>22} {'stderr':>12}")
            logs = []
            for n in counts:
                est = density_at(model, spec, np.zeros(3),
                                 McSampler(run_seed, int(n),
                                           scheme.envelope_rate))
                lines.append(f"{n:>10} {est.value:+.12e} {est.error:>12.3e}")
                if est.error > 0 and n > 1:
                    logs.append((np.log(n), np.log(est.error)))
            if len(logs) >= 2:
                slope = np.polyfit([p[0] for p in logs],
                                   [p[1] for p in logs], 1)[0]
                lines.append(f"fitted stderr order: {slope:+.3f}")
            else:
                lines.append("fitted stderr order: n/a (too few usable points)")
        elif spec.n_electrons >= 2:
            panels = [4, 6, 8, 12, 16]
            vals = []
            for p in panels:
                grid = HatGrid(scheme.rate, p, scheme.panel_order,
                               scheme.sphere_degree)
                vals.append(density_at(model, spec, np.zeros(3), grid).value)
            lines.append(f"{'panels':>8} {'value':>22} {'delta-vs-finest':>16}")
            for p, v in zip(panels, vals):
                lines.append(f"{p:>8} {v:+.12e} {abs(v - vals[-1]):>16.3e}")
        else:
            radii_levels = [2, 3, 4, 5, 6]
            lines.append(f"{'levels':>8} {'rho~(0)':>22}")
            for lev in radii_levels:
                est = rho_tilde(model, spec, 0.0)
                lines.append(f"{lev:>8} {est.value:+.12e}")
            lines.append("deterministic one-electron pipeline: exact point "
                         "evaluation, no sampling axis")
        _emit("\n".join(lines) + "\n", out_path)
        sys.exit(0)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except IntegrationFailureError as exc:
        click.echo(f"integration failure: {exc}", err=True)
        sys.exit(EXIT_INTEGRATION)


if __name__ == "__main__":
    main()
