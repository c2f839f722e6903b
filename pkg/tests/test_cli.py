import json
import os

import pytest
from click.testing import CliRunner

from cusplab.cli import (build_model, canonical_json, load_config, main,
                         report_to_csv, report_to_dict)
from cusplab.errors import ConfigError
from cusplab.quadrature import HatGrid, McSampler

HYDROGEN_CFG = """\
system:
  charge: 1.0
model:
  kind: hydrogenic
  n: 1
radii:
  r0: 0.1
  levels: 5
outputs:
  format: json
"""


@pytest.fixture()
def hydrogen_cfg(tmp_path):
    path = tmp_path / "hydrogen.yaml"
    path.write_text(HYDROGEN_CFG)
    return str(path)


def _invoke(args):
    return CliRunner().invoke(main, args)


# ---------------------------------------------------------------------------
# Config ingestion
# ---------------------------------------------------------------------------

def test_load_config_hash_and_sections(hydrogen_cfg):
    cfg = load_config(hydrogen_cfg)
    assert len(cfg.sha256) == 64
    assert cfg.model["kind"] == "hydrogenic"
    assert cfg.radii == {"r0": 0.1, "levels": 5}


def test_load_config_rejects_bad_yaml(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("model: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(str(p))
    p2 = tmp_path / "list.yaml"
    p2.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(str(p2))
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))


def test_load_config_requires_seed_with_mc(tmp_path):
    p = tmp_path / "mc.yaml"
    p.write_text("model: {kind: hydrogenic, n: 1}\n"
                 "quadrature: {mc_samples: 100}\n")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_load_config_rejects_unknown_format(tmp_path):
    p = tmp_path / "fmt.yaml"
    p.write_text("model: {kind: hydrogenic, n: 1}\n"
                 "outputs: {format: xml}\n")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_build_model_hydrogenic_defaults(hydrogen_cfg):
    model, spec, scheme, eigen, seed = build_model(load_config(hydrogen_cfg))
    assert spec.energy == -0.25
    assert scheme is None and eigen and seed == 0


def test_build_model_requires_energy_for_trials(tmp_path):
    p = tmp_path / "prod.yaml"
    p.write_text("system: {charge: 2.0}\n"
                 "model:\n"
                 "  kind: orbital-product\n"
                 "  orbitals:\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n")
    with pytest.raises(ConfigError):
        build_model(load_config(str(p)))


def test_build_model_mc_and_grid_selection(tmp_path):
    p = tmp_path / "prod.yaml"
    p.write_text("system: {charge: 2.0, energy: -1.375}\n"
                 "model:\n"
                 "  kind: orbital-product\n"
                 "  orbitals:\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n")
    _, _, scheme, eigen, _ = build_model(load_config(str(p)))
    assert isinstance(scheme, HatGrid) and not eigen
    p.write_text(p.read_text()
                 + "quadrature: {mc_samples: 1000, seed: 3}\n")
    _, _, scheme, _, seed = build_model(load_config(str(p)))
    assert isinstance(scheme, McSampler) and seed == 3


def test_build_model_electron_count_mismatch(tmp_path):
    p = tmp_path / "m.yaml"
    p.write_text("system: {n_electrons: 2}\nmodel: {kind: hydrogenic, n: 1}\n")
    with pytest.raises(ConfigError):
        build_model(load_config(str(p)))


# ---------------------------------------------------------------------------
# report command
# ---------------------------------------------------------------------------

def test_report_json_golden(hydrogen_cfg, tmp_path):
    out = tmp_path / "out.json"
    res = _invoke(["report", "--config", hydrogen_cfg, "--out", str(out)])
    assert res.exit_code == 0, res.output
    data = json.loads(out.read_text())
    assert abs(data["rows"]["rho0"]["direct"] - 0.5) < 1e-10
    assert abs(data["rows"]["rho1"]["golden"] + 0.5) < 1e-10
    verdicts = {b["name"]: b["verdict"] for b in data["bounds"]}
    assert verdicts["rho1-cusp"] == "holds-at-equality"
    assert verdicts["rho3-route-agreement"] == "holds-at-equality"
    assert data["flags"] == []


def test_report_deterministic_bytes(hydrogen_cfg, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _invoke(["report", "--config", hydrogen_cfg,
                    "--out", str(a)]).exit_code == 0
    assert _invoke(["report", "--config", hydrogen_cfg,
                    "--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()


def test_report_csv_header_contract(hydrogen_cfg, tmp_path):
    out = tmp_path / "out.csv"
    res = _invoke(["report", "--config", hydrogen_cfg, "--out", str(out),
                   "--format", "csv"])
    assert res.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "quantity,r,value,error,method,flag"
    assert all(len(line.split(",")) == 6 for line in lines)


def test_report_table_format(hydrogen_cfg):
    res = _invoke(["report", "--config", hydrogen_cfg, "--format", "table"])
    assert res.exit_code == 0
    assert "rho3-route-agreement" in res.output
    assert "holds-at-equality" in res.output


def test_report_malformed_config_exit_2(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("model: {kind: warp-drive}\n")
    res = _invoke(["report", "--config", str(p)])
    assert res.exit_code == 2


def test_report_figures(hydrogen_cfg, tmp_path):
    out = tmp_path / "fig.json"
    res = _invoke(["report", "--config", hydrogen_cfg, "--out", str(out),
                   "--figures"])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "fig_profile.png").stat().st_size > 0
    assert (tmp_path / "fig_bounds.png").stat().st_size > 0


# ---------------------------------------------------------------------------
# other subcommands
# ---------------------------------------------------------------------------

def test_sphere_check_all_degrees():
    res = _invoke(["sphere-check"])
    assert res.exit_code == 0
    assert "max residual" in res.output
    worst = float(res.output.strip().rsplit(" ", 1)[-1])
    assert worst < 1e-12


def test_sphere_check_unknown_degree_exit_2():
    res = _invoke(["sphere-check", "--degree", "11"])
    assert res.exit_code == 2


def test_jastrow_check(tmp_path):
    p = tmp_path / "prod.yaml"
    p.write_text("system: {charge: 2.0, energy: -1.375}\n"
                 "model:\n"
                 "  kind: orbital-product\n"
                 "  orbitals:\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "jastrow: {n_configs: 5}\n")
    res = _invoke(["jastrow-check", "--config", str(p)])
    assert res.exit_code == 0, res.output
    last = res.output.strip().splitlines()[-1]
    assert last.startswith("max residuals:")
    parts = dict(kv.split("=") for kv in last.split()[2:])
    assert float(parts["f2"]) < 1e-9
    assert float(parts["log"]) < 1e-9
    assert float(parts["fd"]) < 1e-5


def test_converge_single_electron_notice(hydrogen_cfg):
    res = _invoke(["converge", "--config", hydrogen_cfg])
    assert res.exit_code == 0
    assert "no sampling axis" in res.output


def test_converge_mc_slope(tmp_path):
    p = tmp_path / "mc.yaml"
    p.write_text("system: {charge: 2.0, energy: -1.375}\n"
                 "model:\n"
                 "  kind: orbital-product\n"
                 "  orbitals:\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "quadrature: {mc_samples: 16000, seed: 1, "
                 "envelope_rate: 1.0}\n")
    res = _invoke(["converge", "--config", p])
    assert res.exit_code == 0, res.output
    slope_line = [l for l in res.output.splitlines()
                  if l.startswith("fitted stderr order")][0]
    slope = float(slope_line.split(":")[1])
    assert -0.65 < slope < -0.35


def test_converge_single_mc_sample_no_crash(tmp_path):
    p = tmp_path / "mc1.yaml"
    p.write_text("system: {charge: 2.0, energy: -1.375}\n"
                 "model:\n"
                 "  kind: orbital-product\n"
                 "  orbitals:\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "    - {coeffs: [1.0], exponent: 1.0}\n"
                 "quadrature: {mc_samples: 1, seed: 0}\n")
    res = _invoke(["converge", "--config", p])
    assert res.exit_code == 0, res.output


def test_threads_env_var(hydrogen_cfg, monkeypatch):
    monkeypatch.setenv("CUSPLAB_THREADS", "2")
    res = _invoke(["report", "--config", hydrogen_cfg])
    assert res.exit_code == 0


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def test_canonical_json_stable():
    assert canonical_json({"b": 1, "a": [1.5, None]}) \
        == '{"a":[1.5,null],"b":1}\n'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_report_to_csv_rows(hydrogen_cfg):
    from cusplab.cusp_report import build_report
    cfg = load_config(hydrogen_cfg)
    model, spec, scheme, eigen, seed = build_model(cfg)
    rep = build_report(model, spec, eigen=eigen, scheme=scheme, levels=4)
    data = report_to_dict(rep, cfg, seed)
    csv = report_to_csv(data)
    lines = csv.splitlines()
    assert lines[0] == "quantity,r,value,error,method,flag"
    methods = {line.split(",")[4] for line in lines[1:]}
    assert methods == {"direct", "closed", "golden", "bound"}
