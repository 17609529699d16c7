"""Config parsing, rendering, dispatch, and artifact emission."""

import json

import pytest

from nlspec.cli_io import (CSV_HEADER, ConfigError, main, parse_config,
                           render_config, run)

MINIMAL_EIG = """
kind = "eig"

[grid]
bounds = [[0.0, 1.0]]
resolution = [64]

[kernel]
family = "uniform"
sigma = 1.0

[coefficient]
family = "constant"
value = 0.0
"""

SWEEP = """
kind = "sweep"
seed = 7

[grid]
bounds = [[0.0, 1.0]]

[kernel]
family = "uniform"
sigma = 1.0
m = 2.0

[coefficient]
family = "constant"
value = 0.0

[solver]
tol = 1e-9

[experiment]
sigma_list = [0.2, 0.1, 0.05]
resolution_rule = "per_sigma"
richardson_order = 1
direction = "sigma_to_0"
target = "lambda_1"
"""


def test_parse_minimal_with_defaults():
    cfg = parse_config(MINIMAL_EIG)
    assert cfg.kind == "eig" and cfg.seed == 0
    assert cfg.grid["bounds"] == [[0.0, 1.0]]
    assert cfg.kernel["sigma"] == 1.0
    assert cfg.solver == {}  # defaults are filled at use, not stored


def test_parse_rejects_out_of_range_m():
    bad = MINIMAL_EIG.replace('sigma = 1.0', 'sigma = 1.0\nm = 2.5')
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert any("m must lie in [0,2]" in e for e in exc.value.errors)


def test_parse_rejects_resolution_rule_violation():
    bad = MINIMAL_EIG.replace("sigma = 1.0", "sigma = 0.1")
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    assert any("resolution rule h <= sigma*radius/8" in e for e in exc.value.errors)


def test_parse_collects_multiple_errors_with_lines():
    bad = """
kind = "eig"

[grid]
bounds = [[0.0, 1.0]]
resolution = [64]
typo_key = 3

[kernel]
family = "uniform"
m = 3.5

[coefficient]
family = "constant"

[solver]
tol = -1.0
"""
    with pytest.raises(ConfigError) as exc:
        parse_config(bad)
    errs = exc.value.errors
    assert len(errs) >= 3
    assert any("typo_key" in e and "line 7" in e for e in errs)
    assert any("m must lie in [0,2]" in e for e in errs)
    assert any("tol must be positive" in e for e in errs)


def test_parse_rejects_unknown_table():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL_EIG + "\n[mystery]\nx = 1\n")
    assert any("mystery" in e for e in exc.value.errors)


def test_parse_rejects_malformed_toml():
    with pytest.raises(ConfigError) as exc:
        parse_config("kind = ")
    assert any("well-formed" in e for e in exc.value.errors)


def test_roundtrip_render_parse():
    for text in (MINIMAL_EIG, SWEEP):
        cfg = parse_config(text)
        assert parse_config(render_config(cfg)) == cfg


def test_run_eig_writes_artifacts(tmp_path):
    cfg = parse_config(MINIMAL_EIG)
    code = run(cfg, out_dir=str(tmp_path))
    assert code == 0
    csv = (tmp_path / "results.csv").read_text().splitlines()
    assert csv[0] == CSV_HEADER
    assert len(csv) == 2
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["existence"] == "eigenpair"
    assert "numpy" in manifest["versions"]


def test_run_sweep_deterministic_modulo_wall_ms(tmp_path):
    cfg = parse_config(SWEEP)
    d1, d2 = tmp_path / "r1", tmp_path / "r2"
    assert run(cfg, out_dir=str(d1)) == 0
    assert run(cfg, out_dir=str(d2)) == 0

    def strip_wall(path):
        lines = (path / "results.csv").read_text().splitlines()
        return [",".join(l.split(",")[:-1]) for l in lines]

    assert strip_wall(d1) == strip_wall(d2)
    assert (d1 / "plotdata" / "sweep_m2.dat").exists()
    manifest = json.loads((d1 / "manifest.json").read_text())
    est = manifest["summary"]["limits"][0]
    assert est["gap"] < 0.1


def test_run_sweep_threads_deterministic(tmp_path):
    cfg = parse_config(SWEEP)
    d1, d2 = tmp_path / "serial", tmp_path / "pool"
    assert run(cfg, out_dir=str(d1), threads=1) == 0
    assert run(cfg, out_dir=str(d2), threads=3) == 0
    rows1 = [l.rsplit(",", 1)[0] for l in (d1 / "results.csv").read_text().splitlines()]
    rows2 = [l.rsplit(",", 1)[0] for l in (d2 / "results.csv").read_text().splitlines()]
    assert rows1 == rows2


def test_csv_numbers_have_full_precision(tmp_path):
    cfg = parse_config(MINIMAL_EIG)
    run(cfg, out_dir=str(tmp_path))
    row = (tmp_path / "results.csv").read_text().splitlines()[1].split(",")
    lam = float(row[2])
    # 17 significant digits round-trip doubles exactly
    assert format(lam, ".17g") == row[2]


def test_main_exit_codes(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINIMAL_EIG.replace('sigma = 1.0', 'sigma = 1.0\nm = 9.0'))
    assert main(["eig", "--config", str(bad)]) == 1

    good = tmp_path / "good.toml"
    good.write_text(MINIMAL_EIG)
    out = tmp_path / "out"
    assert main(["eig", "--config", str(good), "--out", str(out)]) == 0
    assert (out / "results.csv").exists()

    # config kind and CLI kind must agree
    assert main(["sweep", "--config", str(good)]) == 1
    assert main(["eig", "--config", str(tmp_path / "missing.toml")]) == 1


def test_run_growth_kind(tmp_path):
    text = """
kind = "growth"

[grid]
bounds = [[0.0, 1.0]]
resolution = [64]

[kernel]
family = "uniform"
sigma = 0.5
m = 1.0

[experiment]
variant = "M_plus_a"
t_final = 30.0
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["mismatch"] <= 1e-2


def test_run_invariance_kind(tmp_path):
    text = """
kind = "invariance"

[grid]
bounds = [[0.0, 1.0]]
resolution = [48]

[kernel]
family = "epanechnikov"
sigma = 0.5

[coefficient]
family = "gaussian_bump"
amplitude = 0.4
width = 0.2
center = 0.5

[experiment]
scale_factors = [0.5, 2.0, 10.0]
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["worst_discrepancy"] <= 1e-11


def test_run_exhaust_kind(tmp_path):
    text = """
kind = "exhaust"

[kernel]
family = "uniform"
sigma = 0.25

[coefficient]
family = "piecewise"
xs = [-1.0, 0.0, 1.0]
ys = [0.0, 2.0, 0.0]

[experiment]
half_widths = [1.0, 2.0, 4.0]
h = 0.03125
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    rows = (tmp_path / "results.csv").read_text().splitlines()
    assert len(rows) == 4  # header + 3 levels


def test_env_threads_override(tmp_path, monkeypatch):
    good = tmp_path / "good.toml"
    good.write_text(MINIMAL_EIG)
    out = tmp_path / "out"
    monkeypatch.setenv("NLSPEC_THREADS", "2")
    assert main(["eig", "--config", str(good), "--out", str(out)]) == 0


def test_run_compare_local_kind(tmp_path):
    text = """
kind = "compare_local"

[grid]
bounds = [[0.0, 1.0]]

[kernel]
family = "uniform"
m = 2.0

[coefficient]
family = "constant"
value = 0.0

[solver]
tol = 1e-9

[experiment]
sigma_list = [0.2, 0.1, 0.05]
richardson_order = 1
direction = "sigma_to_0"
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    est = manifest["summary"]["limits"][0]
    assert est["target_name"] == "lambda_1"
    assert est["gap"] / abs(est["target_value"]) < 0.05


def test_run_eigfn_conv_kind(tmp_path):
    text = """
kind = "eigfn_conv"

[grid]
bounds = [[0.0, 1.0]]

[kernel]
family = "uniform"

[coefficient]
family = "constant"
value = 0.0

[solver]
tol = 1e-9

[experiment]
sigma_list = [0.2, 0.1]
interior_margin = 0.1
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    dat = (tmp_path / "plotdata" / "eigfn_distance.dat").read_text().splitlines()
    assert len(dat) == 2


def test_run_mono_m0_kind(tmp_path):
    text = """
kind = "mono_m0"

[kernel]
family = "uniform"

[coefficient]
family = "gaussian_bump"
amplitude = 1.0
width = 1.0
center = 0.0

[experiment]
sigma_list = [0.25, 0.5]
half_widths = [3.0, 4.0, 5.0]
h = 0.03125
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["summary"]["mono_m0"]["verdict"] == "monotone"


def test_run_check_all_kind(tmp_path):
    cfg = parse_config('kind = "check_all"\nseed = 3\n')
    assert run(cfg, out_dir=str(tmp_path)) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert all(v["passed"] for v in manifest["summary"]["checks"].values())


def test_run_nonconvergence_exit_code(tmp_path):
    # sigma = 0.25 gives a genuinely non-flat eigenvector, so two iterations
    # cannot close the ratio sandwich
    text = MINIMAL_EIG.replace("sigma = 1.0", "sigma = 0.25") + \
        "\n[solver]\ntol = 1e-14\nmax_iter = 2\n"
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 3


def test_general_kernel_via_config(tmp_path):
    text = """
kind = "eig"

[grid]
bounds = [[0.0, 1.0]]
resolution = [32]

[kernel]
variant = "general"
family = "triangle"
radius = 1.0

[kernel.g_mod]
family = "constant"
value = 1.0

[kernel.h_mod]
family = "piecewise"
xs = [0.0, 1.0]
ys = [0.8, 1.2]

[coefficient]
family = "constant"
value = 0.0
"""
    cfg = parse_config(text)
    assert parse_config(render_config(cfg)) == cfg
    assert run(cfg, out_dir=str(tmp_path)) == 0
    rows = (tmp_path / "results.csv").read_text().splitlines()
    assert len(rows) == 2


def test_nu_target_uses_fine_reference_grid(tmp_path):
    text = """
kind = "sweep"

[grid]
bounds = [[0.0, 1.0]]

[kernel]
family = "uniform"
m = 0.0

[coefficient]
family = "cosine_bump"
amplitude = 0.3
frequency = 0.5
center = 0.5

[experiment]
sigma_list = [5.0, 10.0, 20.0, 40.0]
resolution_rule = "fixed"
fixed_h = 0.015625
direction = "sigma_to_inf"
target = "one_minus_nu"
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    est = json.loads((tmp_path / "manifest.json").read_text())["summary"]["limits"][0]
    assert abs(est["target_value"] - 0.7) <= 1e-3   # not the coarse-probe 0.723
    assert est["gap"] <= 1e-2


def test_sweep_m_list_emits_rows_per_budget_exponent(tmp_path):
    text = """
kind = "sweep"

[grid]
bounds = [[0.0, 1.0]]

[kernel]
family = "uniform"

[coefficient]
family = "constant"
value = 0.0

[solver]
tol = 1e-9

[experiment]
sigma_list = [0.3, 0.2]
m_list = [0.0, 1.0]
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 0
    rows = (tmp_path / "results.csv").read_text().splitlines()[1:]
    ms = sorted(set(r.split(",")[1] for r in rows))
    assert len(rows) == 4 and ms == ["0", "1"]
    assert (tmp_path / "plotdata" / "sweep_m0.dat").exists()
    assert (tmp_path / "plotdata" / "sweep_m1.dat").exists()


def test_run_reports_runtime_parameter_error(tmp_path):
    text = """
kind = "growth"

[grid]
bounds = [[0.0, 1.0]]
resolution = [64]

[kernel]
family = "uniform"
sigma = 0.5
m = 1.0

[experiment]
variant = "M_plus_a"
dt = 5.0
"""
    cfg = parse_config(text)
    assert run(cfg, out_dir=str(tmp_path)) == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "dt" in manifest["summary"]["error"]
