"""Command-line front-end: configs, CSV schema, SVG determinism, exit codes."""

import csv
import json
from pathlib import Path

import pytest

from tmix.cli import (
    ConfigError,
    build_spec,
    list_recipes,
    load_config,
    main,
    recipe_text,
)

DATA = Path(__file__).parent / "data"

BASE_CFG = {
    "schema": 1,
    "generative": {
        "rho": 0.3, "delta_plus": 0.5, "delta_minus": 0.8,
        "m_tilde_plus": 0.2, "m_tilde_minus": 0.1,
        "q_teacher": 0.8, "alpha": 0.5,
    },
    "hyper": {"lambda_l2": 0.05},
    "sweep": {"axes": [{"name": "rho", "start": 0.2, "stop": 0.4, "count": 3}]},
}


def _write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_load_config_diagnostics(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "schema": 1,\n  "oops"\n}')
    with pytest.raises(ConfigError, match="line 4"):
        load_config(str(bad))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError, match="schema"):
        load_config(_write_cfg(tmp_path, {"schema": 2}, "s.json"))
    with pytest.raises(ConfigError, match="unknown field 'extra'"):
        load_config(_write_cfg(tmp_path, {"schema": 1, "extra": 1}, "e.json"))
    with pytest.raises(ConfigError, match="generative.typo"):
        load_config(_write_cfg(
            tmp_path, {"schema": 1, "generative": {"typo": 1}}, "g.json"))


def test_build_spec_overrides_and_errors():
    spec = build_spec(BASE_CFG, "theory")
    assert spec.lambda_l2 == 0.05
    assert [ax.name for ax in spec.axes] == ["rho"]
    with pytest.raises(ConfigError, match="generative block"):
        build_spec({"schema": 1, "generative": {"rho": 2.0}}, "theory")
    with pytest.raises(ConfigError, match="sweep.axes"):
        build_spec({"schema": 1, "sweep": {"axes": [{"name": "rho"}]}}, "theory")


def test_sweep_csv_schema_and_di(tmp_path):
    cfg = _write_cfg(tmp_path, BASE_CFG)
    out = tmp_path / "out"
    rc = main(["sweep", "-c", cfg, "--out", str(out)])
    assert rc == 0
    rows = _read_rows(out / "result.csv")
    assert len(rows) == 3
    assert list(rows[0]) == [
        "rho", "acc_plus", "acc_minus", "di",
        "mi_sp", "mi_eo", "mi_ea", "mi_eodds", "mi_pp1", "mi_pp10",
        "Q", "m", "R_plus", "R_minus", "delta_q", "b",
        "sweeps", "residual", "converged",
    ]
    for row in rows:
        assert row["converged"] == "True"
        di = float(row["acc_plus"]) / float(row["acc_minus"])
        assert float(row["di"]) == pytest.approx(di, rel=1e-10)
    run_meta = json.loads((out / "run.json").read_text())
    assert run_meta["schema"] == 1
    assert run_meta["sweep"]["mode"] == "theory"
    assert set(run_meta["minima"]) == {
        "statistical_parity", "equal_opportunity", "equal_accuracy",
        "equal_odds", "predicted_parity_1", "predicted_parity_10",
    }


def test_solve_ignores_sweep_block(tmp_path):
    cfg = _write_cfg(tmp_path, BASE_CFG)
    out = tmp_path / "solo"
    assert main(["solve", "-c", cfg, "--out", str(out)]) == 0
    rows = _read_rows(out / "result.csv")
    assert len(rows) == 1
    assert "rho" not in rows[0]


def test_golden_csv_is_byte_identical(tmp_path):
    """The theory pipeline is fully deterministic; any drift in solver,
    observables or formatting shows up as a golden-file diff."""
    cfg = _write_cfg(tmp_path, BASE_CFG)
    out = tmp_path / "golden"
    assert main(["sweep", "-c", cfg, "--out", str(out)]) == 0
    got = (out / "result.csv").read_bytes()
    assert got == (DATA / "golden_result.csv").read_bytes()


def test_heatmap_svg_deterministic(tmp_path):
    cfg = dict(BASE_CFG)
    cfg["sweep"] = {"axes": [
        {"name": "rho", "start": 0.25, "stop": 0.45, "count": 3},
        {"name": "q_teacher", "start": 0.6, "stop": 0.9, "count": 3},
    ]}
    cfg["heatmaps"] = ["di", "mi_sp"]
    path = _write_cfg(tmp_path, cfg)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "-c", path, "--out", str(out1)]) == 0
    assert main(["sweep", "-c", path, "--out", str(out2)]) == 0
    for name in ("heatmap_di.svg", "heatmap_mi_sp.svg"):
        one = (out1 / name).read_bytes()
        assert one == (out2 / name).read_bytes()
        assert one.startswith(b"<svg")


def test_compare_split_extra_columns(tmp_path):
    cfg = dict(BASE_CFG)
    cfg["generative"] = dict(cfg["generative"], q_teacher=0.9,
                             m_tilde_plus=0.0, m_tilde_minus=0.0)
    cfg["hyper"] = {"lambda_l2": 0.05, "gamma": 1.0}
    cfg["sweep"] = {"axes": [
        {"name": "alpha", "start": 0.5, "stop": 1.5, "count": 2}]}
    cfg["compare_split"] = True
    path = _write_cfg(tmp_path, cfg)
    out = tmp_path / "cs"
    assert main(["sweep", "-c", path, "--out", str(out)]) == 0
    rows = _read_rows(out / "result.csv")
    for row in rows:
        joint = float(row["acc_plus"])
        split = float(row["acc_plus_split"])
        assert float(row["acc_plus_gain"]) == pytest.approx(joint - split,
                                                            abs=1e-12)


def test_reweigh_and_couple_axis_checks(tmp_path):
    cfg = _write_cfg(tmp_path, BASE_CFG)
    assert main(["reweigh", "-c", cfg, "--out", str(tmp_path / "x")]) == 2
    assert main(["couple", "-c", cfg, "--out", str(tmp_path / "y")]) == 2
    good = dict(BASE_CFG)
    good["sweep"] = {"axes": [
        {"name": "gamma", "start": 0.0, "stop": 0.4, "count": 2}]}
    path = _write_cfg(tmp_path, good, "couple.json")
    assert main(["couple", "-c", path, "--out", str(tmp_path / "z")]) == 0


def test_eta_command_needs_strategy(tmp_path):
    cfg = dict(BASE_CFG)
    cfg["sweep"] = {"axes": [
        {"name": "eta", "start": 1.0, "stop": 0.8, "count": 2}]}
    path = _write_cfg(tmp_path, cfg)
    assert main(["eta", "-c", path, "--out", str(tmp_path / "e1")]) == 2
    cfg["sweep"]["strategy"] = "reweigh"
    path = _write_cfg(tmp_path, cfg, "eta2.json")
    assert main(["eta", "-c", path, "--out", str(tmp_path / "e2")]) == 0


def test_unconverged_exit_codes(tmp_path):
    cfg = dict(BASE_CFG)
    cfg["solver"] = {"max_sweeps": 2}
    path = _write_cfg(tmp_path, cfg)
    assert main(["sweep", "-c", path, "--out", str(tmp_path / "u1")]) == 1
    assert main(["sweep", "-c", path, "--out", str(tmp_path / "u2"),
                 "--allow-partial"]) == 0


def test_simulate_with_overrides(tmp_path):
    cfg = dict(BASE_CFG)
    cfg["simulation"] = {"seeds": 2, "n_test": 20000}
    path = _write_cfg(tmp_path, cfg)
    out = tmp_path / "sim"
    assert main(["simulate", "-c", path, "--out", str(out),
                 "--d", "150", "--seed", "7"]) == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["simulation"]["d"] == 150
    assert meta["simulation"]["base_seed"] == 7
    assert meta["simulation"]["n_seeds"] == 2
    rows = _read_rows(out / "result.csv")
    assert len(rows) == 1 and 0.4 < float(rows[0]["acc_plus"]) <= 1.0


def test_recipes_list_and_validate():
    names = list_recipes()
    for expected in ("fig1_center", "fig2_panel1", "fig2_panel2", "fig2_panel3",
                     "fig2_panel4", "fig3_rho01", "fig3_rho05",
                     "fig4_positive_transfer", "fig5_reweigh", "fig6_coupling",
                     "figF1", "figF2", "figF3"):
        assert expected in names
    for name in names:
        cfg = json.loads(recipe_text(name))
        assert cfg["schema"] == 1
        mode = cfg.get("sweep", {}).get("mode", "theory")
        spec = build_spec(cfg, mode)
        assert spec.gen is not None
    with pytest.raises(ConfigError):
        recipe_text("no_such_recipe")


def test_recipes_command(capsys):
    assert main(["recipes"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "fig5_reweigh" in out
    assert main(["recipes", "fig5_reweigh"]) == 0
    assert json.loads(capsys.readouterr().out)["schema"] == 1
