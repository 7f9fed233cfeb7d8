"""Command-line driver: config validation, report formats, determinism.

Reports are contracts: the tests below pin the exact stdout of mesh-info,
the CSV layout of every writer, and byte-identical reruns.  Frozen numbers
come from the library's own regression baselines; the CLI must reproduce
them bit for bit because it pins the BLAS pool to one thread.
"""

import numpy as np
import pytest

from feclab.cli import ExperimentConfig, main, parse_config
from feclab.errors import ConfigError

# regression baselines shared with the library tests
STABILITY_RATIO_S2 = 0.093290665589357183
CANONICAL_HCURL = (6.356930216197823, 2.8152809785037523)
CANONICAL_RATE = 1.1750513338419455
SPHERE_CRIME_L1 = 0.022324300060400093
SPHERE_BOUND_CONSTANT = 2.4807327203687208


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_report(path):
    comments, header, rows = [], None, []
    for line in path.read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
        elif header is None:
            header = line.split(",")
        else:
            rows.append(line.split(","))
    return comments, header, rows


def info_dict(text):
    pairs = (line.split(" ", 1) for line in text.strip().splitlines())
    return {key: val for key, val in pairs}


# ---------------------------------------------------------------- parsing


def test_missing_command_lists_catalog():
    with pytest.raises(ConfigError, match="missing command"):
        parse_config([])
    with pytest.raises(ConfigError, match="mesh-info, solve, converge"):
        parse_config([])


def test_unknown_command_short_circuits():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["frobnicate", "--geometry", "bogus"])
    message = str(excinfo.value)
    assert "unknown command 'frobnicate'" in message
    # later checks are pointless without a command, so they are skipped
    assert "bogus" not in message


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["converge", "--geometry", "bogus", "--levels", "0",
                      "--metric", "warp", "--problem", "sines",
                      "--out", "x.csv"])
    message = str(excinfo.value)
    assert "unknown geometry 'bogus'; catalog: torus3, sphere2" in message
    assert "--levels must be >= 1, got 0" in message
    # the metric catalog depends on the geometry, so with an unknown
    # geometry the metric value cannot be judged and is not reported
    assert "warp" not in message


def test_missing_required_flags_all_named():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["solve", "--geometry", "torus3"])
    message = str(excinfo.value)
    for flag in ("--level", "--load", "--out"):
        assert f"solve requires {flag}" in message


def test_unknown_flag_lists_valid_ones():
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["mesh-info", "--volume", "3",
                      "--geometry", "torus3", "--level", "1"])
    message = str(excinfo.value)
    assert "flag --volume is not valid for mesh-info" in message
    assert "--geometry" in message and "--level" in message


def test_positional_arguments_rejected():
    with pytest.raises(ConfigError, match="unexpected positional argument"):
        parse_config(["mesh-info", "torus3"])


def test_flag_without_value_rejected():
    with pytest.raises(ConfigError, match="--level is missing its value"):
        parse_config(["mesh-info", "--geometry", "torus3", "--level"])


def test_defaults_fill_unset_flags():
    config = parse_config(["solve", "--geometry", "torus3", "--level", "1",
                           "--load", "sines", "--out", "u.csv"])
    assert config == ExperimentConfig(command="solve", geometry="torus3",
                                      level=1, load="sines", out="u.csv")
    assert config.metric == "flat"
    assert config.eps == pytest.approx(0.3)
    assert config.degree == 5


def test_numeric_flag_validation():
    with pytest.raises(ConfigError, match="--degree must be >= 5, got 3"):
        parse_config(["solve", "--geometry", "torus3", "--level", "1",
                      "--load", "sines", "--degree", "3", "--out", "x"])
    with pytest.raises(ConfigError, match="--seed must be >= 0, got -2"):
        parse_config(["interp-check", "--geometry", "torus3",
                      "--level", "1", "--seed", "-2"])
    with pytest.raises(ConfigError, match="--eps wants a number, got 'abc'"):
        parse_config(["solve", "--geometry", "torus3", "--level", "1",
                      "--load", "sines", "--eps", "abc", "--out", "x"])
    # level 0 is a legal mesh (the unrefined seed) for inspection commands
    config = parse_config(["mesh-info", "--geometry", "sphere2",
                           "--level", "0"])
    assert config.level == 0


def test_name_catalogs_enforced():
    cases = [
        (["solve", "--geometry", "torus3", "--level", "1",
          "--load", "bogus", "--out", "x"],
         "unknown load for torus3 'bogus'; catalog: sines, gradient"),
        (["converge", "--geometry", "torus3", "--levels", "1",
          "--problem", "spirals", "--out", "x"],
         "unknown problem for torus3 'spirals'"),
        (["converge", "--geometry", "torus3", "--levels", "1",
          "--problem", "sines", "--interpolant", "spline", "--out", "x"],
         "unknown interpolant 'spline'"),
        (["crime", "--geometry", "torus3", "--approx", "cubic",
          "--levels", "1", "--out", "x"],
         "unknown approximation scheme 'cubic'"),
        (["crime", "--geometry", "torus3", "--approx", "flat",
          "--levels", "1", "--transfer", "ritz", "--out", "x"],
         "unknown transfer choice 'ritz'"),
        (["solve", "--geometry", "torus3", "--level", "1", "--load",
          "sines", "--metric", "round-pullback", "--out", "x"],
         "unknown metric for torus3 'round-pullback'"),
    ]
    for argv, fragment in cases:
        with pytest.raises(ConfigError) as excinfo:
            parse_config(argv)
        assert fragment in str(excinfo.value)


def test_galerkin_needs_flat_torus():
    with pytest.raises(ConfigError, match="galerkin needs torus3"):
        parse_config(["converge", "--geometry", "sphere2", "--levels", "2",
                      "--problem", "rotational", "--out", "x"])
    with pytest.raises(ConfigError, match="galerkin needs --metric flat"):
        parse_config(["converge", "--geometry", "torus3", "--levels", "2",
                      "--problem", "sines", "--metric", "perturbed",
                      "--out", "x"])
    # the interpolation-only paths carry no such restriction
    config = parse_config(["converge", "--geometry", "torus3", "--levels",
                           "2", "--problem", "sines", "--metric",
                           "perturbed", "--interpolant", "canonical",
                           "--out", "x"])
    assert config.interpolant == "canonical"


# ----------------------------------------------------------- config files


def test_config_file_merges_and_flags_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# coarse solve defaults\n"
                   "geometry = torus3\n"
                   "load = sines\n"
                   "\n"
                   "level = 2\n")
    config = parse_config(["solve", "--config", str(cfg),
                           "--level", "1", "--out", "u.csv"])
    assert config.geometry == "torus3"
    assert config.load == "sines"
    assert config.level == 1  # explicit flag beats the file


def test_config_file_keys_face_same_validation(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("volume = 3\n")
    with pytest.raises(ConfigError, match="--volume is not valid"):
        parse_config(["mesh-info", "--config", str(cfg),
                      "--geometry", "torus3", "--level", "1"])


def test_config_file_errors_carry_location(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("geometry = torus3\nlevel broken-line\n")
    with pytest.raises(ConfigError) as excinfo:
        parse_config(["mesh-info", "--config", str(cfg), "--level", "1"])
    assert f"{cfg}:2: expected `key = value`" in str(excinfo.value)
    with pytest.raises(ConfigError, match="cannot read config file"):
        parse_config(["mesh-info", "--config", str(tmp_path / "absent"),
                      "--geometry", "torus3", "--level", "1"])


# ------------------------------------------------------------- mesh-info


def test_mesh_info_torus_report(capsys):
    code, out, err = run_cli(["mesh-info", "--geometry", "torus3",
                              "--level", "1"], capsys)
    assert code == 0 and err == ""
    info = info_dict(out)
    assert info["geometry"] == "torus3"
    assert info["dim"] == "3"
    counts = [info[f"num_simplices_{k}"] for k in range(4)]
    assert counts == ["8", "56", "96", "48"]
    assert info["euler"] == "0"
    assert info["betti"] == "1 3 3 1"
    assert float(info["h_max"]) == pytest.approx(np.sqrt(3) / 2, rel=1e-15)
    assert info["h_min"] == info["h_max"]
    assert float(info["volume_ratio"]) == pytest.approx(1.0, abs=1e-12)
    assert float(info["c_map"]) == pytest.approx(1.297294279069878,
                                                 rel=1e-12)
    assert float(info["c_inverse"]) == pytest.approx(3.1210477104896053,
                                                     rel=1e-12)


def test_mesh_info_sphere_report(capsys):
    code, out, _ = run_cli(["mesh-info", "--geometry", "sphere2",
                            "--level", "0"], capsys)
    assert code == 0
    info = info_dict(out)
    assert info["dim"] == "2"
    counts = [info[f"num_simplices_{k}"] for k in range(3)]
    assert counts == ["12", "30", "20"]
    assert info["euler"] == "2"
    assert info["betti"] == "1 0 1"


# ----------------------------------------------------------------- solve


def test_solve_report_layout(tmp_path, capsys):
    out_path = tmp_path / "u.csv"
    code, out, err = run_cli(["solve", "--geometry", "torus3", "--level",
                              "1", "--load", "sines", "--out",
                              str(out_path)], capsys)
    assert code == 0 and err == ""
    assert out == f"wrote {out_path} (67 coefficients)\n"

    comments, header, rows = read_report(out_path)
    assert header == ["block", "index", "value"]
    assert "geometry=torus3" in comments[0] and "load=sines" in comments[0]
    assert "u = edge coefficients" in comments[1]
    blocks = {name: [] for name in ("u", "z", "p")}
    for name, index, value in rows:
        blocks[name].append((int(index), float(value)))
    assert [len(blocks[n]) for n in ("u", "z", "p")] == [56, 8, 3]
    for entries in blocks.values():
        assert [i for i, _ in entries] == list(range(len(entries)))
    # curl-curl load with zero potential part: z and p vanish
    assert max(abs(v) for _, v in blocks["u"]) > 1e-2
    assert max(abs(v) for _, v in blocks["z"]) < 1e-10
    assert max(abs(v) for _, v in blocks["p"]) < 1e-10

    diag = dict(part.split("=") for part in comments[2][2:].split(" "))
    assert float(diag["residual"]) < 1e-12
    assert float(diag["stability_ratio"]) == pytest.approx(
        STABILITY_RATIO_S2, rel=1e-9)


def test_solve_rerun_is_byte_identical(tmp_path, capsys):
    argv = ["solve", "--geometry", "torus3", "--level", "1",
            "--load", "sines"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(argv + ["--out", str(first)], capsys)[0] == 0
    assert run_cli(argv + ["--out", str(second)], capsys)[0] == 0
    assert first.read_bytes() == second.read_bytes()


# -------------------------------------------------------------- converge


def test_converge_report_values(tmp_path, capsys):
    out_path = tmp_path / "conv.csv"
    code, out, _ = run_cli(["converge", "--geometry", "torus3", "--levels",
                            "2", "--problem", "sines", "--interpolant",
                            "canonical", "--out", str(out_path)], capsys)
    assert code == 0
    assert out == f"wrote {out_path} (2 levels)\n"

    comments, header, rows = read_report(out_path)
    assert header == ["level", "h", "dofs", "err_l2", "err_curl",
                      "err_hcurl", "err_zeta_h1", "rate_hcurl"]
    assert "interpolant=canonical" in comments[0]
    assert [row[0] for row in rows] == ["1", "2"]
    assert [row[2] for row in rows] == ["56", "448"]
    h = [float(row[1]) for row in rows]
    assert h[0] == pytest.approx(np.sqrt(3) / 2, rel=1e-15)
    assert h[1] == pytest.approx(np.sqrt(3) / 4, rel=1e-15)
    hcurl = [float(row[5]) for row in rows]
    assert hcurl == pytest.approx(CANONICAL_HCURL, rel=1e-9)
    # no scalar potential to compare against for a pure interpolant
    assert rows[0][6] == "nan" and rows[1][6] == "nan"
    assert rows[0][7] == "nan"
    assert float(rows[1][7]) == pytest.approx(CANONICAL_RATE, rel=1e-9)


# ----------------------------------------------------------------- crime


def test_crime_report_values(tmp_path, capsys):
    out_path = tmp_path / "crime.csv"
    code, out, _ = run_cli(["crime", "--geometry", "sphere2", "--approx",
                            "flat", "--levels", "1", "--out",
                            str(out_path)], capsys)
    assert code == 0

    comments, header, rows = read_report(out_path)
    assert header == ["level", "h", "dofs", "lambda_min", "lambda_max",
                      "crime_norm", "discrepancy", "solution_gap",
                      "rate_gap"]
    # the geometry-default load is resolved and recorded
    assert "load=rotational" in comments[0]
    assert "transfer=l2-projection" in comments[0]
    constant = float(comments[1].split("=")[1])
    assert constant == pytest.approx(SPHERE_BOUND_CONSTANT, rel=1e-9)

    (row,) = rows
    assert row[0] == "1" and row[2] == "120"
    lam_min, lam_max = float(row[3]), float(row[4])
    assert lam_min < 1.0 < lam_max
    assert float(row[5]) == pytest.approx(SPHERE_CRIME_L1, rel=1e-9)
    assert float(row[7]) > 0.0
    assert row[8] == "nan"


# ----------------------------------------------------------- interp-check


def test_interp_check_defect_sizes(tmp_path, capsys):
    out_path = tmp_path / "checks.csv"
    code, out, _ = run_cli(["interp-check", "--geometry", "torus3",
                            "--level", "1", "--seed", "3", "--out",
                            str(out_path)], capsys)
    assert code == 0

    lines = out.strip().splitlines()
    assert lines[0] == "check,name,degree,value"
    values = {}
    for line in lines[1:]:
        check, name, degree, value = line.split(",")
        values[(check, name)] = float(value)

    canonical = [v for (check, _), v in values.items()
                 if check == "commuting-canonical"]
    assert len(canonical) >= 4 and max(canonical) < 1e-10
    # quasi commutes only up to the projection error of non-discrete data
    assert 0.1 < values[("commuting-quasi", "torus-sines")] < 1.0
    assert values[("commuting-quasi", "const-one-form")] < 1e-12
    assert values[("idempotence-quasi", "seeded-fe-field")] < 1e-11
    scaling = [v for (check, _), v in values.items()
               if check == "weight-scaling"]
    assert len(scaling) == 3 and max(scaling) < 1e-12

    comments, header, rows = read_report(out_path)
    assert "seed=3" in comments[0]
    assert [",".join(row) for row in rows] == lines[1:]


def test_interp_check_seeded_rerun_matches(capsys):
    argv = ["interp-check", "--geometry", "sphere2", "--level", "1",
            "--seed", "11"]
    _, first, _ = run_cli(argv, capsys)
    _, second, _ = run_cli(argv, capsys)
    assert first == second


# ------------------------------------------------------------ exit codes


def test_invalid_usage_exits_two_without_output(tmp_path, capsys):
    out_path = tmp_path / "never.csv"
    code, out, err = run_cli(["converge", "--geometry", "bogus", "--levels",
                              "0", "--problem", "sines", "--out",
                              str(out_path)], capsys)
    assert code == 2 and out == ""
    assert err.startswith("error: ConfigError: unknown geometry 'bogus'")
    assert err.count("\n") == 1
    assert not out_path.exists()


def test_unwritable_report_exits_one(tmp_path, capsys):
    target = tmp_path / "missing-dir" / "u.csv"
    code, out, err = run_cli(["solve", "--geometry", "torus3", "--level",
                              "1", "--load", "sines", "--out",
                              str(target)], capsys)
    assert code == 1
    assert err.startswith("error: ConfigError: cannot write report")
    assert not target.exists()
