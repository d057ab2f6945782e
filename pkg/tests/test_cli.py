import json

import pytest

from fdjs.cli import COMMAND_DEFAULTS, ConfigError, main, resolve_config
from fdjs.detector import DetectorParams, roc_constants


def run(args):
    return main(args)


def test_roc_header_and_monotone_columns(tmp_path):
    out = tmp_path / "roc.csv"
    assert run(["roc", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# roc config: {")
    assert lines[1] == "gamma,p_fa,p_md"
    rows = [line.split(",") for line in lines[2:]]
    pfa = [float(r[1]) for r in rows]
    pmd = [float(r[2]) for r in rows]
    assert all(a >= b for a, b in zip(pfa, pfa[1:]))
    assert all(a <= b for a, b in zip(pmd, pmd[1:]))


def test_roc_prints_matching_constants(tmp_path, capsys):
    out = tmp_path / "roc.csv"
    assert run(["roc", "--out", str(out), "--verify"]) == 0
    text = capsys.readouterr().out
    rc = roc_constants(DetectorParams(1000, 1.0, 0.5))
    assert f"c={rc.c!r}" in text and f"k={rc.k!r}" in text
    assert "PASS" in text


def test_roc_rerun_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["roc", "--out", str(a), "--seed", "5"]) == 0
    assert run(["roc", "--out", str(b), "--seed", "5"]) == 0
    assert a.read_bytes().replace(b"a.csv", b"") == b.read_bytes().replace(b"b.csv", b"")


def test_optimize_symmetric_prints_half(tmp_path, capsys):
    out = tmp_path / "opt.csv"
    rc = run(["optimize", "--out", str(out), "--set", "alpha_s_rx=0.5"])
    assert rc == 0
    assert "eta*=0.5 " in capsys.readouterr().out


def test_optimize_verify_passes(tmp_path, capsys):
    out = tmp_path / "opt.csv"
    assert run(["optimize", "--out", str(out), "--verify"]) == 0
    text = capsys.readouterr().out
    assert "PASS: grid check" in text
    assert out.read_text().splitlines()[1] == "eta,p_fa"


def test_optimize_rejects_bad_bound(tmp_path, capsys):
    rc = run(["optimize", "--out", str(tmp_path / "x.csv"), "--set", "md_bound=1.5"])
    assert rc == 1


def test_heatmap_csv_and_svg(tmp_path):
    out = tmp_path / "heat.csv"
    rc = run(["heatmap", "--out", str(out), "--svg", "--verify",
              "--set", "grid_steps=6"])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "d_tx_m,d_rx_m,pfa_single,pfa_css,pfa_fdjs,ratio_css,ratio_fdjs"
    assert len(lines) == 2 + 36
    svg = (tmp_path / "heat.svg").read_text()
    assert svg.startswith("<svg ")
    # diagonal rows carry identical ratios
    for line in lines[2:]:
        f = line.split(",")
        if f[0] == f[1]:
            assert f[5] == f[6]


def test_heatmap_verify_fails_without_red_region(tmp_path, capsys):
    # A grid entirely in the strong-detection zone has no cells where the
    # unweighted fusion loses, so that check must fail with exit 2.
    out = tmp_path / "heat.csv"
    rc = run(["heatmap", "--out", str(out), "--verify",
              "--set", "grid_min_m=60000", "--set", "grid_max_m=90000",
              "--set", "grid_steps=4"])
    assert rc == 2
    assert "FAIL" in capsys.readouterr().out


def test_throughput_small_run(tmp_path):
    out = tmp_path / "thr.csv"
    rc = run(["throughput", "--out", str(out), "--seed", "11",
              "--set", "trials=2", "--set", "duration_s=10.0",
              "--set", "cycle_points=2", "--set", "separations_m=[30000.0]",
              "--set", 'strategies=["fdjs","ijs"]'])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[1] == "switch_cycle_s,strategy,throughput_bps,disruption_rate,stderr"
    assert len(lines) == 2 + 2 * 2
    assert json.loads(lines[0].split("config: ", 1)[1])["seed"] == 11


def test_throughput_rerun_byte_identical(tmp_path):
    args = ["--seed", "3", "--set", "trials=1", "--set", "duration_s=5.0",
            "--set", "cycle_points=2", "--set", "separations_m=[30000.0]",
            "--set", 'strategies=["css"]']
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["throughput", "--out", str(a)] + args) == 0
    assert run(["throughput", "--out", str(b)] + args) == 0
    assert a.read_bytes() == b.read_bytes()


def test_throughput_multiple_separations_suffixed(tmp_path):
    out = tmp_path / "thr.csv"
    rc = run(["throughput", "--out", str(out), "--set", "trials=1",
              "--set", "duration_s=5.0", "--set", "cycle_points=2",
              "--set", 'strategies=["css"]'])
    assert rc == 0
    assert (tmp_path / "thr_sep30000m.csv").exists()
    assert (tmp_path / "thr_sep10000m.csv").exists()


def test_unknown_config_key_exits_1(tmp_path, capsys):
    assert run(["roc", "--out", str(tmp_path / "x.csv"), "--set", "bogus=1"]) == 1
    assert "unknown config key" in capsys.readouterr().err


def test_zero_trials_rejected(tmp_path):
    assert run(["throughput", "--out", str(tmp_path / "x.csv"),
                "--set", "trials=0"]) == 1


def test_config_file_layering(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"alpha_s": 0.9, "gamma_steps": 11}))
    cfg = resolve_config("roc", str(cfg_file), ["alpha_s=1.2"], seed=9)
    assert cfg["alpha_s"] == 1.2       # --set beats the file
    assert cfg["gamma_steps"] == 11    # file beats defaults
    assert cfg["seed"] == 9            # flag beats everything
    assert cfg["n_samples"] == COMMAND_DEFAULTS["roc"]["n_samples"]


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        resolve_config("roc", str(bad))
    with pytest.raises(ConfigError):
        resolve_config("roc", str(tmp_path / "missing.json"))
    with pytest.raises(ConfigError):
        resolve_config("roc", None, ["novalue"])


def test_usage_error_exits_1(capsys):
    assert run(["no-such-command"]) == 1
