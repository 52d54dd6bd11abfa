import json
import subprocess
import sys

import pytest

from mmimo_u import __version__
from mmimo_u.cli import OUTPUT_ENV, build_parser, main, resolve_config

SMALL = "[scenario]\nrings = 1\n[spatial]\ncovariance_samples = 20\n"


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(SMALL)
    return path


def run(args):
    return main([str(a) for a in args])


def test_simulate_writes_results(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    code = run(["--config", config_file, "--antennas", "8,16", "--drops", "1",
                "--seed", "3", "--out", out])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert {"fig2_wifi_interference_cdf.csv", "fig3_bs_interference_cdf.csv",
            "fig4_rates.csv", "summary.json", "manifest.json"} <= names
    assert json.loads((out / "manifest.json").read_text())["seed"] == 3
    text = capsys.readouterr()
    assert "mmimo-u" in text.out and "drops" in text.err


def test_scheme_filter_and_quiet(config_file, tmp_path, capsys):
    out = tmp_path / "out"
    code = run(["--config", config_file, "--antennas", "8", "--drops", "1", "--scheme", "lbt",
                "--out", out, "-q"])
    assert code == 0
    assert capsys.readouterr().out == ""
    rows = (out / "fig4_rates.csv").read_text().splitlines()[1:]
    assert {r.split(",")[0] for r in rows} == {"lbt-case1", "lbt-case2"}


def test_dump_layout(config_file, tmp_path):
    out = tmp_path / "out"
    assert run(["--config", config_file, "--antennas", "8", "--drops", "2", "--out", out,
                "--dump-layout", "-q"]) == 0
    layouts = sorted((out / "layouts").iterdir())
    assert [p.name for p in layouts] == ["drop_00000.json", "drop_00001.json"]
    assert len(json.loads(layouts[0].read_text())["base_stations"]) == 21


def test_output_directory_precedence(config_file, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    args = build_parser().parse_args(["--config", str(config_file)])
    assert resolve_config(args).run.output_dir == str(tmp_path / "env")
    args = build_parser().parse_args(["--config", str(config_file), "--out", str(tmp_path / "x")])
    assert resolve_config(args).run.output_dir == str(tmp_path / "x")
    monkeypatch.delenv(OUTPUT_ENV)
    args = build_parser().parse_args(["--config", str(config_file)])
    assert resolve_config(args).run.output_dir == "results"


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\ndrops = 0\n")
    assert run(["--config", bad, "--out", tmp_path / "o"]) == 2
    assert "run.drops" in capsys.readouterr().err


def test_missing_config_exit_code(tmp_path):
    assert run(["--config", tmp_path / "none.ini", "--out", tmp_path / "o"]) == 2


def test_output_error_exit_code(config_file, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run(["--config", config_file, "--drops", "1", "--out", blocker / "sub"]) == 4
    assert "not writable" in capsys.readouterr().err


@pytest.mark.parametrize("args", [["--antennas", "8,x"], ["--scheme", "wifi"], ["--antennas", ","]])
def test_bad_arguments_exit_via_argparse(config_file, args):
    with pytest.raises(SystemExit) as exc:
        run(["--config", config_file] + args)
    assert exc.value.code == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_module_entry_point(config_file, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mmimo_u.cli", "--config", str(config_file), "--antennas", "8",
         "--drops", "1", "--out", str(tmp_path / "o"), "-q"],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
