import csv
import subprocess
import sys

import pytest

from framesurf.cli import (
    EXIT_ABORT, EXIT_OK, EXIT_USAGE, UsageError, main, parse_int_list, read_config_file, resolve,
)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestParsing:
    @pytest.mark.parametrize("text,expected", [
        ("2,3,4", [2, 3, 4]), ("3..8", [3, 4, 5, 6, 7, 8]), ("1,3..5", [1, 3, 4, 5]), ("5", [5]),
    ])
    def test_int_list(self, text, expected):
        assert parse_int_list(text) == expected

    @pytest.mark.parametrize("text", ["", ",", "5..3"])
    def test_empty_list(self, text):
        with pytest.raises(UsageError):
            parse_int_list(text)

    def test_config_file(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("# comment\nrefine = 1\n\np-list=2..3  # trailing\n")
        assert read_config_file(f) == {"refine": "1", "p_list": "2..3"}
        f.write_text("refine\n")
        with pytest.raises(UsageError, match=":1:"):
            read_config_file(f)

    def test_flags_override_config(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("command=mesh-gen\nrefine=1\nq=2\n")
        spec = resolve(["mesh-gen", "--config", str(f), "--q", "4"])
        assert spec.options["refine"] == 1 and spec.options["q"] == 4

    def test_config_for_other_command(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("command=static\n")
        with pytest.raises(UsageError, match="static"):
            resolve(["mesh-gen", "--config", str(f)])

    def test_unknown_config_key(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("colour=red\n")
        assert main(["mesh-gen", "--config", str(f), "--out", str(tmp_path / "o")]) == EXIT_USAGE


class TestMeshGen:
    def test_rows(self, tmp_path):
        out = tmp_path / "m"
        assert main(["mesh-gen", "--surface", "sphere", "--refine", "2", "--q", "3",
                     "--p-list", "2,3,4,5,6", "--out", str(out)]) == EXIT_OK
        rows = _rows(out / "stats.csv")
        assert rows[0] == ["p", "L2_mesh_error", "Linf_mesh_error", "node_count"]
        assert [int(r[0]) for r in rows[1:]] == [2, 3, 4, 5, 6]
        assert (out / "mesh.fsm").exists() and (out / "config.echo").exists()

    def test_rerun_from_echo_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["mesh-gen", "--refine", "1", "--p-list", "2..3", "--out", str(a)]) == EXIT_OK
        assert main(["mesh-gen", "--config", str(a / "config.echo"), "--out", str(b)]) == EXIT_OK
        for name in ("stats.csv", "mesh.fsm", "config.echo"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_ellipsoid_header(self, tmp_path):
        assert main(["mesh-gen", "--surface", "ellipsoid", "--ratio", "1.003364", "--refine", "1",
                     "--out", str(tmp_path)]) == EXIT_OK
        header = (tmp_path / "mesh.fsm").read_text().splitlines()[:3]
        assert any(line.startswith("SURFACE ELLIPSOID 1.003364") for line in header)
        assert len(_rows(tmp_path / "stats.csv")) == 1

    def test_empty_p_list(self, tmp_path):
        assert main(["mesh-gen", "--p-list", "", "--out", str(tmp_path)]) == EXIT_USAGE

    def test_bad_flag(self, tmp_path, capsys):
        assert main(["mesh-gen", "--surface", "torus", "--out", str(tmp_path)]) == EXIT_USAGE
        assert "usage" in capsys.readouterr().err


class TestStatic:
    def test_rows(self, tmp_path):
        assert main(["static", "--op", "div", "--test", "2", "--frames", "locsph", "--with-g",
                     "--refine", "1", "--p-list", "2..3", "--out", str(tmp_path)]) == EXIT_OK
        rows = _rows(tmp_path / "stats.csv")
        assert rows[0] == ["p", "l2_error", "linf_error", "term1_L2", "term2_L2"]
        assert [int(r[0]) for r in rows[1:]] == [2, 3]
        assert all(float(x) >= 0 for r in rows[1:] for x in r[1:])

    def test_empty_p_list(self, tmp_path):
        assert main(["static", "--op", "div", "--test", "1", "--p-list", "", "--out", str(tmp_path)]) == EXIT_USAGE


class TestRun:
    def test_compare_writes_series_and_delta(self, tmp_path):
        assert main(["run", "--model", "advection", "--case", "cosine_bell", "--compare", "--refine", "1",
                     "--p", "2", "--dt", "1e-3", "--T", "0.004", "--stride", "2", "--out", str(tmp_path)]) == EXIT_OK
        for v in ("LOCAL", "LOCSPHnoG", "LOCSPHwithG"):
            rows = _rows(tmp_path / f"series_{v}.csv")
            assert rows[0] == ["t", "l2_error", "mass", "mass_err", "energy", "energy_err"]
            assert len(rows) == 4
        delta = _rows(tmp_path / "delta.csv")
        assert delta[0][0] == "t" and "delta_mass_err_LOCAL" in delta[0]
        assert len(_rows(tmp_path / "stats.csv")) == 4

    def test_p_range_and_alias(self, tmp_path):
        assert main(["run", "--model", "maxwell", "--case", "manufactured", "--frames", "locsph", "--with-g",
                     "--refine", "1", "--p", "1..2", "--dt", "1e-3", "--T", "0.002",
                     "--out", str(tmp_path)]) == EXIT_OK
        assert (tmp_path / "series_LOCSPHwithG_p1.csv").exists()
        assert [r[0] for r in _rows(tmp_path / "stats.csv")[1:]] == ["1", "2"]

    def test_unknown_case_lists_options(self, tmp_path, capsys):
        assert main(["run", "--model", "swe", "--case", "galewsky", "--refine", "1", "--p", "1",
                     "--out", str(tmp_path)]) == EXIT_USAGE
        assert "steady_zonal" in capsys.readouterr().err

    def test_unknown_model(self, tmp_path):
        assert main(["run", "--model", "euler", "--case", "x", "--out", str(tmp_path)]) == EXIT_USAGE

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_abort(self, tmp_path):
        code = main(["run", "--model", "advection", "--case", "cosine_bell", "--refine", "1", "--p", "2",
                     "--dt", "0.5", "--T", "50", "--out", str(tmp_path)])
        assert code == EXIT_ABORT
        series = _rows(tmp_path / "series_LOCAL.csv")
        assert series[-1][0] == "ABORT"
        assert len(series) >= 3
        assert _rows(tmp_path / "stats.csv")[1][-1] == "ABORT"

    def test_params_round_trip(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["run", "--model", "swe", "--case", "steady_zonal", "--refine", "1", "--p", "1",
                "--dt", "1e-3", "--T", "0.002", "--param", "u0=0.4", "--param", "frame_tendency=true"]
        assert main(args + ["--out", str(a)]) == EXIT_OK
        echo = (a / "config.echo").read_text()
        assert "param=frame_tendency=true;u0=0.4" in echo
        assert main(["run", "--config", str(a / "config.echo"), "--out", str(b)]) == EXIT_OK
        assert (a / "series_LOCAL.csv").read_bytes() == (b / "series_LOCAL.csv").read_bytes()


class TestProcess:
    def _cli(self, args, env=None):
        return subprocess.run([sys.executable, "-m", "framesurf.cli"] + args, capture_output=True,
                              text=True, env=env)

    def test_thread_env(self, tmp_path, monkeypatch):
        import os
        env = dict(os.environ, FRAMESURF_THREADS="1")
        r = self._cli(["mesh-gen", "--refine", "0", "--p-list", "2", "--out", str(tmp_path)], env)
        assert r.returncode == EXIT_OK
        env["FRAMESURF_THREADS"] = "zero"
        r = self._cli(["mesh-gen", "--refine", "0", "--p-list", "2", "--out", str(tmp_path)], env)
        assert r.returncode == EXIT_USAGE and "FRAMESURF_THREADS" in r.stderr

    def test_missing_subcommand(self):
        assert self._cli([]).returncode == EXIT_USAGE
