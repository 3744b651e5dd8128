# tests/test_cli.py
import filecmp
import os
import re
from pathlib import Path

from cli.app import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, cli_main
from cli.export import ITERATIONS_TABLE, REGRET_TABLE, read_table

BAD_BOUNDS = """\
[graph]
nodes = 3
edges = 1-2, 2-3
w_min = 0.6

[schedule]
1 = 1

[run]
horizon = 3
"""


class TestCommands:
    """Subcommands on the shipped path scenario."""

    def test_check(self, scenario_path, capsys):
        assert cli_main(["check", scenario_path("path3.scenario")]) == EXIT_OK
        out = capsys.readouterr().out
        assert re.search(r"G=\S+ D=\S+ beta=\S+ epsilon=\S+", out)

    def test_hindsight(self, scenario_path, capsys):
        assert cli_main(["hindsight", scenario_path("path3.scenario")]) == EXIT_OK
        assert "w* = [" in capsys.readouterr().out

    def test_oracle(self, scenario_path, capsys):
        assert cli_main(["oracle", scenario_path("path3.scenario")]) == EXIT_OK
        out = capsys.readouterr().out
        m = re.search(r"finite-difference gradient, max relative error (\S+)", out)
        assert m and float(m.group(1)) <= 1e-6

    def test_run_writes_tables(self, scenario_path, tmp_path, capsys):
        out_dir = str(tmp_path / "results")
        assert cli_main(["run", scenario_path("path3.scenario"), "--output", out_dir]) == EXIT_OK
        table = read_table(os.path.join(out_dir, ITERATIONS_TABLE))
        assert len(table.rows) == 5
        assert os.path.exists(os.path.join(out_dir, REGRET_TABLE))
        assert "[run] path3" in capsys.readouterr().out

    def test_run_several_files_get_subdirectories(self, scenario_path, write_scenario, tmp_path):
        other = write_scenario(Path(scenario_path("path3.scenario")).read_text(encoding="utf-8"), name="copy.scenario")
        out_dir = str(tmp_path / "many")
        assert cli_main(["run", scenario_path("path3.scenario"), other, "--output", out_dir]) == EXIT_OK
        assert os.path.exists(os.path.join(out_dir, "path3", ITERATIONS_TABLE))
        assert os.path.exists(os.path.join(out_dir, "copy", ITERATIONS_TABLE))

    def test_shipped_scenarios_export_identical_bytes(self, scenario_path, tmp_path):
        files = [scenario_path("relocating_intruder.scenario"), scenario_path("three_intruders.scenario")]
        first, second = tmp_path / "first", tmp_path / "second"
        assert cli_main(["run", *files, "--output", str(first)]) == EXIT_OK
        assert cli_main(["run", *files, "--output", str(second)]) == EXIT_OK
        for name in ("relocating_intruder", "three_intruders"):
            written = sorted(os.listdir(first / name))
            assert ITERATIONS_TABLE in written
            assert sorted(os.listdir(second / name)) == written
            for f in written:
                assert filecmp.cmp(first / name / f, second / name / f, shallow=False), f


class TestExitCodes:
    """0 ok, 1 validation, 2 runtime."""

    def test_infeasible_bounds(self, write_scenario, capsys):
        path = write_scenario(BAD_BOUNDS)
        assert cli_main(["check", path]) == EXIT_VALIDATION
        assert "bounds" in capsys.readouterr().err

    def test_syntax_error_names_line(self, write_scenario, capsys):
        path = write_scenario("[graph]\nnodes\n")
        assert cli_main(["check", path]) == EXIT_VALIDATION
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli_main(["check", str(tmp_path / "absent.scenario")]) == EXIT_RUNTIME

    def test_bad_arguments(self):
        assert cli_main(["frobnicate"]) == EXIT_VALIDATION
        assert cli_main([]) == EXIT_VALIDATION

    def test_help(self):
        assert cli_main(["--help"]) == EXIT_OK
