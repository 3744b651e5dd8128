# tests/test_scenario_file.py
import numpy as np
import pytest

from cli.scenario_file import load_scenario, parse_scenario, read_scenario_file
from graph_model.network import IntruderSet
from tests.conftest import SCENARIO_DIR
from utils.errors import ScenarioSyntaxError, ScenarioValidationError

MINIMAL = """\
[graph]
nodes = 3
edges = 1-2, 2-3

[schedule]
1 = 1

[run]
horizon = 4
"""


def with_lines(base, section, *lines):
    """Insert lines right after a section header."""
    header = f"[{section}]\n"
    return base.replace(header, header + "".join(line + "\n" for line in lines), 1)


def validation_error(document):
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(document)
    return info.value


class TestValidDocuments:
    """Documents that parse."""

    def test_minimal(self):
        config = parse_scenario(MINIMAL)
        assert config.graph.edges == ((0, 1), (1, 2))
        assert config.horizon == 4
        assert config.delta == 0.5
        assert (config.solver, config.gradient_mode, config.regret_mode) == ("ons", "exact", "final")
        assert config.schedule.active_at(1) == IntruderSet((0,))

    def test_smallest_scenario(self):
        config = parse_scenario("[graph]\nnodes = 2\nedges = 1-2\n[schedule]\n1 = 2\n[run]\nhorizon = 5\n")
        assert config.graph.edge_count == 1
        assert config.schedule.active_at(5) == IntruderSet((1,))

    def test_output_defaults(self):
        loaded = load_scenario(MINIMAL)
        assert loaded.output.directory is None
        assert loaded.output.formats == ["table"]
        assert loaded.name == "scenario"

    def test_time_keyed_event(self):
        doc = MINIMAL.replace("horizon = 4", "horizon = 30").replace("1 = 1\n", "1 = 1\nt12.5 = 3\n")
        config = parse_scenario(doc)
        assert config.schedule.active_at(24) == IntruderSet((0,))
        assert config.schedule.active_at(25) == IntruderSet((2,))

    def test_vectors_for_initial_conditions(self):
        doc = with_lines(MINIMAL, "run", "initial_weights = 0.3, 0.7", "initial_state = 1, 0, -1")
        config = parse_scenario(doc)
        assert list(config.initial_weights) == [0.3, 0.7]
        assert list(config.initial_state) == [1.0, 0.0, -1.0]

    def test_semicolon_separates_intruders(self):
        doc = MINIMAL.replace("1 = 1\n", "; leading comment\n1 = 1 ; 3\n")
        config = parse_scenario(doc)
        assert config.schedule.active_at(1) == IntruderSet((0, 2))

    def test_inline_hash_comment(self):
        config = parse_scenario(MINIMAL.replace("1 = 1\n", "1 = 1, 3  # two intruders\n"))
        assert config.schedule.active_at(1) == IntruderSet((0, 2))

    def test_generator_graph(self):
        doc = MINIMAL.replace("edges = 1-2, 2-3", "generator = erdos_renyi\nedge_probability = 0.5\ngraph_seed = 3")
        config = parse_scenario(doc)
        assert config.graph.node_count == 3
        assert config.graph.edge_count >= 2

    @pytest.mark.parametrize("name", ["relocating_intruder.scenario", "three_intruders.scenario", "path3.scenario"])
    def test_shipped_files(self, name):
        loaded = read_scenario_file(f"{SCENARIO_DIR}/{name}")
        assert loaded.name == name.split(".")[0]
        assert loaded.config.horizon >= 1

    def test_shipped_relocation_event(self):
        config = read_scenario_file(f"{SCENARIO_DIR}/relocating_intruder.scenario").config
        assert config.schedule.active_at(24) == IntruderSet((2,))
        assert config.schedule.active_at(25) == IntruderSet((7,))
        np.testing.assert_equal(config.graph.node_count, 9)


class TestSyntaxErrors:
    """Errors that carry a line number."""

    def test_empty_document(self):
        with pytest.raises(ScenarioSyntaxError) as info:
            load_scenario("  \n")
        assert info.value.line is None

    def test_missing_header(self):
        with pytest.raises(ScenarioSyntaxError) as info:
            load_scenario("nodes = 3\n" + MINIMAL)
        assert info.value.line == 1

    def test_line_without_separator(self):
        doc = MINIMAL.replace("[run]\n", "[run]\nhorizon\n")
        with pytest.raises(ScenarioSyntaxError) as info:
            load_scenario(doc)
        assert info.value.line == 9

    def test_duplicate_key(self):
        with pytest.raises(ScenarioSyntaxError) as info:
            load_scenario(MINIMAL + "horizon = 5\n")
        assert info.value.line == 10


class TestValidationErrors:
    """Errors that name the offending field."""

    def test_infeasible_bounds(self):
        doc = MINIMAL.replace("edges = 1-2, 2-3", "edges = 1-2, 2-3\nw_min = 0.6")
        err = validation_error(doc)
        assert err.field == "bounds"
        assert "2·0.6 > 1" in err.reason

    def test_intruder_out_of_range(self):
        doc = MINIMAL.replace("1 = 1\n", "1 = 99\n")
        err = validation_error(doc)
        assert err.field == "schedule"
        assert err.reason.startswith("node out of range")

    def test_event_after_horizon(self):
        err = validation_error(MINIMAL.replace("1 = 1\n", "1 = 1\n9 = 2\n"))
        assert err.field == "schedule"
        assert "after horizon" in err.reason

    def test_first_event_late(self):
        err = validation_error(MINIMAL.replace("1 = 1\n", "2 = 1\n"))
        assert err.field == "schedule"

    def test_two_events_same_iteration(self):
        doc = MINIMAL.replace("horizon = 4", "horizon = 30").replace("1 = 1\n", "1 = 1\n25 = 2\nt12.5 = 3\n")
        err = validation_error(doc)
        assert "two events at iteration 25" in err.reason

    def test_unknown_solver(self):
        assert validation_error(with_lines(MINIMAL, "run", "solver = adam")).field == "run.solver"

    def test_unknown_key(self):
        assert validation_error(with_lines(MINIMAL, "run", "speed = 3")).field == "run.speed"

    def test_missing_section(self):
        doc = MINIMAL.replace("[schedule]\n1 = 1\n", "")
        assert validation_error(doc).field == "schedule"

    def test_unknown_section(self):
        assert validation_error(MINIMAL + "[plot]\nstyle = dark\n").field == "plot"

    def test_malformed_edge(self):
        assert validation_error(MINIMAL.replace("1-2, 2-3", "1-2, 2:3")).field == "graph.edges"

    def test_disconnected_graph(self):
        assert validation_error(MINIMAL.replace("1-2, 2-3", "1-2")).field == "graph"

    def test_both_topology_sources(self):
        doc = MINIMAL.replace("edges = 1-2, 2-3", "edges = 1-2, 2-3\ngenerator = erdos_renyi\nedge_probability = 0.5")
        assert validation_error(doc).field == "graph"

    def test_infeasible_initial_weights(self):
        err = validation_error(with_lines(MINIMAL, "run", "initial_weights = 0.9, 0.9"))
        assert err.field == "run.initial_weights"

    def test_initial_state_length(self):
        err = validation_error(with_lines(MINIMAL, "run", "initial_state = 1, 2"))
        assert err.field == "run.initial_state"
