# cli/scenario_file.py
# Scenario documents: INI sections read with configparser, each validated by
# a pydantic model, then turned into a ScenarioConfig. Node numbers in the
# file are 1-based.

from __future__ import annotations

import configparser
import logging
import os
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from graph_model.network import NetworkGraph, build_graph, erdos_renyi_graph
from scenario.engine import IntruderSchedule, ScenarioConfig, iteration_for_time
from utils.errors import (
    DimensionMismatch,
    GraphError,
    IndexOutOfRange,
    InfeasibleBounds,
    InfeasibleWeights,
    NetPrivError,
    ScenarioSyntaxError,
    ScenarioValidationError,
)

log = logging.getLogger(__name__)

KNOWN_SECTIONS = ("graph", "schedule", "run", "output")
REQUIRED_SECTIONS = ("graph", "schedule", "run")


# -------------------------
# Section models
# -------------------------
class GraphSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    nodes: int = Field(ge=1)
    edges: Optional[str] = None
    generator: Optional[Literal["erdos_renyi"]] = None
    edge_probability: Optional[float] = Field(default=None, gt=0, le=1)
    graph_seed: int = 0
    w_min: float = 0.01
    w_max: float = 0.99

    @model_validator(mode="after")
    def _one_topology_source(self):
        if (self.edges is None) == (self.generator is None):
            raise ValueError("give exactly one of 'edges' or 'generator'")
        if self.generator is not None and self.edge_probability is None:
            raise ValueError("generator 'erdos_renyi' needs 'edge_probability'")
        return self


class RunSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    horizon: int = Field(ge=1)
    delta: float = Field(default=0.5, gt=0)
    solver: Literal["ons", "ogd"] = "ons"
    gradient: Literal["exact", "paper"] = "exact"
    seed: int = 0
    initial_weights: str = "uniform"
    initial_state: str = "random"
    regret: Literal["final", "prefix"] = "final"
    quadrature_order: int = Field(default=16, ge=2)
    safety: float = Field(default=2.0, ge=1)
    samples: int = Field(default=32, ge=1)
    state_step: float = Field(default=0.01, gt=0)


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = None
    formats: List[Literal["table", "json_lines"]] = ["table"]

    @field_validator("formats", mode="before")
    @classmethod
    def _split_formats(cls, v):
        if isinstance(v, str):
            return [p.strip() for p in v.split(",") if p.strip()]
        return v


@dataclass(frozen=True)
class LoadedScenario:
    config: ScenarioConfig
    output: OutputSection
    source: Optional[str] = None

    @property
    def name(self) -> str:
        if not self.source:
            return "scenario"
        return os.path.splitext(os.path.basename(self.source))[0]


# -------------------------
# Parsing helpers
# -------------------------
def _read_ini(document: str) -> configparser.ConfigParser:
    if not document or not document.strip():
        raise ScenarioSyntaxError(None, "empty document")
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), empty_lines_in_values=False,
    )
    try:
        parser.read_string(document)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioSyntaxError(exc.lineno, f"expected a [section] header, got {exc.line.strip()!r}") from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ScenarioSyntaxError(exc.lineno, exc.message.splitlines()[0]) from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ScenarioSyntaxError(lineno, f"cannot parse {line.strip()!r}") from exc
    return parser


def _section_model(parser: configparser.ConfigParser, name: str, model):
    raw = dict(parser.items(name)) if parser.has_section(name) else {}
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        field = f"{name}.{loc}" if loc else name
        raise ScenarioValidationError(field, err["msg"]) from exc


def _parse_int_list(text: str, field: str) -> List[int]:
    out = []
    for tok in text.replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise ScenarioValidationError(field, f"not a node number: {tok!r}") from None
    return out


def _parse_float_list(text: str, field: str) -> List[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise ScenarioValidationError(field, f"not a list of numbers: {text!r}") from None


def _parse_edges(text: str) -> List[Tuple[int, int]]:
    edges = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.split("-")
        if len(parts) != 2:
            raise ScenarioValidationError("graph.edges", f"edge must look like 'i-j', got {tok!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ScenarioValidationError("graph.edges", f"edge must look like 'i-j', got {tok!r}") from None
        edges.append((i - 1, j - 1))
    return edges


def _build_graph(section: GraphSection) -> NetworkGraph:
    try:
        if section.generator == "erdos_renyi":
            return erdos_renyi_graph(section.nodes, section.edge_probability, section.graph_seed,
                                     w_min=section.w_min, w_max=section.w_max)
        return build_graph(section.nodes, _parse_edges(section.edges), section.w_min, section.w_max)
    except InfeasibleBounds as exc:
        raise ScenarioValidationError("bounds", str(exc)) from exc
    except (GraphError, IndexOutOfRange) as exc:
        raise ScenarioValidationError("graph", str(exc)) from exc


def _schedule_key_to_iteration(key: str, delta: float) -> int:
    key = key.strip()
    try:
        if key.startswith("t"):
            return iteration_for_time(float(key[1:]), delta)
        return int(key)
    except ValueError:
        raise ScenarioValidationError("schedule", f"event key must be an iteration or t<time>, got {key!r}") from None


def _build_schedule(parser: configparser.ConfigParser, graph: NetworkGraph, run: RunSection) -> IntruderSchedule:
    events: Dict[int, List[int]] = {}
    for key, value in parser.items("schedule"):
        s = _schedule_key_to_iteration(key, run.delta)
        if s in events:
            raise ScenarioValidationError("schedule", f"two events at iteration {s}")
        nodes = _parse_int_list(value, "schedule")
        if not nodes:
            raise ScenarioValidationError("schedule", f"event at iteration {s} lists no nodes")
        for k in nodes:
            if not 1 <= k <= graph.node_count:
                raise ScenarioValidationError("schedule", f"node out of range: {k} (graph has {graph.node_count} nodes)")
        if s > run.horizon:
            raise ScenarioValidationError("schedule", f"event after horizon: iteration {s} > {run.horizon}")
        events[s] = [k - 1 for k in nodes]
    if not events:
        raise ScenarioValidationError("schedule", "no events")
    ordered = sorted(events.items())
    if ordered[0][0] != 1:
        raise ScenarioValidationError("schedule", f"first event must be at iteration 1, got {ordered[0][0]}")
    return IntruderSchedule.from_pairs(ordered)


def _initial_spec(text: str, keywords: Tuple[str, ...], field: str):
    text = text.strip()
    if text.lower() in keywords:
        return text.lower()
    return _parse_float_list(text, field)


# -------------------------
# Entry points
# -------------------------
def load_scenario(document: str, source: Optional[str] = None) -> LoadedScenario:
    """Parse and validate a scenario document; errors name the line or field."""
    parser = _read_ini(document)
    for name in parser.sections():
        if name not in KNOWN_SECTIONS:
            raise ScenarioValidationError(name, f"unknown section; expected one of {', '.join(KNOWN_SECTIONS)}")
    for name in REQUIRED_SECTIONS:
        if not parser.has_section(name):
            raise ScenarioValidationError(name, "missing section")

    graph_section = _section_model(parser, "graph", GraphSection)
    run = _section_model(parser, "run", RunSection)
    output = _section_model(parser, "output", OutputSection)
    graph = _build_graph(graph_section)
    schedule = _build_schedule(parser, graph, run)

    initial_weights = _initial_spec(run.initial_weights, ("uniform", "random"), "run.initial_weights")
    initial_state = _initial_spec(run.initial_state, ("random", "zeros"), "run.initial_state")
    try:
        config = ScenarioConfig(
            graph=graph,
            schedule=schedule,
            horizon=run.horizon,
            delta=run.delta,
            initial_weights=initial_weights,
            solver=run.solver,
            gradient_mode=run.gradient,
            initial_state=initial_state,
            rng_seed=run.seed,
            regret_mode=run.regret,
            quadrature_order=run.quadrature_order,
            safety=run.safety,
            samples=run.samples,
            state_step=run.state_step,
        )
    except (InfeasibleWeights, DimensionMismatch) as exc:
        field = "run.initial_state" if "state" in str(exc) else "run.initial_weights"
        raise ScenarioValidationError(field, str(exc)) from exc
    except (NetPrivError, ValueError) as exc:
        raise ScenarioValidationError("run", str(exc)) from exc
    log.debug("parsed scenario %s: N=%d M=%d T=%d", source or "<string>", graph.node_count, graph.edge_count, run.horizon)
    return LoadedScenario(config=config, output=output, source=source)


def parse_scenario(document: str) -> ScenarioConfig:
    return load_scenario(document).config


def read_scenario_file(path: str) -> LoadedScenario:
    with open(path, "r", encoding="utf-8") as f:
        document = f.read()
    return load_scenario(document, source=path)
