# cli/export.py
# Comma-separated tables (header row, LF endings, 17 significant digits) and
# JSON lines for a finished ScenarioTrace. Node and edge numbers are 1-based.

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass
from typing import Iterable, List, Sequence

from scenario.engine import ScenarioTrace
from utils.errors import EmptyTrace, ExportError

log = logging.getLogger(__name__)

ITERATIONS_TABLE = "iterations.csv"
REGRET_TABLE = "regret.csv"
STATES_TABLE = "states.csv"
ITERATIONS_JSONL = "iterations.jsonl"
FORMATS = ("table", "json_lines")

JSON_KEYS = ("iteration", "time_start", "active_intruders", "weights", "cost", "grad_norm", "cum_cost", "regret")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _intruder_label(nodes: Iterable[int]) -> str:
    return ";".join(str(k + 1) for k in nodes)


def iteration_header(edge_count: int) -> List[str]:
    return (["iteration", "time_start", "active_intruders"]
            + [f"w_{l + 1}" for l in range(edge_count)]
            + ["cost", "grad_norm", "cum_cost", "regret"])


def _write_rows(path: str, header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc
    return path


def _iteration_rows(trace: ScenarioTrace):
    for r in trace.records:
        yield ([str(r.iteration), fmt(r.time_start), _intruder_label(r.intruders)]
               + [fmt(v) for v in r.weights]
               + [fmt(r.cost), fmt(r.grad_norm), fmt(r.cum_cost), fmt(r.regret)])


def export_trace(trace: ScenarioTrace, directory: str, formats: Sequence[str] = ("table",)) -> List[str]:
    """Write the requested formats into `directory`; returns the paths written."""
    if not trace.records:
        raise EmptyTrace("nothing to export")
    unknown = [f for f in formats if f not in FORMATS]
    if unknown:
        raise ValueError(f"unknown export format(s) {unknown}; use {FORMATS}")
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"{directory}: {exc.strerror or exc}") from exc

    written: List[str] = []
    if "table" in formats:
        m = trace.config.graph.edge_count
        written.append(_write_rows(os.path.join(directory, ITERATIONS_TABLE), iteration_header(m), _iteration_rows(trace)))
        written.append(_write_rows(
            os.path.join(directory, REGRET_TABLE),
            ["T", "regret", "regret_over_T"],
            ([str(T), fmt(reg), fmt(reg / T)] for T, reg in trace.regret_curve()),
        ))
        if trace.trajectory is not None:
            n = trace.config.graph.node_count
            written.append(_write_rows(
                os.path.join(directory, STATES_TABLE),
                ["t"] + [f"x_{i + 1}" for i in range(n)],
                ([fmt(t)] + [fmt(v) for v in x] for t, x in zip(trace.trajectory.times, trace.trajectory.states)),
            ))
    if "json_lines" in formats:
        path = os.path.join(directory, ITERATIONS_JSONL)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as f:
                for r in trace.records:
                    obj = {
                        "iteration": r.iteration,
                        "time_start": float(r.time_start),
                        "active_intruders": [k + 1 for k in r.intruders],
                        "weights": [float(v) for v in r.weights],
                        "cost": float(r.cost),
                        "grad_norm": float(r.grad_norm),
                        "cum_cost": float(r.cum_cost),
                        "regret": float(r.regret),
                    }
                    f.write(json.dumps(obj) + "\n")
        except OSError as exc:
            raise ExportError(f"{path}: {exc.strerror or exc}") from exc
        written.append(path)
    for p in written:
        log.info("wrote %s", p)
    return written


# -------------------------
# Reading back
# -------------------------
@dataclass(frozen=True)
class Table:
    header: List[str]
    rows: List[List[object]]

    def column(self, name: str) -> List[object]:
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]


def _cell(text: str):
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: str) -> Table:
    """Parse an exported CSV; numeric cells come back as float."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader)
            rows = [[_cell(c) for c in row] for row in reader]
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc
    except StopIteration:
        raise ExportError(f"{path}: empty table") from None
    return Table(header=header, rows=rows)


def read_json_lines(path: str) -> List[dict]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]
    except OSError as exc:
        raise ExportError(f"{path}: {exc.strerror or exc}") from exc
