# This file is part of ts_fairpc.
#
# Developed for the Vera C. Rubin Observatory Telescope and Site Systems.
# This product includes software developed by the LSST Project
# (https://www.lsst.org).
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

__all__ = [
    "CIRCUIT_HEADER",
    "format_circuit",
    "parse_circuit",
    "save_circuit",
    "load_circuit",
]

import pathlib
import re
from collections.abc import Iterable

import numpy as np

from .circuit import Circuit, LeafNode, Node, ProductNode, SumNode, Variable
from .errors import CircuitParseError, FairPCError

CIRCUIT_HEADER = "fairpc-circuit v1"

VAR_REGEX = re.compile(r"var (?P<id>\d+) (?P<arity>\d+) (?P<name>\S.*)")
INDICATOR_REGEX = re.compile(r"L (?P<id>\d+) I (?P<var>\d+) (?P<value>\d+)")
CATEGORICAL_REGEX = re.compile(r"L (?P<id>\d+) C (?P<var>\d+) (?P<probs>\S+( \S+)*)")
PRODUCT_REGEX = re.compile(r"P (?P<id>\d+) (?P<children>\d+( \d+)*)")
SUM_REGEX = re.compile(r"S (?P<id>\d+) (?P<edges>\d+:\S+( \d+:\S+)*)")
ROOT_REGEX = re.compile(r"root (?P<id>\d+)")


def _format_float(value: float) -> str:
    # repr is the shortest string that round-trips exactly.
    return repr(float(value))


def format_circuit(circuit: Circuit, comments: Iterable[str] = ()) -> str:
    """Render a circuit in the line-oriented text format.

    Parameters
    ----------
    circuit : `Circuit`
        Circuit to render.
    comments : `list` [`str`]
        Lines appended after the root line, each prefixed with ``# ``.

    Returns
    -------
    text : `str`
        The file contents, newline terminated.
    """
    lines = [CIRCUIT_HEADER]
    lines += [f"var {v.id} {v.arity} {v.name}" for v in circuit.variables]
    for i, node in enumerate(circuit.nodes):
        if isinstance(node, LeafNode):
            if node.is_indicator:
                lines.append(f"L {i} I {node.variable} {node.value}")
            else:
                probs = " ".join(_format_float(p) for p in node.probs)
                lines.append(f"L {i} C {node.variable} {probs}")
        elif isinstance(node, ProductNode):
            lines.append(f"P {i} " + " ".join(str(c) for c in node.children))
        else:
            edges = " ".join(
                f"{c}:{_format_float(w)}"
                for c, w in zip(node.children, node.log_weights)
            )
            lines.append(f"S {i} {edges}")
    lines.append(f"root {circuit.root}")
    lines += [f"# {comment}" for comment in comments]
    return "\n".join(lines) + "\n"


def _parse_floats(text: str, line_number: int) -> np.ndarray:
    try:
        return np.array([float(token) for token in text.split()])
    except ValueError:
        raise CircuitParseError(line_number, f"Cannot parse numbers in {text!r}")


def parse_circuit(text: str) -> tuple[Circuit, list[str]]:
    """Parse the text format.

    Parameter values are read as written; normalization is audited
    separately (see `Circuit.normalization_violations`).

    Parameters
    ----------
    text : `str`
        File contents.

    Returns
    -------
    circuit : `Circuit`
        The parsed circuit.
    comments : `list` [`str`]
        Comment lines, without the leading ``#`` and whitespace.

    Raises
    ------
    CircuitParseError
        If a line cannot be parsed, naming its line number.
    """
    variables: list[Variable] = []
    nodes: list[Node] = []
    comments: list[str] = []
    root: int | None = None
    root_line = 0
    lines = text.splitlines()
    if not lines or lines[0].strip() != CIRCUIT_HEADER:
        raise CircuitParseError(1, f"Expected header {CIRCUIT_HEADER!r}")
    for line_number, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line.lstrip("#").strip())
            continue

        def check_id(node_id: str) -> None:
            if int(node_id) != len(nodes):
                raise CircuitParseError(
                    line_number,
                    f"Node id {node_id} out of order; expected {len(nodes)}",
                )

        try:
            if match := VAR_REGEX.fullmatch(line):
                if int(match["id"]) != len(variables):
                    raise CircuitParseError(
                        line_number, f"Variable id {match['id']} out of order"
                    )
                variables.append(
                    Variable(int(match["id"]), int(match["arity"]), match["name"])
                )
            elif match := INDICATOR_REGEX.fullmatch(line):
                check_id(match["id"])
                nodes.append(LeafNode.indicator(int(match["var"]), int(match["value"])))
            elif match := CATEGORICAL_REGEX.fullmatch(line):
                check_id(match["id"])
                probs = _parse_floats(match["probs"], line_number)
                nodes.append(LeafNode.categorical(int(match["var"]), probs))
            elif match := PRODUCT_REGEX.fullmatch(line):
                check_id(match["id"])
                children = tuple(int(c) for c in match["children"].split())
                nodes.append(ProductNode(children))
            elif match := SUM_REGEX.fullmatch(line):
                check_id(match["id"])
                pairs = [edge.split(":", 1) for edge in match["edges"].split()]
                children = tuple(int(c) for c, _ in pairs)
                log_weights = _parse_floats(" ".join(w for _, w in pairs), line_number)
                nodes.append(SumNode(children, log_weights))
            elif match := ROOT_REGEX.fullmatch(line):
                root = int(match["id"])
                root_line = line_number
            else:
                raise CircuitParseError(line_number, f"Unrecognized line {line!r}")
        except CircuitParseError:
            raise
        except FairPCError as e:
            raise CircuitParseError(line_number, str(e))
    if root is None:
        raise CircuitParseError(len(lines), "Missing root line")
    try:
        circuit = Circuit(variables, nodes, root)
    except FairPCError as e:
        raise CircuitParseError(root_line, str(e))
    return circuit, comments


def save_circuit(
    path: str | pathlib.Path, circuit: Circuit, comments: Iterable[str] = ()
) -> None:
    """Write a circuit file (UTF-8)."""
    pathlib.Path(path).write_text(format_circuit(circuit, comments), encoding="utf-8")


def load_circuit(path: str | pathlib.Path) -> tuple[Circuit, list[str]]:
    """Read a circuit file; see `parse_circuit`."""
    return parse_circuit(pathlib.Path(path).read_text(encoding="utf-8"))
