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
    "FlowTable",
    "ExpectedFlowTable",
    "circuit_flow",
    "expected_flow",
    "aggregate_flows",
    "flows_for_cells",
    "check_schema",
    "DEFAULT_CHUNK_SIZE",
]

import concurrent.futures
import copy
import os
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, LeafNode, PartialAssignment, ProductNode, Variable
from .dataset import DataTable
from .errors import (
    ConditioningOnNullError,
    IncompleteAssignmentError,
    RowImpossibleError,
    SchemaError,
)
from .utils import chunk_slices, pairwise_sum

# Rows evaluated together; bounds the (nodes x rows) scratch buffers.
DEFAULT_CHUNK_SIZE = 4096


@dataclass
class FlowTable:
    """Per-edge flow accumulators of a circuit.

    Attributes
    ----------
    edge_flows : `list` [`numpy.ndarray`]
        For every node, the flow of each child edge, in child order
        (empty for leaves).
    node_flows : `numpy.ndarray`
        Flow into every node (summed over its parents; the root receives
        the total row weight).
    leaf_counts : `dict` [`int`, `numpy.ndarray`]
        For every categorical leaf, the (expected) count of each value
        among the rows that reach it.
    total_weight : `float`
        Sum of the weights of the rows covered.
    log_likelihood : `float`
        Sum over the rows covered of weight times log marginal probability.
    """

    edge_flows: list[np.ndarray]
    node_flows: np.ndarray
    leaf_counts: dict[int, np.ndarray]
    total_weight: float = 0.0
    log_likelihood: float = 0.0

    @classmethod
    def zeros(cls, circuit: Circuit) -> "FlowTable":
        return cls(
            edge_flows=[np.zeros(len(node.children)) for node in circuit.nodes],
            node_flows=np.zeros(circuit.num_nodes),
            leaf_counts={
                i: np.zeros(node.probs.size)
                for i, node in enumerate(circuit.nodes)
                if isinstance(node, LeafNode) and not node.is_indicator
            },
        )

    def edge(self, node: int, ordinal: int) -> float:
        """Flow of edge (node, ordinal)."""
        return float(self.edge_flows[node][ordinal])

    def __add__(self, other: "FlowTable") -> "FlowTable":
        result = copy.deepcopy(self)
        for mine, theirs in zip(result.edge_flows, other.edge_flows):
            mine += theirs
        result.node_flows += other.node_flows
        for index, counts in other.leaf_counts.items():
            result.leaf_counts[index] += counts
        result.total_weight += other.total_weight
        result.log_likelihood += other.log_likelihood
        return result

    def scaled(self, factor: float) -> "FlowTable":
        result = copy.deepcopy(self)
        for flows in result.edge_flows:
            flows *= factor
        result.node_flows *= factor
        for counts in result.leaf_counts.values():
            counts *= factor
        result.total_weight *= factor
        result.log_likelihood *= factor
        return result


class ExpectedFlowTable(FlowTable):
    """Flow table whose entries are posterior expectations over the
    completions of partially observed rows."""


def _chunk_flows(
    circuit: Circuit,
    cells: np.ndarray,
    weights: np.ndarray,
    row_offset: int,
) -> ExpectedFlowTable:
    """Bottom-up then top-down pass over one chunk of rows."""
    table = ExpectedFlowTable.zeros(circuit)
    if cells.shape[0] == 0:
        return table
    values = circuit.log_values(cells)
    root_values = values[circuit.root]
    impossible = np.flatnonzero(~np.isfinite(root_values))
    if impossible.size:
        raise RowImpossibleError(row_offset + int(impossible[0]))
    scope = sorted(circuit.scope)
    complete = np.all(cells[:, scope] >= 0, axis=1)

    flow = np.zeros_like(values)
    flow[circuit.root] = 1.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for i in range(circuit.num_nodes - 1, -1, -1):
            incoming = flow[i]
            weighted = weights * incoming
            table.node_flows[i] = weighted.sum()
            if not incoming.any():
                continue
            node = circuit.nodes[i]
            if isinstance(node, LeafNode):
                if node.is_indicator:
                    continue
                column = cells[:, node.variable]
                observed = column >= 0
                counts = np.bincount(
                    column[observed], weights=weighted[observed], minlength=node.probs.size
                )
                counts += weighted[~observed].sum() * node.probs
                table.leaf_counts[i] += counts
                continue
            children = list(node.children)
            if isinstance(node, ProductNode):
                contribution = np.broadcast_to(incoming, (len(children), incoming.size))
            else:
                child_values = values[children]
                active = np.isfinite(child_values)
                ratio = np.exp(
                    node.log_weights[:, np.newaxis] + child_values - values[i]
                )
                ratio = np.where(active, ratio, 0.0)
                # A complete row activates exactly one child of a
                # deterministic sum node.
                ratio = np.where(complete, active.astype(float), ratio)
                contribution = np.where(incoming > 0, ratio * incoming, 0.0)
            np.add.at(flow, children, contribution)
            table.edge_flows[i] += contribution @ weights
    table.total_weight = float(weights.sum())
    table.log_likelihood = float(weights @ root_values)
    return table


def flows_for_cells(
    circuit: Circuit,
    cells: np.ndarray,
    weights: np.ndarray | None = None,
    threads: int | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ExpectedFlowTable:
    """Aggregate expected flows over raw data rows.

    Rows are processed in fixed chunks, optionally by a thread pool, and
    the per-chunk tables are combined by a balanced pairwise reduction.
    The result does not depend on the number of threads.

    Parameters
    ----------
    circuit : `Circuit`
        A smooth, decomposable, deterministic circuit.
    cells : `numpy.ndarray`
        Integer array (rows, variables), `MISSING` for unobserved cells.
    weights : `numpy.ndarray`, optional
        Row weights; default 1.
    threads : `int`, optional
        Worker threads; default is the available parallelism.
    chunk_size : `int`
        Rows per chunk.

    Raises
    ------
    UnsupportedQueryError
        If the circuit is not deterministic.
    RowImpossibleError
        If a row has zero probability.
    """
    circuit.require_flows()
    cells = np.atleast_2d(cells)
    if weights is None:
        weights = np.ones(cells.shape[0])
    slices = chunk_slices(cells.shape[0], chunk_size)
    if not slices:
        return ExpectedFlowTable.zeros(circuit)
    if threads is None:
        threads = os.cpu_count() or 1

    def work(rows: slice) -> ExpectedFlowTable:
        return _chunk_flows(circuit, cells[rows], weights[rows], rows.start)

    if threads <= 1 or len(slices) == 1:
        tables = [work(rows) for rows in slices]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            tables = list(pool.map(work, slices))
    return pairwise_sum(tables, lambda a, b: a + b)


def circuit_flow(circuit: Circuit, x: Mapping[int, int]) -> FlowTable:
    """Flows of a single complete sample: edge (n, c) is 1 iff the sample
    activates both n and c.

    Raises
    ------
    IncompleteAssignmentError
        If ``x`` does not assign every variable of the circuit's scope.
    UnsupportedQueryError
        If the circuit is not deterministic.
    """
    missing = sorted(circuit.scope - set(x))
    if missing:
        raise IncompleteAssignmentError(
            f"No value for variables {[circuit.variables[v].name for v in missing]}"
        )
    table = expected_flow(circuit, x)
    return FlowTable(
        edge_flows=table.edge_flows,
        node_flows=table.node_flows,
        leaf_counts=table.leaf_counts,
        total_weight=table.total_weight,
        log_likelihood=table.log_likelihood,
    )


def expected_flow(circuit: Circuit, e: Mapping[int, int]) -> ExpectedFlowTable:
    """Expected flows of a single, possibly partial, sample.

    Raises
    ------
    ConditioningOnNullError
        If the sample has probability zero.
    UnsupportedQueryError
        If the circuit is not deterministic.
    """
    row = PartialAssignment(e).as_row(circuit.variables)
    try:
        return flows_for_cells(circuit, row[np.newaxis, :], threads=1)
    except RowImpossibleError:
        raise ConditioningOnNullError(f"Evidence {dict(e)} has probability zero")


def check_schema(variables: Sequence[Variable], table: DataTable) -> None:
    """Raise `SchemaError` unless the table's columns match ``variables``."""
    theirs = [(v.name, v.arity) for v in table.schema.variables]
    mine = [(v.name, v.arity) for v in variables]
    if theirs != mine:
        raise SchemaError(
            f"Data columns {theirs} do not match circuit variables {mine}"
        )


def aggregate_flows(
    circuit: Circuit,
    data: DataTable,
    threads: int | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ExpectedFlowTable:
    """Weighted sum of per-row expected flows over a data table.

    Raises
    ------
    SchemaError
        If the table's columns do not match the circuit's variables.
    RowImpossibleError
        If a row has zero probability.
    """
    check_schema(circuit.variables, data)
    return flows_for_cells(
        circuit, data.cells, data.weights, threads=threads, chunk_size=chunk_size
    )
