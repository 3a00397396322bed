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


__all__ = ["CompletionOracle"]

from collections.abc import Mapping

import numpy as np

from ..circuit import Circuit, LeafNode, PartialAssignment
from ..flows import ExpectedFlowTable, FlowTable
from .enumeration import completions


class CompletionOracle:
    """Expected flows by explicit enumeration of the completions of a
    partial sample.

    Every completion ``z`` of ``e`` is weighted by Pr(z | e), and its
    flows are read off the node contexts: ``z`` is in the context of the
    root when the root is nonzero on ``z``, and in the context of a
    child when it is in the context of some parent and the child is
    nonzero on ``z``. Edge (n, c) flows iff ``z`` is in both contexts.

    Parameters
    ----------
    circuit : `Circuit`
        A small circuit.
    e : `dict` [`int`, `int`]
        Observed values.

    Raises
    ------
    ZeroDivisionError
        If Pr(e) is zero.
    """

    def __init__(self, circuit: Circuit, e: Mapping[int, int]) -> None:
        self.circuit = circuit
        self.evidence = PartialAssignment(e)
        self.completions = list(completions(circuit, e))
        rows = np.array(
            [PartialAssignment(z).as_row(circuit.variables) for z in self.completions]
        )
        probabilities = np.exp(circuit.log_values(rows)[circuit.root])
        total = probabilities.sum()
        if total <= 0:
            raise ZeroDivisionError(f"Evidence {dict(e)} has probability zero")
        self.weights = probabilities / total

    def contexts(self, z: Mapping[int, int]) -> np.ndarray:
        """Boolean mask of the nodes whose context contains ``z``."""
        row = PartialAssignment(z).as_row(self.circuit.variables)
        values = self.circuit.log_values(row)[:, 0]
        nonzero = np.isfinite(values)
        active = np.zeros(self.circuit.num_nodes, dtype=bool)
        active[self.circuit.root] = nonzero[self.circuit.root]
        for i in range(self.circuit.num_nodes - 1, -1, -1):
            if active[i]:
                for child in self.circuit.nodes[i].children:
                    active[child] |= nonzero[child]
        return active

    def flows_of(self, z: Mapping[int, int]) -> FlowTable:
        """Flows of one complete assignment."""
        table = FlowTable.zeros(self.circuit)
        active = self.contexts(z)
        for i, node in enumerate(self.circuit.nodes):
            if not active[i]:
                continue
            table.node_flows[i] = 1.0
            for ordinal, child in enumerate(node.children):
                table.edge_flows[i][ordinal] = float(active[child])
            if isinstance(node, LeafNode) and not node.is_indicator:
                table.leaf_counts[i][z[node.variable]] = 1.0
        table.total_weight = 1.0
        return table

    def expected_flows(self) -> ExpectedFlowTable:
        """Posterior-weighted sum of the flows of all completions."""
        result = ExpectedFlowTable.zeros(self.circuit)
        for z, weight in zip(self.completions, self.weights):
            result = result + self.flows_of(z).scaled(float(weight))
        return result
