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

import numpy as np
import pytest
from lsst.ts.fairpc import (
    MISSING,
    CircuitBuilder,
    ConditioningOnNullError,
    DataTable,
    IncompleteAssignmentError,
    RowImpossibleError,
    Schema,
    SchemaError,
    UnsupportedQueryError,
    Variable,
    aggregate_flows,
    circuit_flow,
    expected_flow,
    flows_for_cells,
    sample,
)
from lsst.ts.fairpc.oracle import (
    A,
    B,
    CompletionOracle,
    brute_marginal,
    random_circuit,
    random_evidence,
    random_variables,
    two_variable_circuit,
)

NUM_RANDOM_CIRCUITS = 100


def two_variable_table(rows: list[list[int]]) -> DataTable:
    return DataTable(Schema.from_arities(["A", "B"], [2, 2]), np.array(rows))


def assert_flows_close(actual, expected) -> None:
    for mine, theirs in zip(actual.edge_flows, expected.edge_flows):
        np.testing.assert_allclose(mine, theirs, atol=1e-9)
    assert actual.leaf_counts.keys() == expected.leaf_counts.keys()
    for index, counts in expected.leaf_counts.items():
        np.testing.assert_allclose(actual.leaf_counts[index], counts, atol=1e-9)


class TestTwoVariableFlows:
    def setup_method(self) -> None:
        self.circuit = two_variable_circuit()
        self.root = self.circuit.root

    def test_complete_sample(self) -> None:
        flows = circuit_flow(self.circuit, {A: 1, B: 1})
        assert flows.edge(self.root, 0) == 1.0
        assert flows.edge(self.root, 1) == 0.0
        assert flows.total_weight == 1.0
        assert flows.log_likelihood == pytest.approx(np.log(0.42))

    def test_partial_sample(self) -> None:
        flows = expected_flow(self.circuit, {B: 1})
        assert flows.edge(self.root, 0) == pytest.approx(0.84)
        assert flows.edge(self.root, 1) == pytest.approx(0.16)

    def test_empty_evidence(self) -> None:
        flows = expected_flow(self.circuit, {})
        assert flows.edge(self.root, 0) == pytest.approx(0.6)
        assert flows.edge(self.root, 1) == pytest.approx(0.4)
        assert flows.log_likelihood == pytest.approx(0.0, abs=1e-12)

    def test_leaf_counts(self) -> None:
        flows = expected_flow(self.circuit, {A: 1})
        leaf = self.circuit.nodes[self.root].children[0]
        categorical = self.circuit.nodes[leaf].children[1]
        # B unobserved: the count is spread by the leaf's own distribution.
        np.testing.assert_allclose(flows.leaf_counts[categorical], [0.3, 0.7])

    def test_aggregate_is_sum_of_rows(self) -> None:
        rows = [[1, 1], [0, MISSING], [MISSING, 1], [MISSING, MISSING], [0, 0]]
        table = two_variable_table(rows)
        total = aggregate_flows(self.circuit, table)
        by_row = [
            expected_flow(
                self.circuit, {v: value for v, value in enumerate(row) if value >= 0}
            )
            for row in rows
        ]
        expected = by_row[0]
        for flows in by_row[1:]:
            expected = expected + flows
        assert_flows_close(total, expected)
        np.testing.assert_allclose(total.node_flows, expected.node_flows)
        assert total.total_weight == 5.0

    def test_row_weights(self) -> None:
        table = DataTable(
            Schema.from_arities(["A", "B"], [2, 2]),
            np.array([[MISSING, 1]]),
            np.array([2.5]),
        )
        flows = aggregate_flows(self.circuit, table)
        assert flows.edge(self.root, 0) == pytest.approx(2.5 * 0.84)
        assert flows.total_weight == 2.5

    def test_empty_table(self) -> None:
        flows = aggregate_flows(self.circuit, two_variable_table([]))
        assert all(not np.any(edges) for edges in flows.edge_flows)
        assert flows.total_weight == 0.0

    def test_errors(self) -> None:
        with pytest.raises(IncompleteAssignmentError):
            circuit_flow(self.circuit, {A: 1})
        self.circuit.set_sum_weights(self.root, [1.0, 0.0])
        with pytest.raises(ConditioningOnNullError):
            expected_flow(self.circuit, {A: 0})
        with pytest.raises(RowImpossibleError) as info:
            aggregate_flows(self.circuit, two_variable_table([[1, 1], [0, 1]]))
        assert info.value.row_index == 1
        other_schema = Schema.from_arities(["A", "C"], [2, 2])
        with pytest.raises(SchemaError):
            aggregate_flows(self.circuit, DataTable(other_schema, np.zeros((1, 2))))


def test_non_deterministic_circuit() -> None:
    builder = CircuitBuilder([Variable(0, 2, "A")])
    first = builder.categorical(0, [0.5, 0.5])
    second = builder.categorical(0, [0.1, 0.9])
    circuit = builder.build(builder.sum([first, second], [0.5, 0.5]))
    with pytest.raises(UnsupportedQueryError):
        expected_flow(circuit, {0: 1})


def test_random_circuits_match_completion_oracle() -> None:
    rng = np.random.default_rng(30)
    checked = 0
    while checked < NUM_RANDOM_CIRCUITS:
        variables = random_variables(int(rng.integers(1, 7)), rng, max_arity=3)
        circuit = random_circuit(variables, rng, zero_weight_probability=0.2)
        e = random_evidence(circuit, rng)
        if brute_marginal(circuit, e) <= 0:
            continue
        oracle = CompletionOracle(circuit, e)
        assert_flows_close(expected_flow(circuit, e), oracle.expected_flows())
        checked += 1


def test_complete_rows_match_circuit_flow() -> None:
    rng = np.random.default_rng(31)
    variables = random_variables(6, rng)
    circuit = random_circuit(variables, rng)
    for row in sample(circuit, 20, rng):
        x = {v: int(value) for v, value in enumerate(row)}
        flows = circuit_flow(circuit, x)
        for edges in flows.edge_flows:
            assert set(edges.tolist()) <= {0.0, 1.0}
        assert_flows_close(flows, CompletionOracle(circuit, x).expected_flows())


def test_threads_do_not_change_result() -> None:
    rng = np.random.default_rng(32)
    variables = random_variables(6, rng)
    circuit = random_circuit(variables, rng)
    cells = sample(circuit, 1000, rng)
    cells[rng.random(cells.shape) < 0.3] = MISSING
    serial = flows_for_cells(circuit, cells, threads=1, chunk_size=64)
    parallel = flows_for_cells(circuit, cells, threads=4, chunk_size=64)
    for mine, theirs in zip(serial.edge_flows, parallel.edge_flows):
        assert np.array_equal(mine, theirs)
    assert serial.log_likelihood == parallel.log_likelihood


def test_log_likelihood_matches_marginals() -> None:
    rng = np.random.default_rng(33)
    variables = random_variables(4, rng)
    circuit = random_circuit(variables, rng)
    cells = sample(circuit, 50, rng)
    cells[rng.random(cells.shape) < 0.4] = MISSING
    flows = flows_for_cells(circuit, cells)
    expected = sum(
        np.log(brute_marginal(circuit, {v: int(x) for v, x in enumerate(row) if x >= 0}))
        for row in cells
    )
    assert flows.log_likelihood == pytest.approx(expected)
