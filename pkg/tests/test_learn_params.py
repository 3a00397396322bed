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

import unittest

import numpy as np
import pytest
from lsst.ts.fairpc import (
    MISSING,
    ConfigError,
    DataTable,
    EmConfig,
    FairSchema,
    IncompleteAssignmentError,
    InitMethod,
    LeafNode,
    Role,
    Schema,
    SumNode,
    build_lat_nb,
    build_two_nb,
    em_fit,
    em_step,
    initialize,
    mle_complete,
    sample,
)
from lsst.ts.fairpc.oracle import (
    A,
    B,
    random_circuit,
    random_variables,
    two_variable_circuit,
)


def parameters(circuit) -> list[np.ndarray]:
    params = []
    for node in circuit.nodes:
        if isinstance(node, SumNode):
            params.append(node.weights)
        elif isinstance(node, LeafNode) and not node.is_indicator:
            params.append(node.probs.copy())
    return params


def table_for(circuit, cells: np.ndarray) -> DataTable:
    names = [v.name for v in circuit.variables]
    arities = [v.arity for v in circuit.variables]
    return DataTable(Schema.from_arities(names, arities), cells)


def fair_table(num_rows: int, seed: int) -> DataTable:
    rng = np.random.default_rng(seed)
    schema = Schema.from_arities(
        ["S", "D", "X1", "X2"],
        [2, 2, 2, 3],
        {"S": Role.SENSITIVE, "D": Role.LABEL},
    )
    cells = np.column_stack(
        [
            rng.random(num_rows) < 0.3,
            rng.random(num_rows) < 0.6,
            rng.integers(0, 2, num_rows),
            rng.integers(0, 3, num_rows),
        ]
    ).astype(np.int64)
    return DataTable(schema, cells)


class MaximumLikelihoodTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.circuit = two_variable_circuit()
        self.table = table_for(self.circuit, sample(self.circuit, 2000, 1))

    def test_empirical_frequencies(self) -> None:
        mle_complete(self.circuit, self.table, alpha=0.0)
        cells = self.table.cells
        weights = self.circuit.nodes[self.circuit.root].weights
        assert weights[0] == pytest.approx(np.mean(cells[:, A] == 1))
        branch = self.circuit.nodes[self.circuit.nodes[self.circuit.root].children[0]]
        leaf = self.circuit.nodes[branch.children[1]]
        rows = cells[:, A] == 1
        assert leaf.probs[1] == pytest.approx(np.mean(cells[rows, B] == 1))

    def test_laplace_smoothing(self) -> None:
        cells = np.array([[1, 1], [1, 1], [1, 0]])
        mle_complete(self.circuit, table_for(self.circuit, cells), alpha=1.0)
        root = self.circuit.nodes[self.circuit.root]
        np.testing.assert_allclose(root.weights, [4 / 5, 1 / 5])
        branch = self.circuit.nodes[root.children[0]]
        np.testing.assert_allclose(
            self.circuit.nodes[branch.children[1]].probs, [2 / 5, 3 / 5]
        )

    def test_mle_is_one_em_step(self) -> None:
        other = self.circuit.copy()
        mle_complete(self.circuit, self.table, alpha=1.0)
        em_step(other, self.table, alpha=1.0)
        for mine, theirs in zip(parameters(self.circuit), parameters(other)):
            np.testing.assert_allclose(mine, theirs, atol=1e-12)

    def test_degenerate_node_keeps_parameters(self) -> None:
        cells = np.array([[1, 1], [1, 0]])
        degenerate = mle_complete(self.circuit, table_for(self.circuit, cells), 0.0)
        root = self.circuit.nodes[self.circuit.root]
        unused = self.circuit.nodes[root.children[1]].children[1]
        assert degenerate == [unused]
        np.testing.assert_allclose(self.circuit.nodes[unused].probs, [0.8, 0.2])
        np.testing.assert_allclose(root.weights, [1.0, 0.0])

    def test_missing_cell(self) -> None:
        cells = np.array([[1, MISSING]])
        with pytest.raises(IncompleteAssignmentError):
            mle_complete(self.circuit, table_for(self.circuit, cells))


def test_em_monotone_without_smoothing() -> None:
    rng = np.random.default_rng(40)
    for trial in range(10):
        variables = random_variables(5, rng, max_arity=3)
        circuit = random_circuit(variables, rng)
        cells = sample(circuit, 500, rng)
        cells[rng.random(cells.shape) < 0.3] = MISSING
        table = table_for(circuit, cells)
        config = EmConfig(max_iterations=30, laplace_alpha=0.0, seed=trial)
        trace = em_fit(circuit, table, InitMethod.RANDOM, config)
        steps = np.diff(trace.log_likelihoods)
        assert np.all(steps >= -1e-9), f"trial {trial}: {steps}"


def test_em_step_with_hidden_indicator() -> None:
    circuit = two_variable_circuit()
    cells = np.full((1, 2), MISSING)
    cells[0, B] = 1
    em_step(circuit, table_for(circuit, cells), alpha=0.0)
    root = circuit.nodes[circuit.root]
    # Pr(A=1 | B=1) = 0.42 / 0.5.
    np.testing.assert_allclose(root.weights, [0.84, 0.16])
    branch = circuit.nodes[root.children[0]]
    np.testing.assert_allclose(circuit.nodes[branch.children[1]].probs, [0.0, 1.0])


def test_em_complete_data_converges_immediately() -> None:
    circuit = two_variable_circuit()
    table = table_for(circuit, sample(circuit, 500, 2))
    trace = em_fit(circuit, table, InitMethod.RANDOM, EmConfig(seed=3))
    assert trace.converged_at == 2
    assert trace.iterations == 3
    assert trace.log_likelihoods[1] == trace.log_likelihoods[2]


def test_em_monitor_and_trace() -> None:
    circuit = two_variable_circuit()
    cells = sample(circuit, 300, 4)
    cells[::3, A] = MISSING
    table = table_for(circuit, cells)
    monitor = table_for(circuit, sample(circuit, 100, 5))
    trace = em_fit(circuit, table, InitMethod.KEEP, EmConfig(max_iterations=5), monitor)
    assert len(trace.monitor_log_likelihoods) == trace.iterations
    assert trace.iterations <= 5
    record = trace.to_dict()
    assert record["init"] == "keep"
    assert record["iterations"] == trace.iterations


def test_random_init_is_seeded() -> None:
    first = two_variable_circuit()
    second = two_variable_circuit()
    table = table_for(first, sample(first, 10, 6))
    initialize(first, table, InitMethod.RANDOM, EmConfig(seed=9))
    initialize(second, table, InitMethod.RANDOM, EmConfig(seed=9))
    for mine, theirs in zip(parameters(first), parameters(second)):
        assert np.array_equal(mine, theirs)
    assert not np.allclose(parameters(first)[-1], [0.6, 0.4])
    assert first.normalization_violations() == []


def test_tied_head_matches_frequencies() -> None:
    table = fair_table(1000, 7)
    circuit = build_two_nb(FairSchema.from_schema(table.schema))
    mle_complete(circuit, table, alpha=0.0)
    head = circuit.tied_groups[circuit.root]
    params = head.params(circuit)
    assert params.phi_s == pytest.approx(np.mean(table.cells[:, 0] == 1))
    assert params.phi_df == pytest.approx(np.mean(table.cells[:, 1] == 1))
    assert head.residual(circuit.nodes[circuit.root].weights) < 1e-12


def test_prior_init_of_latent_head() -> None:
    table = fair_table(1000, 8)
    table = table.with_schema(table.schema.with_latent("D_f"))
    circuit = build_lat_nb(FairSchema.from_schema(table.schema))
    initialize(circuit, table, InitMethod.PRIOR, EmConfig(prior_epsilon=0.1))
    params = circuit.tied_groups[circuit.root].params(circuit)
    assert params.phi_s == pytest.approx(np.mean(table.cells[:, 0] == 1))
    assert params.phi_df == pytest.approx(np.mean(table.cells[:, 1] == 1))
    assert params.d_mech == pytest.approx((0.9, 0.9, 0.1, 0.1))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(max_iterations=0),
        dict(ll_tolerance=0.0),
        dict(laplace_alpha=-1.0),
        dict(prior_epsilon=0.5),
    ],
)
def test_em_config_errors(kwargs: dict) -> None:
    with pytest.raises(ConfigError):
        EmConfig(**kwargs)
