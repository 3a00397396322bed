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

import itertools
import unittest

import numpy as np
import pytest
from lsst.ts.fairpc import (
    Circuit,
    CircuitBuilder,
    ConditioningOnNullError,
    IncompleteAssignmentError,
    LeafNode,
    PartialAssignment,
    ProductNode,
    SchemaError,
    StructuralError,
    SumNode,
    UnsupportedQueryError,
    UnverifiableError,
    Variable,
    check_decomposable,
    check_deterministic,
    check_smooth,
    conditional,
    evaluate_complete,
    evaluate_marginal,
    sample,
)
from lsst.ts.fairpc.oracle import (
    A,
    B,
    brute_conditional,
    brute_marginal,
    joint_table,
    random_circuit,
    random_evidence,
    random_variables,
    two_variable_circuit,
)

NUM_RANDOM_CIRCUITS = 100


class TwoVariableCircuitTestCase(unittest.TestCase):
    def setUp(self) -> None:
        self.circuit = two_variable_circuit()

    def test_evaluate_complete(self) -> None:
        assert evaluate_complete(self.circuit, {A: 1, B: 1}) == pytest.approx(0.42)
        assert evaluate_complete(self.circuit, {A: 0, B: 1}) == pytest.approx(0.08)
        assert evaluate_complete(self.circuit, {A: 0, B: 0}) == pytest.approx(0.32)

    def test_evaluate_complete_incomplete(self) -> None:
        with pytest.raises(IncompleteAssignmentError):
            evaluate_complete(self.circuit, {A: 1})

    def test_evaluate_marginal(self) -> None:
        assert evaluate_marginal(self.circuit, {A: 1}) == pytest.approx(0.6)
        assert evaluate_marginal(self.circuit, {B: 1}) == pytest.approx(0.5)
        assert evaluate_marginal(self.circuit, {}) == pytest.approx(1.0)

    def test_conditional(self) -> None:
        assert conditional(self.circuit, {B: 1}, {A: 1}) == pytest.approx(0.7)
        assert conditional(self.circuit, {A: 1}, {B: 1}) == pytest.approx(0.84)

    def test_conditional_conflict(self) -> None:
        assert conditional(self.circuit, {A: 0}, {A: 1}) == 0.0

    def test_conditional_on_null(self) -> None:
        self.circuit.set_sum_weights(self.circuit.root, [1.0, 0.0])
        with pytest.raises(ConditioningOnNullError):
            conditional(self.circuit, {B: 1}, {A: 0})

    def test_value_out_of_range(self) -> None:
        with pytest.raises(SchemaError):
            evaluate_marginal(self.circuit, {A: 2})

    def test_structural_checks(self) -> None:
        assert check_smooth(self.circuit)
        assert check_decomposable(self.circuit)
        assert check_deterministic(self.circuit)
        assert self.circuit.normalization_violations() == []

    def test_sample(self) -> None:
        samples = sample(self.circuit, 100000, 5)
        assert samples.shape == (100000, 2)
        assert np.mean(samples[:, A] == 1) == pytest.approx(0.6, abs=0.01)
        # B is 1 with Pr 0.7 whenever A is 1.
        rows = samples[:, A] == 1
        assert np.mean(samples[rows, B] == 1) == pytest.approx(0.7, abs=0.01)

    def test_sample_deterministic(self) -> None:
        assert np.array_equal(sample(self.circuit, 50, 3), sample(self.circuit, 50, 3))


def test_partial_assignment_union() -> None:
    e = PartialAssignment({0: 1})
    assert dict(e.union({1: 0})) == {0: 1, 1: 0}
    assert e.union({0: 0}) is None


def test_builder_shares_indicators() -> None:
    builder = CircuitBuilder([Variable(0, 2, "A")])
    assert builder.indicator(0, 1) == builder.indicator(0, 1)
    assert builder.indicator(0, 0) != builder.indicator(0, 1)


def test_build_drops_unreachable() -> None:
    builder = CircuitBuilder([Variable(0, 2, "A")])
    builder.categorical(0, [0.5, 0.5])
    leaf = builder.categorical(0, [0.2, 0.8])
    circuit = builder.build(leaf)
    assert circuit.num_nodes == 1
    assert evaluate_complete(circuit, {0: 1}) == pytest.approx(0.8)


def test_invalid_structures() -> None:
    variables = [Variable(0, 2, "A"), Variable(1, 2, "B")]
    with pytest.raises(StructuralError):
        Circuit(variables, [LeafNode.indicator(0, 1), ProductNode((0,))], 1)
    with pytest.raises(StructuralError):
        Circuit(variables, [LeafNode.categorical(0, [1.0])], 0)
    with pytest.raises(StructuralError):
        # Child after parent.
        Circuit(
            variables,
            [SumNode((1,), np.zeros(1)), LeafNode.indicator(0, 0)],
            0,
        )
    with pytest.raises(SchemaError):
        Variable(0, 1, "constant")


def test_non_smooth_rejects_marginals() -> None:
    variables = [Variable(0, 2, "A"), Variable(1, 2, "B")]
    builder = CircuitBuilder(variables)
    left = builder.product([builder.indicator(0, 1), builder.indicator(1, 1)])
    right = builder.indicator(0, 0)
    circuit = builder.build(builder.sum([left, right], [0.5, 0.5]))
    assert not check_smooth(circuit)
    with pytest.raises(UnsupportedQueryError):
        evaluate_marginal(circuit, {0: 1})


def test_non_decomposable() -> None:
    variables = [Variable(0, 2, "A")]
    builder = CircuitBuilder(variables)
    root = builder.product([builder.indicator(0, 1), builder.categorical(0, [0.5, 0.5])])
    circuit = builder.build(root)
    assert not check_decomposable(circuit)


def test_non_deterministic() -> None:
    variables = [Variable(0, 2, "A")]
    builder = CircuitBuilder(variables)
    first = builder.categorical(0, [0.5, 0.5])
    second = builder.categorical(0, [0.1, 0.9])
    circuit = builder.build(builder.sum([first, second], [0.5, 0.5]))
    assert check_smooth(circuit)
    assert not check_deterministic(circuit)


def test_deterministic_by_enumeration() -> None:
    # Children fix no variable, but only one of them is ever nonzero.
    variables = [Variable(0, 2, "A")]
    builder = CircuitBuilder(variables)
    first = builder.categorical(0, [1.0, 0.0])
    second = builder.categorical(0, [0.0, 1.0])
    circuit = builder.build(builder.sum([first, second], [0.3, 0.7]))
    assert not circuit.structurally_deterministic(circuit.root)
    assert check_deterministic(circuit)


def test_unverifiable_determinism() -> None:
    # 21 binary variables under a sum whose children fix none of them.
    variables = [Variable(i, 2, f"V{i}") for i in range(21)]
    builder = CircuitBuilder(variables)
    children = [
        builder.product([builder.categorical(v.id, [p, 1.0 - p]) for v in variables])
        for p in (0.2, 0.7)
    ]
    circuit = builder.build(builder.sum(children, [0.5, 0.5]))
    assert check_smooth(circuit)
    assert check_decomposable(circuit)
    with pytest.raises(UnverifiableError):
        check_deterministic(circuit)
    with pytest.raises(UnverifiableError):
        circuit.require_flows()


def test_random_circuits_match_enumeration() -> None:
    rng = np.random.default_rng(12)
    for trial in range(NUM_RANDOM_CIRCUITS):
        variables = random_variables(int(rng.integers(1, 9)), rng)
        circuit = random_circuit(variables, rng)
        assert check_smooth(circuit), f"trial {trial}"
        assert check_decomposable(circuit), f"trial {trial}"
        assert check_deterministic(circuit), f"trial {trial}"
        _, probabilities = joint_table(circuit)
        assert probabilities.sum() == pytest.approx(1.0, abs=1e-9)
        e = random_evidence(circuit, rng)
        assert evaluate_marginal(circuit, e) == pytest.approx(
            brute_marginal(circuit, e), abs=1e-9
        ), f"trial {trial}"
        q = random_evidence(circuit, rng)
        if brute_marginal(circuit, e) > 0:
            assert conditional(circuit, q, e) == pytest.approx(
                brute_conditional(circuit, q, e), abs=1e-9
            ), f"trial {trial}"


def test_twelve_variable_circuit() -> None:
    variables = [Variable(i, 2, f"V{i}") for i in range(12)]
    circuit = random_circuit(variables, 3)
    cells, probabilities = joint_table(circuit)
    assert probabilities.sum() == pytest.approx(1.0, abs=1e-9)
    rng = np.random.default_rng(4)
    for _ in range(5):
        e = random_evidence(circuit, rng, 0.3)
        assert evaluate_marginal(circuit, e) == pytest.approx(
            brute_marginal(circuit, e), abs=1e-9
        )


def test_marginal_monotone() -> None:
    rng = np.random.default_rng(8)
    for _ in range(20):
        variables = random_variables(5, rng, max_arity=3)
        circuit = random_circuit(variables, rng)
        e: dict[int, int] = {}
        previous = evaluate_marginal(circuit, e)
        for v in rng.permutation(len(variables)):
            e[int(v)] = int(rng.integers(variables[v].arity))
            current = evaluate_marginal(circuit, e)
            assert current <= previous + 1e-12
            previous = current


def test_log_space_underflow() -> None:
    # A product of 60 leaves of probability 1e-8 is 1e-480 in linear space.
    variables = [Variable(i, 2, f"V{i}") for i in range(60)]
    builder = CircuitBuilder(variables)
    root = builder.product(
        builder.categorical(i, [1.0 - 1e-8, 1e-8]) for i in range(60)
    )
    circuit = builder.build(root)
    row = np.ones((1, 60), dtype=np.int64)
    assert circuit.log_likelihoods(row)[0] == pytest.approx(60 * np.log(1e-8))


def test_sample_matches_marginals() -> None:
    rng = np.random.default_rng(2)
    variables = random_variables(4, rng)
    circuit = random_circuit(variables, rng)
    samples = sample(circuit, 100000, rng)
    for v, value in itertools.product(range(4), range(2)):
        expected = evaluate_marginal(circuit, {v: value})
        assert np.mean(samples[:, v] == value) == pytest.approx(expected, abs=0.01)
