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


__all__ = ["random_variables", "random_circuit", "random_evidence"]

from collections.abc import Sequence

import numpy as np

from ..circuit import Circuit, CircuitBuilder, Variable
from ..utils import random_simplex


def random_variables(
    count: int, rng: np.random.Generator, max_arity: int = 2
) -> list[Variable]:
    """Variables V0..V{count-1} with arities drawn from [2, max_arity]."""
    return [
        Variable(i, int(rng.integers(2, max_arity + 1)), f"V{i}") for i in range(count)
    ]


class _RandomCircuitBuilder:
    def __init__(
        self,
        variables: Sequence[Variable],
        rng: np.random.Generator,
        share_probability: float,
        zero_weight_probability: float,
    ) -> None:
        self.builder = CircuitBuilder(variables)
        self.variables = list(variables)
        self.rng = rng
        self.share_probability = share_probability
        self.zero_weight_probability = zero_weight_probability
        self.by_scope: dict[frozenset[int], int] = {}

    def weights(self, size: int) -> np.ndarray:
        weights = random_simplex(self.rng, size)
        if size > 1 and self.rng.random() < self.zero_weight_probability:
            weights[self.rng.integers(size)] = 0.0
            weights /= weights.sum()
        return weights

    def node(self, scope: list[int]) -> int:
        key = frozenset(scope)
        if key in self.by_scope and self.rng.random() < self.share_probability:
            return self.by_scope[key]
        if len(scope) == 1:
            index = self.leaf(scope[0])
        else:
            index = self.split(scope)
        self.by_scope[key] = index
        return index

    def leaf(self, var_id: int) -> int:
        arity = self.variables[var_id].arity
        if self.rng.random() < 0.5:
            return self.builder.categorical(var_id, self.weights(arity))
        children = [self.builder.indicator(var_id, value) for value in range(arity)]
        return self.builder.sum(children, self.weights(arity))

    def split(self, scope: list[int]) -> int:
        order = list(self.rng.permutation(scope))
        var_id = int(order.pop())
        arity = self.variables[var_id].arity
        children = []
        for value in range(arity):
            factors = [self.builder.indicator(var_id, value)]
            for part in self.partition(order):
                factors.append(self.node(part))
            children.append(self.builder.product(factors))
        return self.builder.sum(children, self.weights(arity))

    def partition(self, scope: list[int]) -> list[list[int]]:
        if len(scope) <= 1:
            return [sorted(scope)] if scope else []
        parts = int(self.rng.integers(1, min(3, len(scope)) + 1))
        labels = self.rng.integers(0, parts, size=len(scope))
        groups = [
            sorted(int(v) for v, k in zip(scope, labels) if k == p) for p in range(parts)
        ]
        return [g for g in groups if g]


def random_circuit(
    variables: Sequence[Variable],
    seed: int | np.random.Generator | None,
    scope: Sequence[int] | None = None,
    share_probability: float = 0.3,
    zero_weight_probability: float = 0.0,
) -> Circuit:
    """Random smooth, decomposable and deterministic circuit.

    Every inner sum node branches on the values of one variable, each
    branch holding the variable's indicator next to random sub-circuits
    over a random partition of the remaining scope. Sub-circuits over an
    equal scope are sometimes shared, making the circuit a DAG.

    Parameters
    ----------
    variables : `list` [`Variable`]
        All variables.
    seed : `int` or `numpy.random.Generator`
        Seed or generator.
    scope : `list` [`int`], optional
        Variables covered; default all.
    share_probability : `float`
        Chance of reusing an earlier sub-circuit of the same scope.
    zero_weight_probability : `float`
        Chance of zeroing one weight of a sum node.
    """
    rng = np.random.default_rng(seed)
    scope = sorted(range(len(variables)) if scope is None else scope)
    generator = _RandomCircuitBuilder(
        variables, rng, share_probability, zero_weight_probability
    )
    return generator.builder.build(generator.node(scope))


def random_evidence(
    circuit: Circuit,
    rng: np.random.Generator,
    observe_probability: float = 0.5,
) -> dict[int, int]:
    """Random partial assignment of the circuit's scope."""
    return {
        v: int(rng.integers(circuit.variables[v].arity))
        for v in sorted(circuit.scope)
        if rng.random() < observe_probability
    }
