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


__all__ = ["joint_table", "brute_marginal", "brute_conditional", "completions"]

from collections.abc import Iterator, Mapping

import numpy as np

from ..circuit import Circuit, PartialAssignment, enumerate_assignments

# Enumeration is meant for small scopes only.
MAX_ORACLE_ASSIGNMENTS = 2**16


def _check_size(circuit: Circuit, scope: list[int]) -> None:
    size = int(np.prod([circuit.variables[v].arity for v in scope], dtype=np.int64))
    if size > MAX_ORACLE_ASSIGNMENTS:
        raise ValueError(f"Scope of {len(scope)} variables is too large to enumerate")


def completions(circuit: Circuit, e: Mapping[int, int]) -> Iterator[dict[int, int]]:
    """Yield every complete assignment of the circuit's scope that agrees
    with ``e``."""
    scope = sorted(circuit.scope)
    free = [v for v in scope if v not in e]
    _check_size(circuit, free)
    fixed = {v: int(e[v]) for v in scope if v in e}
    for cells in enumerate_assignments(circuit.variables, free, MAX_ORACLE_ASSIGNMENTS):
        for row in cells:
            z = dict(fixed)
            z.update({v: int(row[v]) for v in free})
            yield z


def joint_table(circuit: Circuit) -> tuple[np.ndarray, np.ndarray]:
    """Probability of every complete assignment of the circuit's scope.

    Returns
    -------
    cells : `numpy.ndarray`
        One row per assignment; variables outside the scope are missing.
    probabilities : `numpy.ndarray`
        Probability of each row.
    """
    scope = sorted(circuit.scope)
    _check_size(circuit, scope)
    cells = np.concatenate(
        list(enumerate_assignments(circuit.variables, scope, MAX_ORACLE_ASSIGNMENTS))
    )
    probabilities = np.exp(circuit.log_values(cells)[circuit.root])
    return cells, probabilities


def brute_marginal(circuit: Circuit, e: Mapping[int, int]) -> float:
    """Pr(e) as the sum of the probabilities of its completions."""
    cells, probabilities = joint_table(circuit)
    agree = np.ones(len(cells), dtype=bool)
    for var_id, value in e.items():
        if var_id in circuit.scope:
            agree &= cells[:, var_id] == value
    return float(probabilities[agree].sum())


def brute_conditional(
    circuit: Circuit, q: Mapping[int, int], e: Mapping[int, int]
) -> float:
    """Pr(q | e) by enumeration; 0 when q and e disagree."""
    joint = PartialAssignment(q).union(e)
    if joint is None:
        return 0.0
    return brute_marginal(circuit, joint) / brute_marginal(circuit, e)
