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
    "EmConfig",
    "EmTrace",
    "apply_flows",
    "mle_complete",
    "em_step",
    "em_fit",
    "initialize",
]

import logging
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, LeafNode, SumNode
from .dataset import DataTable
from .enums import InitMethod
from .errors import ConfigError, IncompleteAssignmentError
from .flows import FlowTable, aggregate_flows, check_schema
from .utils import MISSING, laplace_normalize, random_simplex

_log = logging.getLogger(__name__)


@dataclass
class EmConfig:
    """Settings of expectation maximization.

    Parameters
    ----------
    max_iterations : `int`
        Upper bound on EM iterations.
    ll_tolerance : `float`
        Stop when the relative log-likelihood improvement is at most this.
    laplace_alpha : `float`
        Pseudocount added to every flow count.
    seed : `int`
        Seed of random initialization.
    prior_epsilon : `float`
        Softening of the prior-knowledge label mechanism.
    """

    max_iterations: int = 500
    ll_tolerance: float = 1e-6
    laplace_alpha: float = 1.0
    seed: int = 0
    prior_epsilon: float = 0.1

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations={self.max_iterations} must be >= 1")
        if self.ll_tolerance <= 0:
            raise ConfigError(f"ll_tolerance={self.ll_tolerance} must be > 0")
        if self.laplace_alpha < 0:
            raise ConfigError(f"laplace_alpha={self.laplace_alpha} must be >= 0")
        if not 0.0 <= self.prior_epsilon < 0.5:
            raise ConfigError(f"prior_epsilon={self.prior_epsilon} must be in [0, 0.5)")


@dataclass
class EmTrace:
    """Record of one `em_fit` run.

    Attributes
    ----------
    log_likelihoods : `list` [`float`]
        Mean training log-likelihood per row before each iteration's update.
    d_mech : `list` [`tuple` [`float`, ...]]
        Label mechanism after each iteration's update, if the circuit has
        a fair head.
    monitor_log_likelihoods : `list` [`float`]
        Mean log-likelihood of the monitor table before each update.
    converged_at : `int` or `None`
        Index of the iteration whose improvement fell below tolerance.
    init : `InitMethod`
        How the parameters were initialized.
    degenerate_nodes : `list` [`int`]
        Nodes that received no flow in some iteration and kept their
        parameters.
    """

    log_likelihoods: list[float] = field(default_factory=list)
    d_mech: list[tuple[float, ...]] = field(default_factory=list)
    monitor_log_likelihoods: list[float] = field(default_factory=list)
    converged_at: int | None = None
    init: InitMethod = InitMethod.KEEP
    degenerate_nodes: list[int] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.log_likelihoods)

    def to_dict(self) -> dict:
        return {
            "init": self.init.value,
            "iterations": self.iterations,
            "converged_at": self.converged_at,
            "log_likelihoods": list(self.log_likelihoods),
            "monitor_log_likelihoods": list(self.monitor_log_likelihoods),
            "d_mech": [list(row) for row in self.d_mech],
            "degenerate_nodes": sorted(set(self.degenerate_nodes)),
        }


def apply_flows(circuit: Circuit, flows: FlowTable, alpha: float) -> list[int]:
    """Maximum-likelihood update of all parameters from (expected) flows.

    Every sum node gets the smoothed ratios ``(F + alpha) / (sum F +
    alpha * |ch|)``, tied groups are updated by their own rule and every
    categorical leaf gets the smoothed counts of the values reaching it.

    Returns
    -------
    degenerate : `list` [`int`]
        Nodes with zero total flow and ``alpha == 0``; they keep their
        current parameters.
    """
    degenerate = []
    for i, node in enumerate(circuit.nodes):
        if isinstance(node, LeafNode):
            if node.is_indicator:
                continue
            probs = laplace_normalize(flows.leaf_counts[i], alpha)
            if probs is None:
                degenerate.append(i)
            else:
                circuit.set_leaf_probs(i, probs)
            continue
        if not isinstance(node, SumNode):
            continue
        if i in circuit.tied_groups:
            weights = circuit.tied_groups[i].estimate(flows.edge_flows[i], alpha)
        else:
            weights = laplace_normalize(flows.edge_flows[i], alpha)
        if weights is None:
            degenerate.append(i)
        else:
            circuit.set_sum_weights(i, weights)
    for i in degenerate:
        _log.warning(f"Node {i} received no flow; keeping its parameters")
    return degenerate


def mle_complete(
    circuit: Circuit,
    data: DataTable,
    alpha: float = 1.0,
    threads: int | None = None,
) -> list[int]:
    """Closed-form maximum likelihood from complete data.

    Parameters
    ----------
    circuit : `Circuit`
        Smooth, decomposable, deterministic circuit; updated in place.
    data : `DataTable`
        Rows with every variable of the circuit's scope observed.
    alpha : `float`
        Laplace pseudocount.
    threads : `int`, optional
        Worker threads for flow aggregation.

    Returns
    -------
    degenerate : `list` [`int`]
        Nodes that kept their parameters for lack of flow.

    Raises
    ------
    IncompleteAssignmentError
        If a cell of the circuit's scope is missing.
    """
    check_schema(circuit.variables, data)
    scope = sorted(circuit.scope)
    if np.any(data.cells[:, scope] == MISSING):
        raise IncompleteAssignmentError(
            "Maximum likelihood from complete data needs every scope cell observed"
        )
    return apply_flows(circuit, aggregate_flows(circuit, data, threads), alpha)


def em_step(
    circuit: Circuit,
    data: DataTable,
    alpha: float = 1.0,
    threads: int | None = None,
) -> tuple[float, list[int]]:
    """One expectation maximization iteration, in place.

    Returns
    -------
    log_likelihood : `float`
        Weighted training log-likelihood under the parameters before the
        update.
    degenerate : `list` [`int`]
        Nodes that kept their parameters for lack of flow.

    Raises
    ------
    RowImpossibleError
        If a row has zero probability.
    """
    flows = aggregate_flows(circuit, data, threads)
    degenerate = apply_flows(circuit, flows, alpha)
    return flows.log_likelihood, degenerate


def initialize(
    circuit: Circuit,
    data: DataTable,
    method: InitMethod,
    config: EmConfig,
) -> None:
    """Write starting parameters into ``circuit``.

    ``random`` draws every sum node's weights and every categorical leaf
    from a symmetric Dirichlet(1) (tied groups map the draw through their
    own estimate). ``prior`` lets each tied group write its prior
    knowledge and keeps the remaining parameters. ``keep`` does nothing.
    """
    method = InitMethod(method)
    if method is InitMethod.RANDOM:
        rng = np.random.default_rng(config.seed)
        for i, node in enumerate(circuit.nodes):
            if isinstance(node, LeafNode):
                if not node.is_indicator:
                    circuit.set_leaf_probs(i, random_simplex(rng, node.probs.size))
                continue
            if not isinstance(node, SumNode):
                continue
            draw = random_simplex(rng, len(node.children))
            if i in circuit.tied_groups:
                weights = circuit.tied_groups[i].estimate(draw, 0.0)
                if weights is not None:
                    circuit.set_sum_weights(i, weights)
            else:
                circuit.set_sum_weights(i, draw)
    elif method is InitMethod.PRIOR:
        for group in circuit.tied_groups.values():
            group.initialize_from_prior(
                circuit, data.cells, data.weights, config.prior_epsilon
            )


def _snapshot(circuit: Circuit) -> tuple[float, ...] | None:
    for group in circuit.tied_groups.values():
        values = group.snapshot(circuit)
        if values is not None:
            return values
    return None


def em_fit(
    circuit: Circuit,
    data: DataTable,
    init: InitMethod = InitMethod.PRIOR,
    config: EmConfig | None = None,
    monitor: DataTable | None = None,
    threads: int | None = None,
) -> EmTrace:
    """Initialize and iterate `em_step` until convergence.

    Iteration ``k`` stops the run when its log-likelihood improves on
    iteration ``k - 1`` by at most ``ll_tolerance`` times its magnitude.
    On complete data iteration 1 reaches the maximum, so the run stops at
    iteration 2.

    Parameters
    ----------
    circuit : `Circuit`
        Circuit to fit; updated in place.
    data : `DataTable`
        Training rows; cells may be missing.
    init : `InitMethod`
        Initialization method.
    config : `EmConfig`, optional
        Settings; defaults if None.
    monitor : `DataTable`, optional
        Held-out rows whose log-likelihood is recorded every iteration.
    threads : `int`, optional
        Worker threads for flow aggregation.

    Returns
    -------
    trace : `EmTrace`
        The learning trace.
    """
    config = config or EmConfig()
    initialize(circuit, data, init, config)
    trace = EmTrace(init=InitMethod(init))
    total_weight = data.total_weight or 1.0
    for iteration in range(config.max_iterations):
        if monitor is not None and monitor.num_rows:
            check_schema(circuit.variables, monitor)
            monitor_lls = circuit.log_likelihoods(monitor.cells)
            trace.monitor_log_likelihoods.append(
                float(monitor.weights @ monitor_lls / (monitor.total_weight or 1.0))
            )
        total, degenerate = em_step(circuit, data, config.laplace_alpha, threads)
        log_likelihood = total / total_weight
        trace.log_likelihoods.append(log_likelihood)
        trace.degenerate_nodes += degenerate
        snapshot = _snapshot(circuit)
        if snapshot is not None:
            trace.d_mech.append(snapshot)
        _log.debug(f"EM iteration {iteration}: mean log-likelihood {log_likelihood:.9f}")
        if iteration > 0:
            previous = trace.log_likelihoods[-2]
            if log_likelihood - previous <= config.ll_tolerance * abs(previous):
                trace.converged_at = iteration
                break
    if trace.converged_at is None:
        _log.info(f"EM stopped after {config.max_iterations} iterations")
    else:
        _log.info(
            f"EM converged at iteration {trace.converged_at}; "
            f"mean log-likelihood {trace.log_likelihoods[-1]:.6f}"
        )
    return trace
