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
    "MiMatrix",
    "TreeStructure",
    "StructureConfig",
    "StructureTrace",
    "StructureResult",
    "pairwise_mi",
    "chow_liu_tree",
    "estimate_tree_parameters",
    "compile_tree",
    "tree_circuit",
    "chow_liu",
    "split",
    "split_candidates",
    "strudel_learn",
]

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from . import dataset
from .circuit import Circuit, CircuitBuilder, LeafNode, ProductNode, SumNode, Variable
from .dataset import DataTable
from .enums import Role
from .errors import ConfigError, InsufficientDataError, ScopeError, StructuralError
from .flows import aggregate_flows
from .learn_params import em_step, mle_complete
from .utils import MISSING, laplace_normalize

# Mutual information ties are compared at this many decimals.
MI_DECIMALS = 12

_log = logging.getLogger(__name__)


@dataclass
class MiMatrix:
    """Pairwise mutual information, in nats.

    Attributes
    ----------
    variables : `list` [`int`]
        Variable ids the estimates cover.
    values : `numpy.ndarray`
        Symmetric (n, n) array over all schema variables, indexed by id;
        entries outside ``variables`` and on the diagonal are 0.
    """

    variables: list[int]
    values: np.ndarray

    def __getitem__(self, pair: tuple[int, int]) -> float:
        return float(self.values[pair])

    def row_sum(self, variable: int, within: Sequence[int]) -> float:
        """Sum of ``variable``'s MI with the other variables of ``within``."""
        others = [u for u in within if u != variable]
        return float(self.values[variable, others].sum())


@dataclass
class TreeStructure:
    """A rooted spanning tree over variables.

    Attributes
    ----------
    root : `int`
        Root variable id.
    parents : `dict` [`int`, `int` or `None`]
        Parent of every variable; None for the root.
    """

    root: int
    parents: dict[int, int | None]

    @classmethod
    def from_edges(
        cls, variables: Sequence[int], edges: Iterable[tuple[int, int]], root: int
    ) -> "TreeStructure":
        """Orient the undirected spanning tree ``edges`` away from ``root``."""
        graph = nx.Graph()
        graph.add_nodes_from(variables)
        graph.add_edges_from(edges)
        parents: dict[int, int | None] = {root: None}
        parents.update(nx.bfs_predecessors(graph, root))
        if len(parents) != graph.number_of_nodes():
            raise StructuralError(
                f"Edges {sorted(graph.edges)} do not span {sorted(variables)}"
            )
        return cls(root=root, parents=parents)

    @property
    def edges(self) -> set[tuple[int, int]]:
        """Undirected edges as (smaller id, larger id)."""
        return {
            (min(v, p), max(v, p)) for v, p in self.parents.items() if p is not None
        }

    def children(self, variable: int) -> list[int]:
        return sorted(v for v, p in self.parents.items() if p == variable)


@dataclass
class StructureConfig:
    """Settings of structure learning.

    Parameters
    ----------
    max_splits : `int`
        Upper bound on split operations.
    validation_fraction : `float`
        Share of rows held out for early stopping (0 validates on the
        training rows).
    patience : `int`
        Stop after this many consecutive splits without a validation
        improvement.
    alpha : `float`
        Pseudocount of mutual information and parameter estimates.
    seed : `int`
        Seed of the validation split.
    """

    max_splits: int = 200
    validation_fraction: float = 0.1
    patience: int = 3
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_splits < 0:
            raise ConfigError(f"max_splits={self.max_splits} must be >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation_fraction={self.validation_fraction} must be in [0, 1)"
            )
        if self.patience < 1:
            raise ConfigError(f"patience={self.patience} must be >= 1")
        if self.alpha < 0:
            raise ConfigError(f"alpha={self.alpha} must be >= 0")


@dataclass
class StructureTrace:
    """Record of a structure search.

    Attributes
    ----------
    splits : `list` [`tuple` [`int`, `int`, `int`]]
        (sum node, child ordinal, variable) of every applied split.
    train_log_likelihoods : `list` [`float`]
        Mean training log-likelihood after the initial tree and each split.
    validation_log_likelihoods : `list` [`float`]
        Mean validation log-likelihood, aligned with the above.
    best_index : `int`
        Index into the lists of the returned circuit.
    """

    splits: list[tuple[int, int, int]] = field(default_factory=list)
    train_log_likelihoods: list[float] = field(default_factory=list)
    validation_log_likelihoods: list[float] = field(default_factory=list)
    best_index: int = 0


@dataclass
class StructureResult:
    circuit: Circuit
    trace: StructureTrace


def _default_variables(data: DataTable) -> list[int]:
    return [
        v.id
        for v in data.schema.variables
        if data.schema.role_of(v.id) is not Role.LATENT
    ]


def _pair_counts(data: DataTable, u: int, v: int) -> np.ndarray:
    """Weighted joint counts of (u, v) over rows observing both."""
    arity_u = data.schema.variables[u].arity
    arity_v = data.schema.variables[v].arity
    cu = data.cells[:, u]
    cv = data.cells[:, v]
    both = (cu != MISSING) & (cv != MISSING)
    counts = np.bincount(
        cu[both] * arity_v + cv[both],
        weights=data.weights[both],
        minlength=arity_u * arity_v,
    )
    return counts.reshape(arity_u, arity_v)


def _marginal_counts(data: DataTable, v: int) -> np.ndarray:
    column = data.cells[:, v]
    observed = column != MISSING
    return np.bincount(
        column[observed],
        weights=data.weights[observed],
        minlength=data.schema.variables[v].arity,
    )


def pairwise_mi(
    data: DataTable, alpha: float = 1.0, variables: Sequence[int] | None = None
) -> MiMatrix:
    """Mutual information of every variable pair from smoothed counts.

    A row contributes to the pair (U, V) only if it observes both.

    Parameters
    ----------
    data : `DataTable`
        Rows; cells may be missing.
    alpha : `float`
        Pseudocount added to every joint cell.
    variables : `list` [`int`], optional
        Variable ids to cover; default every non-latent column.

    Raises
    ------
    InsufficientDataError
        If a variable is observed in no row.
    """
    variables = sorted(_default_variables(data) if variables is None else variables)
    for v in variables:
        if not np.any(data.cells[:, v] != MISSING):
            raise InsufficientDataError(
                f"Variable {data.schema.variables[v].name!r} is never observed"
            )
    values = np.zeros((data.schema.num_variables, data.schema.num_variables))
    for a, u in enumerate(variables):
        for v in variables[a + 1 :]:
            counts = _pair_counts(data, u, v)
            total = counts.sum() + alpha * counts.size
            if total <= 0:
                continue
            joint = (counts + alpha) / total
            outer = joint.sum(axis=1, keepdims=True) * joint.sum(axis=0, keepdims=True)
            positive = joint > 0
            mi = float(np.sum(joint[positive] * np.log(joint[positive] / outer[positive])))
            values[u, v] = values[v, u] = max(mi, 0.0)
    return MiMatrix(variables=variables, values=values)


def chow_liu_tree(mi: MiMatrix) -> TreeStructure:
    """Maximum-weight spanning tree over the MI matrix.

    Kruskal's algorithm visits edges by decreasing MI, ties broken by the
    smaller (min id, max id); the tree is rooted at the lowest id.
    """
    variables = sorted(mi.variables)
    if not variables:
        raise InsufficientDataError("No variables to build a tree over")
    candidates = sorted(
        (-round(mi[u, v], MI_DECIMALS), u, v)
        for a, u in enumerate(variables)
        for v in variables[a + 1 :]
    )
    components = DisjointSet(variables)
    edges = [(u, v) for _, u, v in candidates if components.merge(u, v)]
    return TreeStructure.from_edges(variables, edges, variables[0])


def estimate_tree_parameters(
    data: DataTable, tree: TreeStructure, alpha: float
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Smoothed root marginal and conditional tables of a tree.

    Returns
    -------
    root_probs : `numpy.ndarray`
        Pr(root).
    cpts : `dict` [`int`, `numpy.ndarray`]
        For every non-root variable, an array (parent arity, arity) of
        Pr(variable | parent).
    """

    def normalize(counts: np.ndarray) -> np.ndarray:
        probs = laplace_normalize(counts, alpha)
        return np.full(counts.size, 1.0 / counts.size) if probs is None else probs

    root_probs = normalize(_marginal_counts(data, tree.root))
    cpts = {}
    for v, parent in tree.parents.items():
        if parent is None:
            continue
        counts = _pair_counts(data, parent, v)
        cpts[v] = np.array([normalize(row) for row in counts])
    return root_probs, cpts


def compile_tree(
    builder: CircuitBuilder,
    tree: TreeStructure,
    root_probs: np.ndarray,
    cpts: Mapping[int, np.ndarray],
) -> int:
    """Add the circuit of a tree-shaped distribution to ``builder``.

    A variable with children becomes, for every value of its parent, a sum
    over its own values of ``[V=value]`` times the sub-circuits of its
    children given that value; a variable without children becomes a
    categorical leaf. The per-value products are shared by the parent
    contexts.

    Returns
    -------
    root : `int`
        Index of the tree's root node in ``builder``.
    """
    branches: dict[tuple[int, int], int] = {}

    def branch(v: int, value: int) -> int:
        key = (v, value)
        if key not in branches:
            factors = [builder.indicator(v, value)]
            factors += [node_for(child, value) for child in tree.children(v)]
            branches[key] = builder.product(factors)
        return branches[key]

    def node_for(v: int, parent_value: int | None) -> int:
        probs = root_probs if parent_value is None else cpts[v][parent_value]
        if not tree.children(v):
            return builder.categorical(v, probs)
        arity = builder.variables[v].arity
        return builder.sum([branch(v, value) for value in range(arity)], probs)

    return node_for(tree.root, None)


def tree_circuit(
    variables: Sequence[Variable],
    tree: TreeStructure,
    root_probs: np.ndarray,
    cpts: Mapping[int, np.ndarray],
) -> Circuit:
    """Circuit of a tree-shaped distribution; see `compile_tree`."""
    builder = CircuitBuilder(variables)
    return builder.build(compile_tree(builder, tree, root_probs, cpts))


def chow_liu(
    data: DataTable, alpha: float = 1.0, variables: Sequence[int] | None = None
) -> Circuit:
    """Chow-Liu tree compiled to a smooth, decomposable, deterministic
    circuit, with parameters from smoothed pairwise counts.

    Parameters
    ----------
    data : `DataTable`
        Rows; cells may be missing.
    alpha : `float`
        Pseudocount.
    variables : `list` [`int`], optional
        Variable ids to cover; default every non-latent column.
    """
    mi = pairwise_mi(data, alpha, variables)
    tree = chow_liu_tree(mi)
    root_probs, cpts = estimate_tree_parameters(data, tree, alpha)
    circuit = tree_circuit(data.schema.variables, tree, root_probs, cpts)
    _log.debug(f"Chow-Liu tree over {len(mi.variables)} variables: {sorted(tree.edges)}")
    return circuit


class _Conditioner:
    """Copy a sub-circuit conditioned on ``variable = value``.

    `copy` returns the index of the conditioned copy in the builder and
    the probability of the value under the original node, or None when
    that probability is 0.
    """

    def __init__(
        self, circuit: Circuit, builder: CircuitBuilder, variable: int, value: int
    ) -> None:
        self.circuit = circuit
        self.builder = builder
        self.variable = variable
        self.value = value
        self.memo: dict[int, tuple[int | None, float]] = {}

    def copy(self, index: int) -> tuple[int | None, float]:
        if index in self.memo:
            return self.memo[index]
        node = self.circuit.nodes[index]
        builder = self.builder
        result: tuple[int | None, float]
        if isinstance(node, LeafNode):
            if node.is_indicator:
                keep = node.variable != self.variable or node.value == self.value
                result = (
                    (builder.indicator(node.variable, node.value), 1.0)
                    if keep
                    else (None, 0.0)
                )
            elif node.variable == self.variable:
                mass = float(node.probs[self.value])
                result = (
                    (builder.indicator(self.variable, self.value), mass)
                    if mass > 0
                    else (None, 0.0)
                )
            else:
                result = (builder.categorical(node.variable, node.probs.copy()), 1.0)
        elif isinstance(node, ProductNode):
            parts = [self.copy(c) for c in node.children]
            if any(part is None for part, _ in parts):
                result = (None, 0.0)
            else:
                mass = float(np.prod([m for _, m in parts]))
                result = (builder.product(part for part, _ in parts), mass)
        else:
            kept = []
            for child, weight in zip(node.children, node.weights):
                part, mass = self.copy(child)
                if part is not None and weight * mass > 0:
                    kept.append((part, weight * mass))
            total = sum(w for _, w in kept)
            if total <= 0:
                result = (None, 0.0)
            else:
                result = (
                    builder.sum([p for p, _ in kept], [w / total for _, w in kept]),
                    total,
                )
        self.memo[index] = result
        return result


def split(circuit: Circuit, edge: tuple[int, int], variable: int) -> Circuit:
    """Replace one sum edge by one edge per value of ``variable``.

    Each new child is a copy of the old child conditioned on
    ``variable = value``, with its own parameters; its weight is the old
    weight times the old child's probability of the value. Values of
    probability 0 get no edge. The represented distribution does not
    change.

    Parameters
    ----------
    circuit : `Circuit`
        Smooth, decomposable circuit.
    edge : `tuple` [`int`, `int`]
        (sum node, child ordinal).
    variable : `int`
        Variable id in the child's scope.

    Raises
    ------
    StructuralError
        If the edge does not leave a sum node.
    ScopeError
        If ``variable`` is not in the child's scope.
    """
    parent, ordinal = edge
    node = circuit.nodes[parent]
    if not isinstance(node, SumNode) or not 0 <= ordinal < len(node.children):
        raise StructuralError(f"({parent}, {ordinal}) is not a sum edge")
    child = node.children[ordinal]
    if variable not in circuit.scopes[child]:
        raise ScopeError(
            f"Variable {circuit.variables[variable].name!r} is not in the scope "
            f"of node {child}"
        )
    builder = CircuitBuilder(circuit.variables)
    mapping: dict[int, int] = {}
    for i, original in enumerate(circuit.nodes):
        if isinstance(original, LeafNode):
            if original.is_indicator:
                mapping[i] = builder.indicator(original.variable, original.value)
            else:
                mapping[i] = builder.categorical(original.variable, original.probs.copy())
        elif isinstance(original, ProductNode):
            mapping[i] = builder.product(mapping[c] for c in original.children)
        elif i != parent:
            mapping[i] = builder.sum(
                (mapping[c] for c in original.children),
                log_weights=original.log_weights,
            )
        else:
            children = []
            weights = []
            for k, (c, w) in enumerate(zip(original.children, original.weights)):
                if k != ordinal:
                    children.append(mapping[c])
                    weights.append(w)
                    continue
                for value in range(circuit.variables[variable].arity):
                    part, mass = _Conditioner(circuit, builder, variable, value).copy(c)
                    if part is not None:
                        children.append(part)
                        weights.append(w * mass)
            mapping[i] = builder.sum(children, weights)
        if i in circuit.tied_groups:
            builder.tie(circuit.tied_groups[i].rebased(mapping[i]))
    return builder.build(mapping[circuit.root])


def split_candidates(
    circuit: Circuit, min_scope: int = 2
) -> list[tuple[int, int]]:
    """Sum edges whose child has at least ``min_scope`` variables, one of
    which the child does not fix."""
    candidates = []
    for i, node in circuit.sum_nodes():
        for ordinal, child in enumerate(node.children):
            scope = circuit.scopes[child]
            if len(scope) >= min_scope and scope - circuit.fixed_values[child].keys():
                candidates.append((i, ordinal))
    return candidates


def _mean_log_likelihood(circuit: Circuit, data: DataTable) -> float:
    if data.num_rows == 0:
        return 0.0
    return float(
        data.weights @ circuit.log_likelihoods(data.cells) / (data.total_weight or 1.0)
    )


def strudel_learn(
    data: DataTable,
    config: StructureConfig | None = None,
    variables: Sequence[int] | None = None,
    threads: int | None = None,
) -> StructureResult:
    """Greedy split search starting from the Chow-Liu circuit.

    Every step splits the candidate edge of highest (expected) flow on
    the training rows, on the child variable with the largest summed MI
    to the rest of the child's scope, then re-estimates the parameters.
    The search stops after ``max_splits`` splits, when no candidate is
    left, or when the validation log-likelihood has not improved for
    ``patience`` splits; the circuit with the best validation
    log-likelihood is returned.

    Parameters
    ----------
    data : `DataTable`
        Rows; cells may be missing.
    config : `StructureConfig`, optional
        Settings; defaults if None.
    variables : `list` [`int`], optional
        Variable ids to cover; default every non-latent column.
    threads : `int`, optional
        Worker threads for flow aggregation.
    """
    config = config or StructureConfig()
    variables = sorted(_default_variables(data) if variables is None else variables)
    trace = StructureTrace()
    if config.max_splits == 0:
        circuit = chow_liu(data, config.alpha, variables)
        trace.train_log_likelihoods.append(_mean_log_likelihood(circuit, data))
        trace.validation_log_likelihoods.append(trace.train_log_likelihoods[-1])
        return StructureResult(circuit, trace)

    if config.validation_fraction > 0 and data.num_rows >= 2:
        train, validation = dataset.split(data, config.validation_fraction, config.seed)
        if validation.num_rows == 0 or train.num_rows == 0:
            train, validation = data, data
    else:
        train, validation = data, data
    complete = train.is_complete(variables)
    mi = pairwise_mi(train, config.alpha, variables)
    circuit = chow_liu(train, config.alpha, variables)
    trace.train_log_likelihoods.append(_mean_log_likelihood(circuit, train))
    trace.validation_log_likelihoods.append(_mean_log_likelihood(circuit, validation))
    best = circuit
    best_score = trace.validation_log_likelihoods[-1]
    stale = 0
    for step in range(config.max_splits):
        candidates = split_candidates(circuit)
        if not candidates:
            _log.debug("No split candidates left")
            break
        flows = aggregate_flows(circuit, train, threads)
        edge = min(candidates, key=lambda e: (-flows.edge(*e), e))
        child = circuit.nodes[edge[0]].children[edge[1]]
        free = sorted(circuit.scopes[child] - circuit.fixed_values[child].keys())
        scope = sorted(circuit.scopes[child])
        variable = min(free, key=lambda v: (-round(mi.row_sum(v, scope), MI_DECIMALS), v))
        circuit = split(circuit, edge, variable)
        if complete:
            mle_complete(circuit, train, config.alpha, threads)
        else:
            em_step(circuit, train, config.alpha, threads)
        trace.splits.append((edge[0], edge[1], variable))
        trace.train_log_likelihoods.append(_mean_log_likelihood(circuit, train))
        score = _mean_log_likelihood(circuit, validation)
        trace.validation_log_likelihoods.append(score)
        _log.debug(
            f"Split {step}: edge {edge} on {circuit.variables[variable].name!r}; "
            f"validation log-likelihood {score:.6f}"
        )
        if score > best_score:
            best, best_score = circuit, score
            trace.best_index = len(trace.validation_log_likelihoods) - 1
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                _log.debug(f"No validation improvement for {stale} splits; stopping")
                break
    _log.info(
        f"Structure search over {len(variables)} variables: {len(trace.splits)} "
        f"splits, best validation log-likelihood {best_score:.6f}"
    )
    return StructureResult(best, trace)
