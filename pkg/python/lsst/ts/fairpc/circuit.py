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
    "Variable",
    "LeafNode",
    "ProductNode",
    "SumNode",
    "Node",
    "TiedGroup",
    "PartialAssignment",
    "Circuit",
    "CircuitBuilder",
    "evaluate_complete",
    "evaluate_marginal",
    "conditional",
    "check_smooth",
    "check_decomposable",
    "check_deterministic",
    "sample",
    "reachable_nodes",
    "reachable_nodes_of",
    "enumerate_assignments",
    "MAX_EXHAUSTIVE_ASSIGNMENTS",
]

import abc
import copy
import functools
import itertools
import logging
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .enums import LeafKind
from .errors import (
    ConditioningOnNullError,
    IncompleteAssignmentError,
    SchemaError,
    StructuralError,
    UnsupportedQueryError,
    UnverifiableError,
)
from .utils import MISSING, safe_log

# Exhaustive determinism checks enumerate at most this many assignments
# (20 binary variables).
MAX_EXHAUSTIVE_ASSIGNMENTS = 2**20

# Rows per chunk when enumerating assignments.
ENUMERATION_CHUNK = 2**14

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Variable:
    """A categorical random variable.

    Parameters
    ----------
    id : `int`
        Dense index of the variable; also its column in a data table.
    arity : `int`
        Number of values, at least 2.
    name : `str`
        Display name.
    """

    id: int
    arity: int
    name: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise SchemaError(f"Variable {self.name!r} has negative id {self.id}")
        if self.arity < 2:
            raise SchemaError(
                f"Variable {self.name!r} has arity {self.arity}; must be >= 2"
            )


@dataclass
class LeafNode:
    """Univariate input node.

    An indicator leaf ``[V=value]`` outputs 1 when the variable takes the
    value (or is unobserved) and 0 otherwise. A categorical leaf outputs
    the probability of the observed value (1 if unobserved).

    Use `LeafNode.indicator` and `LeafNode.categorical` to construct.
    """

    variable: int
    kind: LeafKind
    value: int = -1
    probs: np.ndarray = field(default_factory=lambda: np.empty(0))

    @classmethod
    def indicator(cls, variable: int, value: int) -> "LeafNode":
        return cls(variable=variable, kind=LeafKind.INDICATOR, value=value)

    @classmethod
    def categorical(cls, variable: int, probs: Sequence[float]) -> "LeafNode":
        return cls(
            variable=variable,
            kind=LeafKind.CATEGORICAL,
            probs=np.array(probs, dtype=float),
        )

    @property
    def is_indicator(self) -> bool:
        return self.kind is LeafKind.INDICATOR

    @property
    def children(self) -> tuple[int, ...]:
        return ()


@dataclass
class ProductNode:
    """Factorized distribution over its children."""

    children: tuple[int, ...]


@dataclass
class SumNode:
    """Mixture of its children.

    Weights are stored as natural logs, one per child edge.
    """

    children: tuple[int, ...]
    log_weights: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


Node = LeafNode | ProductNode | SumNode


class TiedGroup(abc.ABC):
    """A sum node whose weights are driven by shared parameters.

    EM and maximum likelihood call `estimate` instead of normalizing the
    node's edge flows independently.

    Parameters
    ----------
    node : `int`
        Index of the governed sum node.
    """

    def __init__(self, node: int) -> None:
        self.node = node

    @abc.abstractmethod
    def estimate(self, edge_flows: np.ndarray, alpha: float) -> np.ndarray | None:
        """Compute new edge weights from the node's (expected) edge flows.

        Parameters
        ----------
        edge_flows : `numpy.ndarray`
            Flow of each child edge, in child order.
        alpha : `float`
            Laplace pseudocount.

        Returns
        -------
        weights : `numpy.ndarray` or `None`
            New linear-space weights, or None to keep the current ones.
        """
        raise NotImplementedError()

    @abc.abstractmethod
    def residual(self, weights: np.ndarray) -> float:
        """Return the largest deviation of ``weights`` from the tied form."""
        raise NotImplementedError()

    def initialize_from_prior(
        self,
        circuit: "Circuit",
        cells: np.ndarray,
        weights: np.ndarray,
        epsilon: float,
    ) -> None:
        """Write prior-knowledge starting parameters into ``circuit``.

        The default leaves the parameters alone.
        """

    def snapshot(self, circuit: "Circuit") -> tuple[float, ...] | None:
        """Parameters to record in a learning trace, if any."""
        return None

    def rebased(self, node: int) -> "TiedGroup":
        """Return a copy of this group governing a different node index."""
        other = copy.copy(self)
        other.node = node
        return other


class PartialAssignment(Mapping[int, int]):
    """Values for a subset of variables, keyed by variable id.

    Unobserved variables are simply absent.

    Parameters
    ----------
    values : `dict` [`int`, `int`], optional
        Observed values.
    """

    def __init__(self, values: Mapping[int, int] | None = None) -> None:
        self._values: dict[int, int] = {}
        if values is not None:
            self._values.update({int(k): int(v) for k, v in values.items()})

    def __getitem__(self, key: int) -> int:
        return self._values[key]

    def __iter__(self) -> Iterator[int]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"PartialAssignment({self._values!r})"

    def union(self, other: Mapping[int, int]) -> "PartialAssignment | None":
        """Combine two assignments.

        Returns
        -------
        union : `PartialAssignment` or `None`
            The combined assignment, or None if the two disagree on a
            shared variable.
        """
        merged = dict(self._values)
        for key, value in other.items():
            if merged.get(key, value) != value:
                return None
            merged[key] = value
        return PartialAssignment(merged)

    def as_row(self, variables: Sequence[Variable]) -> np.ndarray:
        """Encode as a data row, with `MISSING` for unobserved variables.

        Raises
        ------
        SchemaError
            If a variable id is unknown or a value is out of range.
        """
        row = np.full(len(variables), MISSING, dtype=np.int64)
        for var_id, value in self._values.items():
            if not 0 <= var_id < len(variables):
                raise SchemaError(f"Unknown variable id {var_id}")
            if not 0 <= value < variables[var_id].arity:
                raise SchemaError(
                    f"Value {value} out of range for variable "
                    f"{variables[var_id].name!r} with arity {variables[var_id].arity}"
                )
            row[var_id] = value
        return row


class Circuit:
    """A probabilistic circuit stored as one flat, topologically ordered
    node sequence.

    Children always precede their parents; edges are identified by
    (parent index, child ordinal).

    Parameters
    ----------
    variables : `list` [`Variable`]
        All variables of the schema; ``variables[i].id`` must equal ``i``.
    nodes : `list` [`Node`]
        Nodes, children before parents.
    root : `int`
        Index of the root node.

    Attributes
    ----------
    tied_groups : `dict` [`int`, `TiedGroup`]
        Sum nodes whose weights are tied, keyed by node index.

    Raises
    ------
    StructuralError
        If the node sequence is not a valid circuit.
    """

    def __init__(
        self,
        variables: Sequence[Variable],
        nodes: Sequence[Node],
        root: int,
    ) -> None:
        self.variables = list(variables)
        self.nodes = list(nodes)
        self.root = root
        self.tied_groups: dict[int, TiedGroup] = {}
        self._validate()
        self.scopes = self._compute_scopes()

    def _validate(self) -> None:
        for i, variable in enumerate(self.variables):
            if variable.id != i:
                raise StructuralError(
                    f"Variable ids must be contiguous; found id {variable.id} at {i}"
                )
        if not 0 <= self.root < len(self.nodes):
            raise StructuralError(f"Root {self.root} is not a node index")
        for i, node in enumerate(self.nodes):
            if isinstance(node, LeafNode):
                if not 0 <= node.variable < len(self.variables):
                    raise StructuralError(
                        f"Leaf {i} references unknown variable {node.variable}"
                    )
                arity = self.variables[node.variable].arity
                if node.is_indicator:
                    if not 0 <= node.value < arity:
                        raise StructuralError(
                            f"Indicator leaf {i} value {node.value} out of range"
                        )
                elif node.probs.shape != (arity,):
                    raise StructuralError(
                        f"Categorical leaf {i} has {node.probs.size} values; "
                        f"variable arity is {arity}"
                    )
                continue
            if isinstance(node, ProductNode) and len(node.children) < 2:
                raise StructuralError(f"Product node {i} has fewer than 2 children")
            if isinstance(node, SumNode):
                if len(node.children) < 1:
                    raise StructuralError(f"Sum node {i} has no children")
                if node.log_weights.shape != (len(node.children),):
                    raise StructuralError(
                        f"Sum node {i} has {node.log_weights.size} weights for "
                        f"{len(node.children)} children"
                    )
            for child in node.children:
                if not 0 <= child < i:
                    raise StructuralError(
                        f"Node {i} has child {child} that does not precede it"
                    )

    def _compute_scopes(self) -> list[frozenset[int]]:
        scopes: list[frozenset[int]] = []
        for i, node in enumerate(self.nodes):
            if isinstance(node, LeafNode):
                scopes.append(frozenset((node.variable,)))
            else:
                scopes.append(frozenset().union(*(scopes[c] for c in node.children)))
            if not scopes[-1]:
                raise StructuralError(f"Node {i} has an empty scope")
        return scopes

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def scope(self) -> frozenset[int]:
        """Variables of the root."""
        return self.scopes[self.root]

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Iterate over (parent, ordinal, child) for every inner edge."""
        for i, node in enumerate(self.nodes):
            for ordinal, child in enumerate(node.children):
                yield i, ordinal, child

    def sum_nodes(self) -> Iterator[tuple[int, SumNode]]:
        for i, node in enumerate(self.nodes):
            if isinstance(node, SumNode):
                yield i, node

    def copy(self) -> "Circuit":
        """Deep copy, including parameters and tied groups."""
        return copy.deepcopy(self)

    # Structural properties. Structure never changes after construction,
    # only parameters, so these are cached.

    @functools.cached_property
    def is_smooth(self) -> bool:
        return all(
            all(self.scopes[c] == self.scopes[i] for c in node.children)
            for i, node in self.sum_nodes()
        )

    @functools.cached_property
    def is_decomposable(self) -> bool:
        for i, node in enumerate(self.nodes):
            if not isinstance(node, ProductNode):
                continue
            total = sum(len(self.scopes[c]) for c in node.children)
            if total != len(self.scopes[i]):
                return False
        return True

    @functools.cached_property
    def fixed_values(self) -> list[dict[int, int]]:
        """Per node, the variable values implied by its support.

        An indicator fixes its variable; a product fixes the union of what
        its children fix; a sum fixes what all its children agree on.
        """
        fixed: list[dict[int, int]] = []
        for node in self.nodes:
            if isinstance(node, LeafNode):
                fixed.append({node.variable: node.value} if node.is_indicator else {})
            elif isinstance(node, ProductNode):
                merged: dict[int, int] = {}
                for child in node.children:
                    merged.update(fixed[child])
                fixed.append(merged)
            else:
                first, *rest = (fixed[c] for c in node.children)
                fixed.append(
                    {
                        var: value
                        for var, value in first.items()
                        if all(other.get(var) == value for other in rest)
                    }
                )
        return fixed

    def structurally_deterministic(self, index: int) -> bool:
        """Does every pair of children of sum node ``index`` fix some
        shared variable to different values?"""
        node = self.nodes[index]
        assert isinstance(node, SumNode)
        maps = [self.fixed_values[c] for c in node.children]
        for a, b in itertools.combinations(maps, 2):
            if not any(a[var] != b[var] for var in a.keys() & b.keys()):
                return False
        return True

    def _exhaustively_deterministic(self, index: int) -> bool | None:
        """Check one sum node by enumerating its scope.

        Returns None if the scope is too large to enumerate.
        """
        node = self.nodes[index]
        assert isinstance(node, SumNode)
        scope = sorted(self.scopes[index])
        arities = [self.variables[v].arity for v in scope]
        if int(np.prod(arities, dtype=float)) > MAX_EXHAUSTIVE_ASSIGNMENTS:
            return None
        _log.debug(f"Checking sum node {index} over {len(scope)} variables exhaustively")
        children = list(node.children)
        for chunk in enumerate_assignments(self.variables, scope, ENUMERATION_CHUNK):
            values = self.log_values(chunk)[children]
            if np.any(np.isfinite(values).sum(axis=0) > 1):
                return False
        return True

    @functools.cached_property
    def is_deterministic(self) -> bool:
        for i, _ in self.sum_nodes():
            if self.structurally_deterministic(i):
                continue
            exhaustive = self._exhaustively_deterministic(i)
            if exhaustive is None:
                raise UnverifiableError(
                    f"Sum node {i} is not structurally deterministic and its "
                    f"scope exceeds {MAX_EXHAUSTIVE_ASSIGNMENTS} assignments"
                )
            if not exhaustive:
                return False
        return True

    def require_marginal_queries(self) -> None:
        """Raise `UnsupportedQueryError` unless smooth and decomposable."""
        if not (self.is_smooth and self.is_decomposable):
            raise UnsupportedQueryError(
                "Marginal queries need a smooth and decomposable circuit"
            )

    def require_flows(self) -> None:
        """Raise `UnsupportedQueryError` unless smooth, decomposable and
        deterministic."""
        self.require_marginal_queries()
        if not self.is_deterministic:
            raise UnsupportedQueryError(
                "Circuit flows need a deterministic circuit"
            )

    # Parameter access.

    def set_sum_weights(self, index: int, weights: Sequence[float]) -> None:
        """Write linear-space weights for sum node ``index``."""
        node = self.nodes[index]
        if not isinstance(node, SumNode):
            raise StructuralError(f"Node {index} is not a sum node")
        node.log_weights = safe_log(np.asarray(weights, dtype=float))

    def set_leaf_probs(self, index: int, probs: Sequence[float]) -> None:
        """Write the PMF of categorical leaf ``index``."""
        node = self.nodes[index]
        if not isinstance(node, LeafNode) or node.is_indicator:
            raise StructuralError(f"Node {index} is not a categorical leaf")
        node.probs = np.array(probs, dtype=float)

    def normalization_violations(self, tolerance: float = 1e-9) -> list[int]:
        """Indices of sum nodes and categorical leaves whose parameters
        are negative or do not sum to one within ``tolerance``."""
        bad = []
        for i, node in enumerate(self.nodes):
            if isinstance(node, SumNode):
                params = node.weights
            elif isinstance(node, LeafNode) and not node.is_indicator:
                params = node.probs
            else:
                continue
            if np.any(params < 0) or abs(params.sum() - 1.0) > tolerance:
                bad.append(i)
        return bad

    # Evaluation.

    def log_values(self, cells: np.ndarray) -> np.ndarray:
        """Bottom-up pass in log space.

        Parameters
        ----------
        cells : `numpy.ndarray`
            Integer array of shape (rows, variables) with `MISSING` for
            unobserved cells. Unobserved variables are marginalized.

        Returns
        -------
        values : `numpy.ndarray`
            Array of shape (nodes, rows) holding the log output of every
            node for every row.
        """
        cells = np.atleast_2d(cells)
        values = np.empty((len(self.nodes), cells.shape[0]))
        with np.errstate(divide="ignore", invalid="ignore"):
            for i, node in enumerate(self.nodes):
                if isinstance(node, LeafNode):
                    column = cells[:, node.variable]
                    missing = column < 0
                    if node.is_indicator:
                        values[i] = np.where(
                            missing | (column == node.value), 0.0, -np.inf
                        )
                    else:
                        log_probs = safe_log(node.probs)
                        values[i] = np.where(
                            missing, 0.0, log_probs[np.where(missing, 0, column)]
                        )
                elif isinstance(node, ProductNode):
                    values[i] = values[list(node.children)].sum(axis=0)
                else:
                    values[i] = logsumexp(
                        values[list(node.children)] + node.log_weights[:, np.newaxis],
                        axis=0,
                    )
        return values

    def log_likelihoods(self, cells: np.ndarray, chunk_size: int = 8192) -> np.ndarray:
        """Log marginal probability of every row, evaluated in chunks."""
        self.require_marginal_queries()
        cells = np.atleast_2d(cells)
        out = np.empty(cells.shape[0])
        for start in range(0, cells.shape[0], chunk_size):
            stop = start + chunk_size
            out[start:stop] = self.log_values(cells[start:stop])[self.root]
        return out


class CircuitBuilder:
    """Incrementally build a `Circuit`.

    Indicator leaves are shared: asking twice for ``[V=v]`` returns the
    same node.

    Parameters
    ----------
    variables : `list` [`Variable`]
        All variables of the schema.
    """

    def __init__(self, variables: Sequence[Variable]) -> None:
        self.variables = list(variables)
        self.nodes: list[Node] = []
        self._indicators: dict[tuple[int, int], int] = {}
        self._tied: list[TiedGroup] = []

    def _add(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def indicator(self, variable: int, value: int) -> int:
        key = (variable, value)
        if key not in self._indicators:
            self._indicators[key] = self._add(LeafNode.indicator(variable, value))
        return self._indicators[key]

    def categorical(self, variable: int, probs: Sequence[float]) -> int:
        return self._add(LeafNode.categorical(variable, probs))

    def product(self, children: Iterable[int]) -> int:
        return self._add(ProductNode(children=tuple(children)))

    def sum(
        self,
        children: Iterable[int],
        weights: Sequence[float] | None = None,
        *,
        log_weights: Sequence[float] | None = None,
    ) -> int:
        """Add a sum node; give either linear ``weights`` or ``log_weights``."""
        children = tuple(children)
        if log_weights is None:
            log_weights = safe_log(np.asarray(weights, dtype=float))
        return self._add(
            SumNode(children=children, log_weights=np.array(log_weights, dtype=float))
        )

    def tie(self, group: TiedGroup) -> None:
        """Register a tied group on a node of this builder."""
        self._tied.append(group)

    def graft(self, circuit: Circuit, root: int | None = None) -> int:
        """Copy the sub-circuit of ``circuit`` rooted at ``root`` (default
        its root) into this builder.

        Returns
        -------
        index : `int`
            Index of the copied root in this builder.
        """
        if root is None:
            root = circuit.root
        reachable = reachable_nodes(circuit, root)
        mapping: dict[int, int] = {}
        for i in sorted(reachable):
            node = circuit.nodes[i]
            if isinstance(node, LeafNode):
                if node.is_indicator:
                    mapping[i] = self.indicator(node.variable, node.value)
                else:
                    mapping[i] = self.categorical(node.variable, node.probs.copy())
            elif isinstance(node, ProductNode):
                mapping[i] = self.product(mapping[c] for c in node.children)
            else:
                mapping[i] = self.sum(
                    (mapping[c] for c in node.children), log_weights=node.log_weights
                )
            if i in circuit.tied_groups:
                self._tied.append(circuit.tied_groups[i].rebased(mapping[i]))
        return mapping[root]

    def build(self, root: int) -> Circuit:
        """Return the circuit of the nodes reachable from ``root``.

        Unreachable nodes are dropped and indices compacted.
        """
        reachable = sorted(reachable_nodes_of(self.nodes, root))
        mapping = {old: new for new, old in enumerate(reachable)}
        nodes: list[Node] = []
        for old in reachable:
            node = self.nodes[old]
            if isinstance(node, LeafNode):
                nodes.append(copy.deepcopy(node))
            elif isinstance(node, ProductNode):
                nodes.append(ProductNode(tuple(mapping[c] for c in node.children)))
            else:
                nodes.append(
                    SumNode(
                        tuple(mapping[c] for c in node.children),
                        node.log_weights.copy(),
                    )
                )
        circuit = Circuit(self.variables, nodes, mapping[root])
        for group in self._tied:
            if group.node in mapping:
                circuit.tied_groups[mapping[group.node]] = group.rebased(
                    mapping[group.node]
                )
        return circuit


def reachable_nodes_of(nodes: Sequence[Node], root: int) -> set[int]:
    """Indices of all nodes reachable from ``root``."""
    seen = {root}
    stack = [root]
    while stack:
        for child in nodes[stack.pop()].children:
            if child not in seen:
                seen.add(child)
                stack.append(child)
    return seen


def reachable_nodes(circuit: Circuit, root: int | None = None) -> set[int]:
    return reachable_nodes_of(circuit.nodes, circuit.root if root is None else root)


def enumerate_assignments(
    variables: Sequence[Variable], scope: Sequence[int], chunk_size: int
) -> Iterator[np.ndarray]:
    """Yield every complete assignment of ``scope`` as data rows, in chunks.

    Variables outside ``scope`` are `MISSING`.
    """
    ranges = [range(variables[v].arity) for v in scope]
    iterator = itertools.product(*ranges)
    while True:
        block = list(itertools.islice(iterator, chunk_size))
        if not block:
            return
        cells = np.full((len(block), len(variables)), MISSING, dtype=np.int64)
        cells[:, list(scope)] = np.array(block, dtype=np.int64).reshape(
            len(block), len(scope)
        )
        yield cells


def evaluate_complete(circuit: Circuit, x: Mapping[int, int]) -> float:
    """Probability of a complete assignment.

    Parameters
    ----------
    circuit : `Circuit`
        The circuit.
    x : `PartialAssignment` or `dict` [`int`, `int`]
        A value for every variable in the circuit's scope.

    Raises
    ------
    IncompleteAssignmentError
        If a variable of the scope has no value.
    """
    missing = sorted(circuit.scope - set(x))
    if missing:
        names = [circuit.variables[v].name for v in missing]
        raise IncompleteAssignmentError(f"No value for variables {names}")
    row = PartialAssignment(x).as_row(circuit.variables)
    return float(np.exp(circuit.log_values(row)[circuit.root, 0]))


def evaluate_marginal(circuit: Circuit, e: Mapping[int, int]) -> float:
    """Marginal probability of a partial assignment.

    Raises
    ------
    UnsupportedQueryError
        If the circuit is not smooth and decomposable.
    """
    circuit.require_marginal_queries()
    row = PartialAssignment(e).as_row(circuit.variables)
    return float(np.exp(circuit.log_values(row)[circuit.root, 0]))


def conditional(circuit: Circuit, q: Mapping[int, int], e: Mapping[int, int]) -> float:
    """Pr(q | e) as a ratio of marginals.

    Raises
    ------
    ConditioningOnNullError
        If Pr(e) is zero.
    """
    evidence = evaluate_marginal(circuit, e)
    if evidence <= 0.0:
        raise ConditioningOnNullError(f"Evidence {dict(e)} has probability zero")
    joint_assignment = PartialAssignment(q).union(e)
    if joint_assignment is None:
        return 0.0
    row = joint_assignment.as_row(circuit.variables)
    log_joint = circuit.log_values(row)[circuit.root, 0]
    log_evidence = circuit.log_values(PartialAssignment(e).as_row(circuit.variables))[
        circuit.root, 0
    ]
    return float(np.exp(log_joint - log_evidence))


def check_smooth(circuit: Circuit) -> bool:
    return circuit.is_smooth


def check_decomposable(circuit: Circuit) -> bool:
    return circuit.is_decomposable


def check_deterministic(circuit: Circuit) -> bool:
    """Check determinism.

    Sum nodes whose children are keyed on distinct values of one variable
    pass structurally; the others are checked by enumerating their scope
    when it has at most `MAX_EXHAUSTIVE_ASSIGNMENTS` assignments.

    Raises
    ------
    UnverifiableError
        If a sum node passes neither check because its scope is too large
        to enumerate.
    """
    return circuit.is_deterministic


def sample(
    circuit: Circuit, count: int, rng_seed: int | np.random.Generator | None
) -> np.ndarray:
    """Draw complete assignments by ancestral sampling.

    Parameters
    ----------
    circuit : `Circuit`
        A normalized, smooth, decomposable circuit.
    count : `int`
        Number of samples.
    rng_seed : `int` or `numpy.random.Generator`
        Seed or generator.

    Returns
    -------
    samples : `numpy.ndarray`
        Integer array of shape (count, variables). Variables outside the
        circuit's scope are `MISSING`.
    """
    rng = np.random.default_rng(rng_seed)
    samples = np.full((count, circuit.num_variables), MISSING, dtype=np.int64)
    if count == 0:
        return samples
    reach = np.zeros((circuit.num_nodes, count), dtype=bool)
    reach[circuit.root] = True
    for i in range(circuit.num_nodes - 1, -1, -1):
        rows = np.flatnonzero(reach[i])
        if rows.size == 0:
            continue
        node = circuit.nodes[i]
        if isinstance(node, LeafNode):
            if node.is_indicator:
                samples[rows, node.variable] = node.value
            else:
                samples[rows, node.variable] = _draw(rng, node.probs, rows.size)
        elif isinstance(node, ProductNode):
            reach[list(node.children), :] |= reach[i]
        else:
            picks = _draw(rng, node.weights, rows.size)
            for ordinal, child in enumerate(node.children):
                reach[child, rows[picks == ordinal]] = True
    return samples


def _draw(rng: np.random.Generator, probs: np.ndarray, size: int) -> np.ndarray:
    weights = np.asarray(probs, dtype=float)
    return rng.choice(weights.size, size=size, p=weights / weights.sum())

