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
    "HEAD_CONTEXTS",
    "DMECH_ORDER",
    "FairSchema",
    "FairHeadParams",
    "FairHead",
    "FairModel",
    "SubcircuitFactory",
    "build_fair_pc",
    "build_nlat_pc",
    "build_two_nb",
    "build_lat_nb",
    "build_model",
    "naive_bayes_factory",
    "learned_factory",
    "fit_model",
    "predict_fair",
    "format_head_comment",
    "parse_head_comment",
    "save_model",
    "load_model",
]

import logging
import pathlib
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .circuit import (
    Circuit,
    CircuitBuilder,
    LeafNode,
    ProductNode,
    SumNode,
    TiedGroup,
    Variable,
    conditional,
)
from .circuit_format import load_circuit, save_circuit
from .dataset import DataTable, Schema
from .enums import InitMethod, ModelKind
from .errors import (
    CircuitParseError,
    ConditioningOnNullError,
    ConfigError,
    InsufficientDataError,
    SchemaError,
    ScopeError,
    StructuralError,
)
from .learn_params import EmConfig, EmTrace, em_fit
from .learn_structure import StructureConfig, strudel_learn
from .utils import MISSING, laplace_normalize

# Root children of the head, as (sensitive value, head value), in order.
HEAD_CONTEXTS = ((1, 1), (1, 0), (0, 1), (0, 0))

# Cells of the label mechanism Pr(D=1 | D_f, S), as (d_f, s), in order.
DMECH_ORDER = ((1, 1), (1, 0), (0, 1), (0, 0))

HEAD_COMMENT_REGEX = re.compile(
    r"fair-head phi_s=(?P<phi_s>\S+) phi_df=(?P<phi_df>\S+) dmech=(?P<dmech>\S+) "
    r"kind=(?P<kind>\S+) sensitive=(?P<sensitive>\S+) label=(?P<label>\S+) "
    r"latent=(?P<latent>\S+)"
)

NO_VALUE = "-"

_log = logging.getLogger(__name__)

SubcircuitFactory = Callable[[int, int], Circuit | None]


@dataclass(frozen=True)
class FairSchema:
    """Roles of the variables of a fair model.

    Parameters
    ----------
    variables : `list` [`Variable`]
        All variables of the data schema.
    sensitive : `int`
        Id of the binary sensitive attribute S.
    label : `int`
        Id of the observed binary label D.
    latent : `int` or `None`
        Id of the binary latent fair decision D_f.
    features : `tuple` [`int`, ...]
        Ids of the remaining variables X.
    """

    variables: tuple[Variable, ...]
    sensitive: int
    label: int
    latent: int | None
    features: tuple[int, ...]

    def __post_init__(self) -> None:
        named = [self.sensitive, self.label] + (
            [] if self.latent is None else [self.latent]
        )
        if len(set(named)) != len(named) or set(named) & set(self.features):
            raise SchemaError("Sensitive, label, latent and features must be disjoint")
        for var_id in named:
            if self.variables[var_id].arity != 2:
                raise SchemaError(
                    f"Variable {self.variables[var_id].name!r} must be binary"
                )

    @classmethod
    def from_schema(cls, schema: Schema) -> "FairSchema":
        if schema.sensitive is None or schema.label is None:
            raise SchemaError("The schema needs a sensitive and a label column")
        return cls(
            variables=tuple(schema.variables),
            sensitive=schema.sensitive,
            label=schema.label,
            latent=schema.latent,
            features=tuple(schema.features),
        )

    def require_latent(self) -> int:
        if self.latent is None:
            raise SchemaError("The schema has no latent column")
        return self.latent


@dataclass(frozen=True)
class FairHeadParams:
    """Parameters of the fair head.

    Parameters
    ----------
    phi_s : `float`
        Pr(S=1).
    phi_df : `float`
        Pr(D_f=1), or Pr(D=1) for a head without latent variable.
    d_mech : `tuple` [`float`, `float`, `float`, `float`] or `None`
        Pr(D=1 | D_f, S) for (d_f, s) = (1,1), (1,0), (0,1), (0,0);
        None for a head without latent variable.
    """

    phi_s: float = 0.3
    phi_df: float = 0.5
    d_mech: tuple[float, float, float, float] | None = (0.8, 0.9, 0.1, 0.4)

    def __post_init__(self) -> None:
        values = [self.phi_s, self.phi_df] + list(self.d_mech or ())
        if not all(0.0 <= v <= 1.0 for v in values):
            raise ConfigError(f"Head parameters must be in [0, 1]: {values}")
        if self.d_mech is not None and len(self.d_mech) != 4:
            raise ConfigError("d_mech needs four values")

    def root_weights(self) -> np.ndarray:
        """The tied root weights, in `HEAD_CONTEXTS` order."""
        return np.array(
            [
                (self.phi_s if s else 1.0 - self.phi_s)
                * (self.phi_df if h else 1.0 - self.phi_df)
                for s, h in HEAD_CONTEXTS
            ]
        )

    def label_probability(self, s: int, d_f: int) -> float:
        assert self.d_mech is not None
        return float(self.d_mech[DMECH_ORDER.index((d_f, s))])


class FairHead(TiedGroup):
    """Tied root of a fair model.

    The four root weights are ``phi_s * phi_h`` etc., so the head
    variable H (D_f, or D without latent variable) is independent of S.

    Parameters
    ----------
    node : `int`
        Index of the root sum node.
    sensitive : `int`
        Id of S.
    head : `int`
        Id of H.
    label : `int` or `None`
        Id of D when H is latent; its mechanism leaves sit under the root
        products.
    """

    def __init__(self, node: int, sensitive: int, head: int, label: int | None) -> None:
        super().__init__(node)
        self.sensitive = sensitive
        self.head = head
        self.label = label

    def estimate(self, edge_flows: np.ndarray, alpha: float) -> np.ndarray | None:
        total = float(edge_flows.sum()) + 2.0 * alpha
        if total <= 0.0:
            return None
        phi_s = (edge_flows[0] + edge_flows[1] + alpha) / total
        phi_h = (edge_flows[0] + edge_flows[2] + alpha) / total
        return FairHeadParams(float(phi_s), float(phi_h), None).root_weights()

    def residual(self, weights: np.ndarray) -> float:
        phi_s = float(weights[0] + weights[1])
        phi_h = float(weights[0] + weights[2])
        phi_s = min(max(phi_s, 0.0), 1.0)
        phi_h = min(max(phi_h, 0.0), 1.0)
        expected = FairHeadParams(phi_s, phi_h, None).root_weights()
        return float(np.max(np.abs(weights - expected)))

    def label_leaves(self, circuit: Circuit) -> list[int]:
        """Indices of the label mechanism leaves, in `HEAD_CONTEXTS` order."""
        if self.label is None:
            return []
        root = circuit.nodes[self.node]
        assert isinstance(root, SumNode)
        leaves = []
        for child in root.children:
            product = circuit.nodes[child]
            if not isinstance(product, ProductNode):
                raise StructuralError(f"Head child {child} is not a product node")
            found = [
                c
                for c in product.children
                if isinstance(circuit.nodes[c], LeafNode)
                and not circuit.nodes[c].is_indicator
                and circuit.nodes[c].variable == self.label
            ]
            if len(found) != 1:
                raise StructuralError(f"Head child {child} has no label leaf")
            leaves.append(found[0])
        return leaves

    def params(self, circuit: Circuit) -> FairHeadParams:
        weights = circuit.nodes[self.node].weights
        phi_s = min(max(float(weights[0] + weights[1]), 0.0), 1.0)
        phi_h = min(max(float(weights[0] + weights[2]), 0.0), 1.0)
        d_mech = None
        leaves = self.label_leaves(circuit)
        if leaves:
            by_context = {
                context: float(circuit.nodes[leaf].probs[1])
                for context, leaf in zip(HEAD_CONTEXTS, leaves)
            }
            d_mech = tuple(by_context[(s, d_f)] for d_f, s in DMECH_ORDER)
        return FairHeadParams(phi_s, phi_h, d_mech)

    def set_params(self, circuit: Circuit, params: FairHeadParams) -> None:
        circuit.set_sum_weights(self.node, params.root_weights())
        leaves = self.label_leaves(circuit)
        if leaves and params.d_mech is not None:
            for (s, h), leaf in zip(HEAD_CONTEXTS, leaves):
                p = params.label_probability(s, h)
                circuit.set_leaf_probs(leaf, [1.0 - p, p])

    def initialize_from_prior(
        self,
        circuit: Circuit,
        cells: np.ndarray,
        weights: np.ndarray,
        epsilon: float,
    ) -> None:
        """Start from the empirical Pr(S=1) and Pr(D=1), and from a label
        mechanism that copies D_f into D with probability 1 - epsilon."""

        def frequency(column: np.ndarray) -> float:
            observed = column != MISSING
            total = float(weights[observed].sum())
            if total <= 0:
                return 0.5
            return float(weights[observed] @ (column[observed] == 1)) / total

        label = self.head if self.label is None else self.label
        d_mech = None
        if self.label is not None:
            d_mech = tuple(1.0 - epsilon if d_f else epsilon for d_f, _ in DMECH_ORDER)
        params = FairHeadParams(
            frequency(cells[:, self.sensitive]), frequency(cells[:, label]), d_mech
        )
        self.set_params(circuit, params)

    def snapshot(self, circuit: Circuit) -> tuple[float, ...] | None:
        if self.label is None:
            return None
        return self.params(circuit).d_mech


def _check_subcircuit(sub: Circuit, features: Sequence[int]) -> None:
    if set(sub.scope) != set(features):
        raise ScopeError(
            f"Feature sub-circuit scope {sorted(sub.scope)} differs from "
            f"the features {sorted(features)}"
        )


def _build_head(
    schema: FairSchema,
    head: int,
    latent: bool,
    factory: SubcircuitFactory,
    params: FairHeadParams,
) -> Circuit:
    builder = CircuitBuilder(schema.variables)
    children = []
    for s, h in HEAD_CONTEXTS:
        factors = [builder.indicator(schema.sensitive, s), builder.indicator(head, h)]
        if latent:
            p = params.label_probability(s, h) if params.d_mech else 0.5
            factors.append(builder.categorical(schema.label, [1.0 - p, p]))
        if schema.features:
            sub = factory(s, h)
            if sub is None:
                raise ScopeError(f"No feature sub-circuit for context s={s}, h={h}")
            _check_subcircuit(sub, schema.features)
            factors.append(builder.graft(sub))
        children.append(builder.product(factors))
    root = builder.sum(children, params.root_weights())
    builder.tie(FairHead(root, schema.sensitive, head, schema.label if latent else None))
    return builder.build(root)


def build_fair_pc(
    schema: FairSchema,
    factory: SubcircuitFactory,
    params: FairHeadParams | None = None,
) -> Circuit:
    """Fair circuit with a latent fair decision.

    The root mixes four products, one per (S, D_f) pair, each holding the
    indicators of S and D_f, a categorical leaf of D, and the pair's
    feature sub-circuit from ``factory(s, d_f)``. The root weights are
    tied so that D_f is independent of S.

    Raises
    ------
    ScopeError
        If a sub-circuit's scope is not the feature set.
    """
    return _build_head(
        schema, schema.require_latent(), True, factory, params or FairHeadParams()
    )


def build_nlat_pc(
    schema: FairSchema,
    factory: SubcircuitFactory,
    params: FairHeadParams | None = None,
) -> Circuit:
    """Fair circuit over (S, D, X) with D tied independent of S; the
    sub-circuits come from ``factory(s, d)``."""
    params = params or FairHeadParams()
    return _build_head(
        schema,
        schema.label,
        False,
        factory,
        FairHeadParams(params.phi_s, params.phi_df, None),
    )


def naive_bayes_factory(
    schema: FairSchema,
    data: DataTable | None = None,
    alpha: float = 1.0,
    context_variable: int | None = None,
) -> SubcircuitFactory:
    """Factory of fully factorized feature sub-circuits.

    Leaf parameters are smoothed frequencies among the rows of the
    context (S=s and ``context_variable``=h, default D), or uniform
    without data.
    """
    context_variable = schema.label if context_variable is None else context_variable

    def factory(s: int, h: int) -> Circuit | None:
        if not schema.features:
            return None
        rows = None
        if data is not None:
            rows = data.select(
                (data.cells[:, schema.sensitive] == s)
                & (data.cells[:, context_variable] == h)
            )
            if rows.num_rows == 0:
                _log.warning(f"Context s={s}, h={h} has no rows; using all rows")
                rows = data
        builder = CircuitBuilder(schema.variables)
        leaves = []
        for v in schema.features:
            arity = schema.variables[v].arity
            probs = np.full(arity, 1.0 / arity)
            if rows is not None:
                column = rows.cells[:, v]
                observed = column != MISSING
                counts = np.bincount(
                    column[observed], weights=rows.weights[observed], minlength=arity
                )
                estimate = laplace_normalize(counts, alpha)
                if estimate is not None:
                    probs = estimate
            leaves.append(builder.categorical(v, probs))
        root = leaves[0] if len(leaves) == 1 else builder.product(leaves)
        return builder.build(root)

    return factory


def build_two_nb(
    schema: FairSchema,
    params: FairHeadParams | None = None,
    data: DataTable | None = None,
) -> Circuit:
    """Naive Bayes over X given (S, D), with D tied independent of S."""
    return build_nlat_pc(schema, naive_bayes_factory(schema, data), params)


def build_lat_nb(
    schema: FairSchema,
    params: FairHeadParams | None = None,
    data: DataTable | None = None,
) -> Circuit:
    """Naive Bayes over X given (S, D_f) with a latent fair decision."""
    return build_fair_pc(schema, naive_bayes_factory(schema, data), params)


def learned_factory(
    schema: FairSchema,
    data: DataTable,
    config: StructureConfig | None = None,
    threads: int | None = None,
) -> SubcircuitFactory:
    """Factory of feature sub-circuits learned per (s, d) context.

    Context (s, h) learns from the rows with S=s and D=h; a latent head
    reuses the (s, d) sub-circuit for D_f=d. Contexts without usable rows
    fall back to all rows.
    """
    config = config or StructureConfig()
    cache: dict[tuple[int, int], Circuit] = {}

    def factory(s: int, h: int) -> Circuit | None:
        if not schema.features:
            return None
        if (s, h) not in cache:
            mask = (data.cells[:, schema.sensitive] == s) & (
                data.cells[:, schema.label] == h
            )
            rows = data.select(mask)
            try:
                if rows.num_rows == 0:
                    raise InsufficientDataError(f"Context s={s}, d={h} has no rows")
                result = strudel_learn(rows, config, schema.features, threads)
            except InsufficientDataError as e:
                _log.warning(f"{e}; learning this context from all rows")
                result = strudel_learn(data, config, schema.features, threads)
            cache[(s, h)] = result.circuit
        return cache[(s, h)]

    return factory


def build_model(
    kind: ModelKind,
    schema: FairSchema,
    factory: SubcircuitFactory,
    params: FairHeadParams | None = None,
) -> "FairModel":
    kind = ModelKind(kind)
    if kind.latent:
        circuit = build_fair_pc(schema, factory, params)
    else:
        circuit = build_nlat_pc(schema, factory, params)
    return FairModel(
        circuit=circuit,
        kind=kind,
        sensitive=schema.sensitive,
        label=schema.label,
        latent=schema.latent if kind.latent else None,
    )


@dataclass
class FairModel:
    """A learned model of one of the four families.

    Attributes
    ----------
    circuit : `Circuit`
        The circuit; its root carries the `FairHead` tied group.
    kind : `ModelKind`
        Model family.
    sensitive : `int`
        Id of S.
    label : `int`
        Id of D.
    latent : `int` or `None`
        Id of D_f for latent families.
    """

    circuit: Circuit
    kind: ModelKind
    sensitive: int
    label: int
    latent: int | None

    @property
    def target(self) -> int:
        """Variable whose probability is the model's prediction."""
        return self.latent if self.latent is not None else self.label

    @property
    def head(self) -> FairHead:
        group = self.circuit.tied_groups.get(self.circuit.root)
        if not isinstance(group, FairHead):
            raise StructuralError("The circuit root carries no fair head")
        return group

    @property
    def params(self) -> FairHeadParams:
        return self.head.params(self.circuit)

    def predict_proba(self, cells: np.ndarray) -> np.ndarray:
        """Pr(target=1 | observed cells) for every row.

        The label and latent columns are ignored.

        Raises
        ------
        ConditioningOnNullError
            If a row's evidence has probability zero.
        """
        evidence = np.array(cells, dtype=np.int64, copy=True)
        evidence[:, self.label] = MISSING
        if self.latent is not None:
            evidence[:, self.latent] = MISSING
        joint = evidence.copy()
        joint[:, self.target] = 1
        log_evidence = self.circuit.log_likelihoods(evidence)
        impossible = np.flatnonzero(~np.isfinite(log_evidence))
        if impossible.size:
            raise ConditioningOnNullError(
                f"Evidence of row {int(impossible[0])} has probability zero"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.exp(self.circuit.log_likelihoods(joint) - log_evidence)


def fit_model(
    kind: ModelKind,
    data: DataTable,
    em_config: EmConfig | None = None,
    structure_config: StructureConfig | None = None,
    init: InitMethod = InitMethod.PRIOR,
    monitor: DataTable | None = None,
    threads: int | None = None,
) -> tuple[FairModel, EmTrace]:
    """Learn a model: feature structures per context, then EM.

    Parameters
    ----------
    kind : `ModelKind`
        Model family; naive Bayes families skip structure learning.
    data : `DataTable`
        Training rows. Latent families need a latent column in the schema.
    em_config : `EmConfig`, optional
        EM settings.
    structure_config : `StructureConfig`, optional
        Structure search settings.
    init : `InitMethod`
        EM initialization.
    monitor : `DataTable`, optional
        Held-out rows whose log-likelihood is traced.
    threads : `int`, optional
        Worker threads.
    """
    kind = ModelKind(kind)
    em_config = em_config or EmConfig()
    schema = FairSchema.from_schema(data.schema)
    if kind.latent:
        schema.require_latent()
    if kind.naive_bayes:
        factory = naive_bayes_factory(schema, data, em_config.laplace_alpha)
    else:
        factory = learned_factory(schema, data, structure_config, threads)
    model = build_model(kind, schema, factory)
    _log.info(
        f"Built {kind.value} model with {model.circuit.num_nodes} nodes; running EM"
    )
    trace = em_fit(model.circuit, data, init, em_config, monitor, threads)
    return model, trace


def predict_fair(circuit: Circuit, e: dict[int, int]) -> float:
    """Pr(H=1 | e) for the head variable H of a fair circuit (D_f for
    latent families, D otherwise).

    Raises
    ------
    ScopeError
        If ``e`` assigns H.
    ConditioningOnNullError
        If ``e`` has probability zero.
    """
    group = circuit.tied_groups.get(circuit.root)
    if not isinstance(group, FairHead):
        raise StructuralError("The circuit root carries no fair head")
    if group.head in e:
        raise ScopeError("The evidence must not assign the predicted variable")
    return conditional(circuit, {group.head: 1}, e)


def _format_value(value: float) -> str:
    return repr(float(value))


def format_head_comment(model: FairModel) -> str:
    """Sidecar comment line describing the fair head."""
    params = model.params
    names = [v.name for v in model.circuit.variables]
    d_mech = (
        ",".join(_format_value(v) for v in params.d_mech)
        if params.d_mech is not None
        else NO_VALUE
    )
    latent = names[model.latent] if model.latent is not None else NO_VALUE
    return (
        f"fair-head phi_s={_format_value(params.phi_s)} "
        f"phi_df={_format_value(params.phi_df)} dmech={d_mech} "
        f"kind={model.kind.value} sensitive={names[model.sensitive]} "
        f"label={names[model.label]} latent={latent}"
    )


def parse_head_comment(
    comment: str, variables: Sequence[Variable]
) -> tuple[FairHeadParams, ModelKind, int, int, int | None]:
    """Parse a line written by `format_head_comment`.

    Returns
    -------
    params, kind, sensitive, label, latent
        Head parameters, model family and variable ids.

    Raises
    ------
    SchemaError
        If the line is malformed or names an unknown variable.
    """
    match = HEAD_COMMENT_REGEX.fullmatch(comment.strip())
    if match is None:
        raise SchemaError(f"Not a fair-head line: {comment!r}")
    ids = {v.name: v.id for v in variables}

    def var_id(name: str) -> int:
        if name not in ids:
            raise SchemaError(f"Unknown variable {name!r} in fair-head line")
        return ids[name]

    try:
        d_mech = (
            None
            if match["dmech"] == NO_VALUE
            else tuple(float(v) for v in match["dmech"].split(","))
        )
        params = FairHeadParams(float(match["phi_s"]), float(match["phi_df"]), d_mech)
        kind = ModelKind(match["kind"])
    except (ValueError, ConfigError) as e:
        raise SchemaError(f"Malformed fair-head line {comment!r}: {e}")
    latent = None if match["latent"] == NO_VALUE else var_id(match["latent"])
    return params, kind, var_id(match["sensitive"]), var_id(match["label"]), latent


def save_model(path: str | pathlib.Path, model: FairModel) -> None:
    """Write the circuit file with the fair-head comment."""
    save_circuit(path, model.circuit, [format_head_comment(model)])


def load_model(path: str | pathlib.Path) -> FairModel:
    """Read a circuit file written by `save_model` and re-register its
    fair head.

    Raises
    ------
    CircuitParseError
        If the file cannot be parsed or has no fair-head comment.
    """
    circuit, comments = load_circuit(path)
    heads = [c for c in comments if c.startswith("fair-head")]
    if not heads:
        raise CircuitParseError(1, f"{path} has no fair-head comment")
    _, kind, sensitive, label, latent = parse_head_comment(heads[0], circuit.variables)
    head = latent if latent is not None else label
    root = circuit.nodes[circuit.root]
    if not isinstance(root, SumNode) or len(root.children) != len(HEAD_CONTEXTS):
        raise StructuralError("The circuit root is not a fair head")
    circuit.tied_groups[circuit.root] = FairHead(
        circuit.root, sensitive, head, label if latent is not None else None
    )
    return FairModel(circuit, kind, sensitive, label, latent)
