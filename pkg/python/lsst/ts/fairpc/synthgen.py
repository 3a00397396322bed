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
    "MIN_FEATURES",
    "MAX_FEATURES",
    "SENSITIVE_NAME",
    "LABEL_NAME",
    "LATENT_NAME",
    "SynthConfig",
    "SynthBundle",
    "synthetic_schema",
    "random_tree",
    "random_tree_parameters",
    "random_tree_subcircuit",
    "generate",
    "save_bundle",
]

import logging
import pathlib
from collections.abc import Sequence
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .circuit import Circuit, Variable, sample
from .dataset import DataTable, Schema, save_csv, save_schema
from .enums import ModelKind, Role
from .errors import ConfigError
from .fairmodel import (
    HEAD_CONTEXTS,
    FairHeadParams,
    FairModel,
    FairSchema,
    build_fair_pc,
    save_model,
)
from .learn_structure import TreeStructure, tree_circuit

MIN_FEATURES = 10
MAX_FEATURES = 30

SENSITIVE_NAME = "S"
LABEL_NAME = "D"
LATENT_NAME = "D_f"

TRAIN_FILE = "train.csv"
TEST_FILE = "test.csv"
SCHEMA_FILE = "schema.json"
TRUE_CIRCUIT_FILE = "true_circuit.fpc"

_log = logging.getLogger(__name__)


@dataclass
class SynthConfig:
    """Settings of the synthetic generator.

    Parameters
    ----------
    n_features : `int`
        Number of binary features.
    n_samples : `int`
        Training rows.
    n_test : `int`, optional
        Test rows; default ``n_samples``.
    seed : `int`
        Root seed of all random streams.
    head : `FairHeadParams`
        Parameters of the true fair head.
    allow_any : `bool`
        Accept a feature count outside [`MIN_FEATURES`, `MAX_FEATURES`].
    """

    n_features: int = 15
    n_samples: int = 100000
    n_test: int | None = None
    seed: int = 0
    head: FairHeadParams = field(default_factory=FairHeadParams)
    allow_any: bool = False

    def __post_init__(self) -> None:
        if self.n_features < 1:
            raise ConfigError(f"n_features={self.n_features} must be >= 1")
        if not self.allow_any and not MIN_FEATURES <= self.n_features <= MAX_FEATURES:
            raise ConfigError(
                f"n_features={self.n_features} is outside "
                f"[{MIN_FEATURES}, {MAX_FEATURES}]"
            )
        if self.n_samples < 0 or (self.n_test is not None and self.n_test < 0):
            raise ConfigError("Sample counts must be >= 0")
        if self.head.d_mech is None:
            raise ConfigError("The true head needs a label mechanism")

    @property
    def test_samples(self) -> int:
        return self.n_samples if self.n_test is None else self.n_test


@dataclass
class SynthBundle:
    """Output of `generate`.

    Attributes
    ----------
    true_model : `FairModel`
        The generating fair model.
    trees : `dict` [`tuple` [`int`, `int`], `TreeStructure`]
        Feature tree of every (s, d_f) context.
    train : `DataTable`
        Training rows; the latent column is missing.
    test : `DataTable`
        Test rows, with the latent column.
    """

    true_model: FairModel
    trees: dict[tuple[int, int], TreeStructure]
    train: DataTable
    test: DataTable

    @property
    def schema(self) -> Schema:
        return self.train.schema


def synthetic_schema(n_features: int) -> Schema:
    """Binary schema S, D, D_f, X1..Xn with roles assigned."""
    names = [SENSITIVE_NAME, LABEL_NAME, LATENT_NAME]
    names += [f"X{i}" for i in range(1, n_features + 1)]
    return Schema.from_arities(
        names,
        [2] * len(names),
        {SENSITIVE_NAME: Role.SENSITIVE, LABEL_NAME: Role.LABEL, LATENT_NAME: Role.LATENT},
    )


def random_tree(scope: Sequence[int], rng: np.random.Generator) -> TreeStructure:
    """Uniformly random spanning tree over ``scope`` (random Prüfer
    sequence), rooted at the lowest id."""
    scope = sorted(scope)
    n = len(scope)
    edges: list[tuple[int, int]] = []
    if n >= 2:
        sequence = [int(s) for s in rng.integers(0, n, size=n - 2)]
        tree = nx.from_prufer_sequence(sequence)
        edges = [(scope[a], scope[b]) for a, b in tree.edges]
    return TreeStructure.from_edges(scope, edges, scope[0])


def _smoothed_draw(rng: np.random.Generator, arity: int) -> np.ndarray:
    # Dirichlet(1) draw used as |V| pseudo-observations, plus one count
    # per value.
    return (rng.dirichlet(np.ones(arity)) * arity + 1.0) / (2.0 * arity)


def random_tree_parameters(
    variables: Sequence[Variable], tree: TreeStructure, rng: np.random.Generator
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Random root marginal and conditional tables for ``tree``."""
    root_probs = _smoothed_draw(rng, variables[tree.root].arity)
    cpts = {}
    for v in sorted(tree.parents):
        parent = tree.parents[v]
        if parent is None:
            continue
        cpts[v] = np.array(
            [
                _smoothed_draw(rng, variables[v].arity)
                for _ in range(variables[parent].arity)
            ]
        )
    return root_probs, cpts


def random_tree_subcircuit(
    variables: Sequence[Variable],
    scope: Sequence[int],
    seed: int | np.random.Generator | None,
) -> Circuit:
    """Random tree-shaped distribution over ``scope`` compiled to a
    circuit."""
    rng = np.random.default_rng(seed)
    tree = random_tree(scope, rng)
    root_probs, cpts = random_tree_parameters(variables, tree, rng)
    return tree_circuit(variables, tree, root_probs, cpts)


def generate(config: SynthConfig) -> SynthBundle:
    """Build a true fair model and sample training and test rows from it.

    Three independent streams are spawned from the seed: one for the
    model, one for the training rows and one for the test rows.
    """
    circuit_seed, train_seed, test_seed = np.random.SeedSequence(config.seed).spawn(3)
    schema = synthetic_schema(config.n_features)
    fair_schema = FairSchema.from_schema(schema)
    rng = np.random.default_rng(circuit_seed)
    trees = {}
    subcircuits = {}
    for context in HEAD_CONTEXTS:
        tree = random_tree(fair_schema.features, rng)
        root_probs, cpts = random_tree_parameters(schema.variables, tree, rng)
        trees[context] = tree
        subcircuits[context] = tree_circuit(schema.variables, tree, root_probs, cpts)
    circuit = build_fair_pc(
        fair_schema, lambda s, h: subcircuits[(s, h)], config.head
    )
    model = FairModel(
        circuit=circuit,
        kind=ModelKind.FairPC,
        sensitive=fair_schema.sensitive,
        label=fair_schema.label,
        latent=fair_schema.latent,
    )
    train_cells = sample(circuit, config.n_samples, np.random.default_rng(train_seed))
    test_cells = sample(circuit, config.test_samples, np.random.default_rng(test_seed))
    _log.info(
        f"Generated {config.n_samples} training and {config.test_samples} test "
        f"rows over {config.n_features} features"
    )
    return SynthBundle(
        true_model=model,
        trees=trees,
        train=DataTable(schema, train_cells).with_missing([fair_schema.require_latent()]),
        test=DataTable(schema, test_cells),
    )


def save_bundle(bundle: SynthBundle, out_dir: str | pathlib.Path) -> list[pathlib.Path]:
    """Write train/test CSVs, the schema sidecar and the true circuit.

    Returns
    -------
    paths : `list` [`pathlib.Path`]
        The files written.
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [
        out_dir / TRAIN_FILE,
        out_dir / TEST_FILE,
        out_dir / SCHEMA_FILE,
        out_dir / TRUE_CIRCUIT_FILE,
    ]
    save_csv(paths[0], bundle.train)
    save_csv(paths[1], bundle.test)
    save_schema(paths[2], bundle.schema)
    save_model(paths[3], bundle.true_model)
    return paths
