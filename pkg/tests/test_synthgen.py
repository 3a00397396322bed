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
    HEAD_CONTEXTS,
    MAX_FEATURES,
    MIN_FEATURES,
    MISSING,
    ConfigError,
    FairHeadParams,
    LeafNode,
    Role,
    SumNode,
    SynthConfig,
    check_decomposable,
    check_deterministic,
    check_smooth,
    generate,
    load_csv,
    load_model,
    load_schema,
    model_discrimination,
    random_tree,
    random_tree_subcircuit,
    save_bundle,
    synthetic_schema,
)

S, D, D_F = 0, 1, 2


@pytest.fixture(scope="module")
def bundle():
    return generate(
        SynthConfig(n_features=4, n_samples=30000, n_test=30000, seed=11, allow_any=True)
    )


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_features=MIN_FEATURES - 1),
        dict(n_features=MAX_FEATURES + 1),
        dict(n_features=0, allow_any=True),
        dict(n_samples=-1),
        dict(n_test=-5),
        dict(head=FairHeadParams(d_mech=None)),
    ],
)
def test_config_errors(kwargs: dict) -> None:
    with pytest.raises(ConfigError):
        SynthConfig(**kwargs)


def test_config_defaults() -> None:
    config = SynthConfig()
    assert config.n_features == 15
    assert config.test_samples == config.n_samples == 100000
    assert SynthConfig(n_features=5, allow_any=True, n_test=7).test_samples == 7


def test_synthetic_schema() -> None:
    schema = synthetic_schema(3)
    assert schema.names == ["S", "D", "D_f", "X1", "X2", "X3"]
    assert (schema.sensitive, schema.label, schema.latent) == (S, D, D_F)
    assert schema.features == [3, 4, 5]
    assert schema.role_of(3) is Role.FEATURE


def test_random_tree() -> None:
    scope = [3, 5, 8, 9, 12, 20]
    tree = random_tree(scope, np.random.default_rng(1))
    assert tree.root == 3
    assert set(tree.parents) == set(scope)
    assert len(tree.edges) == len(scope) - 1
    # Every variable reaches the root.
    for v in scope:
        steps = 0
        while tree.parents[v] is not None:
            v = tree.parents[v]
            steps += 1
            assert steps < len(scope)
        assert v == tree.root
    again = random_tree(scope, np.random.default_rng(1))
    assert again.parents == tree.parents
    single = random_tree([7], np.random.default_rng(1))
    assert single.parents == {7: None}


def test_random_tree_parameters_are_smoothed() -> None:
    schema = synthetic_schema(5)
    circuit = random_tree_subcircuit(schema.variables, schema.features, 2)
    assert circuit.scope == frozenset(schema.features)
    for node in circuit.nodes:
        if isinstance(node, SumNode):
            params = node.weights
        elif isinstance(node, LeafNode) and not node.is_indicator:
            params = node.probs
        else:
            continue
        assert np.all(params >= 0.25 - 1e-12)
        assert np.all(params <= 0.75 + 1e-12)


def test_true_model(bundle) -> None:
    circuit = bundle.true_model.circuit
    assert check_smooth(circuit)
    assert check_decomposable(circuit)
    assert check_deterministic(circuit)
    assert abs(model_discrimination(bundle.true_model)) < 1e-12
    params = bundle.true_model.params
    assert (params.phi_s, params.phi_df) == pytest.approx((0.3, 0.5))
    assert params.d_mech == pytest.approx((0.8, 0.9, 0.1, 0.4))
    assert set(bundle.trees) == set(HEAD_CONTEXTS)


def test_latent_column(bundle) -> None:
    assert np.all(bundle.train.cells[:, D_F] == MISSING)
    assert np.all(bundle.test.cells[:, D_F] != MISSING)
    assert bundle.train.is_complete()


def test_statistics(bundle) -> None:
    cells = bundle.test.cells
    s, d, d_f = cells[:, S], cells[:, D], cells[:, D_F]
    assert np.mean(s == 1) == pytest.approx(0.3, abs=0.015)
    assert np.mean(d_f == 1) == pytest.approx(0.5, abs=0.015)
    # D_f is independent of S.
    assert np.mean(d_f[s == 1]) == pytest.approx(np.mean(d_f[s == 0]), abs=0.03)
    for (d_f_value, s_value), expected in zip(
        ((1, 1), (1, 0), (0, 1), (0, 0)), (0.8, 0.9, 0.1, 0.4)
    ):
        rows = (d_f == d_f_value) & (s == s_value)
        assert np.mean(d[rows]) == pytest.approx(expected, abs=0.03)


def test_deterministic() -> None:
    config = SynthConfig(n_features=2, n_samples=50, n_test=20, seed=3, allow_any=True)
    first = generate(config)
    second = generate(config)
    np.testing.assert_array_equal(first.train.cells, second.train.cells)
    np.testing.assert_array_equal(first.test.cells, second.test.cells)
    other = generate(
        SynthConfig(n_features=2, n_samples=50, n_test=20, seed=4, allow_any=True)
    )
    assert not np.array_equal(first.train.cells, other.train.cells)


def test_save_bundle(tmp_path) -> None:
    bundle = generate(
        SynthConfig(n_features=3, n_samples=40, n_test=30, seed=5, allow_any=True)
    )
    paths = save_bundle(bundle, tmp_path / "out")
    assert [p.name for p in paths] == [
        "train.csv",
        "test.csv",
        "schema.json",
        "true_circuit.fpc",
    ]
    schema = load_schema(paths[2])
    assert schema == bundle.schema
    train = load_csv(paths[0], schema)
    np.testing.assert_array_equal(train.cells, bundle.train.cells)
    test = load_csv(paths[1], schema)
    np.testing.assert_array_equal(test.cells, bundle.test.cells)
    model = load_model(paths[3])
    assert model.latent == D_F
    assert model.params.d_mech == pytest.approx(FairHeadParams().d_mech)
