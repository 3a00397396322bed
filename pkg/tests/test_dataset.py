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

import dataclasses
import pathlib
import unittest

import numpy as np
import pytest
from lsst.ts.fairpc import (
    MISSING,
    OTHER_CATEGORY,
    ConfigError,
    CsvParseError,
    BinningError,
    DataTable,
    EqualFrequency,
    FoldError,
    Role,
    Schema,
    SchemaError,
    Thresholds,
    Variable,
    VocabularyError,
    dataset,
    discretize,
    kfold,
    load_csv,
    load_schema,
    mcar_corrupt,
    parse_bin_strategy,
    save_csv,
    save_schema,
)

TEST_CSV_DIR = pathlib.Path(__file__).parent.joinpath("data", "csv")
PEOPLE = TEST_CSV_DIR / "people.csv"


class LoadCsvTestCase(unittest.TestCase):
    def test_infer_schema(self) -> None:
        table = load_csv(
            PEOPLE, min_count=0, roles={"sex": Role.SENSITIVE, "label": Role.LABEL}
        )
        schema = table.schema
        assert schema.names == ["sex", "income", "age", "label"]
        assert schema.vocabularies[0] == ["f", "m"]
        assert schema.vocabularies[1] == ["high", "low"]
        # Categories are numbered in first-seen order.
        assert schema.vocabularies[3] == ["1", "0"]
        assert schema.sensitive == 0
        assert schema.label == 3
        assert schema.features == [1, 2]
        assert table.num_rows == 6
        np.testing.assert_array_equal(table.cells[:, 0], [0, 1, 0, 1, 0, 1])
        assert table.cells[2, 3] == MISSING
        assert table.cells[3, 2] == MISSING
        assert table.cells[4, 1] == MISSING
        assert table.missing_fraction() == pytest.approx(3 / 24)

    def test_rare_categories(self) -> None:
        table = load_csv(PEOPLE, min_count=3)
        assert table.schema.vocabularies[0] == ["f", "m"]
        assert table.schema.vocabularies[1] == ["low", OTHER_CATEGORY]
        np.testing.assert_array_equal(
            table.cells[:, 1], [1, 0, 0, 1, MISSING, 0]
        )

    def test_default_min_count(self) -> None:
        # Six rows: every category is rarer than the default threshold.
        table = load_csv(PEOPLE)
        assert table.schema.vocabularies[0] == [OTHER_CATEGORY, f"{OTHER_CATEGORY}1"]
        assert np.all(table.cells[:, 0] == 0)

    def test_thresholds(self) -> None:
        table = load_csv(PEOPLE, min_count=0, bins={"age": Thresholds((40.0,))})
        schema = table.schema
        assert schema.vocabularies[2] == ["<40", ">=40"]
        assert schema.bin_edges[2] == [40.0]
        np.testing.assert_array_equal(table.cells[:, 2], [0, 0, 1, MISSING, 1, 1])

    def test_quantiles(self) -> None:
        table = load_csv(PEOPLE, min_count=0, bins={"age": EqualFrequency(2)})
        assert table.schema.bin_edges[2] == [41.0]
        np.testing.assert_array_equal(table.cells[:, 2], [0, 0, 1, MISSING, 1, 1])

    def test_frozen_schema(self) -> None:
        schema = load_csv(PEOPLE, min_count=0, bins={"age": Thresholds((40.0,))}).schema
        with pytest.raises(VocabularyError) as info:
            load_csv(TEST_CSV_DIR / "people_unknown_category.csv", schema)
        assert info.value.row == 3
        assert info.value.column == "sex"
        assert info.value.value == "x"

    def test_frozen_schema_bins_new_values(self) -> None:
        schema = load_csv(PEOPLE, min_count=0, bins={"age": Thresholds((40.0,))}).schema
        variables = list(schema.variables)
        variables[0] = Variable(0, 3, "sex")
        vocabularies = [list(v) for v in schema.vocabularies]
        vocabularies[0].append("x")
        schema = dataclasses.replace(
            schema, variables=variables, vocabularies=vocabularies
        )
        table = load_csv(TEST_CSV_DIR / "people_unknown_category.csv", schema)
        # Ages 30 and 45 were never seen; they fall into the recorded bins.
        np.testing.assert_array_equal(table.cells[:, 2], [0, 1])
        np.testing.assert_array_equal(table.cells[:, 0], [0, 2])

    def test_latent_column_absent(self) -> None:
        schema = load_csv(PEOPLE, min_count=0).schema.with_latent("fair")
        table = load_csv(PEOPLE, schema)
        assert table.schema.latent == 4
        assert np.all(table.cells[:, 4] == MISSING)

    def test_ragged_row(self) -> None:
        with pytest.raises(CsvParseError) as info:
            load_csv(TEST_CSV_DIR / "people_ragged.csv")
        assert info.value.line == 4

    def test_empty_file(self) -> None:
        with pytest.raises(CsvParseError):
            load_csv(TEST_CSV_DIR / "empty.csv")

    def test_unknown_column(self) -> None:
        schema = Schema.from_arities(["sex", "income"], [2, 2])
        with pytest.raises(SchemaError):
            load_csv(PEOPLE, schema)


def test_save_and_load(tmp_path) -> None:
    table = load_csv(PEOPLE, min_count=0, bins={"age": Thresholds((40.0,))})
    table = table.with_schema(table.schema.with_latent("fair"))
    csv_path = tmp_path / "people.csv"
    schema_path = tmp_path / "schema.json"
    save_csv(csv_path, table)
    save_schema(schema_path, table.schema)
    # An all-missing latent column is not written.
    assert csv_path.read_text().splitlines()[0] == "sex,income,age,label"
    schema = load_schema(schema_path)
    assert schema == table.schema
    loaded = load_csv(csv_path, schema)
    np.testing.assert_array_equal(loaded.cells, table.cells)


def test_load_schema_errors(tmp_path) -> None:
    path = tmp_path / "schema.json"
    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_schema(path)
    path.write_text('{"variables": [{"name": "a"}]}')
    with pytest.raises(SchemaError):
        load_schema(path)


def test_parse_bin_strategy() -> None:
    assert parse_bin_strategy("quantile:4") == EqualFrequency(4)
    assert parse_bin_strategy("1, 2.5") == Thresholds((1.0, 2.5))
    with pytest.raises(ConfigError):
        parse_bin_strategy("quantile:x")
    with pytest.raises(ConfigError):
        parse_bin_strategy("low,high")


def test_discretize_errors() -> None:
    table = load_csv(PEOPLE, min_count=0)
    with pytest.raises(BinningError):
        discretize(table, "sex", Thresholds((1.0,)))
    with pytest.raises(BinningError):
        discretize(table, "age", EqualFrequency(6))


def test_table_errors() -> None:
    schema = Schema.from_arities(["a", "b"], [2, 3])
    with pytest.raises(SchemaError):
        DataTable(schema, np.array([[0, 3]]))
    with pytest.raises(SchemaError):
        DataTable(schema, np.array([[0, 1]]), np.array([-1.0]))
    with pytest.raises(SchemaError):
        DataTable(schema, np.zeros((2, 3)))


def test_schema_errors() -> None:
    with pytest.raises(SchemaError):
        Schema.from_arities(["a", "a"], [2, 2])
    with pytest.raises(SchemaError):
        Schema.from_arities(
            ["a", "b"], [2, 2], {"a": Role.SENSITIVE, "b": Role.SENSITIVE}
        )
    with pytest.raises(SchemaError):
        Schema.from_arities(["a"], [3], {"a": Role.LABEL})


def large_table(num_rows: int = 1000) -> DataTable:
    rng = np.random.default_rng(0)
    schema = Schema.from_arities(["a", "b", "c"], [2, 3, 4])
    cells = np.column_stack(
        [rng.integers(0, arity, num_rows) for arity in (2, 3, 4)]
    )
    return DataTable(schema, cells)


def test_kfold() -> None:
    table = DataTable(
        Schema.from_arities(["a"], [10]), np.arange(10).reshape(10, 1)
    )
    folds = kfold(table, 3, seed=4)
    assert sorted(test.num_rows for _, test in folds) == [3, 3, 4]
    seen = np.concatenate([test.cells[:, 0] for _, test in folds])
    assert sorted(seen) == list(range(10))
    for train, test in folds:
        assert train.num_rows + test.num_rows == 10
        assert not set(train.cells[:, 0]) & set(test.cells[:, 0])
    again = kfold(table, 3, seed=4)
    for (_, first), (_, second) in zip(folds, again):
        np.testing.assert_array_equal(first.cells, second.cells)
    with pytest.raises(FoldError):
        kfold(table, 1, seed=0)
    with pytest.raises(FoldError):
        kfold(table, 11, seed=0)


def test_split() -> None:
    table = large_table(100)
    train, test = dataset.split(table, 0.3, seed=1)
    assert (train.num_rows, test.num_rows) == (70, 30)
    with pytest.raises(FoldError):
        dataset.split(table, 0.0, seed=1)


def test_split_small_tables() -> None:
    def indexed(num_rows: int) -> DataTable:
        return DataTable(
            Schema.from_arities(["a"], [max(num_rows, 2)]),
            np.arange(num_rows).reshape(num_rows, 1),
        )

    train, test = dataset.split(indexed(2), 0.2, seed=0)
    assert (train.num_rows, test.num_rows) == (1, 1)
    assert sorted([*train.cells[:, 0], *test.cells[:, 0]]) == [0, 1]

    train, test = dataset.split(indexed(5), 0.9, seed=0)
    assert (train.num_rows, test.num_rows) == (1, 4)

    train, test = dataset.split(indexed(1), 0.5, seed=0)
    assert (train.num_rows, test.num_rows) == (1, 0)

    train, test = dataset.split(indexed(10), 0.4, seed=3)
    again = dataset.split(indexed(10), 0.4, seed=3)
    np.testing.assert_array_equal(test.cells, again[1].cells)
    assert list(test.cells[:, 0]) == sorted(test.cells[:, 0])


def test_mcar_corrupt() -> None:
    table = large_table()
    corrupted = mcar_corrupt(table, 0.5, seed=2, protected=[0])
    assert corrupted.missing_fraction([0]) == 0.0
    assert corrupted.missing_fraction([1, 2]) == pytest.approx(0.5, abs=0.05)
    observed = corrupted.cells != MISSING
    np.testing.assert_array_equal(corrupted.cells[observed], table.cells[observed])
    again = mcar_corrupt(table, 0.5, seed=2, protected=[0])
    np.testing.assert_array_equal(again.cells, corrupted.cells)
    assert mcar_corrupt(table, 0.0, seed=2).missing_fraction() == 0.0
    with pytest.raises(ConfigError):
        mcar_corrupt(table, 1.0, seed=2)
