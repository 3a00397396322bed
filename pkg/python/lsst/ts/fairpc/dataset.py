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
    "OTHER_CATEGORY",
    "Schema",
    "DataTable",
    "EqualFrequency",
    "Thresholds",
    "BinStrategy",
    "parse_bin_strategy",
    "load_csv",
    "save_csv",
    "load_schema",
    "save_schema",
    "discretize",
    "kfold",
    "mcar_corrupt",
    # `split` is used module-qualified; the package-level name is the
    # circuit split of learn_structure.
]

import dataclasses
import json
import logging
import pathlib
import re
from collections.abc import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import KFold, train_test_split

from .circuit import Variable
from .enums import Role
from .errors import (
    BinningError,
    ConfigError,
    CsvParseError,
    FoldError,
    SchemaError,
    VocabularyError,
)
from .utils import MISSING

# Bucket that rare categories merge into at ingestion.
OTHER_CATEGORY = "__other__"

MISSING_MARKERS = ("?", "")

LINE_REGEX = re.compile(r"line (?P<line>\d+)")

_log = logging.getLogger(__name__)


@dataclasses.dataclass
class Schema:
    """Variables of a table, with their roles and category vocabularies.

    Parameters
    ----------
    variables : `list` [`Variable`]
        Columns, in order; ``variables[i].id == i``.
    vocabularies : `list` [`list` [`str`]]
        Category labels of every variable; ``len(vocabularies[i])`` is
        the arity of variable ``i``.
    roles : `dict` [`int`, `Role`]
        Role of every variable that is not a plain feature.
    bin_edges : `dict` [`int`, `list` [`float`]]
        Interior bin edges of discretized variables.

    Raises
    ------
    SchemaError
        If the fields are inconsistent or a unique role is assigned twice.
    """

    variables: list[Variable]
    vocabularies: list[list[str]]
    roles: dict[int, Role] = dataclasses.field(default_factory=dict)
    bin_edges: dict[int, list[float]] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.vocabularies) != len(self.variables):
            raise SchemaError("One vocabulary per variable is required")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError(f"Duplicate column names in {names}")
        for i, (variable, vocabulary) in enumerate(
            zip(self.variables, self.vocabularies)
        ):
            if variable.id != i:
                raise SchemaError(f"Variable {variable.name!r} has id {variable.id}")
            if len(vocabulary) != variable.arity:
                raise SchemaError(
                    f"Variable {variable.name!r} has arity {variable.arity} "
                    f"but {len(vocabulary)} categories"
                )
        for role in (Role.SENSITIVE, Role.LABEL, Role.LATENT):
            holders = [i for i, r in self.roles.items() if r is role]
            if len(holders) > 1:
                raise SchemaError(f"Role {role.value} assigned to {holders}")
        for i, role in self.roles.items():
            if role in (Role.SENSITIVE, Role.LABEL, Role.LATENT) and (
                self.variables[i].arity != 2
            ):
                raise SchemaError(
                    f"{role.value} variable {self.variables[i].name!r} must be binary"
                )

    @classmethod
    def from_arities(
        cls,
        names: Sequence[str],
        arities: Sequence[int],
        roles: Mapping[str, Role] | None = None,
    ) -> "Schema":
        """Schema with categories labelled ``"0"``, ``"1"``, ...."""
        variables = [Variable(i, a, n) for i, (n, a) in enumerate(zip(names, arities))]
        vocabularies = [[str(k) for k in range(a)] for a in arities]
        schema = cls(variables, vocabularies)
        return schema.with_roles(roles or {})

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        """Id of the column called ``name``."""
        for variable in self.variables:
            if variable.name == name:
                return variable.id
        raise SchemaError(f"No column named {name!r}")

    def role_of(self, var_id: int) -> Role:
        return self.roles.get(var_id, Role.FEATURE)

    def _holder(self, role: Role) -> int | None:
        for i, r in self.roles.items():
            if r is role:
                return i
        return None

    @property
    def sensitive(self) -> int | None:
        return self._holder(Role.SENSITIVE)

    @property
    def label(self) -> int | None:
        return self._holder(Role.LABEL)

    @property
    def latent(self) -> int | None:
        return self._holder(Role.LATENT)

    @property
    def features(self) -> list[int]:
        return [v.id for v in self.variables if self.role_of(v.id) is Role.FEATURE]

    def with_roles(self, roles: Mapping[str, Role]) -> "Schema":
        """Copy with the named columns assigned the given roles."""
        new_roles = dict(self.roles)
        for name, role in roles.items():
            new_roles[self.index(name)] = Role(role)
        return dataclasses.replace(self, roles=new_roles)

    def with_latent(self, name: str) -> "Schema":
        """Copy with a binary latent column appended, unless one exists."""
        if self.latent is not None:
            return self
        if name in self.names:
            raise SchemaError(f"Column {name!r} already exists")
        variable = Variable(self.num_variables, 2, name)
        roles = dict(self.roles)
        roles[variable.id] = Role.LATENT
        return dataclasses.replace(
            self,
            variables=self.variables + [variable],
            vocabularies=self.vocabularies + [["0", "1"]],
            roles=roles,
        )

    def to_dict(self) -> dict:
        return {
            "variables": [
                {
                    "name": v.name,
                    "arity": v.arity,
                    "role": self.role_of(v.id).value,
                    "vocabulary": list(self.vocabularies[v.id]),
                    "bin_edges": self.bin_edges.get(v.id),
                }
                for v in self.variables
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Schema":
        try:
            entries = list(data["variables"])
            variables = [
                Variable(i, int(entry["arity"]), str(entry["name"]))
                for i, entry in enumerate(entries)
            ]
            vocabularies = [[str(c) for c in entry["vocabulary"]] for entry in entries]
            roles = {
                i: Role(entry.get("role", Role.FEATURE.value))
                for i, entry in enumerate(entries)
                if entry.get("role", Role.FEATURE.value) != Role.FEATURE.value
            }
            bin_edges = {
                i: [float(e) for e in entry["bin_edges"]]
                for i, entry in enumerate(entries)
                if entry.get("bin_edges") is not None
            }
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"Malformed schema document: {e!r}")
        return cls(variables, vocabularies, roles, bin_edges)


class DataTable:
    """Rows of category indices with per-cell missingness and row weights.

    Parameters
    ----------
    schema : `Schema`
        Column description.
    cells : `numpy.ndarray`
        Integer array (rows, variables); `MISSING` marks unobserved cells.
    weights : `numpy.ndarray`, optional
        Nonnegative row weights; default 1.

    Raises
    ------
    SchemaError
        If a cell is out of range or a weight is negative.
    """

    def __init__(
        self,
        schema: Schema,
        cells: np.ndarray,
        weights: np.ndarray | None = None,
    ) -> None:
        cells = np.asarray(cells, dtype=np.int64)
        if cells.ndim == 1 and cells.size == 0:
            cells = cells.reshape(0, schema.num_variables)
        if cells.ndim != 2 or cells.shape[1] != schema.num_variables:
            raise SchemaError(
                f"Cells of shape {cells.shape} do not fit "
                f"{schema.num_variables} columns"
            )
        arities = np.array([v.arity for v in schema.variables])
        if np.any(cells < MISSING) or np.any(cells >= arities):
            raise SchemaError("Cell value out of range")
        if weights is None:
            weights = np.ones(cells.shape[0])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (cells.shape[0],) or np.any(weights < 0):
            raise SchemaError("Weights must be one nonnegative value per row")
        self.schema = schema
        self.cells = cells
        self.weights = weights
        self.cells.flags.writeable = False
        self.weights.flags.writeable = False

    def __len__(self) -> int:
        return self.cells.shape[0]

    @property
    def num_rows(self) -> int:
        return self.cells.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def missing_fraction(self, columns: Iterable[int] | None = None) -> float:
        block = self.cells if columns is None else self.cells[:, list(columns)]
        return float(np.mean(block == MISSING)) if block.size else 0.0

    def is_complete(self, columns: Iterable[int] | None = None) -> bool:
        """Is every cell of ``columns`` (default: all non-latent) observed?"""
        if columns is None:
            columns = [
                v.id
                for v in self.schema.variables
                if self.schema.role_of(v.id) is not Role.LATENT
            ]
        columns = list(columns)
        return bool(np.all(self.cells[:, columns] != MISSING))

    def select(self, rows: np.ndarray | Sequence[int]) -> "DataTable":
        """Table of the given rows (indices or boolean mask)."""
        rows = np.asarray(rows)
        return DataTable(self.schema, self.cells[rows], self.weights[rows])

    def with_missing(self, columns: Iterable[int]) -> "DataTable":
        """Copy with the given columns blanked out."""
        cells = self.cells.copy()
        cells[:, list(columns)] = MISSING
        return DataTable(self.schema, cells, self.weights)

    def with_cells(self, cells: np.ndarray) -> "DataTable":
        return DataTable(self.schema, cells, self.weights)

    def with_schema(self, schema: Schema) -> "DataTable":
        """Copy under a schema that extends this one by trailing columns,
        which are all missing."""
        extra = schema.num_variables - self.schema.num_variables
        if extra < 0 or schema.names[: self.schema.num_variables] != self.schema.names:
            raise SchemaError("New schema does not extend the table's schema")
        pad = np.full((self.num_rows, extra), MISSING, dtype=np.int64)
        return DataTable(schema, np.hstack([self.cells, pad]), self.weights)


@dataclasses.dataclass(frozen=True)
class EqualFrequency:
    """Split a numeric column at its quantiles into ``bins`` bins."""

    bins: int


@dataclasses.dataclass(frozen=True)
class Thresholds:
    """Split a numeric column at fixed edges; value ``v`` falls in the
    first bin whose upper edge exceeds it (``<e`` then ``>=e``)."""

    edges: tuple[float, ...]


BinStrategy = EqualFrequency | Thresholds


def parse_bin_strategy(text: str) -> BinStrategy:
    """Parse ``"quantile:K"`` or a comma-separated list of edges."""
    text = text.strip()
    try:
        if text.startswith("quantile:"):
            return EqualFrequency(int(text.split(":", 1)[1]))
        return Thresholds(tuple(float(t) for t in text.split(",")))
    except ValueError:
        raise ConfigError(f"Cannot parse bin strategy {text!r}")


def _bin_labels(edges: Sequence[float]) -> list[str]:
    def fmt(value: float) -> str:
        return f"{value:g}"

    if not edges:
        return ["all"]
    labels = [f"<{fmt(edges[0])}"]
    labels += [f"[{fmt(lo)},{fmt(hi)})" for lo, hi in zip(edges[:-1], edges[1:])]
    labels.append(f">={fmt(edges[-1])}")
    return labels


def _assign_bins(values: np.ndarray, edges: Sequence[float]) -> np.ndarray:
    return np.searchsorted(np.asarray(edges, dtype=float), values, side="right")


def _bin_edges(values: np.ndarray, strategy: BinStrategy, name: str) -> list[float]:
    if isinstance(strategy, Thresholds):
        edges = sorted(set(strategy.edges))
        if not edges:
            raise BinningError(f"No thresholds given for column {name!r}")
        return edges
    distinct = np.unique(values)
    if strategy.bins < 2 or strategy.bins > distinct.size:
        raise BinningError(
            f"Cannot cut column {name!r} with {distinct.size} distinct values "
            f"into {strategy.bins} bins"
        )
    try:
        _, edges = pd.qcut(values, strategy.bins, retbins=True, duplicates="raise")
    except ValueError as e:
        raise BinningError(f"Column {name!r}: {e}")
    return [float(e) for e in edges[1:-1]]


def _parse_numbers(texts: Sequence[str], name: str) -> np.ndarray:
    numbers = pd.to_numeric(pd.Series(texts, dtype=object), errors="coerce")
    if numbers.isna().any():
        bad = texts[int(np.flatnonzero(numbers.isna().to_numpy())[0])]
        raise BinningError(f"Column {name!r} has non-numeric value {bad!r}")
    return numbers.to_numpy(dtype=float)


def discretize(table: DataTable, column: str, strategy: BinStrategy) -> DataTable:
    """Replace a numeric column by bin indices.

    The column's category labels are parsed as numbers. The interior bin
    edges are recorded in the schema, so discretizing the raw column again
    with ``Thresholds(edges)`` gives the same table.

    Raises
    ------
    BinningError
        If a label is not numeric or there are fewer distinct values than
        requested bins.
    """
    schema = table.schema
    var_id = schema.index(column)
    vocabulary = schema.vocabularies[var_id]
    raw = _parse_numbers(vocabulary, column)
    codes = table.cells[:, var_id]
    observed = codes != MISSING
    values = raw[codes[observed]]
    if values.size == 0:
        raise BinningError(f"Column {column!r} has no observed values")
    edges = _bin_edges(values, strategy, column)
    labels = _bin_labels(edges)
    cells = table.cells.copy()
    cells[observed, var_id] = _assign_bins(values, edges)
    variables = list(schema.variables)
    variables[var_id] = Variable(var_id, len(labels), column)
    vocabularies = list(schema.vocabularies)
    vocabularies[var_id] = labels
    bin_edges = dict(schema.bin_edges)
    bin_edges[var_id] = edges
    new_schema = dataclasses.replace(
        schema, variables=variables, vocabularies=vocabularies, bin_edges=bin_edges
    )
    return DataTable(new_schema, cells, table.weights)


def _read_frame(path: str | pathlib.Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            skipinitialspace=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise CsvParseError(None, f"{path} is empty")
    except pd.errors.ParserError as e:
        match = LINE_REGEX.search(str(e))
        line = int(match["line"]) if match else None
        raise CsvParseError(line, f"Ragged row in {path}: {e}")
    # Short rows are padded with NaN; real cells are always strings.
    short = np.flatnonzero(frame.isna().any(axis=1).to_numpy())
    if short.size:
        raise CsvParseError(
            int(short[0]) + 2, f"Ragged row in {path}: too few fields"
        )
    frame.columns = [str(name).strip() for name in frame.columns]
    for name in frame.columns:
        frame[name] = frame[name].str.strip()
    return frame


def _infer_vocabulary(texts: np.ndarray, min_count: int) -> list[str]:
    counts = pd.Series(texts).value_counts(sort=False)
    first_seen = list(pd.unique(texts))
    vocabulary = [c for c in first_seen if counts[c] >= min_count]
    if len(vocabulary) < len(first_seen) or len(vocabulary) < 2:
        vocabulary.append(OTHER_CATEGORY)
    while len(vocabulary) < 2:
        vocabulary.append(f"{OTHER_CATEGORY}{len(vocabulary)}")
    return vocabulary


def _encode(
    texts: np.ndarray,
    missing: np.ndarray,
    schema: Schema,
    var_id: int,
) -> np.ndarray:
    name = schema.variables[var_id].name
    vocabulary = schema.vocabularies[var_id]
    lookup = {label: k for k, label in enumerate(vocabulary)}
    codes = np.full(texts.size, MISSING, dtype=np.int64)
    edges = schema.bin_edges.get(var_id)
    for row in np.flatnonzero(~missing):
        text = texts[row]
        code = lookup.get(text)
        if code is None and edges is not None:
            try:
                code = int(_assign_bins(np.array([float(text)]), edges)[0])
            except ValueError:
                code = None
        if code is None:
            code = lookup.get(OTHER_CATEGORY)
        if code is None:
            raise VocabularyError(int(row) + 2, name, text)
        codes[row] = code
    return codes


def load_csv(
    path: str | pathlib.Path,
    schema: Schema | None = None,
    *,
    roles: Mapping[str, Role] | None = None,
    min_count: int = 10,
    bins: Mapping[str, BinStrategy] | None = None,
    missing_markers: Sequence[str] = MISSING_MARKERS,
) -> DataTable:
    """Read a CSV file with a header row.

    Parameters
    ----------
    path : `str` or `pathlib.Path`
        File to read (UTF-8, comma separated).
    schema : `Schema`, optional
        Frozen schema. Columns are matched by header name; latent columns
        may be absent from the file. If None, a schema is inferred with
        categories in first-seen order.
    roles : `dict` [`str`, `Role`], optional
        Roles for an inferred schema.
    min_count : `int`
        For an inferred schema, categories seen fewer times than this
        merge into `OTHER_CATEGORY`.
    bins : `dict` [`str`, `BinStrategy`], optional
        For an inferred schema, numeric columns to discretize.
    missing_markers : `list` [`str`]
        Cell texts that mean "unobserved".

    Raises
    ------
    CsvParseError
        If the file is empty or a row has the wrong number of fields.
    VocabularyError
        If a category is not in the frozen schema.
    SchemaError
        If a schema column is absent from the file.
    """
    frame = _read_frame(path)
    header = list(frame.columns)
    bins = dict(bins or {})
    if schema is None:
        vocabularies = []
        for name in header:
            texts = frame[name].to_numpy(dtype=object)
            observed = texts[~frame[name].isin(missing_markers).to_numpy()]
            if name in bins:
                vocabulary = list(pd.unique(observed))
                while len(vocabulary) < 2:
                    vocabulary.append(f"{OTHER_CATEGORY}{len(vocabulary)}")
            else:
                vocabulary = _infer_vocabulary(observed, min_count)
            vocabularies.append(vocabulary)
        variables = [
            Variable(i, len(vocabulary), name)
            for i, (name, vocabulary) in enumerate(zip(header, vocabularies))
        ]
        schema = Schema(variables, vocabularies).with_roles(roles or {})
        inferred = True
    else:
        inferred = False
        unknown = set(header) - set(schema.names)
        if unknown:
            raise SchemaError(f"Columns {sorted(unknown)} are not in the schema")

    cells = np.full((len(frame), schema.num_variables), MISSING, dtype=np.int64)
    for variable in schema.variables:
        if variable.name not in frame.columns:
            if schema.role_of(variable.id) is Role.LATENT:
                continue
            raise SchemaError(f"Column {variable.name!r} is missing from {path}")
        texts = frame[variable.name].to_numpy(dtype=object)
        missing = frame[variable.name].isin(missing_markers).to_numpy()
        cells[:, variable.id] = _encode(texts, missing, schema, variable.id)
    table = DataTable(schema, cells)
    if inferred:
        for name, strategy in bins.items():
            table = discretize(table, name, strategy)
    _log.debug(f"Read {table.num_rows} rows x {schema.num_variables} columns from {path}")
    return table


def save_csv(
    path: str | pathlib.Path,
    table: DataTable,
    missing_marker: str = "?",
) -> None:
    """Write a table as CSV with category labels.

    Latent columns are written only if some cell is observed.
    """
    schema = table.schema
    columns = {}
    for variable in schema.variables:
        codes = table.cells[:, variable.id]
        if schema.role_of(variable.id) is Role.LATENT and np.all(codes == MISSING):
            continue
        labels = np.array(schema.vocabularies[variable.id] + [missing_marker], dtype=object)
        columns[variable.name] = labels[codes]  # MISSING (-1) picks the marker
    pd.DataFrame(columns).to_csv(path, index=False, encoding="utf-8")


def save_schema(path: str | pathlib.Path, schema: Schema) -> None:
    """Write the schema sidecar (JSON)."""
    pathlib.Path(path).write_text(
        json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8"
    )


def load_schema(path: str | pathlib.Path) -> Schema:
    """Read a schema sidecar written by `save_schema`."""
    try:
        data = json.loads(pathlib.Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SchemaError(f"Cannot parse schema {path}: {e}")
    return Schema.from_dict(data)


def split(
    table: DataTable, test_fraction: float, seed: int
) -> tuple[DataTable, DataTable]:
    """Seeded random train/test split; row order is preserved within each
    part.

    A table of at least two rows always gets one test row and one
    training row.

    Raises
    ------
    FoldError
        If ``test_fraction`` is not strictly between 0 and 1.
    """
    if not 0.0 < test_fraction < 1.0:
        raise FoldError(f"test_fraction={test_fraction} must be in (0, 1)")
    rows = np.arange(table.num_rows)
    if table.num_rows < 2:
        return table, table.select(rows[:0])
    n_test = min(table.num_rows - 1, max(1, int(round(table.num_rows * test_fraction))))
    train_rows, test_rows = train_test_split(rows, test_size=n_test, random_state=seed)
    return table.select(np.sort(train_rows)), table.select(np.sort(test_rows))


def kfold(table: DataTable, k: int, seed: int) -> list[tuple[DataTable, DataTable]]:
    """Seeded k-fold partition into (train, test) pairs.

    The test parts partition the rows; fold sizes differ by at most one.

    Raises
    ------
    FoldError
        If ``k < 2`` or ``k`` exceeds the number of rows.
    """
    if k < 2 or k > table.num_rows:
        raise FoldError(f"Cannot make {k} folds from {table.num_rows} rows")
    folds = KFold(n_splits=k, shuffle=True, random_state=seed)
    return [
        (table.select(train_rows), table.select(np.sort(test_rows)))
        for train_rows, test_rows in folds.split(np.arange(table.num_rows))
    ]


def mcar_corrupt(
    table: DataTable,
    missing_fraction: float,
    seed: int,
    protected: Iterable[int] = (),
) -> DataTable:
    """Erase each observed, unprotected cell independently with
    probability ``missing_fraction``.

    Raises
    ------
    ConfigError
        If ``missing_fraction`` is not in [0, 1).
    """
    if not 0.0 <= missing_fraction < 1.0:
        raise ConfigError(f"missing_fraction={missing_fraction} must be in [0, 1)")
    rng = np.random.default_rng(seed)
    erase = rng.random(table.cells.shape) < missing_fraction
    erase[:, list(protected)] = False
    cells = np.where(erase, MISSING, table.cells)
    return table.with_cells(cells)
