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
    "DEFAULT_THRESHOLD",
    "REPORT_KEYS",
    "Classification",
    "RocCurve",
    "MotivationReport",
    "EvalReport",
    "log_likelihood",
    "classify",
    "accuracy",
    "f1",
    "discrimination_score",
    "model_discrimination",
    "roc_points",
    "motivation_check",
    "evaluate_model",
    "append_report",
    "save_roc",
]

import concurrent.futures
import json
import logging
import pathlib
import threading
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from sklearn import metrics

from .circuit import Circuit, CircuitBuilder, Variable, conditional
from .dataset import DataTable
from .errors import (
    GroupError,
    InsufficientDataError,
    LengthMismatchError,
    RowImpossibleError,
)
from .fairmodel import FairModel
from .flows import DEFAULT_CHUNK_SIZE, check_schema
from .learn_params import EmTrace
from .utils import MISSING, chunk_slices

DEFAULT_THRESHOLD = 0.5

REPORT_KEYS = (
    "model",
    "fold",
    "n_test",
    "loglik",
    "accuracy",
    "f1",
    "discrimination",
    "em_iterations",
    "phi_s",
    "phi_df",
    "d_mech",
    "seed",
    "config",
)

_log = logging.getLogger(__name__)

# Serializes report appends from concurrent runs of one process.
_report_lock = threading.Lock()


@dataclass
class Classification:
    """Per-row predictions.

    Attributes
    ----------
    probabilities : `numpy.ndarray`
        Pr(target=1 | evidence) per row.
    labels : `numpy.ndarray`
        1 where the probability is at least the threshold, else 0.
    """

    probabilities: np.ndarray
    labels: np.ndarray


@dataclass
class RocCurve:
    """Receiver operating characteristic points, from (0, 0) to (1, 1).

    ``thresholds[i]`` is the smallest probability labeled positive at
    point ``i``; the first point uses an infinite threshold.
    """

    false_positive_rates: np.ndarray
    true_positive_rates: np.ndarray
    thresholds: np.ndarray

    @property
    def area(self) -> float:
        return float(metrics.auc(self.false_positive_rates, self.true_positive_rates))


@dataclass(frozen=True)
class MotivationReport:
    """Expected score of a fixed predictor within each sensitive group,
    under the biased data distribution and under a fair one."""

    data_s1: float
    data_s0: float
    fair_s1: float
    fair_s0: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.data_s1, self.data_s0, self.fair_s1, self.fair_s0)


@dataclass
class EvalReport:
    """Metrics of one (model, fold) run; serialized as one JSON line."""

    model: str
    fold: int
    n_test: int
    loglik: float
    accuracy: float
    f1: float
    discrimination: float
    em_iterations: int
    phi_s: float
    phi_df: float
    d_mech: list[float] | None
    seed: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in REPORT_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _circuit_of(model: FairModel | Circuit) -> Circuit:
    return model.circuit if isinstance(model, FairModel) else model


def log_likelihood(model: FairModel | Circuit, table: DataTable) -> float:
    """Weighted mean log marginal probability per row, in nats.

    Missing cells are marginalized; the latent column is always
    marginalized.

    Raises
    ------
    RowImpossibleError
        If a row has probability zero.
    InsufficientDataError
        If the table has no weight.
    """
    circuit = _circuit_of(model)
    check_schema(circuit.variables, table)
    if table.total_weight <= 0:
        raise InsufficientDataError("Cannot average the log-likelihood of no rows")
    cells = table.cells.copy()
    latent = table.schema.latent
    if latent is not None:
        cells[:, latent] = MISSING
    log_probs = circuit.log_likelihoods(cells)
    impossible = np.flatnonzero(~np.isfinite(log_probs))
    if impossible.size:
        raise RowImpossibleError(int(impossible[0]))
    return float(table.weights @ log_probs / table.total_weight)


def classify(
    model: FairModel,
    table: DataTable,
    threshold: float = DEFAULT_THRESHOLD,
    threads: int | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> Classification:
    """Predict the model's target for every row.

    Latent families predict D_f, the others D. Evidence is every observed
    cell except D and D_f. A probability equal to ``threshold`` is
    labeled 1.

    Raises
    ------
    ConditioningOnNullError
        If a row's evidence has probability zero.
    """
    check_schema(model.circuit.variables, table)
    slices = chunk_slices(table.num_rows, chunk_size)
    probabilities = np.empty(table.num_rows)
    if len(slices) <= 1:
        probabilities[:] = model.predict_proba(table.cells)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(lambda rows: model.predict_proba(table.cells[rows]), slices)
            for rows, chunk in zip(slices, results):
                probabilities[rows] = chunk
    labels = (probabilities >= threshold).astype(np.int64)
    return Classification(probabilities=probabilities, labels=labels)


def _check_lengths(*arrays: np.ndarray) -> None:
    lengths = {len(a) for a in arrays}
    if len(lengths) > 1:
        raise LengthMismatchError(f"Lengths differ: {sorted(lengths)}")


def accuracy(predictions: Sequence[int], truths: Sequence[int]) -> float:
    """Fraction of predictions equal to the truth.

    Raises
    ------
    LengthMismatchError
        If the inputs differ in length.
    InsufficientDataError
        If they are empty.
    """
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    _check_lengths(predictions, truths)
    if predictions.size == 0:
        raise InsufficientDataError("Accuracy of no predictions")
    return float(metrics.accuracy_score(truths, predictions))


def f1(predictions: Sequence[int], truths: Sequence[int]) -> float:
    """F1 score of the positive class 1; 0 when precision or recall is
    undefined.

    Raises
    ------
    LengthMismatchError
        If the inputs differ in length.
    """
    predictions = np.asarray(predictions)
    truths = np.asarray(truths)
    _check_lengths(predictions, truths)
    if predictions.size == 0:
        return 0.0
    return float(metrics.f1_score(truths, predictions, pos_label=1, zero_division=0))


def discrimination_score(
    probabilities: Sequence[float], sensitive: Sequence[int]
) -> float:
    """Mean probability of the S=0 group minus that of the S=1 group.

    Raises
    ------
    LengthMismatchError
        If the inputs differ in length.
    GroupError
        If a group is empty.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    sensitive = np.asarray(sensitive)
    _check_lengths(probabilities, sensitive)
    means = []
    for group in (0, 1):
        members = probabilities[sensitive == group]
        if members.size == 0:
            raise GroupError(f"Group S={group} has no rows")
        means.append(float(members.mean()))
    return means[0] - means[1]


def model_discrimination(model: FairModel) -> float:
    """Pr(target=1 | S=0) - Pr(target=1 | S=1) from exact conditionals.

    Zero for every fair head, since the head ties the target independent
    of S.
    """
    return conditional(
        model.circuit, {model.target: 1}, {model.sensitive: 0}
    ) - conditional(model.circuit, {model.target: 1}, {model.sensitive: 1})


def roc_points(probabilities: Sequence[float], truths: Sequence[int]) -> RocCurve:
    """ROC curve of probabilities against binary truths.

    Raises
    ------
    LengthMismatchError
        If the inputs differ in length.
    GroupError
        If the truths lack either class.
    """
    probabilities = np.asarray(probabilities, dtype=float)
    truths = np.asarray(truths)
    _check_lengths(probabilities, truths)
    positives = int(np.sum(truths == 1))
    negatives = int(np.sum(truths == 0))
    if positives == 0 or negatives == 0:
        raise GroupError("A ROC curve needs both positive and negative truths")
    false_positive_rates, true_positive_rates, thresholds = metrics.roc_curve(
        truths, probabilities, pos_label=1, drop_intermediate=False
    )
    # The (0, 0) point labels nothing positive.
    thresholds[0] = np.inf
    return RocCurve(false_positive_rates, true_positive_rates, thresholds)


# Scores f(x, s) of the fixed predictor and Pr(X=1 | S=s) in the data.
_MOTIVATION_SCORES = {(1, 1): 0.8, (0, 1): 0.3, (1, 0): 0.7, (0, 0): 0.4}
_MOTIVATION_DATA = {1: 0.7, 0: 0.4}


def _group_circuit(px_given_s: dict[int, float]) -> Circuit:
    variables = [Variable(0, 2, "S"), Variable(1, 2, "X")]
    builder = CircuitBuilder(variables)
    children = [
        builder.product(
            [
                builder.indicator(0, s),
                builder.categorical(1, [1.0 - px_given_s[s], px_given_s[s]]),
            ]
        )
        for s in (0, 1)
    ]
    return builder.build(builder.sum(children, [0.5, 0.5]))


def _expected_score(circuit: Circuit, s: int) -> float:
    return sum(
        _MOTIVATION_SCORES[(x, s)] * conditional(circuit, {1: x}, {0: s})
        for x in (0, 1)
    )


def motivation_check() -> MotivationReport:
    """Expected score of a fixed predictor per group.

    Under the data distribution X depends on S and the predictor favors
    S=1; under a distribution where X is uniform and independent of S the
    two groups get the same expected score.
    """
    data = _group_circuit(_MOTIVATION_DATA)
    fair = _group_circuit({0: 0.5, 1: 0.5})
    return MotivationReport(
        data_s1=_expected_score(data, 1),
        data_s0=_expected_score(data, 0),
        fair_s1=_expected_score(fair, 1),
        fair_s0=_expected_score(fair, 0),
    )


def evaluate_model(
    model: FairModel,
    test: DataTable,
    truth_column: int,
    *,
    fold: int = 0,
    trace: EmTrace | None = None,
    seed: int = 0,
    config: dict | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    threads: int | None = None,
) -> tuple[EvalReport, Classification]:
    """Score a model on a test table.

    Accuracy and F1 use the rows where ``truth_column`` is observed;
    discrimination uses the rows where S is observed.

    Raises
    ------
    InsufficientDataError
        If no row has an observed truth.
    """
    classification = classify(model, test, threshold, threads)
    truths = test.cells[:, truth_column]
    known = truths != MISSING
    if not np.any(known):
        raise InsufficientDataError(
            f"Column {test.schema.variables[truth_column].name!r} has no observed values"
        )
    sensitive = test.cells[:, model.sensitive]
    grouped = sensitive != MISSING
    params = model.params
    report = EvalReport(
        model=model.kind.value,
        fold=fold,
        n_test=test.num_rows,
        loglik=log_likelihood(model, test),
        accuracy=accuracy(classification.labels[known], truths[known]),
        f1=f1(classification.labels[known], truths[known]),
        discrimination=discrimination_score(
            classification.probabilities[grouped], sensitive[grouped]
        ),
        em_iterations=trace.iterations if trace is not None else 0,
        phi_s=params.phi_s,
        phi_df=params.phi_df,
        d_mech=list(params.d_mech) if params.d_mech is not None else None,
        seed=seed,
        config=dict(config or {}),
    )
    _log.info(
        f"{report.model} fold {fold}: loglik={report.loglik:.4f} "
        f"accuracy={report.accuracy:.4f} f1={report.f1:.4f} "
        f"discrimination={report.discrimination:.4f}"
    )
    return report, classification


def append_report(path: str | pathlib.Path, report: EvalReport) -> None:
    """Append one JSON line to a report file."""
    line = report.to_json()
    with _report_lock, open(path, "a") as f:
        f.write(line + "\n")


def save_roc(
    path: str | pathlib.Path,
    probabilities: Sequence[float],
    truths: Sequence[int],
) -> RocCurve:
    """Write the (probability, truth) pairs and the ROC curve as CSV.

    ``path`` receives the pairs; the curve goes next to it with the
    suffix ``_curve`` added to the stem.
    """
    path = pathlib.Path(path)
    curve = roc_points(probabilities, truths)
    pd.DataFrame(
        {"probability": np.asarray(probabilities), "truth": np.asarray(truths)}
    ).to_csv(path, index=False)
    pd.DataFrame(
        {
            "false_positive_rate": curve.false_positive_rates,
            "true_positive_rate": curve.true_positive_rates,
            "threshold": curve.thresholds,
        }
    ).to_csv(path.with_name(f"{path.stem}_curve{path.suffix}"), index=False)
    return curve
