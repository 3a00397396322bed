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
    "EXIT_OK",
    "EXIT_RUNTIME_ERROR",
    "EXIT_USAGE_ERROR",
    "TYING_TOLERANCE",
    "make_parser",
    "audit_model",
    "run_fairpc",
    "cmd_synth",
    "cmd_learn",
    "cmd_eval",
    "cmd_check",
    "cmd_cv",
    "cmd_missing",
]

import argparse
import json
import logging
import pathlib
from collections.abc import Sequence

from .circuit import check_decomposable, check_deterministic, check_smooth
from .config import RunConfig, load_config
from .dataset import DataTable, Schema, kfold, load_csv, load_schema, mcar_corrupt
from .enums import InitMethod, ModelKind, Role
from .errors import ConfigError, UnverifiableError
from .evaluation import append_report, evaluate_model, model_discrimination, save_roc
from .fairmodel import FairModel, fit_model, load_model, save_model
from .learn_params import em_fit
from .synthgen import LATENT_NAME, generate, save_bundle

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2

# Largest tolerated deviation of the head weights from product form.
TYING_TOLERANCE = 1e-9

TRUTH_COLUMNS = ("df", "d")

DEFAULT_MISSING_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 0.9)

_log = logging.getLogger(__name__)


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser that raises instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _add_em_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("expectation maximization")
    group.add_argument("--max-iterations", type=int, help="Upper bound on EM iterations.")
    group.add_argument("--tolerance", type=float, help="Relative log-likelihood tolerance.")
    group.add_argument("--alpha", type=float, help="Laplace pseudocount.")
    group.add_argument(
        "--epsilon", type=float, help="Softening of the prior label mechanism."
    )
    group.add_argument(
        "--init",
        choices=[m.value for m in InitMethod if m is not InitMethod.KEEP],
        default=InitMethod.PRIOR.value,
        help="How EM parameters start.",
    )


def _add_structure_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("structure learning")
    group.add_argument("--max-splits", type=int, help="Upper bound on split operations.")
    group.add_argument(
        "--patience", type=int, help="Non-improving splits tolerated before stopping."
    )
    group.add_argument(
        "--validation-fraction",
        type=float,
        help="Share of training rows held out to stop splitting.",
    )


def _add_data_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("data")
    group.add_argument("--schema", type=pathlib.Path, help="Schema sidecar (JSON).")
    group.add_argument(
        "--sensitive", help="Sensitive column name, for a schema inferred from the CSV."
    )
    group.add_argument(
        "--label", help="Label column name, for a schema inferred from the CSV."
    )
    group.add_argument(
        "--min-count",
        type=int,
        help="Rarer categories are merged, for a schema inferred from the CSV.",
    )


def make_parser() -> argparse.ArgumentParser:
    common = _ArgumentParser(add_help=False)
    common.add_argument("--config", type=pathlib.Path, help="YAML configuration file.")
    common.add_argument("--seed", type=int, help="Seed of every random choice.")
    common.add_argument(
        "--threads", type=int, help="Worker threads; default available parallelism."
    )
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level.",
    )
    parser = _ArgumentParser(
        prog="run_fairpc",
        description="Learn and evaluate fair probabilistic circuits.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    synth = subparsers.add_parser(
        "synth", parents=[common], help="Generate synthetic data."
    )
    synth.add_argument("--features", type=int, help="Number of binary features.")
    synth.add_argument("--samples", type=int, help="Training rows.")
    synth.add_argument("--test-samples", type=int, help="Test rows.")
    synth.add_argument(
        "--allow-any",
        action="store_true",
        default=None,
        help="Accept any feature count.",
    )
    synth.add_argument("--out", type=pathlib.Path, required=True, help="Output directory.")

    learn = subparsers.add_parser(
        "learn", parents=[common], help="Learn a model from a CSV."
    )
    learn.add_argument(
        "--model", choices=[k.value for k in ModelKind], required=True, help="Model family."
    )
    learn.add_argument("--train", type=pathlib.Path, required=True, help="Training CSV.")
    learn.add_argument(
        "--monitor", type=pathlib.Path, help="CSV whose log-likelihood is traced."
    )
    learn.add_argument("--out", type=pathlib.Path, required=True, help="Model file.")
    learn.add_argument(
        "--trace-out", type=pathlib.Path, help="Trace JSON; default next to the model."
    )
    _add_data_arguments(learn)
    _add_em_arguments(learn)
    _add_structure_arguments(learn)

    evaluate = subparsers.add_parser(
        "eval", parents=[common], help="Evaluate a model on a CSV."
    )
    evaluate.add_argument("--model-file", type=pathlib.Path, required=True)
    evaluate.add_argument("--test", type=pathlib.Path, required=True, help="Test CSV.")
    evaluate.add_argument(
        "--truth-col",
        choices=TRUTH_COLUMNS,
        default="df",
        help="Score against the fair label D_f or the observed label D.",
    )
    evaluate.add_argument(
        "--report", type=pathlib.Path, required=True, help="JSON-lines report to append."
    )
    evaluate.add_argument("--fold", type=int, default=0, help="Fold id for the report.")
    evaluate.add_argument("--threshold", type=float, default=0.5)
    evaluate.add_argument(
        "--roc-out", type=pathlib.Path, help="CSV of (probability, truth) pairs."
    )
    _add_data_arguments(evaluate)

    check = subparsers.add_parser(
        "check", parents=[common], help="Audit a model file."
    )
    check.add_argument("--model-file", type=pathlib.Path, required=True)

    cv = subparsers.add_parser(
        "cv", parents=[common], help="Cross-validate model families on a CSV."
    )
    cv.add_argument("--data", type=pathlib.Path, required=True, help="Input CSV.")
    cv.add_argument(
        "--models",
        nargs="+",
        choices=[k.value for k in ModelKind],
        default=[k.value for k in ModelKind],
    )
    cv.add_argument("--folds", type=int, default=10)
    cv.add_argument("--truth-col", choices=TRUTH_COLUMNS, default="d")
    cv.add_argument("--report", type=pathlib.Path, required=True)
    _add_data_arguments(cv)
    _add_em_arguments(cv)
    _add_structure_arguments(cv)

    missing = subparsers.add_parser(
        "missing", parents=[common], help="Refit under increasing MCAR missingness."
    )
    missing.add_argument(
        "--model", choices=[k.value for k in ModelKind], default=ModelKind.FairPC.value
    )
    missing.add_argument("--train", type=pathlib.Path, required=True)
    missing.add_argument("--test", type=pathlib.Path, required=True)
    missing.add_argument(
        "--fractions",
        type=float,
        nargs="+",
        default=list(DEFAULT_MISSING_FRACTIONS),
        help="Share of feature cells erased, one run each.",
    )
    missing.add_argument("--truth-col", choices=TRUTH_COLUMNS, default="df")
    missing.add_argument("--report", type=pathlib.Path, required=True)
    _add_data_arguments(missing)
    _add_em_arguments(missing)
    _add_structure_arguments(missing)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    def get(name: str) -> object:
        return getattr(args, name, None)

    return {
        "em": {
            "max_iterations": get("max_iterations"),
            "ll_tolerance": get("tolerance"),
            "laplace_alpha": get("alpha"),
            "prior_epsilon": get("epsilon"),
            "seed": get("seed"),
        },
        "structure": {
            "max_splits": get("max_splits"),
            "patience": get("patience"),
            "validation_fraction": get("validation_fraction"),
            "seed": get("seed"),
        },
        "synth": {
            "n_features": get("features"),
            "n_samples": get("samples"),
            "n_test": get("test_samples"),
            "seed": get("seed"),
            "allow_any": get("allow_any"),
        },
        "data": {"min_category_count": get("min_count")},
    }


def _seed(config: RunConfig) -> int:
    return config.em.seed


def _load_table(
    args: argparse.Namespace,
    path: pathlib.Path,
    config: RunConfig,
    schema: Schema | None = None,
) -> DataTable:
    """Read a CSV with the sidecar schema, or infer one from the roles
    given on the command line. The result always has a latent column."""
    if schema is None and getattr(args, "schema", None) is not None:
        schema = load_schema(args.schema)
    markers = (config.data.missing_marker, "")
    if schema is not None:
        table = load_csv(path, schema, missing_markers=markers)
    else:
        if not args.sensitive or not args.label:
            raise ConfigError("Without --schema, --sensitive and --label are required")
        table = load_csv(
            path,
            roles={args.sensitive: Role.SENSITIVE, args.label: Role.LABEL},
            min_count=config.data.min_category_count,
            bins=config.data.bins,
            missing_markers=markers,
        )
    if table.schema.latent is None:
        table = table.with_schema(table.schema.with_latent(LATENT_NAME))
    return table


def _truth_column(schema: Schema, truth: str) -> int:
    column = schema.latent if truth == "df" else schema.label
    if column is None:
        raise ConfigError(f"The data has no {truth!r} column")
    return column


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    bundle = generate(config.synth)
    paths = save_bundle(bundle, args.out)
    _log.info(f"Wrote {', '.join(str(p) for p in paths)}")
    return EXIT_OK


def cmd_learn(args: argparse.Namespace, config: RunConfig) -> int:
    train = _load_table(args, args.train, config)
    monitor = (
        _load_table(args, args.monitor, config, train.schema)
        if args.monitor is not None
        else None
    )
    model, trace = fit_model(
        ModelKind(args.model),
        train,
        config.em,
        config.structure,
        InitMethod(args.init),
        monitor,
        args.threads,
    )
    save_model(args.out, model)
    trace_path = args.trace_out or args.out.with_name(f"{args.out.name}.trace.json")
    trace_path.write_text(
        json.dumps(
            {"model": model.kind.value, "trace": trace.to_dict(), "config": config.to_dict()},
            indent=2,
        )
        + "\n"
    )
    _log.info(f"Wrote model {args.out} and trace {trace_path}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model_file)
    test = _load_table(args, args.test, config)
    truth_column = _truth_column(test.schema, args.truth_col)
    if test.missing_fraction([truth_column]) == 1.0:
        raise ConfigError(
            f"Column {test.schema.variables[truth_column].name!r} is absent from {args.test}"
        )
    report, classification = evaluate_model(
        model,
        test,
        truth_column,
        fold=args.fold,
        seed=_seed(config),
        config={"truth_col": args.truth_col, "model_file": str(args.model_file)},
        threshold=args.threshold,
        threads=args.threads,
    )
    append_report(args.report, report)
    if args.roc_out is not None:
        known = test.cells[:, truth_column] >= 0
        save_roc(
            args.roc_out,
            classification.probabilities[known],
            test.cells[known, truth_column],
        )
    return EXIT_OK


def audit_model(model: FairModel) -> dict:
    """Structural audit of a model as plain data."""
    circuit = model.circuit
    head = model.head
    residual = head.residual(circuit.nodes[head.node].weights)
    try:
        deterministic = check_deterministic(circuit)
    except UnverifiableError as e:
        _log.warning(f"Determinism is unverifiable: {e}")
        deterministic = False
    return {
        "smooth": check_smooth(circuit),
        "decomposable": check_decomposable(circuit),
        "deterministic": deterministic,
        "normalization_violations": circuit.normalization_violations(),
        "tying_residual": residual,
        "model_discrimination": model_discrimination(model),
    }


def cmd_check(args: argparse.Namespace, config: RunConfig) -> int:
    model = load_model(args.model_file)
    audit = audit_model(model)
    print(json.dumps(audit, indent=2))
    failures = [
        name for name in ("smooth", "decomposable", "deterministic") if not audit[name]
    ]
    for node in audit["normalization_violations"]:
        _log.error(f"Node {node} has parameters that are not normalized")
    if audit["normalization_violations"]:
        failures.append("normalization")
    if audit["tying_residual"] > TYING_TOLERANCE:
        failures.append("tying")
    if failures:
        _log.error(f"{args.model_file} failed checks: {failures}")
        return EXIT_RUNTIME_ERROR
    _log.info(f"{args.model_file} passed all checks")
    return EXIT_OK


def cmd_cv(args: argparse.Namespace, config: RunConfig) -> int:
    data = _load_table(args, args.data, config)
    truth_column = _truth_column(data.schema, args.truth_col)
    seed = _seed(config)
    folds = kfold(data, args.folds, seed)
    for kind in (ModelKind(k) for k in args.models):
        for fold, (train, test) in enumerate(folds):
            _log.info(f"Cross-validating {kind.value}, fold {fold + 1}/{len(folds)}")
            model, trace = fit_model(
                kind,
                train,
                config.em,
                config.structure,
                InitMethod(args.init),
                test,
                args.threads,
            )
            report, _ = evaluate_model(
                model,
                test,
                truth_column,
                fold=fold,
                trace=trace,
                seed=seed,
                config={"init": args.init, **config.to_dict()},
                threads=args.threads,
            )
            append_report(args.report, report)
    return EXIT_OK


def cmd_missing(args: argparse.Namespace, config: RunConfig) -> int:
    train = _load_table(args, args.train, config)
    test = _load_table(args, args.test, config, train.schema)
    truth_column = _truth_column(test.schema, args.truth_col)
    seed = _seed(config)
    kind = ModelKind(args.model)
    model, _ = fit_model(
        kind, train, config.em, config.structure, InitMethod(args.init), None, args.threads
    )
    schema = train.schema
    protected = [schema.sensitive, schema.label]
    for index, fraction in enumerate(args.fractions):
        corrupted = mcar_corrupt(train, fraction, seed + index, protected)
        refit = FairModel(
            circuit=model.circuit.copy(),
            kind=model.kind,
            sensitive=model.sensitive,
            label=model.label,
            latent=model.latent,
        )
        trace = em_fit(
            refit.circuit,
            corrupted,
            InitMethod(args.init),
            config.em,
            threads=args.threads,
        )
        report, _ = evaluate_model(
            refit,
            test,
            truth_column,
            fold=index,
            trace=trace,
            seed=seed,
            config={"missing_fraction": fraction, "init": args.init},
            threads=args.threads,
        )
        append_report(args.report, report)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "learn": cmd_learn,
    "eval": cmd_eval,
    "check": cmd_check,
    "cv": cmd_cv,
    "missing": cmd_missing,
}


def run_fairpc(argv: Sequence[str] | None = None) -> int:
    """Command-line entry point.

    Returns
    -------
    exit_code : `int`
        0 on success, 1 on a runtime error, 2 on a usage error.
    """
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        parser.print_usage()
        print(f"{parser.prog}: error: {e}")
        return EXIT_USAGE_ERROR
    logging.basicConfig(
        level=args.log_level,
        format="%(asctime)s %(name)s %(levelname)s: %(message)s",
    )
    try:
        config = load_config(args.config, _overrides(args))
        return COMMANDS[args.command](args, config)
    except ConfigError as e:
        _log.error(f"Usage error: {e}")
        return EXIT_USAGE_ERROR
    except Exception:
        _log.exception(f"{args.command} failed")
        return EXIT_RUNTIME_ERROR
