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
    EmConfig,
    FairModel,
    InitMethod,
    ModelKind,
    StructureConfig,
    SynthConfig,
    em_fit,
    evaluate_model,
    fit_model,
    generate,
    mcar_corrupt,
)

TRUE_D_MECH = (0.8, 0.9, 0.1, 0.4)


def protected_columns(schema) -> list[int]:
    return [schema.sensitive, schema.label]


def test_fairpc_recovers_synthetic_head() -> None:
    bundle = generate(SynthConfig(n_features=10, n_samples=30000, n_test=5000, seed=3))
    model, trace = fit_model(
        ModelKind.FairPC,
        bundle.train,
        EmConfig(max_iterations=200),
        StructureConfig(max_splits=5),
        InitMethod.PRIOR,
        threads=1,
    )
    assert trace.iterations > 0
    params = model.params
    np.testing.assert_allclose(params.d_mech, TRUE_D_MECH, atol=0.08)
    assert params.phi_s == pytest.approx(0.3, abs=0.02)
    report, _ = evaluate_model(model, bundle.test, bundle.schema.latent)
    assert abs(report.discrimination) <= 0.03


def test_model_families_are_ranked() -> None:
    logliks: dict[ModelKind, list[float]] = {kind: [] for kind in ModelKind}
    accuracies: dict[ModelKind, list[float]] = {kind: [] for kind in ModelKind}
    for seed in (0, 1):
        bundle = generate(
            SynthConfig(n_features=10, n_samples=10000, n_test=5000, seed=seed)
        )
        for kind in ModelKind:
            model, _ = fit_model(
                kind,
                bundle.train,
                EmConfig(max_iterations=100),
                StructureConfig(max_splits=5),
                threads=1,
            )
            report, _ = evaluate_model(model, bundle.test, bundle.schema.latent)
            logliks[kind].append(report.loglik)
            accuracies[kind].append(report.accuracy)
    loglik = {kind: np.mean(values) for kind, values in logliks.items()}
    accuracy = {kind: np.mean(values) for kind, values in accuracies.items()}
    assert loglik[ModelKind.FairPC] >= loglik[ModelKind.NLatPC] - 0.01
    assert loglik[ModelKind.NLatPC] > loglik[ModelKind.LatNB]
    assert loglik[ModelKind.FairPC] > loglik[ModelKind.TwoNB]
    assert accuracy[ModelKind.FairPC] >= accuracy[ModelKind.LatNB] - 0.01
    assert accuracy[ModelKind.FairPC] >= accuracy[ModelKind.TwoNB] - 0.01


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_em_monotone_with_half_missing(alpha: float) -> None:
    bundle = generate(SynthConfig(n_features=10, n_samples=5000, n_test=0, seed=5))
    corrupted = mcar_corrupt(bundle.train, 0.5, 1, protected_columns(bundle.schema))
    _, trace = fit_model(
        ModelKind.FairPC,
        corrupted,
        EmConfig(max_iterations=50, laplace_alpha=alpha, ll_tolerance=1e-12),
        StructureConfig(max_splits=3),
        threads=1,
    )
    steps = np.diff(trace.log_likelihoods)
    assert np.all(steps >= -1e-8), steps


def test_heldout_loglik_falls_with_missing_rate() -> None:
    bundle = generate(SynthConfig(n_features=10, n_samples=5000, n_test=2000, seed=7))
    model, _ = fit_model(
        ModelKind.FairPC,
        bundle.train,
        EmConfig(max_iterations=50),
        StructureConfig(max_splits=3),
        threads=1,
    )
    logliks = []
    for index, fraction in enumerate([0.0, 0.5, 0.9]):
        corrupted = mcar_corrupt(
            bundle.train, fraction, index, protected_columns(bundle.schema)
        )
        refit = FairModel(
            circuit=model.circuit.copy(),
            kind=model.kind,
            sensitive=model.sensitive,
            label=model.label,
            latent=model.latent,
        )
        em_fit(refit.circuit, corrupted, InitMethod.PRIOR, EmConfig(max_iterations=50))
        report, _ = evaluate_model(refit, bundle.test, bundle.schema.latent)
        logliks.append(report.loglik)
    assert logliks[0] >= logliks[1] - 0.02
    assert logliks[1] > logliks[2]
