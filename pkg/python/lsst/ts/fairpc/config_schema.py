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

__all__ = ["CONFIG_SCHEMA"]

import yaml

CONFIG_SCHEMA = yaml.safe_load(
    """
$schema: http://json-schema.org/draft-07/schema#
$id: https://github.com/lsst-ts/ts_fairpc/blob/main/schema/fairpc.yaml
# title must end with one or more spaces followed by the schema version, which must begin with "v"
title: FairPC v1
description: Schema for fair probabilistic circuit run configuration files
type: object
properties:
  em:
    description: Expectation maximization.
    type: object
    properties:
      max_iterations:
        description: Upper bound on EM iterations.
        type: integer
        minimum: 1
        default: 500
      ll_tolerance:
        description: >-
          Stop when the relative improvement of the mean training
          log-likelihood is at most this.
        type: number
        exclusiveMinimum: 0
        default: 1.0e-6
      laplace_alpha:
        description: Pseudocount added to every (expected) flow count.
        type: number
        minimum: 0
        default: 1.0
      prior_epsilon:
        description: >-
          Softening of the prior label mechanism; D copies D_f with
          probability 1 - prior_epsilon.
        type: number
        minimum: 0
        exclusiveMaximum: 0.5
        default: 0.1
      seed:
        description: Seed of random initialization.
        type: integer
        default: 0
    additionalProperties: false
    default: {}
  structure:
    description: Structure learning of the feature sub-circuits.
    type: object
    properties:
      max_splits:
        description: Maximum number of split operations; 0 keeps the Chow-Liu tree.
        type: integer
        minimum: 0
        default: 200
      validation_fraction:
        description: Fraction of rows held out to decide when to stop splitting.
        type: number
        minimum: 0
        exclusiveMaximum: 1
        default: 0.1
      patience:
        description: Stop after this many splits without validation improvement.
        type: integer
        minimum: 1
        default: 3
      alpha:
        description: Pseudocount of mutual information and parameter estimates.
        type: number
        minimum: 0
        default: 1.0
      seed:
        description: Seed of the validation split.
        type: integer
        default: 0
    additionalProperties: false
    default: {}
  synth:
    description: Synthetic data generator.
    type: object
    properties:
      n_features:
        description: Number of binary features (10 to 30 unless allow_any is true).
        type: integer
        minimum: 1
        default: 15
      n_samples:
        description: Training rows.
        type: integer
        minimum: 0
        default: 100000
      n_test:
        description: Test rows; null means the same as n_samples.
        type: [integer, "null"]
        minimum: 0
        default: null
      seed:
        description: Root seed of the generator.
        type: integer
        default: 0
      allow_any:
        description: Accept a feature count outside 10 to 30.
        type: boolean
        default: false
      phi_s:
        description: Pr(S=1) of the true model.
        type: number
        minimum: 0
        maximum: 1
        default: 0.3
      phi_df:
        description: Pr(D_f=1) of the true model.
        type: number
        minimum: 0
        maximum: 1
        default: 0.5
      d_mech:
        description: >-
          Pr(D=1 | D_f, S) of the true model for (d_f, s) =
          (1, 1), (1, 0), (0, 1), (0, 0).
        type: array
        items:
          type: number
          minimum: 0
          maximum: 1
        minItems: 4
        maxItems: 4
        default: [0.8, 0.9, 0.1, 0.4]
    additionalProperties: false
    default: {}
  data:
    description: CSV ingestion.
    type: object
    properties:
      min_category_count:
        description: Categories seen fewer times are merged into one "other" category.
        type: integer
        minimum: 0
        default: 10
      missing_marker:
        description: Text that marks a missing cell in input CSV files, besides an empty cell.
        type: string
        default: "?"
      bins:
        description: >-
          Discretization per numeric column, as "quantile:K" or as
          comma-separated thresholds.
        type: object
        additionalProperties:
          type: string
        default: {}
    additionalProperties: false
    default: {}
additionalProperties: false
"""
)
