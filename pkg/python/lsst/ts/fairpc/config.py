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

__all__ = ["DataConfig", "RunConfig", "DefaultingValidator", "load_config"]

import copy
import logging
import pathlib
from collections.abc import Mapping
from dataclasses import dataclass, field

import jsonschema
import yaml

from .config_schema import CONFIG_SCHEMA
from .dataset import BinStrategy, parse_bin_strategy
from .errors import ConfigError
from .fairmodel import FairHeadParams
from .learn_params import EmConfig
from .learn_structure import StructureConfig
from .synthgen import SynthConfig

_log = logging.getLogger(__name__)


def _extend_with_default(
    validator_class: type[jsonschema.protocols.Validator],
) -> type[jsonschema.protocols.Validator]:
    validate_properties = validator_class.VALIDATORS["properties"]

    def set_defaults(validator, properties, instance, schema):  # type: ignore
        if isinstance(instance, dict):
            for name, subschema in properties.items():
                if "default" in subschema:
                    instance.setdefault(name, copy.deepcopy(subschema["default"]))
        yield from validate_properties(validator, properties, instance, schema)

    return jsonschema.validators.extend(validator_class, {"properties": set_defaults})


DefaultingValidator = _extend_with_default(jsonschema.Draft7Validator)


@dataclass
class DataConfig:
    """CSV ingestion settings.

    Parameters
    ----------
    min_category_count : `int`
        Rarer categories merge into the "other" category.
    missing_marker : `str`
        Text that marks a missing cell in input CSV files.
    bins : `dict` [`str`, `BinStrategy`]
        Discretization of numeric columns, by column name.
    """

    min_category_count: int = 10
    missing_marker: str = "?"
    bins: dict[str, BinStrategy] = field(default_factory=dict)


@dataclass
class RunConfig:
    """Validated settings of one run."""

    em: EmConfig
    structure: StructureConfig
    synth: SynthConfig
    data: DataConfig

    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        """Settings as plain data, for report echoes."""
        return copy.deepcopy(self.raw)


def _merge(base: dict, overrides: Mapping) -> None:
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, Mapping):
            _merge(base.setdefault(key, {}), value)
        else:
            base[key] = value


def load_config(
    path: str | pathlib.Path | None = None,
    overrides: Mapping[str, Mapping] | None = None,
) -> RunConfig:
    """Read, complete and validate run settings.

    Parameters
    ----------
    path : `str` or `pathlib.Path`, optional
        YAML file with any of the sections ``em``, ``structure``,
        ``synth`` and ``data``.
    overrides : `dict`, optional
        Values by section and key that replace those of the file; None
        values are ignored.

    Raises
    ------
    ConfigError
        If the file cannot be read or the settings are invalid.
    """
    raw: dict = {}
    if path is not None:
        try:
            with open(path, "r") as f:
                raw = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} does not hold a mapping")
    _merge(raw, overrides or {})
    try:
        DefaultingValidator(CONFIG_SCHEMA).validate(raw)
    except jsonschema.ValidationError as e:
        location = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"Invalid config at {location}: {e.message}")
    synth = dict(raw["synth"])
    head = FairHeadParams(
        synth.pop("phi_s"), synth.pop("phi_df"), tuple(synth.pop("d_mech"))
    )
    data = dict(raw["data"])
    bins = {name: parse_bin_strategy(text) for name, text in data.pop("bins").items()}
    config = RunConfig(
        em=EmConfig(**raw["em"]),
        structure=StructureConfig(**raw["structure"]),
        synth=SynthConfig(head=head, **synth),
        data=DataConfig(bins=bins, **data),
        raw=raw,
    )
    _log.debug(f"Configuration: {raw}")
    return config
