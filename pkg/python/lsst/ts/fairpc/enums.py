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

__all__ = ["ErrorCode", "InitMethod", "LeafKind", "ModelKind", "Role"]

import enum


class ErrorCode(enum.IntEnum):
    """Error codes carried by `FairPCError` and its subclasses."""

    INCOMPLETE_ASSIGNMENT = enum.auto()
    STRUCTURAL = enum.auto()
    UNSUPPORTED_QUERY = enum.auto()
    CONDITIONING_ON_NULL = enum.auto()
    SCHEMA = enum.auto()
    ROW_IMPOSSIBLE = enum.auto()
    SCOPE = enum.auto()
    INSUFFICIENT_DATA = enum.auto()
    VOCABULARY = enum.auto()
    PARSE = enum.auto()
    BINNING = enum.auto()
    FOLD = enum.auto()
    GROUP = enum.auto()
    LENGTH_MISMATCH = enum.auto()
    CONFIG = enum.auto()
    UNVERIFIABLE = enum.auto()


class LeafKind(enum.Enum):
    """Kind of univariate input node."""

    INDICATOR = "I"
    CATEGORICAL = "C"


class ModelKind(enum.Enum):
    """Model family.

    The value is the name used on the command line and in report files.
    """

    FairPC = "fairpc"
    NLatPC = "nlatpc"
    TwoNB = "2nb"
    LatNB = "latnb"

    @property
    def latent(self) -> bool:
        """Does this family predict with the latent fair decision?"""
        return self in (ModelKind.FairPC, ModelKind.LatNB)

    @property
    def naive_bayes(self) -> bool:
        """Are the feature sub-circuits fully factorized?"""
        return self in (ModelKind.TwoNB, ModelKind.LatNB)


class InitMethod(enum.Enum):
    """EM initialization method."""

    PRIOR = "prior"
    RANDOM = "random"
    KEEP = "keep"


class Role(enum.Enum):
    """Role of a column in a dataset schema."""

    SENSITIVE = "sensitive"
    LABEL = "label"
    LATENT = "latent"
    FEATURE = "feature"
