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


__all__ = ["A", "B", "two_variable_circuit"]

from ..circuit import Circuit, CircuitBuilder, Variable

A = 0
B = 1


def two_variable_circuit() -> Circuit:
    """Reference circuit over binary A and B.

    The root mixes [A=1] x Pr(B=1)=0.7 with weight 0.6 and
    [A=0] x Pr(B=1)=0.2 with weight 0.4, so Pr(A=1, B=1) = 0.42 and
    Pr(A=0, B=1) = 0.08.
    """
    builder = CircuitBuilder([Variable(A, 2, "A"), Variable(B, 2, "B")])
    p1 = builder.product([builder.indicator(A, 1), builder.categorical(B, [0.3, 0.7])])
    p2 = builder.product([builder.indicator(A, 0), builder.categorical(B, [0.8, 0.2])])
    return builder.build(builder.sum([p1, p2], [0.6, 0.4]))
