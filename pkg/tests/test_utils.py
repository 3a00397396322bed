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
from lsst.ts.fairpc import utils


def test_safe_log() -> None:
    values = utils.safe_log(np.array([1.0, 0.0, np.e]))
    assert values[0] == 0.0
    assert values[1] == -np.inf
    assert values[2] == pytest.approx(1.0)


def test_laplace_normalize() -> None:
    probs = utils.laplace_normalize(np.array([3.0, 0.0]), 1.0)
    assert probs == pytest.approx([0.8, 0.2])

    probs = utils.laplace_normalize(np.array([2.0, 6.0]), 0.0)
    assert probs == pytest.approx([0.25, 0.75])

    assert utils.laplace_normalize(np.zeros(3), 0.0) is None
    assert utils.laplace_normalize(np.zeros(4), 1.0) == pytest.approx([0.25] * 4)


def test_random_simplex() -> None:
    rng = np.random.default_rng(5)
    for size in (1, 2, 7):
        point = utils.random_simplex(rng, size)
        assert point.shape == (size,)
        assert np.all(point >= 0)
        assert point.sum() == pytest.approx(1.0)


def test_chunk_slices() -> None:
    assert utils.chunk_slices(0, 4) == []
    assert utils.chunk_slices(10, 4) == [slice(0, 4), slice(4, 8), slice(8, 10)]
    assert utils.chunk_slices(8, 4) == [slice(0, 4), slice(4, 8)]


def test_pairwise_sum() -> None:
    for count in range(1, 12):
        items = [np.full(2, float(i)) for i in range(count)]
        total = utils.pairwise_sum(items, np.add)
        assert total == pytest.approx([count * (count - 1) / 2] * 2)

    # the grouping depends only on the number of items
    assert utils.pairwise_sum(["a", "b", "c", "d", "e"], lambda x, y: f"({x}{y})") == (
        "(((ab)(cd))e)"
    )

    with pytest.raises(ValueError):
        utils.pairwise_sum([], np.add)
