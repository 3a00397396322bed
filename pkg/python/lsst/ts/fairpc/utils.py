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
    "MISSING",
    "safe_log",
    "laplace_normalize",
    "random_simplex",
    "chunk_slices",
    "pairwise_sum",
]

from collections.abc import Callable, Sequence
from typing import TypeVar

import numpy as np

# Marker for an unobserved cell in integer data arrays.
MISSING = -1

T = TypeVar("T")


def safe_log(values: np.ndarray) -> np.ndarray:
    """Natural log that maps 0 to -inf without a warning."""
    with np.errstate(divide="ignore"):
        return np.log(values)


def laplace_normalize(counts: np.ndarray, alpha: float) -> np.ndarray | None:
    """Smoothed frequencies ``(counts + alpha) / (sum + alpha * k)``.

    Parameters
    ----------
    counts : `numpy.ndarray`
        Nonnegative (expected) counts.
    alpha : `float`
        Pseudocount added to every entry.

    Returns
    -------
    probs : `numpy.ndarray` or `None`
        The smoothed distribution, or None if the total is zero (only
        possible when ``alpha`` is 0).
    """
    total = counts.sum() + alpha * counts.size
    if total <= 0.0:
        return None
    return (counts + alpha) / total


def random_simplex(rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw a point uniformly from the probability simplex (Dirichlet(1))."""
    return rng.dirichlet(np.ones(size))


def chunk_slices(num_rows: int, chunk_size: int) -> list[slice]:
    """Split ``range(num_rows)`` into consecutive slices."""
    return [
        slice(start, min(start + chunk_size, num_rows))
        for start in range(0, num_rows, chunk_size)
    ]


def pairwise_sum(items: Sequence[T], add: Callable[[T, T], T]) -> T:
    """Reduce ``items`` with a balanced binary tree of ``add`` calls.

    The summation order depends only on the number of items, so results
    do not depend on which worker finished first.
    """
    if not items:
        raise ValueError("Nothing to reduce")
    level = list(items)
    while len(level) > 1:
        paired = [add(level[i], level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]
