"""Residual matrix and patch complexity ranking

Copyright 2024 PatchSVD contributors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
import enum
import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from patchsvd.errors import InvalidInputError, InvalidRankError
from patchsvd.linalg import Matrix, check_matrix, k_rank_approx

log = logging.getLogger(__name__)


class ScoreFunction(enum.Enum):
    """Statistic of `|delta|` over a patch"""

    STD = "std"
    MEAN = "mean"
    MAX = "max"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class PatchRanking:
    ordered_indices: tuple[int, ...]
    # Indexed by canonical patch index
    scores: tuple[float, ...]

    def complexity_map(self, n_c: int) -> tuple[bool, ...]:
        """`True` for the `n_c` highest scoring patches"""
        complex_indices: frozenset[int] = frozenset(self.ordered_indices[:n_c])
        return tuple(index in complex_indices for index in range(len(self.scores)))


def compute_delta(img: npt.ArrayLike, base_rank: int = 1) -> Matrix:
    """What the rank-`base_rank` approximation misses: `A - A_k`"""
    matrix: Matrix = check_matrix(img, "image")
    if not 1 <= base_rank <= min(matrix.shape):
        raise InvalidRankError(
            f"{base_rank=} is outside [1, {min(matrix.shape)}] for {matrix.shape=}"
        )
    return matrix - k_rank_approx(matrix, base_rank)


def score_patch(patch: npt.ArrayLike, f: ScoreFunction = ScoreFunction.STD) -> float:
    magnitude: npt.NDArray[np.float64] = np.abs(np.asarray(patch, dtype=np.float64))
    if magnitude.size == 0:
        raise InvalidInputError("Cannot score an empty patch")
    if f is ScoreFunction.STD:
        return float(magnitude.std())
    elif f is ScoreFunction.MEAN:
        return float(magnitude.mean())
    elif f is ScoreFunction.MAX:
        return float(magnitude.max())
    raise ValueError(f"Unknown score function {f=}")


def rank_patches(
    delta_patches: Sequence[npt.ArrayLike], f: ScoreFunction = ScoreFunction.STD
) -> PatchRanking:
    """Descending by score, ties broken by ascending patch index"""
    if not delta_patches:
        raise InvalidInputError("No patches to rank")
    scores: npt.NDArray[np.float64] = np.array(
        [score_patch(patch, f) for patch in delta_patches], dtype=np.float64
    )
    order = np.argsort(-scores, kind="stable")
    log.debug(f"Top patch scores {scores[order[:5]]} by {f}")
    return PatchRanking(
        ordered_indices=tuple(int(index) for index in order),
        scores=tuple(float(score) for score in scores),
    )
