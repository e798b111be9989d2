"""Dense small-matrix SVD, truncation and best rank-k reconstruction

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
import functools
import logging
from dataclasses import dataclass
from typing import Any, Final

import numpy as np
import numpy.typing as npt

from patchsvd.errors import InvalidInputError, InvalidRankError

log = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

# Matrices whose smaller side exceeds this are factorized by LAPACK
JACOBI_MAX_DIM: Final[int] = 64
JACOBI_TOLERANCE: Final[float] = 1e-12
JACOBI_MAX_SWEEPS: Final[int] = 30
# Singular values below this fraction of the Frobenius norm are rounding noise
JACOBI_RANK_CUTOFF: Final[float] = 1e-13


@dataclass(frozen=True, eq=False)
class FactorTriple:
    """Truncated SVD factors `u @ diag(sigma) @ vt`"""

    u: Matrix
    sigma: Vector
    vt: Matrix

    def __post_init__(self) -> None:
        if self.u.ndim != 2 or self.vt.ndim != 2 or self.sigma.ndim != 1:
            raise InvalidInputError(
                f"Bad factor dimensions {self.u.shape=} {self.sigma.shape=} {self.vt.shape=}"
            )
        k: int = self.sigma.shape[0]
        if self.u.shape[1] != k or self.vt.shape[0] != k:
            raise InvalidInputError(
                f"Inconsistent factor ranks {self.u.shape=} {self.sigma.shape=} {self.vt.shape=}"
            )
        if k > min(self.u.shape[0], self.vt.shape[1]):
            raise InvalidRankError(
                f"{k=} exceeds min{(self.u.shape[0], self.vt.shape[1])}"
            )
        for array in (self.u, self.sigma, self.vt):
            array.setflags(write=False)

    @property
    def k(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def rows(self) -> int:
        return int(self.u.shape[0])

    @property
    def cols(self) -> int:
        return int(self.vt.shape[1])

    @property
    def element_count(self) -> int:
        """Stored values: `k(m + n + 1)`"""
        return self.k * (self.rows + self.cols + 1)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, FactorTriple):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.sigma, other.sigma)
            and np.array_equal(self.vt, other.vt)
        )


def check_matrix(a: npt.ArrayLike, name: str = "matrix") -> Matrix:
    """Return `a` as a non-empty finite 2-D float64 array"""
    matrix: Matrix = np.asarray(a, dtype=np.float64)
    if matrix.ndim != 2 or matrix.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty 2-D array, got {matrix.shape=}")
    if not np.isfinite(matrix).all():
        raise InvalidInputError(f"{name} contains NaN or Inf values")
    return matrix


def svd(a: npt.ArrayLike) -> FactorTriple:
    """Thin SVD with `k = min(m, n)` and a fixed sign convention"""
    matrix: Matrix = check_matrix(a)
    return svd_batch(matrix[np.newaxis])[0]


def svd_batch(stack: npt.ArrayLike) -> list[FactorTriple]:
    """Thin SVD of every matrix in a `(batch, m, n)` stack.

    Each result is bit-identical to `svd()` of that matrix alone.
    """
    matrices: npt.NDArray[np.float64] = np.asarray(stack, dtype=np.float64)
    if matrices.ndim != 3 or matrices.shape[0] == 0:
        raise InvalidInputError(f"Expected a (batch, m, n) stack, got {matrices.shape=}")
    check_matrix(matrices.reshape(-1, matrices.shape[-1]), "stack")
    rows: int = matrices.shape[1]
    cols: int = matrices.shape[2]
    u: npt.NDArray[np.float64]
    sigma: npt.NDArray[np.float64]
    vt: npt.NDArray[np.float64]
    if min(rows, cols) > JACOBI_MAX_DIM:
        u, sigma, vt = np.linalg.svd(matrices, full_matrices=False)
    elif rows >= cols:
        # Jacobi rotates columns of A, stored as rows of A^T
        u, sigma, vt = _one_sided_jacobi(matrices.transpose(0, 2, 1).copy())
    else:
        # A^T = U' S V'^T  =>  A = V' S U'^T
        u_t, sigma, vt_t = _one_sided_jacobi(matrices.copy())
        u, vt = vt_t.transpose(0, 2, 1), u_t.transpose(0, 2, 1)
    u, vt = _normalize_signs(u, vt)
    return [
        FactorTriple(
            np.ascontiguousarray(u[idx]),
            sigma[idx].copy(),
            np.ascontiguousarray(vt[idx]),
        )
        for idx in range(matrices.shape[0])
    ]


def truncate(f: FactorTriple, k: int) -> FactorTriple:
    """Keep the first `k` singular triplets"""
    if not 1 <= k <= f.k:
        raise InvalidRankError(f"Rank {k=} is outside [1, {f.k}]")
    if k == f.k:
        return f
    return FactorTriple(f.u[:, :k], f.sigma[:k], f.vt[:k, :])


def reconstruct(f: FactorTriple) -> Matrix:
    return (f.u * f.sigma) @ f.vt


def k_rank_approx(a: npt.ArrayLike, k: int) -> Matrix:
    """Best rank-`k` approximation in the Frobenius norm"""
    matrix: Matrix = check_matrix(a)
    if not 1 <= k <= min(matrix.shape):
        raise InvalidRankError(f"Rank {k=} is outside [1, {min(matrix.shape)}]")
    return reconstruct(truncate(svd(matrix), k))


def effective_rank(f: FactorTriple, tol: float = 1e-9) -> int:
    """Count of singular values above `tol` relative to the largest"""
    if f.k == 0 or f.sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(f.sigma > tol * f.sigma[0]))


@functools.cache
def _round_robin_pairs(
    size: int,
) -> tuple[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]], ...]:
    """Disjoint `(p, q)` index pairs per round, every pair exactly once per sweep"""
    players: list[int] = list(range(size)) + ([-1] if size % 2 else [])
    rounds: list[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]] = []
    for _ in range(len(players) - 1):
        half: int = len(players) // 2
        pairs: list[tuple[int, int]] = sorted(
            (min(a, b), max(a, b))
            for a, b in zip(players[:half], reversed(players[half:]))
            if a >= 0 and b >= 0
        )
        if pairs:
            rounds.append(
                (
                    np.array([p for p, _ in pairs], dtype=np.intp),
                    np.array([q for _, q in pairs], dtype=np.intp),
                )
            )
        players = [players[0], players[-1], *players[1:-1]]
    return tuple(rounds)


def _one_sided_jacobi(
    w: npt.NDArray[np.float64],
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Hestenes one-sided Jacobi on `w` of shape `(batch, c, r)`, `r >= c`.

    Rows of `w` are the columns of `X = w^T`. Returns `(u, sigma, vt)` with
    `X = u @ diag(sigma) @ vt`, `u` of shape `(batch, r, c)`.
    `w` is modified in place.
    """
    batch, size, length = w.shape
    z: npt.NDArray[np.float64] = np.broadcast_to(np.eye(size), (batch, size, size)).copy()
    frobenius: npt.NDArray[np.float64] = np.sqrt((w * w).sum(axis=(1, 2)))
    # Pairs of noise columns are never rotated
    negligible = ((JACOBI_RANK_CUTOFF * frobenius) ** 2)[:, np.newaxis]
    sweeps: int = 0
    rotated: bool = size > 1
    while rotated and sweeps < JACOBI_MAX_SWEEPS:
        rotated = False
        sweeps += 1
        for p, q in _round_robin_pairs(size):
            wp = w[:, p, :]
            wq = w[:, q, :]
            alpha = (wp * wp).sum(axis=-1)
            beta = (wq * wq).sum(axis=-1)
            gamma = (wp * wq).sum(axis=-1)
            rotate = (np.abs(gamma) > JACOBI_TOLERANCE * np.sqrt(alpha * beta)) & (
                (alpha > negligible) | (beta > negligible)
            )
            if not rotate.any():
                continue
            rotated = True
            with np.errstate(over="ignore"):
                zeta = (beta - alpha) / (2.0 * np.where(rotate, gamma, 1.0))
                t = np.where(zeta >= 0.0, 1.0, -1.0) / (
                    np.abs(zeta) + np.hypot(1.0, zeta)
                )
            c = np.where(rotate, 1.0 / np.sqrt(1.0 + t * t), 1.0)[..., np.newaxis]
            s = np.where(rotate, c[..., 0] * t, 0.0)[..., np.newaxis]
            w[:, p, :] = c * wp - s * wq
            w[:, q, :] = s * wp + c * wq
            zp = z[:, p, :]
            zq = z[:, q, :]
            z[:, p, :] = c * zp - s * zq
            z[:, q, :] = s * zp + c * zq
    if rotated:
        log.debug(f"Jacobi stopped after {sweeps=} without full convergence")
    sigma = np.sqrt((w * w).sum(axis=-1))
    order = np.argsort(-sigma, axis=-1, kind="stable")
    sigma = np.take_along_axis(sigma, order, axis=-1)
    w = np.take_along_axis(w, order[..., np.newaxis], axis=1)
    vt = np.take_along_axis(z, order[..., np.newaxis], axis=1)
    usable = sigma > JACOBI_RANK_CUTOFF * frobenius[:, np.newaxis]
    u = np.where(
        usable[..., np.newaxis], w / np.where(usable, sigma, 1.0)[..., np.newaxis], 0.0
    ).transpose(0, 2, 1)
    for idx in np.flatnonzero(~usable.all(axis=-1)):
        u[idx] = _complete_basis(u[idx], int(usable[idx].sum()))
    return u, sigma, vt


def _complete_basis(u: Matrix, good: int) -> Matrix:
    """Replace columns `good:` of `u` with an orthonormal complement of `u[:, :good]`"""
    rows, cols = u.shape
    q, _ = np.linalg.qr(np.hstack([u[:, :good], np.eye(rows)]))
    completed: Matrix = u.copy()
    completed[:, good:] = q[:, good:cols]
    return completed


def _normalize_signs(
    u: npt.NDArray[np.float64], vt: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Flip triplets so each left vector's largest-magnitude entry is non-negative"""
    largest = np.argmax(np.abs(u), axis=1)
    pivots = np.take_along_axis(u, largest[:, np.newaxis, :], axis=1)[:, 0, :]
    signs = np.where(pivots < 0.0, -1.0, 1.0)
    return u * signs[:, np.newaxis, :], vt * signs[..., np.newaxis]
