"""
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
import unittest
import warnings
from unittest import mock

import numpy as np

from patchsvd import linalg
from patchsvd.errors import InvalidInputError, InvalidRankError
from patchsvd.linalg import (
    JACOBI_MAX_SWEEPS,
    FactorTriple,
    effective_rank,
    k_rank_approx,
    reconstruct,
    svd,
    svd_batch,
    truncate,
)
from tests import SEED, random_matrices, reference_singular_values


class TestSvd(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.matrices = random_matrices(200)
        cls.factors = [svd(matrix) for matrix in cls.matrices]

    def test_singular_values_match_eigen_oracle(self) -> None:
        for matrix, factors in zip(self.matrices, self.factors):
            with self.subTest(shape=matrix.shape):
                expected = reference_singular_values(matrix)
                self.assertEqual(len(expected), factors.k)
                np.testing.assert_allclose(
                    factors.sigma, expected, rtol=0.0, atol=1e-8 * max(expected[0], 1.0)
                )

    def test_orthonormal_factors(self) -> None:
        for matrix, factors in zip(self.matrices, self.factors):
            with self.subTest(shape=matrix.shape):
                identity = np.eye(factors.k)
                self.assertLess(np.abs(factors.u.T @ factors.u - identity).max(), 1e-9)
                self.assertLess(np.abs(factors.vt @ factors.vt.T - identity).max(), 1e-9)

    def test_reconstruction_and_ordering(self) -> None:
        for matrix, factors in zip(self.matrices, self.factors):
            with self.subTest(shape=matrix.shape):
                np.testing.assert_allclose(reconstruct(factors), matrix, atol=1e-10)
                self.assertTrue((np.diff(factors.sigma) <= 0).all())
                self.assertTrue((factors.sigma >= 0).all())

    def test_sign_convention(self) -> None:
        for factors in self.factors:
            pivots = factors.u[np.argmax(np.abs(factors.u), axis=0), range(factors.k)]
            self.assertTrue((pivots >= 0).all())

    def test_deterministic(self) -> None:
        matrix = self.matrices[7]
        self.assertEqual(svd(matrix), svd(matrix.copy()))

    def test_batch_matches_single(self) -> None:
        rng = np.random.default_rng(SEED)
        for shape in ((16, 16), (16, 10), (7, 12), (1, 5), (70, 80)):
            with self.subTest(shape=shape):
                stack = rng.standard_normal((6, *shape))
                for single, batched in zip(map(svd, stack), svd_batch(stack)):
                    if min(shape) <= 64:
                        self.assertEqual(single, batched)
                    else:
                        np.testing.assert_allclose(single.u, batched.u, atol=1e-12)
                        np.testing.assert_allclose(single.sigma, batched.sigma)

    def test_large_matrix_uses_same_conventions(self) -> None:
        matrix = np.random.default_rng(SEED).standard_normal((90, 70))
        factors = svd(matrix)
        np.testing.assert_allclose(
            factors.sigma, np.linalg.svd(matrix, compute_uv=False), rtol=1e-12
        )
        np.testing.assert_allclose(reconstruct(factors), matrix, atol=1e-10)
        pivots = factors.u[np.argmax(np.abs(factors.u), axis=0), range(factors.k)]
        self.assertTrue((pivots >= 0).all())

    def test_rank_deficient_basis_is_completed(self) -> None:
        rng = np.random.default_rng(SEED)
        rank_one = np.outer(rng.standard_normal(9), rng.standard_normal(6))
        for matrix in (np.zeros((5, 4)), rank_one, rank_one.T, np.ones((3, 3))):
            with self.subTest(shape=matrix.shape):
                factors = svd(matrix)
                identity = np.eye(factors.k)
                self.assertLess(np.abs(factors.u.T @ factors.u - identity).max(), 1e-9)
                self.assertLess(np.abs(factors.vt @ factors.vt.T - identity).max(), 1e-9)
                np.testing.assert_allclose(reconstruct(factors), matrix, atol=1e-10)

    def test_rank_one_blocks_converge_quietly(self) -> None:
        rng = np.random.default_rng(SEED + 2)
        exact = [
            np.outer(*rng.integers(0, 16, size=(2, 16), endpoint=True)).astype(np.float64)
            for _ in range(100)
        ]
        rounded = [
            np.rint(np.outer(*rng.uniform(0.0, 16.0, size=(2, 16)))) for _ in range(100)
        ]
        stack = np.stack([*exact, *rounded, np.zeros((16, 16)), np.full((16, 16), 1e-300)])
        pairs = mock.patch.object(
            linalg, "_round_robin_pairs", wraps=linalg._round_robin_pairs
        )
        with pairs as sweeps, warnings.catch_warnings():
            warnings.simplefilter("error", RuntimeWarning)
            factors = svd_batch(stack)
        self.assertLess(sweeps.call_count, JACOBI_MAX_SWEEPS)
        for matrix, f in zip(stack, factors):
            identity = np.eye(f.k)
            self.assertLess(np.abs(f.u.T @ f.u - identity).max(), 1e-9)
            np.testing.assert_allclose(reconstruct(f), matrix, atol=1e-9)

    def test_examples(self) -> None:
        np.testing.assert_allclose(svd(np.eye(3)).sigma, [1.0, 1.0, 1.0], atol=1e-12)
        x = np.array([2.0, 0.0, 0.0])
        y = np.array([0.0, 3.0, 0.0])
        np.testing.assert_allclose(svd(np.outer(x, y)).sigma, [6.0, 0.0, 0.0], atol=1e-9)
        truncated = truncate(svd(np.diag([5.0, 3.0, 1.0])), 2)
        np.testing.assert_allclose(truncated.sigma, [5.0, 3.0], atol=1e-12)

    def test_invalid_input(self) -> None:
        for matrix in (np.zeros((0, 3)), np.array([[1.0, np.nan]]), np.ones(4)):
            with self.subTest(matrix=matrix):
                with self.assertRaises(InvalidInputError):
                    svd(matrix)


class TestEckartYoung(unittest.TestCase):
    def test_truncation_beats_random_candidates(self) -> None:
        rng = np.random.default_rng(SEED + 1)
        candidates: int = 1000
        for matrix in random_matrices(200):
            factors = svd(matrix)
            rows, cols = matrix.shape
            for k in range(1, factors.k + 1):
                optimal = np.linalg.norm(matrix - k_rank_approx(matrix, k))
                # Projections onto random k-dimensional column spaces
                q, _ = np.linalg.qr(rng.standard_normal((candidates // 2, rows, k)))
                projected = q @ (q.transpose(0, 2, 1) @ matrix)
                # Perturbations of the optimal factors
                best = truncate(factors, k)
                noise = 1e-3 * (1.0 + best.sigma[0])
                u = best.u + noise * rng.standard_normal((candidates // 2, rows, k))
                vt = best.vt + noise * rng.standard_normal((candidates // 2, k, cols))
                perturbed = (u * best.sigma) @ vt
                errors = np.linalg.norm(
                    np.concatenate([projected, perturbed]) - matrix, axis=(1, 2)
                )
                self.assertLessEqual(optimal, errors.min() + 1e-8)

    def test_error_is_tail_of_spectrum(self) -> None:
        for matrix in random_matrices(60, seed=SEED + 2):
            sigma = svd(matrix).sigma
            errors = [
                np.linalg.norm(matrix - k_rank_approx(matrix, k))
                for k in range(1, len(sigma) + 1)
            ]
            with self.subTest(shape=matrix.shape):
                np.testing.assert_allclose(
                    errors,
                    [np.sqrt((sigma[k:] ** 2).sum()) for k in range(1, len(sigma) + 1)],
                    rtol=0.0,
                    atol=1e-9 * max(sigma[0], 1.0),
                )
                self.assertTrue(
                    all(later <= earlier + 1e-9 for earlier, later in zip(errors, errors[1:]))
                )

    def test_k_rank_approx_examples(self) -> None:
        diagonal = np.diag([3.0, 2.0, 1.0])
        np.testing.assert_allclose(
            k_rank_approx(diagonal, 2), np.diag([3.0, 2.0, 0.0]), atol=1e-12
        )
        np.testing.assert_allclose(k_rank_approx(diagonal, 3), diagonal, atol=1e-12)
        with self.assertRaises(InvalidRankError):
            k_rank_approx(diagonal, 0)
        with self.assertRaises(InvalidRankError):
            k_rank_approx(diagonal, 4)


class TestFactorTriple(unittest.TestCase):
    def test_truncate(self) -> None:
        factors = svd(np.random.default_rng(SEED).standard_normal((8, 5)))
        truncated = truncate(factors, 2)
        self.assertEqual((8, 2), truncated.u.shape)
        self.assertEqual((2, 5), truncated.vt.shape)
        self.assertEqual(2 * (8 + 5 + 1), truncated.element_count)
        self.assertIs(factors, truncate(factors, 5))
        for k in (0, 6):
            with self.subTest(k=k):
                with self.assertRaises(InvalidRankError):
                    truncate(factors, k)

    def test_inconsistent_shapes(self) -> None:
        with self.assertRaises(InvalidInputError):
            FactorTriple(np.zeros((4, 2)), np.zeros(3), np.zeros((2, 5)))
        with self.assertRaises(InvalidRankError):
            FactorTriple(np.zeros((2, 3)), np.zeros(3), np.zeros((3, 5)))

    def test_read_only(self) -> None:
        factors = svd(np.eye(3))
        with self.assertRaises(ValueError):
            factors.sigma[0] = 5.0

    def test_effective_rank(self) -> None:
        rng = np.random.default_rng(SEED)
        rank_two = rng.standard_normal((10, 2)) @ rng.standard_normal((2, 7))
        self.assertEqual(2, effective_rank(svd(rank_two)))
        self.assertEqual(0, effective_rank(svd(np.zeros((3, 3)))))
        self.assertEqual(3, effective_rank(svd(np.eye(3))))


if __name__ == "__main__":
    unittest.main()
