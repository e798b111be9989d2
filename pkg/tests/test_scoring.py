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

import numpy as np

from patchsvd.errors import InvalidInputError, InvalidRankError
from patchsvd.linalg import k_rank_approx
from patchsvd.scoring import ScoreFunction, compute_delta, rank_patches, score_patch
from tests import SEED


class TestScoring(unittest.TestCase):
    def test_score_patch(self) -> None:
        patch = np.array([[-3.0, 1.0], [1.0, 3.0]])
        self.assertAlmostEqual(1.0, score_patch(patch, ScoreFunction.STD))
        self.assertAlmostEqual(2.0, score_patch(patch, ScoreFunction.MEAN))
        self.assertAlmostEqual(3.0, score_patch(patch, ScoreFunction.MAX))
        self.assertEqual(0.0, score_patch(np.full((4, 4), -5.0), ScoreFunction.STD))
        with self.assertRaises(InvalidInputError):
            score_patch(np.zeros((0, 2)))

    def test_rank_is_descending_and_stable(self) -> None:
        patches = [np.full((2, 2), value) for value in (1.0, 4.0, 2.0, 4.0, 0.0)]
        ranking = rank_patches(patches, ScoreFunction.MEAN)
        self.assertEqual((1, 3, 2, 0, 4), ranking.ordered_indices)
        self.assertEqual((1.0, 4.0, 2.0, 4.0, 0.0), ranking.scores)
        self.assertEqual((False, True, False, True, False), ranking.complexity_map(2))
        self.assertEqual((False,) * 5, ranking.complexity_map(0))
        self.assertEqual((True,) * 5, ranking.complexity_map(5))

    def test_ties_keep_patch_order(self) -> None:
        ranking = rank_patches([np.zeros((3, 3))] * 6)
        self.assertEqual(tuple(range(6)), ranking.ordered_indices)

    def test_delta_of_low_rank_image_vanishes(self) -> None:
        rng = np.random.default_rng(SEED)
        rank_one = np.outer(rng.uniform(1, 2, 20), rng.uniform(1, 2, 12))
        self.assertLess(np.abs(compute_delta(rank_one)).max(), 1e-10)
        rank_two = rank_one + np.outer(rng.standard_normal(20), rng.standard_normal(12))
        self.assertGreater(np.abs(compute_delta(rank_two)).max(), 1e-3)
        self.assertLess(np.abs(compute_delta(rank_two, base_rank=2)).max(), 1e-10)

    def test_delta_rank_bounds(self) -> None:
        with self.assertRaises(InvalidRankError):
            compute_delta(np.ones((3, 4)), base_rank=0)
        with self.assertRaises(InvalidRankError):
            compute_delta(np.ones((3, 4)), base_rank=4)

    def test_score_examples(self) -> None:
        patch = np.array([[0.0, 0.0], [0.0, 4.0]])
        self.assertAlmostEqual(1.0, score_patch(patch, ScoreFunction.MEAN))
        self.assertAlmostEqual(4.0, score_patch(patch, ScoreFunction.MAX))
        self.assertAlmostEqual(np.sqrt(3.0), score_patch(patch, ScoreFunction.STD))
        for f in ScoreFunction:
            with self.subTest(f=f):
                self.assertEqual(0.0, score_patch(np.zeros((3, 2)), f))
        constant = [np.full((2, 2), score) for score in (1.0, 3.0, 3.0, 2.0)]
        ranking = rank_patches(constant, ScoreFunction.MAX)
        self.assertEqual((1, 2, 3, 0), ranking.ordered_indices)
        noisy = [np.zeros((4, 4))] * 5
        noisy[3] = np.diag([1.0, -2.0, 3.0, -4.0])
        self.assertEqual(3, rank_patches(noisy).ordered_indices[0])

    def test_ranking_is_scale_covariant(self) -> None:
        rng = np.random.default_rng(SEED + 1)
        patches = [
            rng.standard_normal((4, 5)) * rng.uniform(0.1, 3.0) for _ in range(40)
        ]
        for f in ScoreFunction:
            expected = rank_patches(patches, f).ordered_indices
            self.assertEqual(
                list(expected),
                sorted(range(40), key=lambda i: -score_patch(patches[i], f)),
            )
            for scale in (0.5, 3.0, 1024.0):
                with self.subTest(f=f, scale=scale):
                    scaled = [scale * patch for patch in patches]
                    self.assertEqual(expected, rank_patches(scaled, f).ordered_indices)

    def test_delta_complements_approximation(self) -> None:
        np.testing.assert_allclose(
            np.diag([0.0, 2.0]), compute_delta(np.diag([4.0, 2.0])), atol=1e-12
        )
        rng = np.random.default_rng(SEED + 2)
        for rows, cols in ((12, 9), (5, 16), (16, 16)):
            image = rng.uniform(0.0, 255.0, (rows, cols))
            for k in range(1, min(rows, cols) + 1):
                with self.subTest(rows=rows, cols=cols, k=k):
                    np.testing.assert_allclose(
                        image,
                        compute_delta(image, base_rank=k) + k_rank_approx(image, k),
                        rtol=0.0,
                        atol=1e-9,
                    )
            self.assertLess(np.abs(compute_delta(image, min(rows, cols))).max(), 1e-9)

    def test_score_function_names(self) -> None:
        self.assertEqual(["std", "mean", "max"], [str(f) for f in ScoreFunction])
        self.assertIs(ScoreFunction.MAX, ScoreFunction("max"))


if __name__ == "__main__":
    unittest.main()
