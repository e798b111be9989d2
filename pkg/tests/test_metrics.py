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
import math
import unittest

import numpy as np
import numpy.typing as npt

from patchsvd.errors import InvalidInputError
from patchsvd.images import Image, ImagePlane
from patchsvd.metrics import (
    SSIM_K1,
    SSIM_K2,
    SSIM_SIGMA,
    SSIM_WINDOW,
    QualityReport,
    evaluate,
    mse,
    psnr,
    psnr_from_mse,
    ssim,
)
from tests import SEED, random_image


def windowed_ssim(
    a: npt.NDArray[np.float64], b: npt.NDArray[np.float64], max_value: float
) -> float:
    """Mean SSIM over every fully contained Gaussian window, one window at a time"""
    radius: int = SSIM_WINDOW // 2
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / SSIM_SIGMA) ** 2)
    weights = np.outer(taps, taps) / taps.sum() ** 2
    c1: float = (SSIM_K1 * max_value) ** 2
    c2: float = (SSIM_K2 * max_value) ** 2
    values: list[float] = []
    for row in range(a.shape[0] - SSIM_WINDOW + 1):
        for col in range(a.shape[1] - SSIM_WINDOW + 1):
            x = a[row : row + SSIM_WINDOW, col : col + SSIM_WINDOW]
            y = b[row : row + SSIM_WINDOW, col : col + SSIM_WINDOW]
            mu_x, mu_y = (weights * x).sum(), (weights * y).sum()
            var_x = (weights * x * x).sum() - mu_x**2
            var_y = (weights * y * y).sum() - mu_y**2
            cov = (weights * x * y).sum() - mu_x * mu_y
            values.append(
                (2 * mu_x * mu_y + c1)
                * (2 * cov + c2)
                / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
            )
    return float(np.mean(values))


class TestErrorMetrics(unittest.TestCase):
    def test_hand_computed(self) -> None:
        self.assertEqual(18.0, mse([[0, 10]], [[6, 10]]))
        self.assertAlmostEqual(10 * math.log10(255**2 / 18), psnr([[0, 10]], [[6, 10]]))
        self.assertAlmostEqual(48.1308, psnr_from_mse(1.0), places=4)
        self.assertAlmostEqual(96.3295, psnr_from_mse(1.0, bit_depth=16), places=4)

    def test_psnr_decreases_with_mse(self) -> None:
        for bit_depth in (8, 16):
            errors = np.geomspace(1e-6, 1e6, 200)
            values = [psnr_from_mse(float(e), bit_depth=bit_depth) for e in errors]
            with self.subTest(bit_depth=bit_depth):
                self.assertTrue((np.diff(values) < 0).all())
        reference = random_image(16, 16, seed=SEED)
        previous: float = math.inf
        for offset in (1, 2, 5, 20, 100):
            candidate = Image(np.clip(reference.pixels + offset, 0, 255))
            current = psnr(reference, candidate)
            with self.subTest(offset=offset):
                self.assertLess(current, previous)
            previous = current

    def test_identical_images(self) -> None:
        image = random_image(16, 16)
        self.assertEqual(0.0, mse(image, image))
        self.assertEqual(math.inf, psnr(image, image))
        with self.assertRaises(InvalidInputError):
            psnr_from_mse(-1.0)

    def test_accepts_planes_and_arrays(self) -> None:
        image = random_image(12, 12)
        plane = next(image.planes())
        self.assertEqual(
            mse(image, image.pixels + 1), mse(plane, ImagePlane(plane.data + 1))
        )

    def test_shape_mismatch(self) -> None:
        with self.assertRaises(InvalidInputError):
            mse(np.zeros((4, 4)), np.zeros((4, 5)))
        with self.assertRaises(InvalidInputError):
            mse(np.zeros((0, 4)), np.zeros((0, 4)))


class TestSsim(unittest.TestCase):
    def test_matches_windowed_definition(self) -> None:
        rng = np.random.default_rng(SEED)
        for bit_depth, shape in ((8, (32, 32)), (8, (11, 17)), (16, (20, 14))):
            with self.subTest(bit_depth=bit_depth, shape=shape):
                top: int = (1 << bit_depth) - 1
                a = rng.integers(0, top, shape, endpoint=True).astype(np.float64)
                b = np.clip(a + rng.normal(0, top / 10, shape), 0, top)
                self.assertAlmostEqual(
                    windowed_ssim(a, b, top), ssim(a, b, bit_depth), delta=1e-7
                )

    def test_bounds_and_symmetry(self) -> None:
        a = random_image(24, 24, seed=SEED).pixels
        b = random_image(24, 24, seed=SEED + 1).pixels
        self.assertAlmostEqual(1.0, ssim(a, a))
        self.assertAlmostEqual(ssim(a, b), ssim(b, a))
        self.assertLess(ssim(a, b), 1.0)
        self.assertLess(ssim(a, 255 - a), 0.0)

    def test_color_averages_channels(self) -> None:
        a = random_image(16, 16, channels=3, seed=SEED).pixels
        b = random_image(16, 16, channels=3, seed=SEED + 1).pixels
        self.assertAlmostEqual(
            np.mean([ssim(a[:, :, c], b[:, :, c]) for c in range(3)]), ssim(a, b)
        )

    def test_too_small(self) -> None:
        with self.assertRaises(InvalidInputError):
            ssim(np.zeros((10, 40)), np.zeros((10, 40)))


class TestEvaluate(unittest.TestCase):
    def test_report(self) -> None:
        reference = random_image(16, 16)
        candidate = Image(np.clip(reference.pixels + 2, 0, 255))
        report = evaluate(reference, candidate)
        self.assertEqual(mse(reference, candidate), report.mse)
        self.assertAlmostEqual(psnr_from_mse(report.mse), report.psnr)
        self.assertAlmostEqual(ssim(reference, candidate), report.ssim)
        self.assertEqual(["mse", "psnr_db", "ssim"], list(report.as_dict()))

    def test_infinite_psnr_in_dict(self) -> None:
        self.assertEqual(
            {"mse": 0.0, "psnr_db": "inf", "ssim": 1.0},
            QualityReport(0.0, math.inf, 1.0).as_dict(),
        )

    def test_bit_depth_mismatch(self) -> None:
        with self.assertRaises(InvalidInputError):
            evaluate(random_image(16, 16), random_image(16, 16, bit_depth=16))


if __name__ == "__main__":
    unittest.main()
