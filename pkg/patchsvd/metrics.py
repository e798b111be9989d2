"""Image quality metrics: MSE, PSNR and SSIM

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
import logging
import math
from dataclasses import dataclass
from typing import Final, Union

import numpy as np
import numpy.typing as npt
from skimage.metrics import mean_squared_error, structural_similarity

from patchsvd.errors import InvalidInputError
from patchsvd.images import Image, ImagePlane, max_intensity

log = logging.getLogger(__name__)

SSIM_WINDOW: Final[int] = 11
SSIM_SIGMA: Final[float] = 1.5
SSIM_K1: Final[float] = 0.01
SSIM_K2: Final[float] = 0.03

Pixels = Union[Image, ImagePlane, npt.ArrayLike]


@dataclass(frozen=True)
class QualityReport:
    mse: float
    # `math.inf` for identical images
    psnr: float
    ssim: float

    def as_dict(self) -> dict[str, Union[float, str]]:
        """JSON-friendly keys, with infinite PSNR spelled `"inf"`"""
        return {
            "mse": self.mse,
            "psnr_db": "inf" if math.isinf(self.psnr) else self.psnr,
            "ssim": self.ssim,
        }


def mse(a: Pixels, b: Pixels) -> float:
    """Mean squared difference over every pixel and channel"""
    first, second = _matching_pair(a, b)
    return float(mean_squared_error(first, second))


def psnr(a: Pixels, b: Pixels, bit_depth: int = 8) -> float:
    return psnr_from_mse(mse(a, b), bit_depth)


def psnr_from_mse(error: float, bit_depth: int = 8) -> float:
    """`10 log10(L^2 / mse)`, infinite when `mse == 0`"""
    if error < 0:
        raise InvalidInputError(f"Negative {error=}")
    if error == 0:
        return math.inf
    return 10.0 * math.log10(max_intensity(bit_depth) ** 2 / error)


def ssim(a: Pixels, b: Pixels, bit_depth: int = 8) -> float:
    """Mean SSIM over 11x11 Gaussian windows, averaged over channels"""
    first, second = _matching_pair(a, b)
    if min(first.shape[:2]) < SSIM_WINDOW:
        raise InvalidInputError(
            f"Image {first.shape[:2]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} "
            f"SSIM window"
        )
    color: bool = first.ndim == 3 and first.shape[2] > 1
    if first.ndim == 3 and not color:
        first, second = first[:, :, 0], second[:, :, 0]
    return float(
        structural_similarity(
            first,
            second,
            data_range=max_intensity(bit_depth),
            gaussian_weights=True,
            sigma=SSIM_SIGMA,
            use_sample_covariance=False,
            K1=SSIM_K1,
            K2=SSIM_K2,
            channel_axis=-1 if color else None,
        )
    )


def evaluate(reference: Image, candidate: Image) -> QualityReport:
    if reference.bit_depth != candidate.bit_depth:
        raise InvalidInputError(
            f"Bit depths differ: {reference.bit_depth=} {candidate.bit_depth=}"
        )
    error: float = mse(reference, candidate)
    report: QualityReport = QualityReport(
        mse=error,
        psnr=psnr_from_mse(error, reference.bit_depth),
        ssim=ssim(reference, candidate, reference.bit_depth),
    )
    log.debug(f"{report=}")
    return report


def _pixels(image: Pixels) -> npt.NDArray[np.float64]:
    if isinstance(image, Image):
        return image.pixels
    if isinstance(image, ImagePlane):
        return image.data
    return np.asarray(image, dtype=np.float64)


def _matching_pair(
    a: Pixels, b: Pixels
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    first: npt.NDArray[np.float64] = _pixels(a)
    second: npt.NDArray[np.float64] = _pixels(b)
    if first.shape != second.shape:
        raise InvalidInputError(f"Shapes differ: {first.shape=} {second.shape=}")
    if first.size == 0:
        raise InvalidInputError("Empty images")
    return first, second
