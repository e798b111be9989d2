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
from typing import Final

import numpy as np
import numpy.typing as npt

from patchsvd.images import Image

SEED: Final[int] = 20240229
MOSAIC_SIZE: Final[int] = 128
MOSAIC_PATCH: Final[int] = 16


def random_matrices(
    count: int, max_dim: int = 16, seed: int = SEED
) -> list[npt.NDArray[np.float64]]:
    """Gaussian matrices with random shapes up to `max_dim x max_dim`"""
    rng = np.random.default_rng(seed)
    return [
        rng.standard_normal(tuple(rng.integers(1, max_dim, endpoint=True, size=2)))
        for _ in range(count)
    ]


def jacobi_eigenvalues(symmetric: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Descending eigenvalues by the classic cyclic two-sided Jacobi method"""
    a = np.array(symmetric, dtype=np.float64)
    size: int = a.shape[0]
    scale: float = float(np.linalg.norm(a)) or 1.0
    for _ in range(100):
        off_diagonal: float = float(np.sqrt((a**2).sum() - (np.diag(a) ** 2).sum()))
        if off_diagonal <= 1e-15 * scale:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                if a[p, q] == 0.0:
                    continue
                theta: float = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t: float = (1.0 if theta >= 0 else -1.0) / (
                    abs(theta) + np.sqrt(theta * theta + 1.0)
                )
                c: float = 1.0 / np.sqrt(t * t + 1.0)
                s: float = t * c
                rotation = np.eye(size)
                rotation[p, p] = rotation[q, q] = c
                rotation[p, q] = s
                rotation[q, p] = -s
                a = rotation.T @ a @ rotation
    return np.sort(np.diag(a))[::-1]


def reference_singular_values(matrix: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Singular values from the eigenvalues of the smaller Gram matrix"""
    gram = matrix.T @ matrix if matrix.shape[0] >= matrix.shape[1] else matrix @ matrix.T
    return np.sqrt(np.clip(jacobi_eigenvalues(gram), 0.0, None))


def mosaic_plane(seed: int, noise_blocks: int = 1) -> npt.NDArray[np.float64]:
    """8-bit plane of distinct rank-1 blocks with a few noise blocks.

    Every block is simple on its own but the whole image has high rank,
    which is where per-patch ranks beat one global rank.
    """
    rng = np.random.default_rng(seed)
    blocks: int = MOSAIC_SIZE // MOSAIC_PATCH
    plane = np.empty((MOSAIC_SIZE, MOSAIC_SIZE))
    for row in range(blocks):
        for col in range(blocks):
            u = rng.uniform(0.3, 1.0, MOSAIC_PATCH)
            v = rng.uniform(0.3, 1.0, MOSAIC_PATCH)
            plane[
                row * MOSAIC_PATCH : (row + 1) * MOSAIC_PATCH,
                col * MOSAIC_PATCH : (col + 1) * MOSAIC_PATCH,
            ] = 20.0 + 215.0 * np.outer(u, v)
    for index in rng.choice(blocks * blocks, size=noise_blocks, replace=False):
        row, col = divmod(int(index), blocks)
        window = (
            slice(row * MOSAIC_PATCH, (row + 1) * MOSAIC_PATCH),
            slice(col * MOSAIC_PATCH, (col + 1) * MOSAIC_PATCH),
        )
        plane[window] = 128.0 + rng.normal(0.0, 20.0, (MOSAIC_PATCH, MOSAIC_PATCH))
    return np.clip(np.rint(plane), 0.0, 255.0)


def mosaic_images() -> list[Image]:
    """Desk-scale test set: four grayscale mosaics and one colour mosaic"""
    images: list[Image] = [Image.from_array(mosaic_plane(SEED + i)) for i in range(4)]
    images.append(
        Image.from_array(np.stack([mosaic_plane(SEED + 10 + c) for c in range(3)], -1))
    )
    return images


def textured_block_image(block_index: int) -> Image:
    """Flat mid-gray `MOSAIC_SIZE` square with one noisy patch"""
    rng = np.random.default_rng(SEED)
    pixels = np.full((MOSAIC_SIZE, MOSAIC_SIZE), 128.0)
    row, col = divmod(block_index, MOSAIC_SIZE // MOSAIC_PATCH)
    pixels[
        row * MOSAIC_PATCH : (row + 1) * MOSAIC_PATCH,
        col * MOSAIC_PATCH : (col + 1) * MOSAIC_PATCH,
    ] = np.clip(np.rint(rng.normal(128.0, 50.0, (MOSAIC_PATCH, MOSAIC_PATCH))), 0, 255)
    return Image.from_array(pixels)


def random_image(
    rows: int, cols: int, channels: int = 1, bit_depth: int = 8, seed: int = SEED
) -> Image:
    rng = np.random.default_rng(seed)
    return Image(
        rng.integers(0, (1 << bit_depth) - 1, (rows, cols, channels), endpoint=True).astype(
            np.float64
        ),
        bit_depth,
    )
