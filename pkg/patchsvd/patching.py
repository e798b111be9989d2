"""Tiling of images into patches, mean-value margins and reassembly

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
import dataclasses
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Union, overload

import numpy as np
import numpy.typing as npt

from patchsvd.errors import GeometryMismatchError, InvalidInputError
from patchsvd.images import ImagePlane
from patchsvd.linalg import Matrix, check_matrix

log = logging.getLogger(__name__)

Extent = tuple[int, int]


@dataclass(frozen=True)
class PatchGrid:
    """Row-major grid of `patch_rows x patch_cols` patches over an image.

    The patch index order is the canonical order used by scoring,
    compression, assembly and the archive.
    """

    image_rows: int
    image_cols: int
    patch_rows: int
    patch_cols: int

    @property
    def grid_rows(self) -> int:
        return -(-self.image_rows // self.patch_rows)

    @property
    def grid_cols(self) -> int:
        return -(-self.image_cols // self.patch_cols)

    @property
    def total_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def padded_shape(self) -> Extent:
        return self.grid_rows * self.patch_rows, self.grid_cols * self.patch_cols

    def origin(self, index: int) -> Extent:
        self._check_index(index)
        grid_row, grid_col = divmod(index, self.grid_cols)
        return grid_row * self.patch_rows, grid_col * self.patch_cols

    def extent(self, index: int) -> Extent:
        """Patch size after cutting at the bottom and right image borders"""
        row, col = self.origin(index)
        return (
            min(self.patch_rows, self.image_rows - row),
            min(self.patch_cols, self.image_cols - col),
        )

    def window(self, index: int, truncate_borders: bool = True) -> tuple[slice, slice]:
        row, col = self.origin(index)
        rows, cols = (
            self.extent(index)
            if truncate_borders
            else (self.patch_rows, self.patch_cols)
        )
        return slice(row, row + rows), slice(col, col + cols)

    def extent_groups(self) -> dict[Extent, list[int]]:
        """Patch indexes grouped by effective extent, each group in canonical order"""
        groups: dict[Extent, list[int]] = {}
        for index in range(self.total_patches):
            groups.setdefault(self.extent(index), []).append(index)
        return groups

    def _check_index(self, index: int) -> None:
        if not 0 <= index < self.total_patches:
            raise IndexError(f"Patch {index=} is outside [0, {self.total_patches})")


def grid_layout(image_rows: int, image_cols: int, p_x: int, p_y: int) -> PatchGrid:
    """Grid of `p_y`-row by `p_x`-column patches"""
    for name, value in (
        ("image_rows", image_rows),
        ("image_cols", image_cols),
        ("p_x", p_x),
        ("p_y", p_y),
    ):
        if value < 1:
            raise InvalidInputError(f"{name}={value} must be at least 1")
    return PatchGrid(
        image_rows=image_rows, image_cols=image_cols, patch_rows=p_y, patch_cols=p_x
    )


@overload
def pad_with_mean(img: ImagePlane, p_x: int, p_y: int) -> ImagePlane:
    ...


@overload
def pad_with_mean(img: npt.ArrayLike, p_x: int, p_y: int) -> Matrix:
    ...


def pad_with_mean(
    img: Union[ImagePlane, npt.ArrayLike], p_x: int, p_y: int
) -> Union[ImagePlane, Matrix]:
    """Grow to the next multiple of the patch size with the global mean value"""
    if isinstance(img, ImagePlane):
        return dataclasses.replace(img, data=pad_with_mean(img.data, p_x, p_y))
    matrix: Matrix = check_matrix(img, "image")
    grid: PatchGrid = grid_layout(matrix.shape[0], matrix.shape[1], p_x, p_y)
    if grid.padded_shape == matrix.shape:
        return matrix
    padded: Matrix = np.full(grid.padded_shape, matrix.mean(), dtype=np.float64)
    padded[: matrix.shape[0], : matrix.shape[1]] = matrix
    return padded


def split(img: npt.ArrayLike, grid: PatchGrid, truncate_borders: bool) -> list[Matrix]:
    """Patches in canonical order.

    With `truncate_borders` the input has the original image shape and border
    patches are cut to their effective extent; without it the input must be
    the padded image and every patch has the full patch size.
    """
    matrix: Matrix = check_matrix(img, "image")
    expected_shape: Extent = (
        (grid.image_rows, grid.image_cols) if truncate_borders else grid.padded_shape
    )
    if matrix.shape != expected_shape:
        raise GeometryMismatchError(
            f"Image shape {matrix.shape} does not match {expected_shape=} "
            f"for {truncate_borders=}"
        )
    return [
        matrix[grid.window(index, truncate_borders)].copy()
        for index in range(grid.total_patches)
    ]


def assemble(patches: Sequence[npt.ArrayLike], grid: PatchGrid) -> Matrix:
    """Inverse of `split(..., truncate_borders=True)`"""
    if len(patches) != grid.total_patches:
        raise GeometryMismatchError(
            f"Got {len(patches)} patches, grid has {grid.total_patches}"
        )
    image: Matrix = np.empty((grid.image_rows, grid.image_cols), dtype=np.float64)
    for index, patch in enumerate(patches):
        patch_matrix: Matrix = np.asarray(patch, dtype=np.float64)
        if patch_matrix.shape != grid.extent(index):
            raise GeometryMismatchError(
                f"Patch {index} has shape {patch_matrix.shape}, "
                f"expected {grid.extent(index)}"
            )
        image[grid.window(index)] = patch_matrix
    return image
