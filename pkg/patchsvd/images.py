"""Image value types, PNG ingestion and emission

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
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Final, Union

import numpy as np
import numpy.typing as npt
import png

from patchsvd.errors import ImageFormatError, InvalidInputError

if TYPE_CHECKING:
    from patchsvd.patching import PatchGrid

log = logging.getLogger(__name__)

PNG_SIGNATURE: Final[bytes] = b"\x89PNG\r\n\x1a\n"
SUPPORTED_BIT_DEPTHS: Final[tuple[int, ...]] = (8, 16)
SUPPORTED_CHANNELS: Final[tuple[int, ...]] = (1, 3)

PathLike = Union[str, Path]


def max_intensity(bit_depth: int) -> int:
    """`L = 2^bit_depth - 1`"""
    return (1 << bit_depth) - 1


@dataclass(frozen=True, eq=False)
class ImagePlane:
    """One channel of an image as a real-valued matrix"""

    data: npt.NDArray[np.float64]
    bit_depth: int = 8
    channel: int = 0

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def cols(self) -> int:
        return int(self.data.shape[1])


@dataclass(frozen=True, eq=False)
class Image:
    """Pixels of shape `(rows, cols, channels)` with 1 or 3 channels"""

    pixels: npt.NDArray[np.float64]
    bit_depth: int = 8

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in SUPPORTED_CHANNELS:
            raise InvalidInputError(
                f"Expected (rows, cols, 1|3) pixels, got {self.pixels.shape=}"
            )
        if self.pixels.shape[0] == 0 or self.pixels.shape[1] == 0:
            raise InvalidInputError(f"Empty image {self.pixels.shape=}")
        if self.bit_depth not in SUPPORTED_BIT_DEPTHS:
            raise InvalidInputError(f"Unsupported {self.bit_depth=}")

    @classmethod
    def from_array(cls, pixels: npt.ArrayLike, bit_depth: int = 8) -> "Image":
        """Accepts `(rows, cols)` grayscale or `(rows, cols, channels)` arrays"""
        array: npt.NDArray[np.float64] = np.asarray(pixels, dtype=np.float64)
        if array.ndim == 2:
            array = array[:, :, np.newaxis]
        return cls(array, bit_depth)

    @classmethod
    def from_planes(cls, planes: Sequence[ImagePlane]) -> "Image":
        if not planes:
            raise InvalidInputError("No planes given")
        return cls(
            np.stack([plane.data for plane in planes], axis=-1), planes[0].bit_depth
        )

    @property
    def rows(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def cols(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    @property
    def max_value(self) -> int:
        return max_intensity(self.bit_depth)

    @property
    def raw_bytes(self) -> int:
        """Uncompressed size at the source bit depth"""
        return self.rows * self.cols * self.channels * self.bit_depth // 8

    def planes(self) -> Iterator[ImagePlane]:
        for channel in range(self.channels):
            yield ImagePlane(
                np.ascontiguousarray(self.pixels[:, :, channel]),
                self.bit_depth,
                channel,
            )

    def to_rgb(self) -> "Image":
        if self.channels == 3:
            return self
        return Image(np.repeat(self.pixels, 3, axis=2), self.bit_depth)


def read_png(path: PathLike) -> Image:
    """Read an 8 or 16-bit grayscale or RGB PNG.

    Palettes are expanded, alpha is dropped and bit depths below 8 are
    rescaled to 8 bits. Samples are taken as stored, `sBIT` is ignored.
    """
    file_path: Path = Path(path)
    with file_path.open("rb") as png_file:
        if png_file.read(len(PNG_SIGNATURE)) != PNG_SIGNATURE:
            raise ImageFormatError(f"'{file_path}' is not a PNG file")
    try:
        reader: png.Reader = png.Reader(filename=str(file_path))
        reader.preamble()
        reader.sbit = None
        width, height, rows, info = reader.asDirect()
        pixels: npt.NDArray[np.float64] = np.vstack(
            [np.asarray(row, dtype=np.float64) for row in rows]
        )
    except png.Error as e:
        raise ImageFormatError(f"Failed reading '{file_path}': {e}") from e
    planes: int = info["planes"]
    pixels = pixels.reshape(height, width, planes)
    if info.get("alpha"):
        log.info(f"Dropping alpha channel of '{file_path}'")
        pixels = pixels[:, :, : planes - 1]
    bit_depth: int = info["bitdepth"]
    if bit_depth < 8:
        pixels = np.rint(pixels * max_intensity(8) / max_intensity(bit_depth))
        bit_depth = 8
    log.debug(f"Read '{file_path}' {width=} {height=} {bit_depth=}")
    return Image(np.ascontiguousarray(pixels), bit_depth)


def write_png(image: Image, path: PathLike) -> None:
    """Write an image whose values are integers within `[0, L]`"""
    pixels: npt.NDArray[np.float64] = image.pixels
    if (
        not np.array_equal(pixels, np.rint(pixels))
        or pixels.min() < 0
        or pixels.max() > image.max_value
    ):
        raise InvalidInputError("Pixels must be integers within the bit depth range")
    writer: png.Writer = png.Writer(
        width=image.cols,
        height=image.rows,
        greyscale=image.channels == 1,
        bitdepth=image.bit_depth,
    )
    rows = pixels.astype(np.uint16).reshape(image.rows, image.cols * image.channels)
    with Path(path).open("wb") as png_file:
        writer.write(png_file, rows.tolist())


def side_by_side(images: Sequence[Image], gap: int = 8) -> Image:
    """Concatenate images left to right separated by white gaps"""
    if not images:
        raise InvalidInputError("No images to concatenate")
    bit_depth: int = images[0].bit_depth
    if any(image.bit_depth != bit_depth for image in images):
        raise InvalidInputError("Images must share one bit depth")
    channels: int = max(image.channels for image in images)
    rows: int = max(image.rows for image in images)
    white: int = max_intensity(bit_depth)
    panels: list[npt.NDArray[np.float64]] = []
    for idx, image in enumerate(images):
        converted: Image = image.to_rgb() if channels == 3 else image
        panel = np.full((rows, image.cols, channels), float(white))
        panel[: image.rows] = converted.pixels
        if idx:
            panels.append(np.full((rows, gap, channels), float(white)))
        panels.append(panel)
    return Image(np.concatenate(panels, axis=1), bit_depth)


def delta_visual(delta: npt.ArrayLike, bit_depth: int = 8) -> Image:
    """`|delta|` scaled to the full intensity range"""
    magnitude: npt.NDArray[np.float64] = np.abs(np.asarray(delta, dtype=np.float64))
    peak: float = float(magnitude.max()) if magnitude.size else 0.0
    if peak == 0.0:
        return Image.from_array(np.zeros_like(magnitude), bit_depth)
    return Image.from_array(
        np.rint(magnitude / peak * max_intensity(bit_depth)), bit_depth
    )


def complexity_visual(
    complexity_map: Sequence[bool], grid: "PatchGrid", bit_depth: int = 8
) -> Image:
    """Complex patches in mid gray, simple patches in black"""
    if len(complexity_map) != grid.total_patches:
        raise InvalidInputError(
            f"{len(complexity_map)=} does not match {grid.total_patches=}"
        )
    canvas: npt.NDArray[np.float64] = np.zeros((grid.image_rows, grid.image_cols))
    gray: int = (max_intensity(bit_depth) + 1) // 2
    for index, is_complex in enumerate(complexity_map):
        if is_complex:
            canvas[grid.window(index)] = gray
    return Image.from_array(canvas, bit_depth)
