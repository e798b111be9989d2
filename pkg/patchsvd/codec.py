"""Non-uniform patch-wise SVD compression

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
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Final, Optional

import numpy as np

from patchsvd.errors import GeometryMismatchError, InfeasibleConfigError
from patchsvd.images import Image, ImagePlane, max_intensity
from patchsvd.linalg import (
    FactorTriple,
    Matrix,
    reconstruct,
    svd,
    svd_batch,
    truncate,
)
from patchsvd.patching import PatchGrid, assemble, grid_layout, pad_with_mean, split
from patchsvd.ratemath import CodecConfig, RatePlan, fallback_rank, plan, validate
from patchsvd.scoring import PatchRanking, compute_delta, rank_patches
from patchsvd.workers import max_workers

log = logging.getLogger(__name__)
FALLBACK_LOG_LEVEL: Final[int] = (
    logging.INFO
    if not os.getenv("PATCHSVD_TREAT_FALLBACK_AS_WARNING")
    else logging.WARNING
)


@dataclass(frozen=True)
class ChannelPayload:
    """Stored factors of one channel: per-patch factors or one whole-image factor"""

    complexity_map: tuple[bool, ...] = ()
    patch_factors: tuple[FactorTriple, ...] = ()
    fallback_factors: Optional[FactorTriple] = None

    @property
    def n_c(self) -> int:
        return sum(self.complexity_map)

    @property
    def element_count(self) -> int:
        if self.fallback_factors is not None:
            return self.fallback_factors.element_count
        return sum(factors.element_count for factors in self.patch_factors)


@dataclass(frozen=True)
class CompressedImage:
    config: CodecConfig
    grid: PatchGrid
    bit_depth: int
    payloads: tuple[ChannelPayload, ...]

    def __post_init__(self) -> None:
        if len(self.payloads) not in (1, 3):
            raise GeometryMismatchError(f"Expected 1 or 3 channels, got {len(self.payloads)}")
        fallback_flags: set[bool] = {
            payload.fallback_factors is not None for payload in self.payloads
        }
        if len(fallback_flags) != 1:
            raise GeometryMismatchError("Channels mix whole-image and patch factors")
        for channel, payload in enumerate(self.payloads):
            self._check_payload(channel, payload)

    @property
    def channels(self) -> int:
        return len(self.payloads)

    @property
    def fallback(self) -> bool:
        return self.payloads[0].fallback_factors is not None

    def _check_payload(self, channel: int, payload: ChannelPayload) -> None:
        grid: PatchGrid = self.grid
        if payload.fallback_factors is not None:
            factors: FactorTriple = payload.fallback_factors
            if payload.patch_factors or payload.complexity_map:
                raise GeometryMismatchError(
                    f"Channel {channel} has both whole-image and patch factors"
                )
            if (factors.rows, factors.cols) != (grid.image_rows, grid.image_cols):
                raise GeometryMismatchError(
                    f"Channel {channel} whole-image factors are "
                    f"{factors.rows}x{factors.cols}, image is "
                    f"{grid.image_rows}x{grid.image_cols}"
                )
            return
        if (
            len(payload.patch_factors) != grid.total_patches
            or len(payload.complexity_map) != grid.total_patches
        ):
            raise GeometryMismatchError(
                f"Channel {channel} has {len(payload.patch_factors)} patch factors and "
                f"{len(payload.complexity_map)} map entries for "
                f"{grid.total_patches} patches"
            )
        for index, (is_complex, factors) in enumerate(
            zip(payload.complexity_map, payload.patch_factors)
        ):
            extent: tuple[int, int] = grid.extent(index)
            expected_rank: int = patch_rank(self.config, is_complex, extent)
            if (factors.rows, factors.cols, factors.k) != (*extent, expected_rank):
                raise GeometryMismatchError(
                    f"Channel {channel} patch {index}: factors "
                    f"{factors.rows}x{factors.cols} rank {factors.k}, expected "
                    f"{extent[0]}x{extent[1]} rank {expected_rank}"
                )


def patch_rank(cfg: CodecConfig, is_complex: bool, extent: tuple[int, int]) -> int:
    """Assigned rank clamped to the patch's effective extent"""
    return min(cfg.k_c if is_complex else cfg.k_s, *extent)


def compress(image: Image, cfg: CodecConfig) -> CompressedImage:
    """Compress each channel independently with the same config"""
    violations: list[str] = validate(cfg)
    if violations:
        raise InfeasibleConfigError(violations)
    grid: PatchGrid = grid_layout(image.rows, image.cols, cfg.p_x, cfg.p_y)
    rate_plan: RatePlan = plan(cfg, grid)
    if cfg.k_c > min(cfg.p_x, cfg.p_y):
        log.warning(f"{cfg.k_c=} exceeds the patch size and is clamped per patch")
    if rate_plan.whole_image:
        log.log(
            FALLBACK_LOG_LEVEL,
            f"Less than one complex patch affordable, falling back to "
            f"rank-{rate_plan.fallback_rank} SVD of the whole image",
        )
    elif rate_plan.uniform:
        log.info(f"Uniform SVD path: every patch at rank {cfg.k_s}")
    log.debug(f"{rate_plan=}")

    def compress_plane(plane: ImagePlane) -> ChannelPayload:
        return _compress_plane(plane, cfg, grid, rate_plan)

    with ThreadPoolExecutor(max_workers=min(max_workers(), image.channels)) as executor:
        payloads: tuple[ChannelPayload, ...] = tuple(
            executor.map(compress_plane, image.planes())
        )
    return CompressedImage(cfg, grid, image.bit_depth, payloads)


def compress_svd(
    image: Image, target_cr: float, cfg: Optional[CodecConfig] = None
) -> CompressedImage:
    """Whole-image truncated SVD baseline at the rank affordable for `target_cr`"""
    rank: int = fallback_rank(target_cr, image.rows, image.cols)
    config: CodecConfig = cfg or CodecConfig(
        p_x=image.cols, p_y=image.rows, k_c=rank, k_s=rank, target_cr=target_cr
    )
    grid: PatchGrid = grid_layout(image.rows, image.cols, config.p_x, config.p_y)
    payloads: tuple[ChannelPayload, ...] = tuple(
        ChannelPayload(fallback_factors=truncate(svd(plane.data), rank))
        for plane in image.planes()
    )
    return CompressedImage(config, grid, image.bit_depth, payloads)


def decompress(c: CompressedImage) -> Image:
    """Reconstruct, clamp to `[0, L]` and round half to even"""
    planes: list[ImagePlane] = []
    for channel, payload in enumerate(c.payloads):
        data: Matrix
        if payload.fallback_factors is not None:
            data = reconstruct(payload.fallback_factors)
        else:
            data = assemble([reconstruct(f) for f in payload.patch_factors], c.grid)
        data = np.rint(np.clip(data, 0.0, max_intensity(c.bit_depth)))
        planes.append(ImagePlane(data, c.bit_depth, channel))
    return Image.from_planes(planes)


def stored_element_count(c: CompressedImage) -> int:
    """Exact count of stored factor values over all channels"""
    return sum(payload.element_count for payload in c.payloads)


def element_compression_ratio(c: CompressedImage) -> float:
    original: int = c.grid.image_rows * c.grid.image_cols * c.channels
    return 1.0 - stored_element_count(c) / original


def classify_patches(
    data: Matrix, cfg: CodecConfig, grid: PatchGrid, n_c: int
) -> tuple[bool, ...]:
    """Mark the `n_c` patches whose `|delta|` scores highest as complex"""
    delta: Matrix = compute_delta(data, cfg.base_rank)
    delta_patches: list[Matrix] = split(
        pad_with_mean(delta, cfg.p_x, cfg.p_y), grid, truncate_borders=False
    )
    ranking: PatchRanking = rank_patches(delta_patches, cfg.score_fn)
    return ranking.complexity_map(n_c)


def _compress_plane(
    plane: ImagePlane, cfg: CodecConfig, grid: PatchGrid, rate_plan: RatePlan
) -> ChannelPayload:
    if rate_plan.whole_image:
        assert rate_plan.fallback_rank is not None
        return ChannelPayload(
            fallback_factors=truncate(svd(plane.data), rate_plan.fallback_rank)
        )
    complexity_map: tuple[bool, ...] = (
        (False,) * grid.total_patches
        if rate_plan.uniform
        else classify_patches(plane.data, cfg, grid, rate_plan.n_c)
    )
    patches: list[Matrix] = split(plane.data, grid, truncate_borders=True)
    ranks: list[int] = [
        patch_rank(cfg, is_complex, grid.extent(index))
        for index, is_complex in enumerate(complexity_map)
    ]
    return ChannelPayload(
        complexity_map=complexity_map,
        patch_factors=_factorize(patches, ranks, grid),
    )


def _factorize(
    patches: list[Matrix], ranks: list[int], grid: PatchGrid
) -> tuple[FactorTriple, ...]:
    """Truncated SVD of every patch, batched by extent, in canonical order"""
    factors: list[Optional[FactorTriple]] = [None] * len(patches)
    for indexes in grid.extent_groups().values():
        stack: Matrix = np.stack([patches[index] for index in indexes])
        for index, full in zip(indexes, svd_batch(stack)):
            factors[index] = truncate(full, ranks[index])
    return tuple(f for f in factors if f is not None)