"""Binary `.psvd` archive format

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

Layout, little-endian throughout:

    magic "PSVD" | version u8 | channels u8 | bit_depth u8 | rows u32 | cols u32
    p_x u16 | p_y u16 | k_c u16 | k_s u16 | base_rank u16 | score_fn u8 | fallback u8
    n_c u32 per channel | precision u8

followed by one block per channel: the complexity bitmap (one bit per patch,
most significant bit first, zero padded to a byte) and, per patch in canonical
order, U column-major, sigma, then V^T row-major. Whole-image archives store
the rank in the `n_c` slot and no bitmap.
"""
import logging
import struct
from dataclasses import dataclass
from typing import Final, Union

import numpy as np
import numpy.typing as npt

from patchsvd.codec import ChannelPayload, CompressedImage, patch_rank
from patchsvd.errors import (
    ArchiveError,
    BadMagicError,
    InconsistentGeometryError,
    InvalidInputError,
    PatchSvdError,
    TruncatedArchiveError,
    UnsupportedVersionError,
)
from patchsvd.images import SUPPORTED_BIT_DEPTHS, SUPPORTED_CHANNELS, Image
from patchsvd.linalg import FactorTriple
from patchsvd.patching import PatchGrid, grid_layout
from patchsvd.ratemath import CodecConfig, validate
from patchsvd.scoring import ScoreFunction

log = logging.getLogger(__name__)

MAGIC: Final[bytes] = b"PSVD"
VERSION: Final[int] = 1
FILE_EXTENSION: Final[str] = ".psvd"

_FIXED_HEADER: Final[struct.Struct] = struct.Struct("<4sBBBIIHHHHHBB")
_SLOT: Final[struct.Struct] = struct.Struct("<I")
_PRECISION: Final[struct.Struct] = struct.Struct("<B")

SCORE_IDS: Final[dict[ScoreFunction, int]] = {
    ScoreFunction.STD: 0,
    ScoreFunction.MEAN: 1,
    ScoreFunction.MAX: 2,
}
PRECISION_IDS: Final[dict[int, int]] = {32: 0, 64: 1}
_DTYPES: Final[dict[int, np.dtype]] = {32: np.dtype("<f4"), 64: np.dtype("<f8")}

# Byte offsets of the header fields reported in errors
_CHANNELS_OFFSET: Final[int] = 5
_BIT_DEPTH_OFFSET: Final[int] = 6
_ROWS_OFFSET: Final[int] = 7
_PATCH_OFFSET: Final[int] = 15
_SCORE_OFFSET: Final[int] = 25
_FALLBACK_OFFSET: Final[int] = 26


@dataclass(frozen=True)
class ArchiveHeader:
    channels: int
    bit_depth: int
    rows: int
    cols: int
    p_x: int
    p_y: int
    k_c: int
    k_s: int
    base_rank: int
    score_fn: ScoreFunction
    fallback: bool
    # Complex patch count per channel, or the whole-image rank when `fallback`
    slots: tuple[int, ...]
    precision: int = 32

    @property
    def size(self) -> int:
        return header_size(self.channels)

    @property
    def itemsize(self) -> int:
        return _DTYPES[self.precision].itemsize

    def config(self, target_cr: float = 0.0) -> CodecConfig:
        return CodecConfig(
            p_x=self.p_x,
            p_y=self.p_y,
            k_c=self.k_c,
            k_s=self.k_s,
            target_cr=target_cr,
            score_fn=self.score_fn,
            base_rank=self.base_rank,
        )

    def grid(self) -> PatchGrid:
        return grid_layout(self.rows, self.cols, self.p_x, self.p_y)

    def pack(self) -> bytes:
        try:
            return (
                _FIXED_HEADER.pack(
                    MAGIC,
                    VERSION,
                    self.channels,
                    self.bit_depth,
                    self.rows,
                    self.cols,
                    self.p_x,
                    self.p_y,
                    self.k_c,
                    self.k_s,
                    self.base_rank,
                    SCORE_IDS[self.score_fn],
                    int(self.fallback),
                )
                + b"".join(_SLOT.pack(slot) for slot in self.slots)
                + _PRECISION.pack(PRECISION_IDS[self.precision])
            )
        except struct.error as e:
            raise InvalidInputError(f"Header field out of range in {self}: {e}") from e


def header_size(channels: int) -> int:
    return _FIXED_HEADER.size + channels * _SLOT.size + _PRECISION.size


def bitmap_size(total_patches: int) -> int:
    return -(-total_patches // 8)


def encoded_size(header: ArchiveHeader, complexity_maps: tuple[tuple[bool, ...], ...]) -> int:
    """Exact archive length implied by the header and the complexity maps"""
    if header.fallback:
        return header.size + sum(
            rank * (header.rows + header.cols + 1) * header.itemsize
            for rank in header.slots
        )
    grid: PatchGrid = header.grid()
    cfg: CodecConfig = header.config()
    return header.size + sum(
        bitmap_size(grid.total_patches)
        + _patch_bytes(cfg, grid, complexity_map, header.itemsize)
        for complexity_map in complexity_maps
    )


def encode(c: CompressedImage, precision: int = 32) -> bytes:
    """Serialize `c` with factors stored as 32 or 64-bit floats"""
    if precision not in PRECISION_IDS:
        raise InvalidInputError(f"Unsupported {precision=}, expected 32 or 64")
    dtype: np.dtype = _DTYPES[precision]
    header: ArchiveHeader = ArchiveHeader(
        channels=c.channels,
        bit_depth=c.bit_depth,
        rows=c.grid.image_rows,
        cols=c.grid.image_cols,
        p_x=c.config.p_x,
        p_y=c.config.p_y,
        k_c=c.config.k_c,
        k_s=c.config.k_s,
        base_rank=c.config.base_rank,
        score_fn=c.config.score_fn,
        fallback=c.fallback,
        slots=tuple(
            payload.fallback_factors.k
            if payload.fallback_factors is not None
            else payload.n_c
            for payload in c.payloads
        ),
        precision=precision,
    )
    chunks: list[bytes] = [header.pack()]
    for payload in c.payloads:
        if payload.fallback_factors is not None:
            chunks.append(_pack_factors(payload.fallback_factors, dtype))
            continue
        chunks.append(np.packbits(np.array(payload.complexity_map, dtype=bool)).tobytes())
        chunks.extend(_pack_factors(factors, dtype) for factors in payload.patch_factors)
    data: bytes = b"".join(chunks)
    log.debug(f"Encoded {len(data)} bytes, {header=}")
    return data


def decode(data: bytes) -> CompressedImage:
    """Strict inverse of `encode`.

    Raises an `ArchiveError` subclass carrying the byte offset of the first
    problem; no read ever goes past the end of `data`.
    """
    reader: _Reader = _Reader(bytes(data))
    header: ArchiveHeader = read_header(reader)
    dtype: np.dtype = _DTYPES[header.precision]
    payloads: list[ChannelPayload]
    if header.fallback:
        payloads = [
            ChannelPayload(
                fallback_factors=reader.factors(header.rows, header.cols, rank, dtype)
            )
            for rank in header.slots
        ]
    else:
        payloads = [_read_channel(reader, header, n_c, dtype) for n_c in header.slots]
    if reader.remaining:
        raise InconsistentGeometryError(
            f"{reader.remaining} trailing bytes after the payload", reader.position
        )
    stored: int = sum(payload.element_count for payload in payloads)
    achieved_cr: float = 1.0 - stored / (header.rows * header.cols * header.channels)
    try:
        return CompressedImage(
            config=header.config(target_cr=max(0.0, achieved_cr)),
            grid=header.grid(),
            bit_depth=header.bit_depth,
            payloads=tuple(payloads),
        )
    except PatchSvdError as e:
        raise InconsistentGeometryError(f"Inconsistent payload: {e}", header.size) from e


def read_header(data: Union[bytes, "_Reader"]) -> ArchiveHeader:
    reader: _Reader = data if isinstance(data, _Reader) else _Reader(bytes(data))
    magic: bytes = reader.peek(len(MAGIC))
    if magic != MAGIC[: len(magic)]:
        raise BadMagicError(f"Expected magic {MAGIC!r}, got {magic!r}", 0)
    reader.take(len(MAGIC))
    version: int = reader.peek(1)[0] if reader.remaining else -1
    if reader.remaining and version != VERSION:
        raise UnsupportedVersionError(f"Unsupported archive {version=}", reader.position)
    reader.position = 0
    (
        _,
        _,
        channels,
        bit_depth,
        rows,
        cols,
        p_x,
        p_y,
        k_c,
        k_s,
        base_rank,
        score_id,
        fallback,
    ) = reader.unpack(_FIXED_HEADER)
    if channels not in SUPPORTED_CHANNELS:
        raise InconsistentGeometryError(f"Unsupported {channels=}", _CHANNELS_OFFSET)
    if bit_depth not in SUPPORTED_BIT_DEPTHS:
        raise InconsistentGeometryError(f"Unsupported {bit_depth=}", _BIT_DEPTH_OFFSET)
    if rows < 1 or cols < 1:
        raise InconsistentGeometryError(f"Empty image {rows=} {cols=}", _ROWS_OFFSET)
    if p_x < 1 or p_y < 1:
        raise InconsistentGeometryError(f"Empty patch {p_x=} {p_y=}", _PATCH_OFFSET)
    score_fns: dict[int, ScoreFunction] = {v: k for k, v in SCORE_IDS.items()}
    if score_id not in score_fns:
        raise InconsistentGeometryError(f"Unknown {score_id=}", _SCORE_OFFSET)
    if fallback not in (0, 1):
        raise InconsistentGeometryError(f"Bad {fallback=} flag", _FALLBACK_OFFSET)
    slots_offset: int = reader.position
    slots: tuple[int, ...] = tuple(reader.unpack(_SLOT)[0] for _ in range(channels))
    precision_offset: int = reader.position
    (precision_id,) = reader.unpack(_PRECISION)
    precisions: dict[int, int] = {v: k for k, v in PRECISION_IDS.items()}
    if precision_id not in precisions:
        raise InconsistentGeometryError(f"Unknown {precision_id=}", precision_offset)
    header: ArchiveHeader = ArchiveHeader(
        channels=channels,
        bit_depth=bit_depth,
        rows=rows,
        cols=cols,
        p_x=p_x,
        p_y=p_y,
        k_c=k_c,
        k_s=k_s,
        base_rank=base_rank,
        score_fn=score_fns[score_id],
        fallback=bool(fallback),
        slots=slots,
        precision=precisions[precision_id],
    )
    _check_header(header, slots_offset)
    return header


def byte_compression_ratio(data: bytes, original: Image) -> float:
    """`1 - archive bytes / raw bytes`; negative when the archive is larger"""
    return 1.0 - len(data) / original.raw_bytes


def _check_header(header: ArchiveHeader, slots_offset: int) -> None:
    if header.fallback:
        for channel, rank in enumerate(header.slots):
            if not 1 <= rank <= min(header.rows, header.cols):
                raise InconsistentGeometryError(
                    f"Whole-image rank {rank} of channel {channel} is outside "
                    f"[1, {min(header.rows, header.cols)}]",
                    slots_offset + channel * _SLOT.size,
                )
        return
    violations: list[str] = validate(header.config())
    if violations:
        raise InconsistentGeometryError(
            f"Infeasible codec config: {'; '.join(violations)}", _PATCH_OFFSET
        )
    grid: PatchGrid = header.grid()
    for channel, n_c in enumerate(header.slots):
        if n_c > grid.total_patches:
            raise InconsistentGeometryError(
                f"{n_c=} of channel {channel} exceeds {grid.total_patches} patches",
                slots_offset + channel * _SLOT.size,
            )


def _read_channel(
    reader: "_Reader", header: ArchiveHeader, n_c: int, dtype: np.dtype
) -> ChannelPayload:
    grid: PatchGrid = header.grid()
    t: int = grid.total_patches
    bitmap_offset: int = reader.position
    bitmap: bytes = reader.take(bitmap_size(t))
    bits: npt.NDArray[np.uint8] = np.unpackbits(np.frombuffer(bitmap, dtype=np.uint8))
    if bits[t:].any():
        raise InconsistentGeometryError("Non-zero bitmap padding bits", bitmap_offset)
    complexity_map: tuple[bool, ...] = tuple(bool(bit) for bit in bits[:t])
    if sum(complexity_map) != n_c:
        raise InconsistentGeometryError(
            f"Bitmap marks {sum(complexity_map)} complex patches, header says {n_c=}",
            bitmap_offset,
        )
    cfg: CodecConfig = header.config()
    needed: int = _patch_bytes(cfg, grid, complexity_map, dtype.itemsize)
    if needed > reader.remaining:
        raise TruncatedArchiveError(
            f"Channel payload needs {needed} bytes, {reader.remaining} left",
            reader.position,
        )
    factors: list[FactorTriple] = []
    for index, is_complex in enumerate(complexity_map):
        extent: tuple[int, int] = grid.extent(index)
        rank: int = patch_rank(cfg, is_complex, extent)
        factors.append(reader.factors(*extent, rank, dtype))
    return ChannelPayload(complexity_map=complexity_map, patch_factors=tuple(factors))


def _patch_bytes(
    cfg: CodecConfig, grid: PatchGrid, complexity_map: tuple[bool, ...], itemsize: int
) -> int:
    total: int = 0
    for index, is_complex in enumerate(complexity_map):
        rows, cols = grid.extent(index)
        total += patch_rank(cfg, is_complex, (rows, cols)) * (rows + cols + 1)
    return total * itemsize


def _pack_factors(f: FactorTriple, dtype: np.dtype) -> bytes:
    return (
        np.asarray(f.u, dtype=dtype).tobytes(order="F")
        + np.asarray(f.sigma, dtype=dtype).tobytes()
        + np.asarray(f.vt, dtype=dtype).tobytes(order="C")
    )


class _Reader:
    """Cursor over archive bytes that refuses to read past the end"""

    def __init__(self, data: bytes) -> None:
        self.data: Final[bytes] = data
        self.position: int = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.position

    def peek(self, size: int) -> bytes:
        return self.data[self.position : self.position + size]

    def take(self, size: int) -> bytes:
        if size > self.remaining:
            raise TruncatedArchiveError(
                f"Needed {size} bytes, {self.remaining} left", self.position
            )
        chunk: bytes = self.data[self.position : self.position + size]
        self.position += size
        return chunk

    def unpack(self, layout: struct.Struct) -> tuple:
        return layout.unpack(self.take(layout.size))

    def array(self, count: int, dtype: np.dtype) -> npt.NDArray[np.float64]:
        offset: int = self.position
        values: npt.NDArray[np.float64] = np.frombuffer(
            self.take(count * dtype.itemsize), dtype=dtype
        ).astype(np.float64)
        if not np.isfinite(values).all():
            raise InconsistentGeometryError("Non-finite factor value", offset)
        return values

    def factors(self, rows: int, cols: int, rank: int, dtype: np.dtype) -> FactorTriple:
        u: npt.NDArray[np.float64] = self.array(rows * rank, dtype)
        sigma_offset: int = self.position
        sigma: npt.NDArray[np.float64] = self.array(rank, dtype)
        if (sigma < 0).any():
            raise InconsistentGeometryError("Negative singular value", sigma_offset)
        vt: npt.NDArray[np.float64] = self.array(rank * cols, dtype)
        return FactorTriple(
            np.ascontiguousarray(u.reshape((rows, rank), order="F")),
            sigma,
            vt.reshape(rank, cols),
        )
