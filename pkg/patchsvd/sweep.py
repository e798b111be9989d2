"""Dataset sweeps comparing PatchSVD, whole-image SVD and external JPEG

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
import functools
import logging
import math
import re
import shutil
import subprocess
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Final, Optional

import numpy as np
from tqdm import tqdm

from patchsvd import archive, codec
from patchsvd.config import JPEG_DECODER_ENV, SweepCodec, SweepConfigModel
from patchsvd.errors import ImageFormatError, InvalidInputError, PatchSvdError
from patchsvd.images import Image, read_png
from patchsvd.metrics import QualityReport, evaluate
from patchsvd.ratemath import CodecConfig, default_complex_rank
from patchsvd.scoring import ScoreFunction
from patchsvd.workers import max_workers

log = logging.getLogger(__name__)

AGGREGATE_IMAGE: Final[str] = "__mean__"
COLOR_CONVENTIONS: Final[str] = (
    "colour images: compression ratios aggregate all channels, "
    "metrics are averaged over channels"
)


@dataclass(frozen=True)
class SweepJob:
    """One codec configuration applied to every image"""

    codec: SweepCodec
    target_cr: float
    # Only PatchSVD jobs have a patch size and a score function
    patch: Optional[int] = None
    score_fn: Optional[ScoreFunction] = None


@dataclass(frozen=True)
class SweepRow:
    image: str
    codec: SweepCodec
    patch: Optional[int]
    score_fn: Optional[ScoreFunction]
    target_cr: float
    achieved_cr_elements: Optional[float] = None
    achieved_cr_bytes: Optional[float] = None
    mse: Optional[float] = None
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    # Complex patches over all channels; the mean on aggregate rows
    n_c: Optional[float] = None
    fallback: Optional[bool] = None
    wall_time_ms: Optional[float] = None
    error: str = ""

    @classmethod
    def failed(cls, image: str, job: SweepJob, error: str) -> "SweepRow":
        return cls(
            image=image,
            codec=job.codec,
            patch=job.patch,
            score_fn=job.score_fn,
            target_cr=job.target_cr,
            error=error,
        )


CSV_COLUMNS: Final[tuple[str, ...]] = tuple(
    field.name for field in dataclasses.fields(SweepRow)
)


class ExternalJpeg:
    """System `cjpeg`/`djpeg` pair driven through PNM pipes"""

    PNM_HEADER: Final[re.Pattern] = re.compile(rb"P([56])\s+(\d+)\s+(\d+)\s+(\d+)\s")

    def __init__(self, encoder: str = "cjpeg", decoder: Optional[str] = None) -> None:
        self._log = logging.getLogger(f"{__name__}.{self.__class__.__name__}")
        self.encoder: Final[str] = encoder
        self.decoder: Final[str] = decoder or str(
            Path(encoder).with_name(Path(encoder).name.replace("cjpeg", "djpeg"))
        )

    @functools.cached_property
    def available(self) -> bool:
        if self.decoder == self.encoder:
            self._log.warning(
                f"No JPEG decoder known for '{self.encoder}', set {JPEG_DECODER_ENV}; "
                f"JPEG rows are skipped"
            )
            return False
        found: bool = bool(shutil.which(self.encoder) and shutil.which(self.decoder))
        if not found:
            self._log.warning(
                f"JPEG codec '{self.encoder}'/'{self.decoder}' not found, "
                f"JPEG rows are skipped"
            )
        return found

    def compress(self, image: Image, target_cr: float) -> tuple[bytes, int]:
        """Highest quality whose byte ratio reaches `target_cr`, or quality 1"""
        if image.bit_depth != 8:
            raise InvalidInputError(
                f"External JPEG needs 8-bit input, got {image.bit_depth=}"
            )
        budget: int = math.floor(image.raw_bytes * (1.0 - target_cr))
        pnm: bytes = self.to_pnm(image)
        low: int = 1
        high: int = 100
        best: bytes = self._encode(pnm, low)
        best_quality: int = low
        while low <= high:
            quality: int = (low + high) // 2
            encoded: bytes = self._encode(pnm, quality)
            if len(encoded) <= budget:
                best, best_quality = encoded, quality
                low = quality + 1
            else:
                high = quality - 1
        self._log.debug(f"{best_quality=} {len(best)=} {budget=}")
        return best, best_quality

    def decompress(self, data: bytes) -> Image:
        pnm: bytes = self._run([self.decoder, "-pnm"], data)
        match: Optional[re.Match] = self.PNM_HEADER.match(pnm)
        if match is None:
            raise ImageFormatError(f"Unexpected output of '{self.decoder}'")
        kind, cols, rows, _ = (int(group) for group in match.groups())
        pixels = np.frombuffer(pnm, dtype=np.uint8, offset=match.end())
        channels: int = 1 if kind == 5 else 3
        return Image.from_array(
            pixels[: rows * cols * channels].reshape(rows, cols, channels)
        )

    @staticmethod
    def to_pnm(image: Image) -> bytes:
        kind: int = 5 if image.channels == 1 else 6
        return (
            f"P{kind}\n{image.cols} {image.rows}\n{image.max_value}\n".encode("ascii")
            + image.pixels.astype(np.uint8).tobytes()
        )

    def _encode(self, pnm: bytes, quality: int) -> bytes:
        return self._run([self.encoder, "-quality", str(quality)], pnm)

    @staticmethod
    def _run(command: list[str], data: bytes) -> bytes:
        return subprocess.run(command, input=data, capture_output=True, check=True).stdout


def sweep_jobs(cfg: SweepConfigModel) -> list[SweepJob]:
    """Jobs in CSV order; SVD and JPEG do not depend on patch size or score"""
    jobs: list[SweepJob] = []
    for sweep_codec in cfg.codecs:
        if sweep_codec is SweepCodec.PATCHSVD:
            jobs.extend(
                SweepJob(sweep_codec, target_cr, patch, score_fn)
                for patch in cfg.patch_sizes
                for score_fn in cfg.score_functions
                for target_cr in cfg.compression_ratios
            )
        else:
            jobs.extend(
                SweepJob(sweep_codec, target_cr) for target_cr in cfg.compression_ratios
            )
    return jobs


def list_images(input_dir: Path, max_images: Optional[int] = None) -> list[Path]:
    if not input_dir.is_dir():
        raise InvalidInputError(f"'{input_dir}' is not a directory")
    paths: list[Path] = sorted(
        path for path in input_dir.iterdir() if path.suffix.lower() == ".png"
    )
    if not paths:
        raise InvalidInputError(f"No PNG images in '{input_dir}'")
    return paths[:max_images]


def run_sweep(cfg: SweepConfigModel) -> list[SweepRow]:
    """Per-image rows of every job followed by the job's aggregate row"""
    paths: list[Path] = list_images(cfg.input_dir, cfg.max_images)
    jobs: list[SweepJob] = sweep_jobs(cfg)
    jpeg: ExternalJpeg = ExternalJpeg(cfg.jpeg_encoder, cfg.jpeg_decoder)
    if SweepCodec.JPEG_EXTERNAL in cfg.codecs and not jpeg.available:
        print(f"Skipping {SweepCodec.JPEG_EXTERNAL} rows: '{cfg.jpeg_encoder}' is unavailable")
        jobs = [job for job in jobs if job.codec is not SweepCodec.JPEG_EXTERNAL]
    log.info(f"Sweep conventions: {COLOR_CONVENTIONS}")
    print(f"Sweeping {len(paths)} images with {len(jobs)} configurations")
    image_rows = functools.partial(_image_rows, cfg=cfg, jobs=jobs, jpeg=jpeg)
    per_image: list[list[SweepRow]] = []
    with ThreadPoolExecutor(max_workers=max_workers()) as executor, tqdm(
        total=len(paths), postfix=[{}]
    ) as progress:
        for path, rows in zip(paths, executor.map(image_rows, paths)):
            per_image.append(rows)
            progress.postfix[0]["image"] = path.name
            progress.postfix[0]["errors"] = sum(bool(row.error) for row in rows)
            progress.update()
    result: list[SweepRow] = []
    for job_index, job in enumerate(jobs):
        job_rows: list[SweepRow] = [rows[job_index] for rows in per_image]
        result.extend(job_rows)
        result.append(aggregate(job, job_rows))
    check_score_ordering(result)
    return result


def run_job(
    image: Image, name: str, job: SweepJob, cfg: SweepConfigModel, jpeg: ExternalJpeg
) -> SweepRow:
    started: float = time.perf_counter()
    if job.codec is SweepCodec.JPEG_EXTERNAL:
        data, _ = jpeg.compress(image, job.target_cr)
        report: QualityReport = evaluate(image, jpeg.decompress(data))
        return SweepRow(
            image=name,
            codec=job.codec,
            patch=None,
            score_fn=None,
            target_cr=job.target_cr,
            achieved_cr_bytes=1.0 - len(data) / image.raw_bytes,
            mse=report.mse,
            psnr=report.psnr,
            ssim=report.ssim,
            wall_time_ms=_elapsed_ms(started),
        )
    compressed: codec.CompressedImage
    if job.codec is SweepCodec.PATCHSVD:
        assert job.patch is not None and job.score_fn is not None
        compressed = codec.compress(
            image,
            CodecConfig(
                p_x=job.patch,
                p_y=job.patch,
                k_c=cfg.k_c or default_complex_rank(job.patch, job.patch),
                k_s=cfg.k_s,
                target_cr=job.target_cr,
                score_fn=job.score_fn,
                base_rank=cfg.base_rank,
            ),
        )
    else:
        compressed = codec.compress_svd(image, job.target_cr)
    data: bytes = archive.encode(compressed)
    report = evaluate(image, codec.decompress(compressed))
    patchsvd_row: bool = job.codec is SweepCodec.PATCHSVD
    return SweepRow(
        image=name,
        codec=job.codec,
        patch=job.patch,
        score_fn=job.score_fn,
        target_cr=job.target_cr,
        achieved_cr_elements=codec.element_compression_ratio(compressed),
        achieved_cr_bytes=archive.byte_compression_ratio(data, image),
        mse=report.mse,
        psnr=report.psnr,
        ssim=report.ssim,
        n_c=sum(payload.n_c for payload in compressed.payloads) if patchsvd_row else None,
        fallback=compressed.fallback if patchsvd_row else None,
        wall_time_ms=_elapsed_ms(started),
    )


def aggregate(job: SweepJob, rows: Sequence[SweepRow]) -> SweepRow:
    """Mean over the successful rows of one job"""
    succeeded: list[SweepRow] = [row for row in rows if not row.error]
    if not succeeded:
        return SweepRow.failed(AGGREGATE_IMAGE, job, "no successful rows")

    def mean(column: str) -> Optional[float]:
        values: list[float] = [
            getattr(row, column) for row in succeeded if getattr(row, column) is not None
        ]
        return float(np.mean(values)) if values else None

    fallbacks: list[bool] = [row.fallback for row in succeeded if row.fallback is not None]
    return SweepRow(
        image=AGGREGATE_IMAGE,
        codec=job.codec,
        patch=job.patch,
        score_fn=job.score_fn,
        target_cr=job.target_cr,
        achieved_cr_elements=mean("achieved_cr_elements"),
        achieved_cr_bytes=mean("achieved_cr_bytes"),
        mse=mean("mse"),
        psnr=mean("psnr"),
        ssim=mean("ssim"),
        n_c=mean("n_c"),
        fallback=all(fallbacks) if fallbacks else None,
        wall_time_ms=mean("wall_time_ms"),
        error="" if len(succeeded) == len(rows) else f"{len(rows) - len(succeeded)} failed",
    )


def check_score_ordering(rows: Sequence[SweepRow]) -> dict[tuple[int, float], bool]:
    """Log whether `std` scores at least as well as `mean` and `max` in aggregate SSIM.

    Never fails: the expected margin is small and image dependent.
    """
    ssim_by_key: dict[tuple[int, float, ScoreFunction], float] = {
        (row.patch, row.target_cr, row.score_fn): row.ssim
        for row in rows
        if row.image == AGGREGATE_IMAGE
        and row.codec is SweepCodec.PATCHSVD
        and row.patch is not None
        and row.score_fn is not None
        and row.ssim is not None
    }
    outcome: dict[tuple[int, float], bool] = {}
    for (patch, target_cr, score_fn), std_ssim in ssim_by_key.items():
        if score_fn is not ScoreFunction.STD:
            continue
        others: list[float] = [
            ssim_by_key[(patch, target_cr, other)]
            for other in (ScoreFunction.MEAN, ScoreFunction.MAX)
            if (patch, target_cr, other) in ssim_by_key
        ]
        if not others:
            continue
        holds: bool = all(std_ssim >= other for other in others)
        outcome[(patch, target_cr)] = holds
        log.log(
            logging.INFO if holds else logging.WARNING,
            f"{patch=} {target_cr=}: std SSIM {std_ssim:.5f} "
            f"{'>=' if holds else '<'} mean/max {others}",
        )
    return outcome


def _image_rows(
    path: Path, cfg: SweepConfigModel, jobs: Sequence[SweepJob], jpeg: ExternalJpeg
) -> list[SweepRow]:
    try:
        image: Image = read_png(path)
    except (PatchSvdError, OSError) as e:
        log.warning(f"Skipping '{path}': {e}")
        return [SweepRow.failed(path.name, job, str(e)) for job in jobs]
    rows: list[SweepRow] = []
    for job in jobs:
        try:
            rows.append(run_job(image, path.name, job, cfg, jpeg))
        except (PatchSvdError, subprocess.CalledProcessError) as e:
            log.warning(f"'{path.name}' {job}: {e}")
            rows.append(SweepRow.failed(path.name, job, str(e)))
    return rows


def _elapsed_ms(started: float) -> float:
    return (time.perf_counter() - started) * 1000.0
