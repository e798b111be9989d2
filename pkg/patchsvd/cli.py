"""Command-line interface: compress, decompress, eval, sweep, compare, inspect

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
import argparse
import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Final, Optional

from pydantic import ValidationError

from patchsvd import archive, codec, ratemath
from patchsvd.config import (
    JPEG_DECODER_ENV,
    JPEG_ENCODER_ENV,
    SweepCodec,
    SweepConfigModel,
    load_config_model,
)
from patchsvd.errors import (
    ArchiveError,
    DegenerateAllocationError,
    InfeasibleConfigError,
    InfeasibleRateError,
    InvalidRankError,
    PatchSvdError,
)
from patchsvd.images import (
    Image,
    ImagePlane,
    complexity_visual,
    delta_visual,
    read_png,
    side_by_side,
    write_png,
)
from patchsvd.linalg import Matrix
from patchsvd.metrics import QualityReport, evaluate
from patchsvd.output import write_csv, write_json
from patchsvd.patching import PatchGrid, grid_layout
from patchsvd.ratemath import CodecConfig, RatePlan
from patchsvd.scoring import ScoreFunction, compute_delta
from patchsvd.sweep import CSV_COLUMNS, ExternalJpeg, SweepRow, run_sweep

log = logging.getLogger(__name__)

EXIT_OK: Final[int] = 0
EXIT_INPUT_ERROR: Final[int] = 2
EXIT_INFEASIBLE: Final[int] = 3
EXIT_CORRUPT_ARCHIVE: Final[int] = 4

DEFAULT_CR: Final[float] = 0.85
DEFAULT_PATCH: Final[int] = 16


def main(argv: Optional[Sequence[str]] = None) -> int:
    args: argparse.Namespace = build_parser().parse_args(argv)
    try:
        args.command(args)
    except ArchiveError as e:
        print(f"Corrupt archive: {e}", file=sys.stderr)
        return EXIT_CORRUPT_ARCHIVE
    except InfeasibleConfigError as e:
        print("Infeasible codec configuration:", file=sys.stderr)
        for violation in e.violations:
            print(f"  {violation}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InfeasibleRateError, InvalidRankError, DegenerateAllocationError) as e:
        print(f"Infeasible rate: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (PatchSvdError, OSError, ValidationError) as e:
        print(f"Input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchsvd", description="Non-uniform patch-wise SVD image compression"
    )
    commands = parser.add_subparsers(dest="command_name", required=True)

    compress = commands.add_parser("compress", help="PNG to .psvd archive")
    compress.add_argument("input", type=Path)
    compress.add_argument("output", type=Path)
    add_codec_arguments(compress)
    compress.add_argument(
        "--precision", type=int, choices=sorted(archive.PRECISION_IDS), default=32
    )
    compress.set_defaults(command=cmd_compress)

    decompress = commands.add_parser("decompress", help=".psvd archive to PNG")
    decompress.add_argument("input", type=Path)
    decompress.add_argument("output", type=Path)
    decompress.set_defaults(command=cmd_decompress)

    evaluate_ = commands.add_parser("eval", help="MSE, PSNR and SSIM of two PNGs")
    evaluate_.add_argument("reference", type=Path)
    evaluate_.add_argument("candidate", type=Path)
    evaluate_.add_argument("--json", action="store_true", help="machine-readable output")
    evaluate_.set_defaults(command=cmd_eval)

    sweep = commands.add_parser("sweep", help="compare codecs over a PNG directory")
    sweep.add_argument("--config", help="JSON sweep config, flags override it")
    sweep.add_argument("--input-dir", type=Path)
    sweep.add_argument("--output", type=Path, help="CSV file")
    sweep.add_argument("--patch-sizes", type=int, nargs="+")
    sweep.add_argument("--crs", type=float, nargs="+", help="target compression ratios")
    sweep.add_argument("--scores", type=ScoreFunction, nargs="+")
    sweep.add_argument("--codecs", type=SweepCodec, nargs="+")
    sweep.add_argument("--kc", type=int)
    sweep.add_argument("--ks", type=int)
    sweep.add_argument("--base-rank", type=int)
    sweep.add_argument("--max-images", type=int)
    sweep.add_argument("--jpeg-encoder")
    sweep.add_argument("--jpeg-decoder")
    sweep.set_defaults(command=cmd_sweep)

    compare = commands.add_parser(
        "compare", help="side-by-side original | PatchSVD | SVD [| JPEG]"
    )
    compare.add_argument("input", type=Path)
    compare.add_argument("output", type=Path)
    add_codec_arguments(compare)
    compare.set_defaults(command=cmd_compare)

    inspect = commands.add_parser("inspect", help="delta and complexity map images")
    inspect.add_argument("input", type=Path)
    inspect.add_argument("output_prefix", type=Path)
    add_codec_arguments(inspect)
    inspect.set_defaults(command=cmd_inspect)
    return parser


def add_codec_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cr", type=float, default=DEFAULT_CR, help="target ratio")
    parser.add_argument("--patch", type=int, help="square patch size")
    parser.add_argument("--px", type=int, help="patch width")
    parser.add_argument("--py", type=int, help="patch height")
    parser.add_argument("--kc", type=int, help="complex patch rank")
    parser.add_argument("--ks", type=int, default=1, help="simple patch rank")
    parser.add_argument(
        "--score",
        type=ScoreFunction,
        choices=list(ScoreFunction),
        default=ScoreFunction.STD,
    )
    parser.add_argument("--base-rank", type=int, default=1)


def codec_config(args: argparse.Namespace) -> CodecConfig:
    p_x: int = args.px or args.patch or DEFAULT_PATCH
    p_y: int = args.py or args.patch or DEFAULT_PATCH
    k_c: int = args.kc if args.kc is not None else ratemath.default_complex_rank(p_x, p_y)
    if k_c == args.ks:
        log.warning(f"{k_c=} equals k_s={args.ks}: uniform SVD path")
    return CodecConfig(
        p_x=p_x,
        p_y=p_y,
        k_c=k_c,
        k_s=args.ks,
        target_cr=args.cr,
        score_fn=args.score,
        base_rank=args.base_rank,
    )


def cmd_compress(args: argparse.Namespace) -> None:
    image: Image = read_png(args.input)
    cfg: CodecConfig = codec_config(args)
    compressed: codec.CompressedImage = codec.compress(image, cfg)
    data: bytes = archive.encode(compressed, args.precision)
    if args.output.suffix != archive.FILE_EXTENSION:
        log.warning(f"Archive '{args.output}' lacks the {archive.FILE_EXTENSION} extension")
    args.output.write_bytes(data)
    print(" COMPRESSED ".center(80, "="))
    print(f"Archive:          {args.output} ({len(data)} bytes)")
    print(f"Element CR:       {codec.element_compression_ratio(compressed):.6f}")
    print(f"Byte CR:          {archive.byte_compression_ratio(data, image):.6f}")
    print(f"Complex patches:  {[payload.n_c for payload in compressed.payloads]}")
    print(f"Total patches:    {compressed.grid.total_patches}")
    print(f"Fallback:         {compressed.fallback}")


def cmd_decompress(args: argparse.Namespace) -> None:
    compressed: codec.CompressedImage = archive.decode(args.input.read_bytes())
    image: Image = codec.decompress(compressed)
    write_png(image, args.output)
    print(
        f'Image {image.cols}x{image.rows}x{image.channels} '
        f'was written to "{args.output}"'
    )


def cmd_eval(args: argparse.Namespace) -> None:
    report: QualityReport = evaluate(read_png(args.reference), read_png(args.candidate))
    if args.json:
        write_json(report.as_dict(), sys.stdout)
    else:
        print_report(args.candidate.name, report)


def cmd_sweep(args: argparse.Namespace) -> None:
    overrides: dict[str, Any] = {
        field: value
        for field, value in (
            ("input_dir", args.input_dir),
            ("output_csv", args.output),
            ("patch_sizes", args.patch_sizes),
            ("compression_ratios", args.crs),
            ("score_functions", args.scores),
            ("codecs", args.codecs),
            ("k_c", args.kc),
            ("k_s", args.ks),
            ("base_rank", args.base_rank),
            ("max_images", args.max_images),
            ("jpeg_encoder", args.jpeg_encoder),
            ("jpeg_decoder", args.jpeg_decoder),
        )
        if value is not None
    }
    cfg: SweepConfigModel = (
        load_config_model(args.config).model_copy(update=overrides)
        if args.config
        else SweepConfigModel(**overrides)
    )
    # Re-validate the merged values
    cfg = SweepConfigModel(**cfg.model_dump())
    rows: list[SweepRow] = run_sweep(cfg)
    write_csv(rows, CSV_COLUMNS, cfg.output_csv)
    failed: int = sum(bool(row.error) for row in rows)
    if failed:
        print(f"{failed} rows recorded errors")


def cmd_compare(args: argparse.Namespace) -> None:
    image: Image = read_png(args.input)
    cfg: CodecConfig = codec_config(args)
    panels: dict[str, Image] = {
        "original": image,
        "patchsvd": codec.decompress(codec.compress(image, cfg)),
        "svd": codec.decompress(codec.compress_svd(image, cfg.target_cr)),
    }
    jpeg: ExternalJpeg = ExternalJpeg(
        os.getenv(JPEG_ENCODER_ENV, "cjpeg"), os.getenv(JPEG_DECODER_ENV)
    )
    if image.bit_depth == 8 and jpeg.available:
        data, quality = jpeg.compress(image, cfg.target_cr)
        log.info(f"JPEG {quality=} {len(data)=}")
        panels["jpeg"] = jpeg.decompress(data)
    write_png(side_by_side(list(panels.values())), args.output)
    print(f" {' | '.join(panels)} ".center(80, "="))
    for name, panel in panels.items():
        if name != "original":
            print_report(name, evaluate(image, panel))
    print(f'Comparison was written to "{args.output}"')


def cmd_inspect(args: argparse.Namespace) -> None:
    image: Image = read_png(args.input)
    cfg: CodecConfig = codec_config(args)
    plane: ImagePlane = next(image.planes())
    grid: PatchGrid = grid_layout(image.rows, image.cols, cfg.p_x, cfg.p_y)
    rate_plan: RatePlan = ratemath.plan(cfg, grid)
    complexity_map: tuple[bool, ...] = (
        (False,) * grid.total_patches
        if rate_plan.whole_image or rate_plan.uniform
        else codec.classify_patches(plane.data, cfg, grid, rate_plan.n_c)
    )
    prefix: Path = args.output_prefix
    delta_path: Path = prefix.with_name(prefix.name + "_delta.png")
    map_path: Path = prefix.with_name(prefix.name + "_complexity.png")
    delta: Matrix = compute_delta(plane.data, cfg.base_rank)
    write_png(delta_visual(delta, image.bit_depth), delta_path)
    write_png(complexity_visual(complexity_map, grid, image.bit_depth), map_path)
    print(" RATE PLAN ".center(80, "="))
    print(f"Complex patches:  {rate_plan.n_c}")
    print(f"Simple patches:   {rate_plan.n_s}")
    print(f"Achieved CR:      {rate_plan.achieved_cr:.6f}")
    print(f"Fallback:         {rate_plan.fallback}")
    if rate_plan.fallback_rank is not None:
        print(f"Fallback rank:    {rate_plan.fallback_rank}")
    print(f'Delta was written to "{delta_path}", complexity map to "{map_path}"')


def print_report(name: str, report: QualityReport) -> None:
    psnr: str = "inf" if math.isinf(report.psnr) else f"{report.psnr:.4f}"
    print(f"{name}: MSE {report.mse:.4f}  PSNR {psnr} dB  SSIM {report.ssim:.6f}")
