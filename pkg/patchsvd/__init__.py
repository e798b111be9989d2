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
import logging
import os
import sys
from typing import Optional

from patchsvd.archive import byte_compression_ratio, decode, encode
from patchsvd.cli import main
from patchsvd.codec import (
    CompressedImage,
    compress,
    compress_svd,
    decompress,
    element_compression_ratio,
    stored_element_count,
)
from patchsvd.images import Image, ImagePlane, read_png, write_png
from patchsvd.metrics import QualityReport, evaluate, mse, psnr, ssim
from patchsvd.ratemath import CodecConfig, RatePlan, plan, validate
from patchsvd.scoring import ScoreFunction


def run_cli(argv: Optional[list[str]] = None) -> None:
    logging_level: int = (
        logging.WARNING if not os.environ.get("PATCHSVD_VERBOSE") else logging.DEBUG
    )
    logging.basicConfig(level=logging_level)
    sys.exit(main(argv))


if __name__ == "__main__":
    run_cli()
