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
import enum
import json
import os
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, PositiveInt, field_validator

from patchsvd.scoring import ScoreFunction

JPEG_ENCODER_ENV = "PATCHSVD_JPEG_ENCODER"
JPEG_DECODER_ENV = "PATCHSVD_JPEG_DECODER"


class SweepCodec(str, enum.Enum):
    PATCHSVD = "patchsvd"
    SVD = "svd"
    JPEG_EXTERNAL = "jpeg-external"

    def __str__(self) -> str:
        return self.value


class SweepConfigModel(BaseModel):
    input_dir: Path
    output_csv: Path = Path("sweep.csv")
    patch_sizes: list[PositiveInt] = Field(default_factory=lambda: [10, 16])
    compression_ratios: list[float] = Field(default_factory=lambda: [0.80, 0.85, 0.90])
    score_functions: list[ScoreFunction] = Field(
        default_factory=lambda: [ScoreFunction.STD]
    )
    codecs: list[SweepCodec] = Field(
        default_factory=lambda: [SweepCodec.PATCHSVD, SweepCodec.SVD]
    )
    # `None` picks the largest rank a patch can afford
    k_c: Optional[PositiveInt] = None
    k_s: PositiveInt = 1
    base_rank: PositiveInt = 1
    jpeg_encoder: str = Field(default_factory=lambda: os.getenv(JPEG_ENCODER_ENV, "cjpeg"))
    # `None` derives the decoder from the encoder name, `cjpeg` -> `djpeg`
    jpeg_decoder: Optional[str] = Field(default_factory=lambda: os.getenv(JPEG_DECODER_ENV))
    max_images: Optional[PositiveInt] = None

    @field_validator("compression_ratios")
    @classmethod
    def ratios_within_unit_interval(cls, ratios: list[float]) -> list[float]:
        for ratio in ratios:
            if not 0.0 <= ratio < 1.0:
                raise ValueError(f"Compression ratio {ratio} is outside [0, 1)")
        return ratios

    @field_validator("patch_sizes", "compression_ratios", "score_functions", "codecs")
    @classmethod
    def not_empty(cls, values: list) -> list:
        if not values:
            raise ValueError("At least one value is required")
        return values


def resolve_path(file_name: str) -> Path:
    """Absolute paths stay, relative paths resolve against the repository root"""
    probably_absolute_path: Path = Path(file_name)
    return (
        probably_absolute_path
        if probably_absolute_path.is_absolute()
        else Path(__file__).absolute().parents[1] / file_name
    )


def load_config_model(config_file_name: str) -> SweepConfigModel:
    """
    :param config_file_name: an absolute path or a path relative to this repository root
    :return: parsed config model
    """
    config_file_path: Path = resolve_path(config_file_name)
    with config_file_path.open(encoding="utf-8") as config_file:
        return SweepConfigModel(**json.load(config_file))
