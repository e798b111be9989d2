"""Storage counts, compression ratios and complex patch allocation

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
from fractions import Fraction
from typing import Optional

from patchsvd.errors import (
    DegenerateAllocationError,
    InfeasibleConfigError,
    InfeasibleRateError,
    InvalidInputError,
    InvalidRankError,
)
from patchsvd.patching import PatchGrid
from patchsvd.scoring import ScoreFunction

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodecConfig:
    """Patch size, complex/simple ranks and target compression ratio.

    Construction never fails; use `validate()` to list violated conditions.
    """

    p_x: int
    p_y: int
    k_c: int
    k_s: int
    target_cr: float
    score_fn: ScoreFunction = ScoreFunction.STD
    base_rank: int = 1

    @classmethod
    def with_default_ranks(
        cls,
        p_x: int,
        p_y: int,
        target_cr: float,
        score_fn: ScoreFunction = ScoreFunction.STD,
        base_rank: int = 1,
    ) -> "CodecConfig":
        """`k_s = 1` and `k_c` at the largest rank a patch can afford"""
        return cls(
            p_x=p_x,
            p_y=p_y,
            k_c=default_complex_rank(p_x, p_y),
            k_s=1,
            target_cr=target_cr,
            score_fn=score_fn,
            base_rank=base_rank,
        )


@dataclass(frozen=True)
class RatePlan:
    n_c: int
    n_s: int
    achieved_cr: float
    fallback: bool
    fallback_rank: Optional[int] = None
    # `k_c == k_s`: every patch at the same rank, no complex/simple split
    uniform: bool = False

    @property
    def whole_image(self) -> bool:
        """The image is stored as one truncated SVD"""
        return self.fallback and not self.uniform


def default_complex_rank(p_x: int, p_y: int) -> int:
    return max(1, min((p_x * p_y) // (p_x + p_y + 1), p_x, p_y))


def storage_svd(m: int, n: int, k: int) -> int:
    """Values stored by a rank-`k` SVD of an `m x n` matrix"""
    if not 1 <= k <= min(m, n):
        raise InvalidRankError(f"Rank {k=} is outside [1, {min(m, n)}]")
    return k * (m + n + 1)


def storage_patchsvd(p_x: int, p_y: int, n_c: int, n_s: int, k_c: int, k_s: int) -> int:
    """Values stored for `n_c` complex and `n_s` simple full-size patches"""
    return (p_x + p_y + 1) * (n_c * k_c + n_s * k_s)


def compression_ratio(p_x: int, p_y: int, n_c: int, n_s: int, k_c: int, k_s: int) -> float:
    """`1 - stored / original`, both counted in values"""
    return float(_exact_compression_ratio(p_x, p_y, n_c, n_s, k_c, k_s))


def complex_fraction(cfg: CodecConfig) -> float:
    """Share `n_c / t` of complex patches that meets `cfg.target_cr`"""
    return float(_exact_complex_fraction(cfg))


def validate(cfg: CodecConfig) -> list[str]:
    """Every violated feasibility condition; an empty list means feasible"""
    violations: list[str] = []
    if cfg.p_x < 1 or cfg.p_y < 1:
        violations.append(f"Patch size must be positive, got {cfg.p_x=} {cfg.p_y=}")
    if cfg.k_s < 1 or cfg.k_c < 1:
        violations.append(f"Ranks must be positive, got {cfg.k_c=} {cfg.k_s=}")
    if cfg.base_rank < 1:
        violations.append(f"Base rank must be positive, got {cfg.base_rank=}")
    if cfg.k_c < cfg.k_s:
        violations.append(
            f"Complex rank must not be below simple rank, got {cfg.k_c=} < {cfg.k_s=}"
        )
    if cfg.p_x >= 1 and cfg.p_y >= 1:
        if cfg.p_x * cfg.p_y < cfg.k_s * (cfg.p_x + cfg.p_y + 1):
            violations.append(
                f"Simple patches cannot be compressed: p_x*p_y/(p_x+p_y+1) = "
                f"{cfg.p_x * cfg.p_y / (cfg.p_x + cfg.p_y + 1):.4f} < {cfg.k_s=}"
            )
        if cfg.p_x == cfg.p_y and cfg.k_s >= 0:
            if not _square_patch_bound_holds(cfg.p_x, cfg.k_s):
                violations.append(
                    f"Square patch too small: P >= k_s + sqrt(k_s^2 + k_s) = "
                    f"{cfg.k_s + math.sqrt(cfg.k_s**2 + cfg.k_s):.4f} "
                    f"required, got P={cfg.p_x}"
                )
    if not (math.isfinite(cfg.target_cr) and 0.0 <= cfg.target_cr < 1.0):
        violations.append(f"Target ratio must be within [0, 1), got {cfg.target_cr=}")
    return violations


def fallback_rank(cr: float, m: int, n: int) -> int:
    """Whole-image SVD rank for ratio `cr`, clamped to `[1, min(m, n)]`"""
    return max(1, min(_raw_fallback_rank(cr, m, n), m, n))


def plan(cfg: CodecConfig, grid: PatchGrid) -> RatePlan:
    """Number of complex and simple patches for `cfg` on `grid`"""
    violations: list[str] = validate(cfg)
    if violations:
        raise InfeasibleConfigError(violations)
    t: int = grid.total_patches
    if cfg.k_c == cfg.k_s:
        exact_cr: Fraction = _exact_compression_ratio(
            cfg.p_x, cfg.p_y, 0, t, cfg.k_c, cfg.k_s
        )
        if exact_cr < Fraction(cfg.target_cr):
            raise InfeasibleRateError(
                f"Uniform rank {cfg.k_s} reaches a ratio of {float(exact_cr):.4f}, "
                f"below {cfg.target_cr=}"
            )
        return RatePlan(
            n_c=0, n_s=t, achieved_cr=float(exact_cr), fallback=True, uniform=True
        )
    n_c: int = min(t, max(0, math.floor(_exact_complex_fraction(cfg) * t)))
    if n_c < 1:
        return _fallback_plan(cfg, grid)
    return RatePlan(
        n_c=n_c,
        n_s=t - n_c,
        achieved_cr=compression_ratio(cfg.p_x, cfg.p_y, n_c, t - n_c, cfg.k_c, cfg.k_s),
        fallback=False,
    )


def _fallback_plan(cfg: CodecConfig, grid: PatchGrid) -> RatePlan:
    m: int = grid.image_rows
    n: int = grid.image_cols
    raw_rank: int = _raw_fallback_rank(cfg.target_cr, m, n)
    if raw_rank < 1:
        raise InfeasibleRateError(
            f"Even a rank-1 SVD of a {m}x{n} image stores {m + n + 1} values, "
            f"too many for {cfg.target_cr=}"
        )
    rank: int = min(raw_rank, m, n)
    return RatePlan(
        n_c=0,
        n_s=0,
        achieved_cr=1.0 - storage_svd(m, n, rank) / (m * n),
        fallback=True,
        fallback_rank=rank,
    )


def _raw_fallback_rank(cr: float, m: int, n: int) -> int:
    if not 0.0 <= cr < 1.0:
        raise InvalidInputError(f"{cr=} must be within [0, 1)")
    return math.floor((1 - Fraction(cr)) * m * n / (m + n + 1))


def _exact_compression_ratio(
    p_x: int, p_y: int, n_c: int, n_s: int, k_c: int, k_s: int
) -> Fraction:
    if n_c + n_s < 1:
        raise InvalidInputError(f"No patches: {n_c=} {n_s=}")
    return 1 - Fraction(
        storage_patchsvd(p_x, p_y, n_c, n_s, k_c, k_s), p_x * p_y * (n_c + n_s)
    )


def _exact_complex_fraction(cfg: CodecConfig) -> Fraction:
    if cfg.k_c == cfg.k_s:
        raise DegenerateAllocationError(
            f"{cfg.k_c=} equals {cfg.k_s=}, the allocation is uniform"
        )
    if cfg.k_c < cfg.k_s:
        raise InvalidRankError(f"{cfg.k_c=} is below {cfg.k_s=}")
    budget: Fraction = (
        Fraction(cfg.p_x * cfg.p_y) * (1 - Fraction(cfg.target_cr))
    ) / (cfg.p_x + cfg.p_y + 1)
    return (budget - cfg.k_s) / (cfg.k_c - cfg.k_s)


def _square_patch_bound_holds(p: int, k_s: int) -> bool:
    """`p >= k_s + sqrt(k_s^2 + k_s)` in integer arithmetic"""
    return p >= k_s and (p - k_s) ** 2 >= k_s * k_s + k_s
