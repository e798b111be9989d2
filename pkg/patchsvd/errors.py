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
from typing import Optional


class PatchSvdError(Exception):
    """Base class of every error raised by the codec"""


class InvalidInputError(PatchSvdError, ValueError):
    """Input matrix or image is empty, non-finite or otherwise unusable"""


class InvalidRankError(PatchSvdError, ValueError):
    """Requested rank is outside `[1, min(rows, cols)]`"""


class GeometryMismatchError(PatchSvdError, ValueError):
    """Patch list or image does not match the patch grid"""


class DegenerateAllocationError(PatchSvdError, ValueError):
    """`k_c == k_s`: the complex fraction is undefined, use the uniform SVD path"""


class InfeasibleRateError(PatchSvdError, ValueError):
    """Target compression ratio cannot be reached even by the fallback"""


class InfeasibleConfigError(PatchSvdError, ValueError):
    """Codec config violates one or more feasibility conditions"""

    def __init__(self, violations: "list[str]") -> None:
        self.violations: list[str] = list(violations)
        super().__init__("; ".join(self.violations))


class ImageFormatError(PatchSvdError, ValueError):
    """Input file is not a supported PNG image"""


class ArchiveError(PatchSvdError, ValueError):
    """Archive bytes cannot be decoded"""

    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset: Optional[int] = offset
        super().__init__(message if offset is None else f"{message} (at byte {offset})")


class BadMagicError(ArchiveError):
    """Archive does not start with the `PSVD` magic"""


class UnsupportedVersionError(ArchiveError):
    """Archive version byte is not supported"""


class InconsistentGeometryError(ArchiveError):
    """Archive header or payload contradicts itself"""


class TruncatedArchiveError(ArchiveError):
    """Archive ended before the declared payload was read"""
