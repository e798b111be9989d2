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
from typing import Final

log = logging.getLogger(__name__)

MAX_WORKERS_ENV: Final[str] = "PATCHSVD_MAX_WORKERS"


def max_workers() -> int:
    """Worker count for thread pools, capped by `PATCHSVD_MAX_WORKERS`"""
    default_workers: Final[int] = os.cpu_count() or 1
    env_value: str = os.environ.get(MAX_WORKERS_ENV, "").strip()
    if not env_value:
        return default_workers
    try:
        cap: int = int(env_value)
    except ValueError:
        log.warning(f"Ignoring non-integer {MAX_WORKERS_ENV}={env_value!r}")
        return default_workers
    return max(1, cap)
