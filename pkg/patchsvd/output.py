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
import csv
import dataclasses
import enum
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, TextIO


def write_csv(
    rows: Iterable[Any], columns: Sequence[str], output: Path
) -> None:
    """Write dataclass rows with `columns` as the header"""
    output.parent.mkdir(parents=True, exist_ok=True)
    with output.open("w", encoding="utf-8", newline="") as csv_file:
        writer: csv.DictWriter = csv.DictWriter(csv_file, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow(
                {column: csv_value(getattr(row, column)) for column in columns}
            )
    print(f'Results were written to "{output}"')


def csv_value(value: Any) -> Any:
    if value is None:
        return ""
    elif isinstance(value, bool):
        return int(value)
    elif isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    elif isinstance(value, enum.Enum):
        return value.value
    return value


def write_json(obj: Any, output: TextIO) -> None:
    json.dump(obj, output, indent=2, default=json_encode_helper)
    output.write("\n")


def json_encode_helper(obj: Any) -> Any:
    if isinstance(obj, enum.Enum):
        return obj.value
    elif isinstance(obj, Path):
        return str(obj)
    elif dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return dataclasses.asdict(obj)
    else:
        raise TypeError(f"{obj=} is not serializable")
