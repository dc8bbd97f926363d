"""Yearly training-mix assembly with a hard leakage guard."""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import random
from pathlib import Path
from typing import Sequence

from ..errors import LeakageError
from .types import InstructionExample, save_mix


def find_leakage_violations(
    examples: Sequence[InstructionExample], cutoff_year: int
) -> list[tuple[int, str]]:
    """Examples that may not enter a mix declared at this cutoff.

    Admissible examples either carry sensitivity=general, or carry a
    timestamp strictly before Jan 1 of the cutoff year. Time-sensitive data
    without a timestamp is a violation: its recency cannot be audited.
    """
    boundary = dt.date(cutoff_year, 1, 1)
    violations: list[tuple[int, str]] = []
    for index, ex in enumerate(examples):
        if ex.sensitivity == "general":
            continue
        if ex.timestamp is None:
            violations.append((index, f"{ex.source or 'example'}: no timestamp on non-general data"))
        elif ex.timestamp >= boundary:
            violations.append(
                (index, f"{ex.source or 'example'}: dated {ex.timestamp}, boundary {boundary}")
            )
    return violations


def _stable_key(ex: InstructionExample) -> str:
    return hashlib.sha256(
        json.dumps(ex.to_json(), sort_keys=True, ensure_ascii=False).encode("utf-8")
    ).hexdigest()


def assemble_year_mix(
    general: Sequence[InstructionExample],
    year_specific: Sequence[InstructionExample],
    year: int,
    seed: int,
    out_path: str | Path | None = None,
) -> list[InstructionExample]:
    """Combine filtered general data with one year's specific data.

    Refuses (naming offenders) if any example violates the year's boundary.
    The result is deterministically shuffled: examples sort by a stable
    content key, then shuffle under the given seed; identical inputs and seed
    produce an identical file.
    """
    combined = list(general) + list(year_specific)
    if not combined:
        raise ValueError("cannot assemble an empty mix")
    violations = find_leakage_violations(combined, year)
    if violations:
        detail = "; ".join(f"#{i}: {why}" for i, why in violations[:10])
        raise LeakageError(
            f"{len(violations)} example(s) violate the {year} cutoff boundary: {detail}"
        )
    combined.sort(key=_stable_key)
    random.Random(seed).shuffle(combined)
    if out_path is not None:
        save_mix(combined, cutoff_year=year, seed=seed, path=out_path)
    return combined
