"""Finance-domain teacher prompts anchored to observation dates.

Prompts embed the record's as-of date and instruct the teacher to reason
only on information available before that date; sampling is balanced
across calendar months so every market regime in a year is represented.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

from ..endpoint import ChatEndpointClient, EndpointError
from .types import FinancePromptRecord, InstructionExample

import datetime as dt
import re


@dataclass(frozen=True)
class FinancePrompt:
    kind: str
    entity: str
    as_of: dt.date
    user_text: str

    @property
    def month(self) -> int:
        return self.as_of.month


def _render_prompt(record: FinancePromptRecord) -> str:
    date = record.as_of.isoformat()
    if record.kind == "headline_return":
        return (
            f"Today is {date}. Using only information available strictly before this "
            f"date, assess the likely direction of {record.entity}'s stock return in "
            f"response to the following news headline. Answer UP, DOWN, or FLAT, then "
            f"give a short rationale.\n\nHeadline: {record.context}"
        )
    return (
        f"Today is {date}. Using only information available strictly before this "
        f"date, forecast whether {record.entity}'s capital expenditure will INCREASE "
        f"or DECREASE over the coming year, based on this earnings-call excerpt, and "
        f"explain the signals you used.\n\nExcerpt: {record.context}"
    )


def _balanced_allocation(supply: dict[int, int], target: int) -> dict[int, int]:
    """Largest per-month quota q such that sum(min(supply, q)) <= target, then
    spread the remainder one-per-month in calendar order."""
    months = sorted(supply)
    take = {m: 0 for m in months}
    if target <= 0:
        return take
    total_supply = sum(supply.values())
    if total_supply <= target:
        return dict(supply)
    lo, hi = 0, max(supply.values())
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if sum(min(s, mid) for s in supply.values()) <= target:
            lo = mid
        else:
            hi = mid - 1
    take = {m: min(supply[m], lo) for m in months}
    remainder = target - sum(take.values())
    for m in months:
        if remainder == 0:
            break
        if supply[m] > take[m]:
            take[m] += 1
            remainder -= 1
    return take


def build_finance_prompts(
    records: Sequence[FinancePromptRecord],
    year: int,
    per_year_target: int = 6000,
) -> list[FinancePrompt]:
    """Month-balanced prompt set for one year; deterministic (earliest records win).

    Bucket sizes differ by at most one whenever supply permits. Months with no
    supply trigger a warning and their share is redistributed proportionally
    across the supplied months.
    """
    for record in records:
        if record.as_of.year != year:
            raise ValueError(
                f"record dated {record.as_of} is outside the target year {year}"
            )
    by_month: dict[int, list[FinancePromptRecord]] = {}
    for record in records:
        by_month.setdefault(record.month, []).append(record)

    empty = [m for m in range(1, 13) if m not in by_month]
    if empty:
        warnings.warn(
            f"months {empty} have no records for {year}; redistributing their share",
            stacklevel=2,
        )
    if not by_month:
        raise ValueError(f"no records supplied for year {year}")

    supply = {m: len(v) for m, v in by_month.items()}
    take = _balanced_allocation(supply, per_year_target)
    if sum(supply.values()) < per_year_target:
        warnings.warn(
            f"only {sum(supply.values())} records available for {year}, "
            f"target was {per_year_target}",
            stacklevel=2,
        )

    prompts: list[FinancePrompt] = []
    for month in sorted(by_month):
        chosen = by_month[month][: take.get(month, 0)]
        for record in chosen:
            prompts.append(
                FinancePrompt(
                    kind=record.kind,
                    entity=record.entity,
                    as_of=record.as_of,
                    user_text=_render_prompt(record),
                )
            )
    return prompts


# A usable teacher response must commit to a direction or a number.
_JUDGMENT_RE = re.compile(
    r"\b(up|down|flat|increase|decrease|higher|lower|rise|fall)\b|\d", re.IGNORECASE
)


def _response_ok(text: str) -> bool:
    return bool(text.strip()) and bool(_JUDGMENT_RE.search(text))


def generate_teacher_examples(
    prompts: Sequence[FinancePrompt],
    teacher: ChatEndpointClient,
) -> tuple[list[InstructionExample], int]:
    """Query the teacher per prompt; returns (examples, dropped count).

    Responses failing the minimal shape check are dropped and counted, as are
    prompts whose endpoint calls keep failing; zero successes is fatal.
    """
    examples: list[InstructionExample] = []
    dropped = 0
    for prompt in prompts:
        try:
            reply = teacher.complete([{"role": "user", "content": prompt.user_text}])
        except EndpointError:
            dropped += 1
            continue
        if not _response_ok(reply):
            dropped += 1
            continue
        examples.append(
            InstructionExample(
                messages=(("user", prompt.user_text), ("assistant", reply)),
                source=f"teacher:{prompt.kind}",
                timestamp=prompt.as_of,
                sensitivity="time_sensitive",
            )
        )
    if prompts and not examples:
        raise EndpointError(f"teacher produced no usable responses for {len(prompts)} prompts")
    return examples, dropped
