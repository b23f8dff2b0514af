"""Rule-based resolution-typology and category classification of question text.

Rule lists live in ``rules/*.rules`` as tab-separated lines of
``pattern  label  priority  [field]``. They approximate an upstream keyword
classifier whose full lists are unpublished.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, time, timedelta, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path

from deadline_ils.market_model import (
    Category,
    MarketRecord,
    ResolutionType,
    Subcategory,
    period_of,
)

_FIELDS = ("question", "description", "both")

_MONTHS = {
    name: i
    for i, names in enumerate(
        (
            ("jan", "january"),
            ("feb", "february"),
            ("mar", "march"),
            ("apr", "april"),
            ("may",),
            ("jun", "june"),
            ("jul", "july"),
            ("aug", "august"),
            ("sep", "sept", "september"),
            ("oct", "october"),
            ("nov", "november"),
            ("dec", "december"),
        ),
        start=1,
    )
    for name in names
}
_WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")

_DATE_PHRASE = re.compile(
    r"\b(?:by|before|on or before)\s+"
    r"(?:(?P<month>[a-z]+)\.?\s+(?P<day>\d{1,2})(?:st|nd|rd|th)?(?:,?\s+(?P<year>(?:19|20)\d{2}))?"
    r"|(?P<weekday>monday|tuesday|wednesday|thursday|friday|saturday|sunday)"
    r"|(?:end of\s+)?(?P<year_only>(?:19|20)\d{2}))\b",
    re.IGNORECASE,
)

# Deadlines close at the end of the named UTC calendar day.
_END_OF_DAY = time(23, 59, 59, tzinfo=timezone.utc)


@dataclass(frozen=True)
class Rule:
    rule_id: str
    pattern: re.Pattern[str]
    label: str
    priority: int
    field: str = "question"

    def matches(self, question: str, description: str) -> bool:
        if self.field in ("question", "both") and self.pattern.search(question):
            return True
        if self.field in ("description", "both") and self.pattern.search(description):
            return True
        return False


def parse_rules(text: str, name: str) -> tuple[Rule, ...]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) not in (3, 4):
            raise ValueError(f"{name}:{lineno}: expected 3 or 4 tab-separated columns")
        pattern, label, priority = parts[0], parts[1].strip(), int(parts[2])
        fld = parts[3].strip() if len(parts) == 4 else "question"
        if fld not in _FIELDS:
            raise ValueError(f"{name}:{lineno}: unknown field {fld!r}")
        rules.append(Rule(f"{name}:{lineno}", re.compile(pattern, re.IGNORECASE), label, priority, fld))
    return tuple(rules)


@lru_cache(maxsize=None)
def load_rules(name: str, rules_dir: str | None = None) -> tuple[Rule, ...]:
    if rules_dir is None:
        text = resources.files("deadline_ils").joinpath("rules").joinpath(f"{name}.rules").read_text("utf-8")
    else:
        text = (Path(rules_dir) / f"{name}.rules").read_text("utf-8")
    return parse_rules(text, name)


def _best(rules, question: str, description: str) -> tuple[Rule | None, list[str]]:
    matched = [r for r in rules if r.matches(question, description)]
    if not matched:
        return None, []
    # first-listed rule wins among equal priorities
    best = max(matched, key=lambda r: (r.priority, -rules.index(r)))
    return best, [r.rule_id for r in matched]


@dataclass(frozen=True)
class ClassificationResult:
    resolution_type: ResolutionType
    category: Category
    subcategory: Subcategory | None = None
    matched_rules: tuple[str, ...] = ()
    deadline: datetime | None = None
    noise_flags: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.subcategory is not None and self.category is not Category.REGULATORY:
            raise ValueError("subcategory is only defined for regulatory markets")
        if not self.matched_rules and self.resolution_type is not ResolutionType.UNCLASSIFIABLE:
            raise ValueError("a classified market must cite at least one matched rule")


def extract_deadline(question: str, t_open: datetime | None = None) -> datetime | None:
    """Resolve the first ``by <date>`` style phrase into an end-of-day UTC deadline.

    Dates without a year take the first occurrence on or after ``t_open``;
    weekday phrases resolve to that weekday of ``t_open``'s calendar week
    (or the following week once it has passed). Returns ``None`` when no
    phrase parses or the phrase needs ``t_open`` and none is given.
    """
    for m in _DATE_PHRASE.finditer(question):
        if m.group("month"):
            month = _MONTHS.get(m.group("month").lower())
            if month is None:
                continue
            day = int(m.group("day"))
            year = m.group("year")
            if year is not None:
                candidates = [int(year)]
            elif t_open is not None:
                candidates = [t_open.year, t_open.year + 1]
            else:
                return None
            for y in candidates:
                try:
                    d = datetime.combine(datetime(y, month, day).date(), _END_OF_DAY)
                except ValueError:
                    break
                if t_open is None or year is not None or d >= t_open:
                    return d
            continue
        if m.group("weekday"):
            if t_open is None:
                return None
            target = _WEEKDAYS.index(m.group("weekday").lower())
            week_start = t_open.date() - timedelta(days=t_open.weekday())
            d = datetime.combine(week_start + timedelta(days=target), _END_OF_DAY)
            if d < t_open:
                d += timedelta(days=7)
            return d
        if m.group("year_only"):
            return datetime(int(m.group("year_only")), 12, 31, 23, 59, 59, tzinfo=timezone.utc)
    return None


def classify_category(question: str, rules_dir: str | None = None) -> Category:
    rule, _ = _best(load_rules("category", rules_dir), question, "")
    return Category(rule.label) if rule else Category.OTHER


def noise_flags(question: str, rules_dir: str | None = None) -> tuple[str, ...]:
    rules = load_rules("noise", rules_dir)
    return tuple(sorted({r.label for r in rules if r.matches(question, "")}))


def split_regulatory(question: str, description: str = "", rules_dir: str | None = None) -> Subcategory:
    rule, _ = _best(load_rules("regulatory", rules_dir), question, description)
    if rule is not None and rule.label == Subcategory.REGULATORY_ANNOUNCEMENT.value:
        return Subcategory.REGULATORY_ANNOUNCEMENT
    return Subcategory.REGULATORY_FORMAL


def classify_resolution(
    question: str,
    description: str = "",
    t_open: datetime | None = None,
    rules_dir: str | None = None,
) -> ClassificationResult:
    """Classify a question as event-resolved, deadline-resolved or unclassifiable.

    Zero rule matches fail closed to unclassifiable.
    """
    if not question.strip():
        raise ValueError("question must be non-empty")
    rule, matched = _best(load_rules("resolution", rules_dir), question, description)
    category = classify_category(question, rules_dir)
    subcategory = split_regulatory(question, description, rules_dir) if category is Category.REGULATORY else None
    flags = noise_flags(question, rules_dir)
    if rule is None or rule.label == "ambiguous":
        return ClassificationResult(
            ResolutionType.UNCLASSIFIABLE, category, subcategory, tuple(matched), None, flags
        )
    if rule.label == "event":
        return ClassificationResult(
            ResolutionType.EVENT_RESOLVED, category, subcategory, tuple(matched), None, flags
        )
    return ClassificationResult(
        ResolutionType.DEADLINE_RESOLVED,
        category,
        subcategory,
        tuple(matched),
        extract_deadline(question, t_open),
        flags,
    )


def classify_record(record: MarketRecord, rules_dir: str | None = None) -> MarketRecord:
    """Attach typology, category, subcategory, deadline and period to a raw record.

    A deadline already present on the record is kept. A deadline-resolved
    classification whose date cannot be resolved degrades to unclassifiable,
    since a deadline market without D cannot be scored.
    """
    from dataclasses import replace

    result = classify_resolution(record.question, record.description, record.T_open, rules_dir)
    resolution = result.resolution_type
    deadline = record.D
    if resolution is ResolutionType.DEADLINE_RESOLVED:
        deadline = deadline or result.deadline
        if deadline is None or deadline < record.T_open:
            resolution = ResolutionType.UNCLASSIFIABLE
            deadline = record.D if record.D is not None and record.D >= record.T_open else None
    return replace(
        record,
        category=result.category,
        subcategory=result.subcategory,
        resolution_type=resolution,
        D=deadline,
        period=period_of(record),
    )
