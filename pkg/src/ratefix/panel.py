"""Panel submissions and aligned analysis windows.

Quoted rates are carried as exact decimals (at most six fractional digits)
from ingestion through window construction.  They only become binary floats
at distance-computation time, so fixing arithmetic downstream is free of
float drift.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import InitVar, dataclass
from datetime import date as Date
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path

from .errors import DataError

RATE_DECIMALS = 6
RATE_QUANTUM = Decimal(1).scaleb(-RATE_DECIMALS)
DEFAULT_RATE_FLOOR = Decimal(0)

CSV_COLUMNS = ("date", "bank", "tenor", "rate")


class DuplicateSubmissionError(DataError):
    """Two submissions collide on the same (bank, date, tenor)."""


class EmptyWindowError(DataError):
    """No usable panel remains after filtering and the missing-data policy."""


class SubmissionFormatError(DataError):
    """The submissions CSV is malformed; the message lists offending lines."""


class PanelWarning(UserWarning):
    """Non-fatal window construction event (bank dropped, year omitted)."""


class Tenor(Enum):
    """Quoted borrowing maturity, from the closed set used by panel fixings."""

    OVERNIGHT = "O/N"
    ONE_WEEK = "1W"
    ONE_MONTH = "1M"
    THREE_MONTHS = "3M"
    SIX_MONTHS = "6M"
    TWELVE_MONTHS = "12M"

    @property
    def code(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "Tenor":
        wanted = text.strip().upper()
        for tenor in cls:
            if tenor.value == wanted:
                return tenor
        raise ValueError(f"unknown tenor code {text!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Submission:
    """One bank's quoted rate for one date and tenor, in percent per annum.

    Negative rates are rejected unless an explicit lower ``floor`` is given
    at construction time.
    """

    bank: str
    date: Date
    tenor: Tenor
    rate: Decimal
    floor: InitVar[Decimal | None] = None

    def __post_init__(self, floor: Decimal | None) -> None:
        if not self.bank:
            raise ValueError("bank label must be non-empty")
        rate = self.rate if isinstance(self.rate, Decimal) else Decimal(str(self.rate))
        if not rate.is_finite():
            raise ValueError(f"rate must be finite, got {self.rate}")
        limit = DEFAULT_RATE_FLOOR if floor is None else floor
        if rate < limit:
            raise ValueError(f"rate {rate} is below the allowed floor {limit}")
        object.__setattr__(self, "rate", rate)


@dataclass(frozen=True)
class MissingDataPolicy:
    """Gap handling for dates where some bank did not submit.

    With ``fill=False`` any date missing at least one bank is dropped.  With
    ``fill=True`` a bank's gap is forward-filled from its latest earlier
    value, but never across more than ``max_gap`` consecutive missing dates;
    dates still incomplete afterwards are dropped.
    """

    fill: bool = False
    max_gap: int = 5

    def __post_init__(self) -> None:
        if self.fill and self.max_gap < 1:
            raise ValueError("forward-fill requires max_gap >= 1")

    @classmethod
    def drop_incomplete(cls) -> "MissingDataPolicy":
        return cls(fill=False)

    @classmethod
    def forward_fill(cls, max_gap: int = 5) -> "MissingDataPolicy":
        return cls(fill=True, max_gap=max_gap)


@dataclass(frozen=True)
class PanelWindow:
    """Aligned banks x dates rate matrix for one analysis window.

    Each bank row, read in date order, is that bank's submission series.
    The matrix is complete by construction: every cell holds a finite rate,
    bank labels are unique, and dates are strictly increasing.
    """

    banks: tuple[str, ...]
    dates: tuple[Date, ...]
    rates: tuple[tuple[Decimal, ...], ...]
    tenor: Tenor
    label: str

    def __post_init__(self) -> None:
        if not self.banks:
            raise ValueError("window needs at least one bank")
        if len(set(self.banks)) != len(self.banks):
            raise ValueError("bank labels must be unique")
        if not self.dates:
            raise ValueError("window needs at least one date")
        for earlier, later in zip(self.dates, self.dates[1:]):
            if later <= earlier:
                raise ValueError("dates must be strictly increasing")
        if len(self.rates) != len(self.banks):
            raise ValueError("one rate row required per bank")
        for row in self.rates:
            if len(row) != len(self.dates):
                raise ValueError("every rate row must cover every date")
            for value in row:
                if not isinstance(value, Decimal) or not value.is_finite():
                    raise ValueError("window cells must be finite decimals")

    @property
    def n_banks(self) -> int:
        return len(self.banks)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    def series(self, bank: str) -> tuple[Decimal, ...]:
        return self.rates[self.banks.index(bank)]

    def float_rows(self) -> list[list[float]]:
        """Rate matrix as floats, for distance computations."""
        return [[float(x) for x in row] for row in self.rates]

    def submissions(self) -> list[Submission]:
        """Flatten the window back to per-cell submissions."""
        out = []
        for bank, row in zip(self.banks, self.rates):
            for day, rate in zip(self.dates, row):
                out.append(Submission(bank, day, self.tenor, rate))
        return out


def build_window(
    submissions,
    tenor: Tenor,
    date_range: tuple[Date, Date],
    policy: MissingDataPolicy | None = None,
    *,
    min_coverage: float = 0.0,
    label: str | None = None,
) -> PanelWindow:
    """Construct a complete window from a raw submission stream.

    Submissions are restricted to ``tenor`` and the inclusive ``date_range``,
    the matrix is completed per ``policy`` (default: drop incomplete dates),
    and the result is ordered with banks lexicographic and dates ascending
    regardless of input order.

    ``min_coverage`` drops banks whose raw submission coverage of the
    window's candidate dates falls below the given fraction, before the
    policy runs (the yearly pipeline passes 0.9 so that late joiners and
    leavers do not wipe out the surviving dates; the default keeps every
    bank).  Dropped banks are reported with a PanelWarning.
    """
    policy = policy or MissingDataPolicy.drop_incomplete()
    start, end = date_range
    if start > end:
        raise ValueError("date_range start must not be after end")

    picked: dict[tuple[str, Date], Decimal] = {}
    for sub in sorted(submissions, key=lambda s: (s.date, s.bank)):
        if sub.tenor is not tenor or not start <= sub.date <= end:
            continue
        key = (sub.bank, sub.date)
        if key in picked:
            raise DuplicateSubmissionError(
                f"duplicate submission for {sub.bank} on {sub.date} ({tenor})"
            )
        picked[key] = sub.rate

    candidates = sorted({day for _, day in picked})
    if not candidates:
        raise EmptyWindowError("no submissions in range")

    all_banks = sorted({bank for bank, _ in picked})
    banks = []
    for bank in all_banks:
        have = sum(1 for day in candidates if (bank, day) in picked)
        coverage = have / len(candidates)
        if min_coverage > 0.0 and coverage < min_coverage:
            warnings.warn(
                f"bank {bank} dropped: coverage {coverage:.1%} below "
                f"{min_coverage:.1%} of {len(candidates)} candidate dates",
                PanelWarning,
                stacklevel=2,
            )
            continue
        banks.append(bank)
    if len(banks) < 2:
        raise EmptyWindowError("fewer than two banks survive in the window")

    cells = dict(picked)
    if policy.fill:
        for bank in banks:
            last: Decimal | None = None
            run = 0
            for day in candidates:
                if (bank, day) in picked:
                    last = picked[(bank, day)]
                    run = 0
                else:
                    run += 1
                    # a copy may bridge at most max_gap consecutive missing dates
                    if last is not None and run <= policy.max_gap:
                        cells[(bank, day)] = last

    surviving = [d for d in candidates if all((b, d) in cells for b in banks)]
    if not surviving:
        raise EmptyWindowError("no date survives the missing-data policy")

    rows = tuple(tuple(cells[(bank, day)] for day in surviving) for bank in banks)
    if label is None:
        label = f"{start.isoformat()}..{end.isoformat()}"
    return PanelWindow(tuple(banks), tuple(surviving), rows, tenor, label)


def annual_windows(
    submissions,
    tenor: Tenor,
    years: tuple[int, int],
    policy: MissingDataPolicy | None = None,
    *,
    dataset: str = "PANEL",
    min_coverage: float = 0.9,
) -> list[PanelWindow]:
    """One window per calendar year, labelled ``<dataset>-<year>``.

    Years that end up with no usable panel (no submissions, or nothing
    survives the policy) are omitted and reported with a PanelWarning.
    """
    first, last = years
    if first > last:
        raise ValueError("years must satisfy first <= last")
    subs = list(submissions)
    out = []
    for year in range(first, last + 1):
        label = f"{dataset}-{year}"
        year_subs = [s for s in subs if s.date.year == year and s.tenor is tenor]
        if not year_subs:
            warnings.warn(f"{label}: no submissions; window omitted", PanelWarning, stacklevel=2)
            continue
        try:
            out.append(
                build_window(
                    year_subs,
                    tenor,
                    (Date(year, 1, 1), Date(year, 12, 31)),
                    policy,
                    min_coverage=min_coverage,
                    label=label,
                )
            )
        except EmptyWindowError as exc:
            warnings.warn(f"{label}: {exc}; window omitted", PanelWarning, stacklevel=2)
    return out


def _parse_rate(text: str, floor: Decimal) -> Decimal:
    try:
        rate = Decimal(text.strip())
    except InvalidOperation:
        raise ValueError(f"bad rate {text!r}")
    if not rate.is_finite():
        raise ValueError(f"rate {text!r} is not finite")
    if -rate.as_tuple().exponent > RATE_DECIMALS:
        raise ValueError(f"rate {text!r} has more than {RATE_DECIMALS} fractional digits")
    if rate < floor:
        raise ValueError(f"rate {text!r} is below the allowed floor {floor}")
    return rate


def read_submissions_csv(path, *, rate_floor: Decimal = DEFAULT_RATE_FLOOR) -> list[Submission]:
    """Parse a submissions CSV with columns exactly ``date,bank,tenor,rate``.

    Dates are ISO 8601 and rates are decimal percent with up to six
    fractional digits.  Any unparseable row fails the whole file with a
    SubmissionFormatError listing every offending line number.
    """
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(h.strip().lower() for h in header) != CSV_COLUMNS:
        raise SubmissionFormatError(
            f"{path}: header must be exactly {','.join(CSV_COLUMNS)}"
        )
    subs = []
    problems = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(CSV_COLUMNS):
            problems.append(f"line {lineno}: expected {len(CSV_COLUMNS)} columns, got {len(row)}")
            continue
        raw_date, raw_bank, raw_tenor, raw_rate = (field.strip() for field in row)
        try:
            day = Date.fromisoformat(raw_date)
            if not raw_bank:
                raise ValueError("empty bank label")
            tenor = Tenor.parse(raw_tenor)
            rate = _parse_rate(raw_rate, rate_floor)
        except ValueError as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        subs.append(Submission(raw_bank, day, tenor, rate, floor=rate_floor))
    if problems:
        raise SubmissionFormatError(f"{path}: " + "; ".join(problems))
    return subs


def submissions_to_csv_text(submissions) -> str:
    """Render submissions to CSV text, sorted by (date, bank, tenor)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for sub in sorted(submissions, key=lambda s: (s.date, s.bank, s.tenor.code)):
        writer.writerow([sub.date.isoformat(), sub.bank, sub.tenor.code, str(sub.rate)])
    return buf.getvalue()
