"""Trimmed-mean fixing: the published benchmark and single-submitter impact.

The benchmark is produced by sorting the panel's quotes, discarding an equal
count from both tails, averaging the remainder, and rounding half-up.  All
arithmetic here stays in exact decimal/rational form; nothing in this module
touches binary floating point, so a reproduced fixing is bit-for-bit stable.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction

from .errors import DataError

RAW_MEAN_DECIMALS = 6


class EmptyAfterTrimError(DataError):
    """Trimming would leave fewer quotes than the configured minimum."""


class NonFiniteQuoteError(DataError):
    """A quote is NaN or infinite."""


def _as_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, float):
        return Decimal(repr(value))
    return Decimal(str(value))


def round_half_up(value, decimals: int) -> Decimal:
    """Round an exact rational or decimal value, ties away from zero."""
    frac = Fraction(value)
    scaled = frac * 10**decimals
    whole, rem = divmod(abs(scaled.numerator), scaled.denominator)
    if 2 * rem >= scaled.denominator:
        whole += 1
    if scaled < 0:
        whole = -whole
    return Decimal(whole).scaleb(-decimals)


@dataclass(frozen=True)
class FixingConfig:
    """Trim width, publish rounding, and the degenerate-panel guard.

    ``trim_fraction`` is the fraction removed from EACH tail; the count is
    floor(trim_fraction * n).  ``min_retained`` is the smallest panel the
    trim may leave behind before the computation refuses to produce a rate.
    """

    trim_fraction: Decimal = Decimal("0.25")
    publish_precision: int = 3
    min_retained: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "trim_fraction", _as_decimal(self.trim_fraction))
        if not Decimal(0) <= self.trim_fraction < Decimal("0.5"):
            raise ValueError("trim_fraction must be in [0, 0.5)")
        if self.publish_precision < 0:
            raise ValueError("publish_precision must be >= 0")
        if self.min_retained < 1:
            raise ValueError("min_retained must be >= 1")

    def trim_count(self, n: int) -> int:
        # Decimal * int is exact, and int() truncates, i.e. floors for n >= 0
        return int(self.trim_fraction * n)


@dataclass(frozen=True)
class FixingResult:
    """One day's fixing: the exact mean, the published rate, and the cuts.

    ``raw_mean`` carries six fractional digits (exact rational mean of the
    retained quotes, rounded half-up at the sixth digit).  ``published`` is
    ``raw_mean`` rounded half-up again at the publish precision.
    """

    raw_mean: Decimal
    published: Decimal
    retained: tuple[Decimal, ...]
    trimmed_low: tuple[Decimal, ...]
    trimmed_high: tuple[Decimal, ...]

    @property
    def trim_count(self) -> int:
        return len(self.trimmed_low)


def compute_fixing(quotes, config: FixingConfig | None = None) -> FixingResult:
    """Sort, trim both tails, average the rest exactly, round half-up.

    Equal-valued quotes at a trim boundary are cut in input order (the sort
    is stable), which never changes the mean.
    """
    config = config or FixingConfig()
    values = [_as_decimal(q) for q in quotes]
    if not values:
        raise EmptyAfterTrimError("no quotes supplied")
    for value in values:
        if not value.is_finite():
            raise NonFiniteQuoteError(f"quote {value} is not finite")
    n = len(values)
    cut = config.trim_count(n)
    if n - 2 * cut < config.min_retained:
        raise EmptyAfterTrimError(
            f"trimming {cut} per side of {n} quotes leaves fewer than "
            f"{config.min_retained}"
        )
    ordered = sorted(values)
    low = tuple(ordered[:cut])
    kept = tuple(ordered[cut : n - cut])
    high = tuple(ordered[n - cut :]) if cut else ()
    total = sum(Fraction(v) for v in kept)
    raw_mean = round_half_up(total / len(kept), RAW_MEAN_DECIMALS)
    published = round_half_up(raw_mean, config.publish_precision)
    return FixingResult(raw_mean, published, kept, low, high)


def single_bank_impact(quotes, bank_index: int, new_rate, config: FixingConfig | None = None) -> Decimal:
    """Change in raw_mean if the submitter at ``bank_index`` re-quotes.

    Positive means the substitution raised the fixing.
    """
    values = [_as_decimal(q) for q in quotes]
    if not 0 <= bank_index < len(values):
        raise IndexError(f"bank_index {bank_index} out of range for {len(values)} quotes")
    baseline = compute_fixing(values, config).raw_mean
    values[bank_index] = _as_decimal(new_rate)
    return compute_fixing(values, config).raw_mean - baseline


def influence_envelope(
    quotes,
    bank_index: int,
    config: FixingConfig | None = None,
    rate_bounds=(Decimal(0), Decimal(10)),
) -> tuple[Decimal, Decimal]:
    """Extreme raw means one submitter can force with a quote in [lo, hi].

    Sorted-order analysis: as the attacker's quote rises it either sits
    inside a trimmed tail (mean unchanged) or swaps places with a retained
    neighbour (mean moves weakly in the same direction), so the trimmed mean
    is non-decreasing in each individual quote and the envelope is attained
    at the interval endpoints.  Once the quote is past a trim boundary the
    mean saturates, which is why lowballing beyond the band buys nothing.
    """
    lo, hi = (_as_decimal(b) for b in rate_bounds)
    if lo > hi:
        raise ValueError("rate_bounds must satisfy lo <= hi")
    values = [_as_decimal(q) for q in quotes]
    if not 0 <= bank_index < len(values):
        raise IndexError(f"bank_index {bank_index} out of range for {len(values)} quotes")
    at_lo = list(values)
    at_lo[bank_index] = lo
    at_hi = list(values)
    at_hi[bank_index] = hi
    return (compute_fixing(at_lo, config).raw_mean, compute_fixing(at_hi, config).raw_mean)
