"""Canonicalization of raw strings into comparable typed values.

Every parser here is total: any input yields either a typed value or a
ParseError carrying a machine-readable reason code. Nothing is silently
coerced to a default, because a wrong default would surface downstream
as a bogus auto-verification.
"""

from __future__ import annotations

import datetime as dt
import re
import unicodedata
from dataclasses import dataclass, field
from decimal import Decimal


class ParseError(ValueError):
    """Raised when a raw string cannot be converted to the target type."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class Money:
    """An exact amount in integer cents; arithmetic never touches floats."""

    amount_cents: int
    currency: str = "EUR"


@dataclass(frozen=True)
class PowerValue:
    """Electrical power canonicalized to whole watts.

    ``unit_assumed`` marks values that arrived without a unit. They are
    kept verbatim (no magnitude guessing) and the rule engine downgrades
    any comparison involving them to a manual check.
    """

    watts: int
    unit_assumed: bool = False


@dataclass(frozen=True)
class TaxId:
    """A 9-digit tax identifier with its mod-11 checksum verdict."""

    digits: str
    valid: bool
    reason: str | None = None


@dataclass(frozen=True)
class CanonicalName:
    canonical: str
    original: str


_CURRENCY_RE = re.compile(r"(?:€|\bEUR\b|\bEUROS?\b)", re.IGNORECASE)
_MONEY_CHARS_RE = re.compile(r"^[0-9.,]+$")


def parse_money(text: str, currency: str = "EUR") -> Money:
    """Parse European-format amounts ("1.234,56 €", "1 234.56 EUR", "1234,56").

    Disambiguation rule: when both separators appear the last one is the
    decimal mark; a lone separator is decimal when followed by 1-2 digits
    and a thousands group when followed by exactly 3.
    """
    s = _CURRENCY_RE.sub("", text).strip()
    if s.startswith("-"):
        raise ParseError("negative", f"negative amount not allowed: {text!r}")
    s = s.replace(" ", "").replace(" ", "")
    if not s or not _MONEY_CHARS_RE.match(s):
        raise ParseError("non_numeric", f"not a monetary amount: {text!r}")

    has_dot = "." in s
    has_comma = "," in s
    if not has_dot and not has_comma:
        return Money(int(s) * 100, currency)

    if has_dot and has_comma:
        dec = "." if s.rindex(".") > s.rindex(",") else ","
        grp = "," if dec == "." else "."
        whole_frac = s.replace(grp, "")
        if whole_frac.count(dec) != 1:
            raise ParseError("ambiguous", f"ambiguous separators: {text!r}")
        whole, frac = whole_frac.split(dec)
    else:
        sep = "." if has_dot else ","
        if s.count(sep) > 1:
            # repeated separator can only be grouping: "1.234.567"
            return Money(int(s.replace(sep, "")) * 100, currency)
        whole, frac = s.split(sep)
        if len(frac) == 3:
            return Money(int(whole + frac) * 100, currency)
        if len(frac) not in (1, 2):
            raise ParseError("ambiguous", f"ambiguous separator: {text!r}")
    if not whole:
        whole = "0"
    if len(frac) not in (1, 2) or not whole.isdigit() or not frac.isdigit():
        raise ParseError("ambiguous", f"ambiguous amount: {text!r}")
    cents = int(whole) * 100 + int(frac) * (10 if len(frac) == 1 else 1)
    return Money(cents, currency)


def format_money(money: Money) -> str:
    """Render cents back to the Portuguese convention ("1.234,56 €")."""
    whole, cents = divmod(money.amount_cents, 100)
    grouped = f"{whole:,}".replace(",", ".")
    suffix = "€" if money.currency == "EUR" else money.currency
    return f"{grouped},{cents:02d} {suffix}"


_DATE_PATTERNS = (
    re.compile(r"^(\d{1,2})/(\d{1,2})/(\d{4})$"),
    re.compile(r"^(\d{1,2})-(\d{1,2})-(\d{4})$"),
)
_DATE_ISO = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$")


def parse_date(text: str) -> dt.date:
    """Parse dd/mm/yyyy, dd-mm-yyyy or yyyy-mm-dd. Two-digit years rejected."""
    s = text.strip()
    m = _DATE_ISO.match(s)
    if m:
        year, month, day = (int(g) for g in m.groups())
    else:
        for pat in _DATE_PATTERNS:
            m = pat.match(s)
            if m:
                day, month, year = (int(g) for g in m.groups())
                break
        else:
            raise ParseError("bad_format", f"unrecognized date format: {text!r}")
    try:
        return dt.date(year, month, day)
    except ValueError:
        raise ParseError("invalid_date", f"not a calendar date: {text!r}") from None


_POWER_RE = re.compile(r"^([0-9]+(?:[.,][0-9]+)?)\s*(kw|w)?$", re.IGNORECASE)


def parse_power(text: str) -> PowerValue:
    """Parse "3.68 kW", "3680 W", "3,68kW" into whole watts.

    A missing unit is never "fixed" by magnitude guessing: the number is
    taken as watts and flagged unit_assumed.
    """
    m = _POWER_RE.match(text.strip())
    if not m:
        raise ParseError("non_numeric", f"not a power rating: {text!r}")
    num, unit = m.groups()
    value = Decimal(num.replace(",", "."))
    if unit is None:
        return PowerValue(int(value), unit_assumed=True)
    if unit.lower() == "kw":
        value *= 1000
    return PowerValue(int(value))


_TAX_STRIP_RE = re.compile(r"[\s.\-/]+")


def validate_tax_id(text: str) -> TaxId:
    """Validate a 9-digit tax identifier (mod-11 check digit).

    Check digit = 11 - (sum of the first eight digits weighted 9..2, mod
    11); results of 10 and 11 map to 0. Always returns a TaxId; failures
    are recorded in ``valid``/``reason``.
    """
    digits = _TAX_STRIP_RE.sub("", text.strip())
    if not digits.isdigit():
        return TaxId(digits, False, "non_numeric")
    if len(digits) != 9:
        return TaxId(digits, False, "wrong_length")
    total = sum(int(d) * w for d, w in zip(digits[:8], range(9, 1, -1)))
    check = 11 - (total % 11)
    if check >= 10:
        check = 0
    if check != int(digits[8]):
        return TaxId(digits, False, "bad_check_digit")
    return TaxId(digits, True)


def parse_number(text: str) -> int | float:
    """Parse a plain number; comma accepted as decimal mark."""
    s = text.strip().replace(",", ".")
    if not s:
        raise ParseError("non_numeric", "empty number")
    try:
        if "." in s:
            return float(s)
        return int(s)
    except ValueError:
        raise ParseError("non_numeric", f"not a number: {text!r}") from None


def normalize_name(text: str) -> CanonicalName:
    """Uppercase, strip diacritics, drop punctuation, collapse whitespace."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    cleaned = "".join(c if c.isalnum() else " " for c in stripped)
    canonical = " ".join(cleaned.upper().split())
    return CanonicalName(canonical=canonical, original=text)


def levenshtein(a: str, b: str) -> int:
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def fuzzy_score(a: str, b: str) -> float:
    """Normalized edit-distance similarity in [0, 1]; expects canonical input."""
    if a == b:
        return 1.0
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


@dataclass(frozen=True)
class DeclaredValue:
    """One applicant-declared form field.

    Malformed typed values keep their raw text and carry ``warning`` so
    the rule engine can flag them instead of losing them.
    """

    field_id: str
    declared_type: str
    raw: str
    value: object = None
    warning: str | None = None


DECLARED_TYPES = ("text", "money", "date", "number", "tax_id")


def parse_declared(field_id: str, declared_type: str, raw: str) -> DeclaredValue:
    """Build a DeclaredValue, downgrading parse failures to warnings."""
    if declared_type not in DECLARED_TYPES:
        return DeclaredValue(field_id, declared_type, raw, value=raw.strip(),
                             warning=f"unknown declared type {declared_type!r}")
    try:
        if declared_type == "text":
            value: object = raw.strip()
        elif declared_type == "money":
            value = parse_money(raw)
        elif declared_type == "date":
            value = parse_date(raw)
        elif declared_type == "number":
            value = parse_number(raw)
        else:
            tax = validate_tax_id(raw)
            if not tax.valid:
                return DeclaredValue(field_id, declared_type, raw, value=tax,
                                     warning=f"tax id failed validation ({tax.reason})")
            value = tax
    except ParseError as exc:
        return DeclaredValue(field_id, declared_type, raw, value=raw.strip(),
                             warning=f"unparseable {declared_type}: {exc.reason}")
    return DeclaredValue(field_id, declared_type, raw, value=value)


@dataclass
class FormData:
    """Applicant-declared fields keyed by field id."""

    declared: dict[str, DeclaredValue] = field(default_factory=dict)

    def get(self, field_id: str) -> DeclaredValue | None:
        return self.declared.get(field_id)
