"""Piecewise mapping from conflict K to a loss multiplication factor w(K).

A scorecard is an ordered list of bands tiling [0, 1]. Bands are half-open
(lower, upper] except the first, which is closed at 0, so a K sitting on a
shared boundary belongs to the lower band. The two built-in cards reward or
dampen uncertain batches; custom cards load from a small text format.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import OutOfRangeError, ParseError, ValidationError


@dataclass(frozen=True)
class Band:
    lower: float
    upper: float
    factor: float


@dataclass(frozen=True)
class ScoreCard:
    """Named, validated sequence of (lower, upper, factor) bands tiling [0, 1]."""

    name: str
    bands: tuple[Band, ...]

    def __post_init__(self):
        validate_bands(self.bands)

    def lookup(self, k: float) -> float:
        return lookup(self, k)


def validate_bands(bands: tuple[Band, ...]) -> None:
    """Check the tiling rules; raise ValidationError naming the broken one."""
    if not bands:
        raise ValidationError("a scorecard needs at least one band")
    for band in bands:
        if not band.lower < band.upper:
            raise ValidationError(
                f"band ({band.lower}, {band.upper}] has lower >= upper"
            )
        if not band.factor > 0.0:
            raise ValidationError(f"factor must be positive, got {band.factor}")
    if bands[0].lower != 0.0:
        raise ValidationError(f"first band must start at 0, starts at {bands[0].lower}")
    if bands[-1].upper != 1.0:
        raise ValidationError(f"last band must end at 1, ends at {bands[-1].upper}")
    for left, right in zip(bands, bands[1:]):
        if left.upper < right.lower:
            raise ValidationError(f"gap between {left.upper} and {right.lower}")
        if left.upper > right.lower:
            raise ValidationError(f"overlap between {left.upper} and {right.lower}")


def lookup(card: ScoreCard, k: float) -> float:
    """Factor of the unique band containing k.

    The first band covers [0, upper]; every later band covers (lower, upper].
    """
    if not 0.0 <= k <= 1.0:
        raise OutOfRangeError(f"K must lie in [0, 1], got {k!r}")
    if k <= card.bands[0].upper:
        return card.bands[0].factor
    for band in card.bands[1:]:
        if band.lower < k <= band.upper:
            return band.factor
    # unreachable for a validated card
    raise OutOfRangeError(f"no band contains K = {k!r}")


def scorecard_a() -> ScoreCard:
    """Aggressive card: uncertain batches get amplified losses (up to 2.3x)."""
    return ScoreCard(
        "A",
        (
            Band(0.00, 0.10, 0.5),
            Band(0.10, 0.20, 0.8),
            Band(0.20, 0.30, 1.1),
            Band(0.30, 0.40, 1.4),
            Band(0.40, 0.60, 1.7),
            Band(0.60, 0.80, 2.0),
            Band(0.80, 1.00, 2.3),
        ),
    )


def scorecard_b() -> ScoreCard:
    """Damping card: every factor <= 1.5 and confident batches shrink to 0.2x."""
    return ScoreCard(
        "B",
        (
            Band(0.00, 0.20, 0.2),
            Band(0.20, 0.40, 0.5),
            Band(0.40, 0.60, 0.8),
            Band(0.60, 0.80, 1.1),
            Band(0.80, 1.00, 1.5),
        ),
    )


def constant_card(factor: float, name: str = "constant") -> ScoreCard:
    """Single-band card returning the same factor for every K."""
    return ScoreCard(name, (Band(0.0, 1.0, factor),))


def parse_scorecard(text: str) -> ScoreCard:
    """Parse the scorecard text format.

    First non-comment line: ``name <identifier>``. Each further line:
    ``<lower> <upper> <factor>``. ``#`` starts a comment; blank lines are
    ignored. Bands may appear in any order; they are sorted before the tiling
    rules are checked, so a card is either fully valid or rejected.
    """
    name = None
    bands = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if name is None:
            if parts[0] != "name" or len(parts) != 2:
                raise ParseError(f"line {lineno}: expected 'name <identifier>'")
            name = parts[1]
            continue
        if len(parts) != 3:
            raise ParseError(
                f"line {lineno}: expected '<lower> <upper> <factor>', got {line!r}"
            )
        try:
            lower, upper, factor = (float(p) for p in parts)
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric band field in {line!r}") from None
        bands.append(Band(lower, upper, factor))
    if name is None:
        raise ParseError("missing 'name <identifier>' line")
    if not bands:
        raise ParseError("scorecard has no bands")
    bands.sort(key=lambda b: b.lower)
    return ScoreCard(name, tuple(bands))


def serialize_scorecard(card: ScoreCard) -> str:
    """Inverse of parse_scorecard: parse(serialize(card)) == card."""
    lines = [f"name {card.name}"]
    lines.extend(f"{b.lower!r} {b.upper!r} {b.factor!r}" for b in card.bands)
    return "\n".join(lines) + "\n"
