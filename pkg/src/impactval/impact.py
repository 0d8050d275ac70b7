"""Square-root market impact: volume-based and spread-based formulas.

The expected relative price shift of liquidating (or acquiring) q shares
at a reasonable pace is I(q) = Y * sigma * sqrt(q / V).  An equivalent
micro-structure form expresses the same impact through the bid-ask spread:
I = Y * b * S * sqrt(N) with N the number of child trades.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .montecarlo import LiquidationSchedule

# Empirical band for the spread-volatility coefficient b; values outside it
# are unusual but not invalid.
B_TYPICAL_RANGE = (0.6, 0.9)

# Beyond ~20% impact (or ~20% daily participation) the square-root law is
# extrapolating; results are still returned, but flagged.
DEFAULT_IMPACT_LIMIT = 0.20
DEFAULT_PARTICIPATION_LIMIT = 0.20


class Validity(Enum):
    OK = "OK"
    WARN_LARGE_IMPACT = "WARN_LARGE_IMPACT"
    WARN_LARGE_PARTICIPATION = "WARN_LARGE_PARTICIPATION"


class TradeDirection(Enum):
    BUY = 1
    SELL = -1

    @property
    def epsilon(self) -> int:
        """Trade sign: +1 for a buy, -1 for a sell."""
        return self.value


@dataclass(frozen=True)
class ImpactParams:
    """Liquidity/impact coefficients for one asset.

    Attributes:
        Y: dimensionless impact coefficient, order unity
        sigma: daily volatility as a fraction (0.02 = 2% per day)
        V: daily transaction volume, in the same units as trade sizes
        S: bid-ask spread as a fraction of price (optional)
        v: typical volume at the best quotes, same units as trade sizes (optional)
        b: spread-volatility coefficient, typically 0.6-0.9 (optional)
        phi: transactions per day (optional)
    """

    Y: float
    sigma: float
    V: float
    S: float | None = None
    v: float | None = None
    b: float | None = None
    phi: float | None = None

    def __post_init__(self) -> None:
        if self.Y < 0:
            raise ValueError(f"Y must be non-negative, got {self.Y}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.V <= 0:
            raise ValueError(f"V must be positive, got {self.V}")
        for name in ("S", "v", "phi", "b"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError(f"{name} must be positive when given, got {value}")
        if self.b is not None and not (B_TYPICAL_RANGE[0] <= self.b <= B_TYPICAL_RANGE[1]):
            warnings.warn(
                f"b={self.b} lies outside the typical range {B_TYPICAL_RANGE}",
                stacklevel=2,
            )

    def to_config_text(self) -> str:
        """Render as a flat key-value config (decimal fractions, not percent)."""
        lines = [f"Y = {self.Y!r}", f"sigma = {self.sigma!r}", f"V = {self.V!r}"]
        for name in ("S", "v", "b", "phi"):
            value = getattr(self, name)
            if value is not None:
                lines.append(f"{name} = {value!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config_text(cls, text: str) -> "ImpactParams":
        known = {"Y", "sigma", "V", "S", "v", "b", "phi"}
        values: dict[str, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, rhs = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            try:
                values[key] = float(rhs.strip())
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad number {rhs.strip()!r}") from exc
        for required in ("Y", "sigma", "V"):
            if required not in values:
                raise ValueError(f"missing required key {required!r}")
        return cls(**values)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_config_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ImpactParams":
        return cls.from_config_text(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ImpactQuote:
    """Expected outcome of executing one trade of a given size."""

    relative_impact: float
    pre_trade_price: float
    expected_final_price: float
    validity: Validity


@dataclass(frozen=True)
class ValidityReport:
    """Domain-of-validity flags for the square-root law. Never blocks computation."""

    impact: float
    participation: float | None
    flags: tuple[Validity, ...]

    @property
    def ok(self) -> bool:
        return not self.flags


def expected_impact(params: ImpactParams, q: float) -> float:
    """Expected relative impact I(q) = Y * sigma * sqrt(q / V) of trading q shares."""
    if q < 0:
        raise ValueError(f"trade size must be non-negative, got {q}")
    return params.Y * params.sigma * math.sqrt(q / params.V)


def impact_from_spread(Y: float, b: float, S: float, N: float) -> float:
    """Spread-based impact I = Y * b * S * sqrt(N), N = Q / v child trades."""
    if Y <= 0 or b <= 0 or S <= 0:
        raise ValueError("Y, b and S must be positive")
    if N < 0:
        raise ValueError(f"N must be non-negative, got {N}")
    return Y * b * S * math.sqrt(N)


def volatility_from_spread(b: float, S: float, phi: float, T: float) -> float:
    """Volatility over horizon T implied by the spread: sigma_T = b * S * sqrt(phi * T)."""
    if b <= 0 or S <= 0 or phi <= 0:
        raise ValueError("b, S and phi must be positive")
    if T < 0:
        raise ValueError(f"T must be non-negative, got {T}")
    return b * S * math.sqrt(phi * T)


def check_validity(
    params: ImpactParams,
    Q: float,
    schedule: "LiquidationSchedule | None" = None,
    impact_limit: float = DEFAULT_IMPACT_LIMIT,
    participation_limit: float = DEFAULT_PARTICIPATION_LIMIT,
) -> ValidityReport:
    """Flag positions whose size pushes the square-root law past its domain.

    Warns when the full-position impact exceeds ``impact_limit`` or when the
    daily participation delta_q / V exceeds ``participation_limit``.
    """
    impact = expected_impact(params, Q)
    flags: list[Validity] = []
    if impact > impact_limit:
        flags.append(Validity.WARN_LARGE_IMPACT)
    participation = None
    if schedule is not None:
        participation = schedule.delta_q / params.V
        if participation > participation_limit:
            flags.append(Validity.WARN_LARGE_PARTICIPATION)
    return ValidityReport(impact=impact, participation=participation, flags=tuple(flags))


def quote(
    params: ImpactParams,
    q: float,
    direction: TradeDirection,
    p0: float,
    impact_limit: float = DEFAULT_IMPACT_LIMIT,
) -> ImpactQuote:
    """Expected final price for trading q shares starting from price p0."""
    if p0 <= 0:
        raise ValueError(f"pre-trade price must be positive, got {p0}")
    impact = expected_impact(params, q)
    validity = Validity.WARN_LARGE_IMPACT if impact > impact_limit else Validity.OK
    final = p0 * (1.0 + direction.epsilon * impact)
    return ImpactQuote(
        relative_impact=impact,
        pre_trade_price=p0,
        expected_final_price=final,
        validity=validity,
    )
