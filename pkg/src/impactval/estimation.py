"""Slow-moving estimation of impact parameters from market time series.

For stability the liquidity inputs (sigma, V, and optionally S, v) are
computed over a long window with an exponential moving average, and the
most recent days are excluded entirely so that a sudden volatility or
liquidity shock cannot feed straight back into valuations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

from .impact import ImpactParams

REQUIRED_COLUMNS = ("date", "close", "volume")
OPTIONAL_COLUMNS = ("spread", "best_quote_volume")


@dataclass(frozen=True)
class MarketSeries:
    """Daily market data, oldest first."""

    dates: list[date]
    close: np.ndarray
    volume: np.ndarray
    spread: np.ndarray | None = None
    best_quote_volume: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.dates)
        for name in ("close", "volume", "spread", "best_quote_volume"):
            col = getattr(self, name)
            if col is not None and len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)}, expected {n}")
        for i in range(1, n):
            if self.dates[i] <= self.dates[i - 1]:
                raise ValueError(f"dates must be strictly increasing; violation at row {i + 1}")
        for name in ("close", "volume"):
            col = getattr(self, name)
            bad = np.flatnonzero(col <= 0)
            if bad.size:
                raise ValueError(f"non-positive {name} at row {bad[0] + 1}")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class EstimationPolicy:
    """How far back to look and how quickly to forget.

    Defaults encode roughly six months of trading history with the most
    recent week excluded.
    """

    window_days: int = 126
    exclusion_days: int = 5
    halflife_days: int = 63

    def __post_init__(self) -> None:
        if self.window_days < 1:
            raise ValueError(f"window_days must be >= 1, got {self.window_days}")
        if not 0 <= self.exclusion_days < self.window_days:
            raise ValueError(
                f"exclusion_days must lie in [0, window_days), got {self.exclusion_days}"
            )
        if self.halflife_days <= 0:
            raise ValueError(f"halflife_days must be positive, got {self.halflife_days}")


def ema(values, halflife_days: float) -> float:
    """Exponentially weighted mean with explicit normalization.

    The latest value (last element) has the largest weight; the weight of a
    value k days older decays as 2**(-k / halflife_days).  Normalizing over
    the values actually present keeps short histories unbiased.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot average an empty series")
    lags = np.arange(values.size - 1, -1, -1, dtype=np.float64)
    weights = np.exp2(-lags / halflife_days)
    return float(np.dot(weights, values) / weights.sum())


def estimate_params(series: MarketSeries, policy: EstimationPolicy, Y: float) -> ImpactParams:
    """Estimate impact parameters from a market series under the given policy.

    Drops the most recent ``exclusion_days``, then averages over the last
    ``window_days`` of what remains: sigma is the root of the EMA of squared
    daily close-to-close returns, V the EMA of daily volume, and S / v
    their analogues when the optional columns are present.
    """
    required = policy.window_days + policy.exclusion_days
    if len(series) < required:
        raise ValueError(
            f"need at least {required} rows "
            f"({policy.window_days} window + {policy.exclusion_days} excluded), "
            f"got {len(series)}"
        )
    cut = len(series) - policy.exclusion_days
    close = series.close[:cut]
    window = policy.window_days
    halflife = policy.halflife_days

    returns = close[1:] / close[:-1] - 1.0
    sigma = math.sqrt(ema(np.square(returns[-window:]), halflife))
    volume_est = ema(series.volume[:cut][-window:], halflife)
    spread_est = None
    if series.spread is not None:
        spread_est = ema(series.spread[:cut][-window:], halflife)
    quote_vol_est = None
    if series.best_quote_volume is not None:
        quote_vol_est = ema(series.best_quote_volume[:cut][-window:], halflife)
    return ImpactParams(Y=Y, sigma=sigma, V=volume_est, S=spread_est, v=quote_vol_est)


def load_series(path: str | Path) -> MarketSeries:
    """Load a daily market CSV (columns: date, close, volume[, spread, best_quote_volume]).

    Validation failures report the first offending data row (1-based).
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file, header required")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}")
        has_optional = {c: c in reader.fieldnames for c in OPTIONAL_COLUMNS}

        dates: list[date] = []
        numeric: dict[str, list[float]] = {
            c: [] for c in ("close", "volume", *[o for o, ok in has_optional.items() if ok])
        }
        for row_idx, row in enumerate(reader, start=1):
            try:
                dates.append(date.fromisoformat(row["date"].strip()))
            except ValueError as exc:
                raise ValueError(f"{path}: row {row_idx}: bad date {row['date']!r}") from exc
            for col in numeric:
                cell = row[col]
                try:
                    numeric[col].append(float(cell))
                except (TypeError, ValueError) as exc:
                    raise ValueError(
                        f"{path}: row {row_idx}: non-numeric {col} value {cell!r}"
                    ) from exc
    try:
        return MarketSeries(
            dates=dates,
            close=np.array(numeric["close"]),
            volume=np.array(numeric["volume"]),
            spread=np.array(numeric["spread"]) if has_optional["spread"] else None,
            best_quote_volume=(
                np.array(numeric["best_quote_volume"])
                if has_optional["best_quote_volume"]
                else None
            ),
        )
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
