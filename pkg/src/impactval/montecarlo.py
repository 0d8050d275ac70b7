"""Stochastic liquidation paths and bankruptcy-probability estimation.

Prices during a T-day liquidation follow a discrete random walk whose
drift is the daily increment of expected impact.  Writing s(t) for the
shares sold by day t (s(t) = t * delta_q):

    p(t+1) = p(t) - p0 * [I(s(t) + delta_q) - I(s(t))] + p0 * sigma * n(t)

with n(t) i.i.d. standard Gaussian.  With the noise suppressed the final
price is exactly p0 * (1 - I(Q)).  The drift is scaled by p0 so the
recursion is dimensionally consistent for any price level.

Trials draw from splittable counter-based streams (Philox keyed on the
master seed, jumped per trial), so results are bit-identical regardless
of execution order or parallelism.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import erf

from .impact import ImpactParams, expected_impact
from .valuation import Position


class BankruptcyMode(Enum):
    AT_END = "AT_END"
    ANYWHERE_ON_PATH = "ANYWHERE_ON_PATH"


@dataclass(frozen=True)
class LiquidationSchedule:
    """Uniform execution plan: sell delta_q shares per day out of Q total.

    T = Q / delta_q days and eta = delta_q / V (the participation rate)
    are derived, so the identities eta = Q / (V * T) = delta_q / V hold
    exactly.
    """

    Q: float
    delta_q: float
    V: float

    def __post_init__(self) -> None:
        if self.Q <= 0.0:
            raise ValueError(f"Q must be positive, got {self.Q}")
        if self.delta_q <= 0.0:
            raise ValueError(f"delta_q must be positive, got {self.delta_q}")
        if self.V <= 0.0:
            raise ValueError(f"V must be positive, got {self.V}")

    @property
    def T(self) -> float:
        return self.Q / self.delta_q

    @property
    def eta(self) -> float:
        return self.delta_q / self.V

    @classmethod
    def from_participation(cls, Q: float, V: float, eta: float) -> "LiquidationSchedule":
        return cls(Q=Q, delta_q=eta * V, V=V)


@dataclass(frozen=True)
class MonteCarloConfig:
    position: Position
    params: ImpactParams
    schedule: LiquidationSchedule
    n_trials: int
    master_seed: int
    bankruptcy_mode: BankruptcyMode = BankruptcyMode.AT_END
    # None -> background noise at params.sigma; 0.0 gives the deterministic path.
    noise_sigma: float | None = None

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")


@dataclass(frozen=True)
class MonteCarloResult:
    p_bankrupt: float
    std_error: float
    n_trials: int
    negative_price_trials: int


@dataclass(frozen=True)
class PricePath:
    """One simulated liquidation: daily prices and proceeds for a single trial."""

    prices: np.ndarray  # length T+1, prices[0] = p0
    proceeds: np.ndarray  # length T, delta_q * prices[1:]
    total_proceeds: float
    negative_steps: int


@dataclass(frozen=True)
class TransitionPoint:
    calI: float
    p_bankrupt: float
    std_error: float
    p_bankrupt_noimpact: float
    feasible: bool = True
    n_days: int = 0


@dataclass(frozen=True)
class FittedTransition:
    """Probit fit p = Phi(slope * (calI - center)) to a transition curve."""

    center: float
    width: float  # calI span between fitted p = 0.1 and p = 0.9
    slope: float


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Independent, order-insensitive stream for one trial."""
    return np.random.Generator(np.random.Philox(key=master_seed).jumped(trial_index))


def _n_days(schedule: LiquidationSchedule) -> int:
    t = schedule.T
    n = round(t)
    if n < 1 or abs(t - n) > 1e-9:
        raise ValueError(f"schedule must cover a whole number of days, got T={t}")
    return n


def _deterministic_prices(config: MonteCarloConfig, n_days: int) -> np.ndarray:
    """Noise-free daily prices p0 * (1 - I(s(t))) for t = 1..T."""
    p0 = config.position.p0
    sold = np.arange(1, n_days + 1, dtype=np.float64) * config.schedule.delta_q
    params = config.params
    impact = params.Y * params.sigma * np.sqrt(sold / params.V)
    return p0 * (1.0 - impact)


def _noise_scale(config: MonteCarloConfig) -> float:
    return config.params.sigma if config.noise_sigma is None else config.noise_sigma


def simulate_price_path(config: MonteCarloConfig, trial_index: int) -> PricePath:
    """Price path and proceeds for one trial, deterministic given (seed, index)."""
    n_days = _n_days(config.schedule)
    p0 = config.position.p0
    det = _deterministic_prices(config, n_days)
    scale = _noise_scale(config)
    if scale > 0.0:
        noise = trial_rng(config.master_seed, trial_index).standard_normal(n_days)
        daily = det + p0 * scale * np.cumsum(noise)
    else:
        daily = det
    prices = np.concatenate(([p0], daily))
    proceeds = config.schedule.delta_q * daily
    return PricePath(
        prices=prices,
        proceeds=proceeds,
        total_proceeds=float(proceeds.sum()),
        negative_steps=int((prices < 0).sum()),
    )


def _is_bankrupt(config: MonteCarloConfig, daily_prices: np.ndarray, q_rem: np.ndarray) -> bool:
    dq, L = config.schedule.delta_q, config.position.L
    if config.bankruptcy_mode is BankruptcyMode.AT_END:
        return float(dq * daily_prices.sum()) < L
    running = dq * np.cumsum(daily_prices) + q_rem * daily_prices
    return bool((running < L).any())


def _bankrupt_mask(config: MonteCarloConfig, daily: np.ndarray, q_rem: np.ndarray) -> np.ndarray:
    """Vectorized bankruptcy test over a (trials, days) price matrix."""
    dq, L = config.schedule.delta_q, config.position.L
    if config.bankruptcy_mode is BankruptcyMode.AT_END:
        return dq * daily.sum(axis=1) < L
    running = dq * np.cumsum(daily, axis=1) + q_rem * daily
    return (running < L).any(axis=1)


# Trials per vectorized batch; bounds the noise matrix to a few megabytes.
_BATCH = 512


def _noise_batches(master_seed: int, n_trials: int, n_days: int):
    """Per-trial standard-normal draws, yielded in (trials, days) batches.

    Row i of a batch starting at trial s is exactly the stream
    trial_rng(master_seed, s + i) would produce, so batching does not
    change any result.
    """
    base = np.random.Philox(key=master_seed)
    for start in range(0, n_trials, _BATCH):
        count = min(_BATCH, n_trials - start)
        noise = np.empty((count, n_days), dtype=np.float64)
        for i in range(count):
            np.random.Generator(base.jumped(start + i)).standard_normal(n_days, out=noise[i])
        yield noise


def bankruptcy_probability(config: MonteCarloConfig) -> MonteCarloResult:
    """Fraction of simulated liquidations whose proceeds fall short of the debt.

    AT_END counts a trial bankrupt iff total proceeds < L; ANYWHERE_ON_PATH
    additionally probes each day's proceeds-so-far plus the remaining
    position at that day's price.
    """
    n_days = _n_days(config.schedule)
    p0 = config.position.p0
    det = _deterministic_prices(config, n_days)
    scale = _noise_scale(config)
    q_rem = config.position.Q - np.arange(1, n_days + 1) * config.schedule.delta_q
    q_rem = np.maximum(q_rem, 0.0)

    bankrupt = 0
    negative_trials = 0
    negative_steps = 0
    if scale > 0.0:
        for noise in _noise_batches(config.master_seed, config.n_trials, n_days):
            daily = det + p0 * scale * np.cumsum(noise, axis=1)
            bankrupt += int(_bankrupt_mask(config, daily, q_rem).sum())
            neg_per_trial = (daily < 0).sum(axis=1)
            negative_trials += int((neg_per_trial > 0).sum())
            negative_steps += int(neg_per_trial.sum())
    else:
        if _is_bankrupt(config, det, q_rem):
            bankrupt = config.n_trials
        neg = int((det < 0).sum())
        if neg:
            negative_trials = config.n_trials
            negative_steps = neg * config.n_trials

    total_steps = config.n_trials * n_days
    if negative_steps > 0.001 * total_steps:
        warnings.warn(
            f"{negative_steps}/{total_steps} simulated prices were negative; "
            "the Gaussian noise model is being stretched",
            stacklevel=2,
        )
    p = bankrupt / config.n_trials
    return MonteCarloResult(
        p_bankrupt=p,
        std_error=math.sqrt(p * (1.0 - p) / config.n_trials),
        n_trials=config.n_trials,
        negative_price_trials=negative_trials,
    )


def transition_curve(
    lambda0: float,
    eta: float,
    calI_grid: "list[float] | np.ndarray",
    n_trials: int,
    master_seed: int,
    *,
    Y: float = 1.0,
    sigma: float = 0.02,
    V: float = 1e6,
    p0: float = 1.0,
    bankruptcy_mode: BankruptcyMode = BankruptcyMode.AT_END,
    noise_sigma: float | None = None,
) -> list[TransitionPoint]:
    """Bankruptcy probability versus total impact at fixed leverage and aggressivity.

    For each calI on the grid, V and sigma are held fixed and the position
    size is solved from calI = Y * sigma * sqrt(Q/V); the horizon follows
    from eta = Q / (V * T), rounded to a whole number of days (points whose
    horizon rounds below one day are marked infeasible).  Each point also
    carries the companion probability with the impact drift switched off,
    computed on the same noise draws.
    """
    if len(calI_grid) == 0:
        raise ValueError("calI grid must be non-empty")
    if lambda0 <= 1.0:
        raise ValueError(f"lambda0 must be > 1, got {lambda0}")
    points: list[TransitionPoint] = []
    for cal_i in calI_grid:
        if cal_i < 0.0:
            raise ValueError(f"calI must be non-negative, got {cal_i}")
        if cal_i == 0.0:
            points.append(TransitionPoint(0.0, 0.0, 0.0, 0.0))
            continue
        q_over_v = (cal_i / (Y * sigma)) ** 2
        n_days = round(q_over_v / eta)
        if n_days < 1:
            points.append(
                TransitionPoint(cal_i, math.nan, math.nan, math.nan, feasible=False)
            )
            continue
        Q = q_over_v * V
        L = Q * p0 * (1.0 - 1.0 / lambda0)
        config = MonteCarloConfig(
            position=Position(Q=Q, p0=p0, L=L),
            params=ImpactParams(Y=Y, sigma=sigma, V=V),
            schedule=LiquidationSchedule(Q=Q, delta_q=Q / n_days, V=V),
            n_trials=n_trials,
            master_seed=master_seed,
            bankruptcy_mode=bankruptcy_mode,
            noise_sigma=noise_sigma,
        )
        det = _deterministic_prices(config, n_days)
        scale = _noise_scale(config)
        q_rem = np.maximum(Q - np.arange(1, n_days + 1) * config.schedule.delta_q, 0.0)
        bankrupt = 0
        bankrupt_noimpact = 0
        if scale > 0.0:
            for noise in _noise_batches(master_seed, n_trials, n_days):
                cum = p0 * scale * np.cumsum(noise, axis=1)
                bankrupt += int(_bankrupt_mask(config, det + cum, q_rem).sum())
                bankrupt_noimpact += int(_bankrupt_mask(config, p0 + cum, q_rem).sum())
        else:
            if _is_bankrupt(config, det, q_rem):
                bankrupt = n_trials
            if _is_bankrupt(config, np.full(n_days, p0), q_rem):
                bankrupt_noimpact = n_trials
        p = bankrupt / n_trials
        points.append(
            TransitionPoint(
                calI=float(cal_i),
                p_bankrupt=p,
                std_error=math.sqrt(p * (1.0 - p) / n_trials),
                p_bankrupt_noimpact=bankrupt_noimpact / n_trials,
                n_days=n_days,
            )
        )
    return points


_PROBIT_SPAN = 2.5631031310892007  # z(0.9) - z(0.1)


def fit_transition(calIs: np.ndarray, ps: np.ndarray) -> FittedTransition:
    """Least-squares probit fit to a (calI, p_bankrupt) curve.

    The fitted sigmoid defines the transition center (p = 0.5 crossing) and
    width (calI span between p = 0.1 and p = 0.9) even when the sampled
    curve itself never reaches those levels.
    """
    calIs = np.asarray(calIs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    keep = ~np.isnan(ps)
    calIs, ps = calIs[keep], ps[keep]
    if len(calIs) < 3:
        raise ValueError("need at least 3 finite points to fit a transition")

    def probit(x, slope, center):
        return 0.5 * (1.0 + erf(slope * (x - center) / math.sqrt(2.0)))

    center0 = float(np.interp(0.5, np.clip(ps, 1e-6, 1 - 1e-6), calIs))
    span = max(calIs.max() - calIs.min(), 1e-6)
    (slope, center), _ = curve_fit(
        probit, calIs, ps, p0=[4.0 / span, center0], maxfev=20000
    )
    return FittedTransition(center=center, width=_PROBIT_SPAN / slope, slope=slope)


def transition_csv_rows(points: "list[TransitionPoint]") -> list[list[str]]:
    """CSV payload: calI, p_bankrupt, std_error, p_bankrupt_noimpact (nan = infeasible)."""
    rows = [["calI", "p_bankrupt", "std_error", "p_bankrupt_noimpact"]]
    for pt in points:
        rows.append(
            [repr(pt.calI), repr(pt.p_bankrupt), repr(pt.std_error), repr(pt.p_bankrupt_noimpact)]
        )
    return rows
