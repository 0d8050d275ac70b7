"""Impact-adjusted valuation, critical leverage, and liquidation risk."""

from .estimation import EstimationPolicy, MarketSeries, ema, estimate_params, load_series
from .impact import (
    ImpactParams,
    ImpactQuote,
    TradeDirection,
    Validity,
    ValidityReport,
    check_validity,
    expected_impact,
    impact_from_spread,
    quote,
    volatility_from_spread,
)
from .leverage import (
    DIVERGED,
    CriticalityReport,
    CrossoverResult,
    Regime,
    TrajectoryPoint,
    bankruptcy_point,
    cash_raised,
    classify,
    critical_impact,
    critical_leverage,
    critical_leverage_from_spread,
    crossover_point,
    deleverage_lambda,
    deleverage_trajectory,
    entry_exit_trajectories,
    impact_adjusted_leverage_exit,
    mtm_leverage,
    small_x_expansion,
    write_trajectory_csv,
)
from .montecarlo import (
    BankruptcyMode,
    LiquidationSchedule,
    MonteCarloConfig,
    MonteCarloResult,
    bankruptcy_probability,
    fit_transition,
    simulate_price_path,
    transition_curve,
)
from .valuation import (
    Position,
    average_valuation_price,
    liquidation_value,
    liquidation_value_discrete,
    remaining_liquidation_value,
)

__version__ = "0.1.0"
