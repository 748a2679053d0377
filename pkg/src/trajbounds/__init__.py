"""Worst-case option price bounds and hedges on trajectory-set market models."""

from .model import (
    Band,
    BinomialBandRule,
    GridSpec,
    MARule,
    MBRule,
    ModelValidationError,
    ModifiedRule,
    NodeClass,
    NotZeroNeutralError,
    TransitionRule,
    ValidationReport,
    Vertex,
    bjn_rule,
    classify_node,
    reachable,
    spec_for_rule,
    spec_from_total_variance,
    validate_model,
)
from .grid import BoundsGrid, Grid, Payoff, build_grid, payoff_eval
from .engine import (
    HullPoint,
    LocalSolution,
    band_bounds,
    compute_bounds,
    convex_hull_step,
    hull_fast,
    inject_arbitrage,
    price,
)
from .oracle import (
    OracleReport,
    black_scholes,
    brute_force_upper,
    crr_binomial,
    merton_envelope,
)
from .hedge import (
    HedgeLedger,
    Trajectory,
    count_trajectories,
    enumerate_trajectories,
    extract_hedge,
    sample_trajectory,
    simulate_pnl,
)

__all__ = [name for name in dir() if not name.startswith("_")]
