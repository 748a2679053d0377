"""Independent reference computations used to validate the pricing engine.

Nothing here shares the engine's hull geometry: the local minimization over
the hedge ratio is done by direct candidate enumeration plus a refining grid
search, and the binomial / closed-form benchmarks are textbook recursions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import payoff_eval
from .model import (
    GridSpec,
    NotZeroNeutralError,
    TransitionRule,
    Vertex,
    reachable,
)


class InstanceTooLargeError(ValueError):
    pass


class OracleInconsistencyError(RuntimeError):
    """The two internal minimizers disagreed beyond the grid resolution."""


@dataclass(frozen=True)
class OracleReport:
    engine_value: float
    oracle_value: float
    abs_diff: float
    rel_diff: float
    method: str

    @classmethod
    def compare(cls, engine_value: float, oracle_value: float, method: str) -> "OracleReport":
        ad = abs(engine_value - oracle_value)
        scale = max(abs(engine_value), abs(oracle_value), 1e-300)
        return cls(engine_value, oracle_value, ad, ad / scale, method)


# --------------------------------------------------------------------------- #
# Brute-force dynamic bound
# --------------------------------------------------------------------------- #

def _local_inf_sup(xs: np.ndarray, ys: np.ndarray, s: float) -> float:
    """inf over u of max_i (ys[i] - u * (xs[i] - s)), two independent ways.

    Candidates: every pairwise chord slope plus 0 and +-(max slope + 1); the
    infimum of a piecewise-linear convex function is attained at a breakpoint
    or approached in the direction where the steepest line family dies out.
    A refining grid search must agree within its resolution.
    """
    dx = xs - s
    if np.all(dx > 0) or np.all(dx < 0):
        raise NotZeroNeutralError()

    cands = [0.0]
    n = len(xs)
    for i in range(n):
        for j in range(i + 1, n):
            if xs[i] != xs[j]:
                cands.append((ys[i] - ys[j]) / (xs[i] - xs[j]))
    r = max(abs(c) for c in cands) + 1.0
    cands.extend([r, -r])
    u_cand = np.array(cands)

    def g(us: np.ndarray) -> np.ndarray:
        return (ys[None, :] - np.outer(us, dx)).max(axis=1)

    val_a = float(g(u_cand).min())

    # Grid search with three refinement rounds around the running minimizer.
    lo, hi = -r, r
    val_b = math.inf
    for _ in range(3):
        us = np.linspace(lo, hi, 801)
        vals = g(us)
        imin = int(vals.argmin())
        val_b = min(val_b, float(vals[imin]))
        du = us[1] - us[0]
        lo, hi = us[imin] - du, us[imin] + du

    lipschitz = float(np.abs(dx).max())
    res = (2.0 * r / 800.0)  # coarsest grid spacing dominates the bound
    tol = lipschitz * res + 1e-9 * max(1.0, abs(val_a))
    if not (val_a <= val_b + 1e-9 * max(1.0, abs(val_a)) and val_b <= val_a + tol):
        raise OracleInconsistencyError(
            f"candidate minimum {val_a} vs grid minimum {val_b} beyond tolerance {tol}")
    return val_a


def brute_force_upper(spec: GridSpec, rule: TransitionRule, payoff,
                      max_work: int = 10_000) -> float:
    """Upper dynamic bound at (0, 0) by direct local inf-sup at every vertex.

    Enforces a work cap of ``max_work`` successor-pair units so the quadratic
    candidate enumeration stays honest.
    """
    succ: dict[Vertex, list[Vertex]] = {}
    frontier = [(0, 0)]
    seen = {(0, 0)}
    work = 0
    while frontier:
        v = frontier.pop()
        if v[1] == spec.n2:
            continue
        nxt = reachable(spec, rule, v)
        succ[v] = nxt
        work += len(nxt) * len(nxt)
        if work > max_work:
            raise InstanceTooLargeError(
                f"instance exceeds {max_work} (vertex, pair) work units")
        for w in nxt:
            if w not in seen:
                seen.add(w)
                frontier.append(w)

    lam = set(spec.lam)
    values: dict[Vertex, float] = {}
    order = sorted(seen, key=lambda v: v[1], reverse=True)
    for v in order:
        k, j = v
        if j == spec.n2:
            values[v] = payoff_eval(payoff, k, spec)
            continue
        nxt = succ[v]
        z = payoff_eval(payoff, k, spec)
        if not nxt:
            if j in lam:
                values[v] = z
                continue
            raise NotZeroNeutralError(v)
        xs = np.array([spec.price(kk) for kk, _ in nxt])
        ys = np.array([values[w] for w in nxt])
        try:
            c = _local_inf_sup(xs, ys, spec.price(k))
        except NotZeroNeutralError:
            raise NotZeroNeutralError(v) from None
        values[v] = max(z, c) if j in lam else c
    return values[(0, 0)]


# --------------------------------------------------------------------------- #
# Benchmarks
# --------------------------------------------------------------------------- #

def crr_binomial(u: float, d: float, n: int, s0: float, payoff) -> float:
    """Zero-rate binomial backward induction with weights (1-d)/(u-d), (u-1)/(u-d)."""
    if not (0.0 < d < 1.0 < u):
        raise ValueError("need 0 < d < 1 < u")
    if n < 1:
        raise ValueError("n must be >= 1")
    wu = (1.0 - d) / (u - d)
    wd = (u - 1.0) / (u - d)
    values = np.array([payoff.value_at(s0 * u ** a * d ** (n - a)) for a in range(n + 1)])
    for _ in range(n):
        values = wu * values[1:] + wd * values[:-1]
    return float(values[0])


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def black_scholes(s0: float, strike: float, sigma: float, years: float,
                  kind: str = "CALL") -> float:
    """Zero-rate Black-Scholes price via the error-function normal CDF."""
    if s0 <= 0.0 or sigma <= 0.0 or years <= 0.0:
        raise ValueError("s0, sigma and years must be positive")
    if strike < 0.0:
        raise ValueError("strike must be non-negative")
    kind = kind.upper()
    if kind not in ("CALL", "PUT"):
        raise ValueError(f"unsupported option kind {kind!r}")
    if strike == 0.0:
        return s0 if kind == "CALL" else 0.0
    sig = sigma * math.sqrt(years)
    d1 = (math.log(s0 / strike) + 0.5 * sig * sig) / sig
    d2 = d1 - sig
    if kind == "CALL":
        return s0 * _norm_cdf(d1) - strike * _norm_cdf(d2)
    return strike * _norm_cdf(-d2) - s0 * _norm_cdf(-d1)


def merton_envelope(kind: str, s0: float, strike: float) -> tuple[float, float]:
    """Model-free (lb, ub) from static super/sub-replication with stock and cash."""
    kind = kind.upper()
    if kind == "CALL":
        return max(s0 - strike, 0.0), s0
    if kind == "PUT":
        return max(strike - s0, 0.0), strike
    raise ValueError(f"unsupported option kind {kind!r}")
