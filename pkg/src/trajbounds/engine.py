"""Backward-induction pricing engine with the convex-hull local optimizer.

The upper bound at a non-terminal vertex is the highest intersection with the
vertical line ``x = s_k`` over all chords joining one successor with price
above ``s_k`` to one with price at or below it.  The recorded hedge slope is
the support slope of that value nearest zero, so it superhedges every
successor by construction.  Lower bounds reuse the identical sweep on the
negated payoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .grid import (
    Grid,
    BoundsGrid,
    PROV_CONTINUATION,
    PROV_Q_MAX,
    PROV_TERMINAL_PAYOFF,
    build_grid,
)
from .model import (
    BinomialBandRule,
    GridSpec,
    ModifiedRule,
    NotZeroNeutralError,
    TransitionRule,
    Vertex,
    reachable,
    reachable_masks,
    validate_model,
)

_BIG = 1e300
_INVALID = -1e250  # anything below this is a leaked sentinel, not a value


class HullPoint(NamedTuple):
    x: float
    y: float
    vertex: Optional[Vertex] = None


@dataclass(frozen=True)
class LocalSolution:
    """Value and hedge slope of one local optimization."""

    value: float
    slope: float
    plus: Optional[HullPoint]
    minus: Optional[HullPoint]

    @property
    def witnesses(self) -> tuple[Optional[HullPoint], Optional[HullPoint]]:
        return self.plus, self.minus


def _as_points(points: Iterable) -> list[HullPoint]:
    out = []
    for p in points:
        if isinstance(p, HullPoint):
            out.append(p)
        else:
            t = tuple(p)
            out.append(HullPoint(float(t[0]), float(t[1]), t[2] if len(t) > 2 else None))
    return out


def _support_slope(points: Sequence[HullPoint], s: float, value: float) -> float:
    """Slope nearest zero among lines through (s, value) that dominate every point."""
    lo = -math.inf
    hi = math.inf
    for p in points:
        dx = p.x - s
        if dx > 0.0:
            lo = max(lo, (p.y - value) / dx)
        elif dx < 0.0:
            hi = min(hi, (p.y - value) / dx)
    return min(max(0.0, lo), hi)


def _split_minus(minus: Sequence[HullPoint], s: float):
    flats = [p for p in minus if p.x == s]
    downs = [p for p in minus if p.x < s]
    return flats, downs


def _degenerate_solution(
    plus: Sequence[HullPoint], flats: Sequence[HullPoint], downs: Sequence[HullPoint], s: float
) -> LocalSolution:
    """Arbitrage / flat vertex: the bound is the best value among flat moves."""
    best_flat = max(flats, key=lambda p: p.y)
    value = best_flat.y
    pts = list(plus) + list(flats) + list(downs)
    slope = _support_slope(pts, s, value)
    wit_plus: Optional[HullPoint] = None
    if plus:
        wit_plus = min(plus, key=lambda p: abs((p.y - value) / (p.x - s)))
    return LocalSolution(value=value, slope=slope, plus=wit_plus, minus=best_flat)


def convex_hull_step(points_plus, points_minus, s_k: float) -> LocalSolution:
    """Local optimum by explicit enumeration of all (plus, minus) chords.

    ``points_plus`` must have x > s_k and ``points_minus`` x <= s_k (price-flat
    successors ride with the minus set).  One-sided inputs are admissible only
    when flats are present (arbitrage vertices); otherwise the vertex is not
    0-neutral and no finite optimum exists.
    """
    plus = _as_points(points_plus)
    minus = _as_points(points_minus)
    if any(p.x <= s_k for p in plus):
        raise ValueError("points_plus must satisfy x > s_k")
    if any(p.x > s_k for p in minus):
        raise ValueError("points_minus must satisfy x <= s_k")
    if not plus and not minus:
        raise ValueError("both successor sets are empty")
    flats, downs = _split_minus(minus, s_k)
    if not plus:
        if not flats:
            raise NotZeroNeutralError()
        return _degenerate_solution(plus, flats, downs, s_k)
    if not minus:
        raise NotZeroNeutralError()

    best = -math.inf
    best_u = math.inf
    best_pair: tuple[HullPoint, HullPoint] | None = None
    for a in plus:
        for b in minus:
            u = (a.y - b.y) / (a.x - b.x)
            val = a.y - u * (a.x - s_k)
            if val > best or (val == best and abs(u) < abs(best_u)):
                best, best_u, best_pair = val, u, (a, b)
    assert best_pair is not None
    slope = _support_slope(plus + minus, s_k, best)
    return LocalSolution(value=best, slope=slope, plus=best_pair[0], minus=best_pair[1])


def _upper_hull(pts: list[HullPoint]) -> list[HullPoint]:
    """Upper concave envelope of points sorted by x; max y kept per x level."""
    pts = sorted(pts, key=lambda p: (p.x, p.y))
    dedup: list[HullPoint] = []
    for p in pts:
        if dedup and dedup[-1].x == p.x:
            dedup[-1] = p  # sorted by y: later point dominates
        else:
            dedup.append(p)
    hull: list[HullPoint] = []
    for p in dedup:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            if (a.x - o.x) * (p.y - o.y) - (a.y - o.y) * (p.x - o.x) >= 0.0:
                hull.pop()
            else:
                break
        hull.append(p)
    return hull


def hull_fast(points_plus, points_minus, s_k: float) -> LocalSolution:
    """Same optimum as :func:`convex_hull_step` via the upper concave envelope.

    O(m log m): the maximizing chord is the envelope edge spanning ``s_k``.
    """
    plus = _as_points(points_plus)
    minus = _as_points(points_minus)
    if any(p.x <= s_k for p in plus):
        raise ValueError("points_plus must satisfy x > s_k")
    if any(p.x > s_k for p in minus):
        raise ValueError("points_minus must satisfy x <= s_k")
    if not plus and not minus:
        raise ValueError("both successor sets are empty")
    flats, downs = _split_minus(minus, s_k)
    if not plus:
        if not flats:
            raise NotZeroNeutralError()
        return _degenerate_solution(plus, flats, downs, s_k)
    if not minus:
        raise NotZeroNeutralError()
    if not downs and flats:
        # Positive arbitrage: the spanning edge degenerates onto the flats.
        return _degenerate_solution(plus, flats, downs, s_k)

    hull = _upper_hull(plus + minus)
    # Spanning edge: hull[i].x <= s_k < hull[i+1].x always exists here.
    i = 0
    while i + 1 < len(hull) and hull[i + 1].x <= s_k:
        i += 1
    b, a = hull[i], hull[i + 1]
    u = (a.y - b.y) / (a.x - b.x)
    value = a.y - u * (a.x - s_k)
    slope = _support_slope(plus + minus, s_k, value)
    return LocalSolution(value=value, slope=slope, plus=a, minus=b)


# --------------------------------------------------------------------------- #
# Column sweeps
# --------------------------------------------------------------------------- #

def _terminal_row(grid: Grid, payoff) -> np.ndarray:
    spec = grid.spec
    row = np.full(spec.width, -_BIG)
    w = spec.column_half_width(spec.n2)
    for k in range(-w, w + 1):
        row[k + spec.n1] = payoff.value_at(grid.price(k))
    return row


def _payoff_row(grid: Grid, payoff, j: int) -> np.ndarray:
    spec = grid.spec
    row = np.full(spec.width, np.nan)
    w = spec.column_half_width(j)
    for k in range(-w, w + 1):
        row[k + spec.n1] = payoff.value_at(grid.price(k))
    return row


def _resolve_vertex(grid, rule, payoff, U, k: int, j: int, in_lam: bool,
                    is_reachable: bool):
    """Per-vertex pricing fallback; None means the vertex stays uncomputed."""
    spec = grid.spec
    succ = reachable(spec, rule, (k, j))
    if not succ:
        if not is_reachable:
            return None
        if in_lam:
            # Forced liquidation: the trajectory has nowhere to go but sits on
            # an admissible variation level.
            return payoff.value_at(grid.price(k)), 0.0, True
        raise NotZeroNeutralError((k, j))
    s = grid.price(k)
    pts = [HullPoint(grid.price(kk), float(U[jj, kk + spec.n1]), (kk, jj)) for kk, jj in succ]
    if any(math.isnan(p.y) for p in pts):
        return None  # successor chain never computed: vertex is unreachable
    try:
        sol = hull_fast([p for p in pts if p.x > s], [p for p in pts if p.x <= s], s)
    except NotZeroNeutralError:
        if not is_reachable:
            return None
        raise NotZeroNeutralError((k, j)) from None
    return sol.value, sol.slope, False


def _sweep_banded(grid: Grid, rule: TransitionRule, payoff):
    """Vectorized descending-j sweep.  Returns (U, slope, prov) full-width arrays."""
    spec = grid.spec
    n1, n2, W = spec.n1, spec.n2, spec.width
    delta = spec.delta
    lam = set(spec.lam)
    reach = reachable_masks(spec, rule)
    prices = grid.prices

    U = np.full((n2 + 1, W), np.nan)
    slope = np.full((n2 + 1, W), np.nan)
    prov = np.zeros((n2 + 1, W), dtype=np.int8)

    # Work array with sentinel fill so window maxima ignore off-grid entries.
    V = np.full((n2 + 1, W), -_BIG)
    V[n2] = _terminal_row(grid, payoff)
    wmask_term = V[n2] > -_BIG / 2
    U[n2, wmask_term] = V[n2, wmask_term]
    slope[n2, wmask_term] = 0.0
    prov[n2, wmask_term] = PROV_TERMINAL_PAYOFF

    pmax = max(spec.p, rule.p)
    em1 = {dk: math.expm1(dk * delta) for dk in range(-pmax, pmax + 1)}

    for j in range(n2 - 1, -1, -1):
        wj = spec.column_half_width(j)
        col = slice(n1 - wj, n1 + wj + 1)
        C = np.full(W, -_BIG)
        lo = np.full(W, -np.inf)
        hi = np.full(W, np.inf)
        for mask, bands in rule.band_groups(spec, j):
            ys: dict[int, np.ndarray] = {}
            for dk, blo, bhi in bands:
                bhi = min(bhi, n2 - j)
                if blo > bhi:
                    continue
                window_max = V[j + blo: j + bhi + 1].max(axis=0)
                y = np.full(W, -_BIG)
                if dk >= 0:
                    y[: W - dk] = window_max[dk:]
                else:
                    y[-dk:] = window_max[: W + dk]
                ys[dk] = y
            gC = np.full(W, -_BIG)
            for a in (d for d in ys if d >= 0):
                ea = em1[a]
                for b in (d for d in ys if d <= 0 and d < a):
                    eb = em1[b]
                    den = ea - eb
                    ca = -eb / den
                    cb = ea / den
                    np.maximum(gC, ca * ys[a] + cb * ys[b], out=gC)
            glo = np.full(W, -np.inf)
            ghi = np.full(W, np.inf)
            for a in (d for d in ys if d > 0):
                np.maximum(glo, (ys[a] - gC) / (prices * em1[a]), out=glo)
            for b in (d for d in ys if d < 0):
                np.minimum(ghi, (ys[b] - gC) / (prices * em1[b]), out=ghi)
            if mask is None:
                C, lo, hi = gC, glo, ghi
            else:
                C = np.where(mask, gC, C)
                lo = np.where(mask, glo, lo)
                hi = np.where(mask, ghi, hi)

        srow = np.minimum(np.maximum(0.0, lo), hi)
        ok = C > _INVALID
        in_lam = j in lam

        Uj = np.full(W, np.nan)
        Pj = np.zeros(W, dtype=np.int8)
        Uj[ok] = C[ok]
        Pj[ok] = PROV_CONTINUATION
        Sj = np.where(ok, srow, np.nan)

        for i in np.flatnonzero(~ok[col]) + (n1 - wj):
            k = int(i) - n1
            if not reach[j, i]:
                continue
            res = _resolve_vertex(grid, rule, payoff, U, k, j, in_lam, True)
            if res is None:
                continue
            val, sl, forced_stop = res
            Uj[i], Sj[i] = val, sl
            Pj[i] = PROV_Q_MAX if forced_stop else PROV_CONTINUATION

        if in_lam:
            Z = _payoff_row(grid, payoff, j)
            stop_wins = Z > Uj  # NaN-safe: comparisons with NaN are False
            Uj = np.where(stop_wins, Z, Uj)
            Pj = np.where(stop_wins, np.int8(PROV_Q_MAX), Pj)

        U[j, col] = Uj[col]
        slope[j, col] = Sj[col]
        prov[j, col] = Pj[col]
        # NaN (uncomputed, in grid) must propagate through later window maxima,
        # while off-grid entries stay at the sentinel and are ignored.
        V[j, col] = U[j, col]

    return U, slope, prov


def _sweep_generic(grid: Grid, rule: TransitionRule, payoff):
    """Reference per-vertex sweep with identical semantics to the banded one."""
    spec = grid.spec
    n1, n2, W = spec.n1, spec.n2, spec.width
    lam = set(spec.lam)
    reach = reachable_masks(spec, rule)
    U = np.full((n2 + 1, W), np.nan)
    slope = np.full((n2 + 1, W), np.nan)
    prov = np.zeros((n2 + 1, W), dtype=np.int8)
    wterm = spec.column_half_width(n2)
    for k in range(-wterm, wterm + 1):
        U[n2, k + n1] = payoff.value_at(grid.price(k))
        slope[n2, k + n1] = 0.0
        prov[n2, k + n1] = PROV_TERMINAL_PAYOFF
    for j in range(n2 - 1, -1, -1):
        in_lam = j in lam
        for k in grid.column_ks(j):
            i = k + n1
            res = _resolve_vertex(grid, rule, payoff, U, k, j, in_lam, bool(reach[j, i]))
            if res is None:
                continue
            val, sl, forced_stop = res
            pv = PROV_Q_MAX if forced_stop else PROV_CONTINUATION
            if in_lam and not forced_stop:
                z = payoff.value_at(grid.price(k))
                if z > val:
                    val, pv = z, PROV_Q_MAX
            U[j, i], slope[j, i], prov[j, i] = val, sl, pv
    return U, slope, prov


def compute_bounds(grid: Grid, rule: TransitionRule, payoff, *, method: str = "banded") -> BoundsGrid:
    """Fill upper/lower bounds and hedge slopes over the whole grid.

    ``method='banded'`` runs the vectorized sweep (rules must expose band
    groups); ``'generic'`` runs the per-vertex reference sweep.  The lower
    bound is the negated upper bound of the negated payoff, computed by the
    same code path; since the upper sweep takes max(payoff, continuation) on
    intermediate liquidation columns, the lower bound takes
    min(payoff, continuation) there.
    """
    sweep = _sweep_banded if method == "banded" else _sweep_generic
    upper, slope_up, prov = sweep(grid, rule, payoff)
    neg_upper, slope_dn, _ = sweep(grid, rule, payoff.negated())
    lower = -neg_upper
    return BoundsGrid(grid, payoff, upper, lower, slope_up, slope_dn, prov)


def price(spec: GridSpec, rule: TransitionRule, payoff, *, validate: bool = True,
          method: str = "banded") -> tuple[float, float]:
    """(lower, upper) worst-case price interval at the root vertex (0, 0)."""
    if validate:
        validate_model(spec, rule).raise_if_failed()
    bounds = compute_bounds(build_grid(spec), rule, payoff, method=method)
    return bounds.price_interval()


def inject_arbitrage(rule: TransitionRule, fraction: float, seed: int) -> ModifiedRule:
    """Rule with a seeded fraction of reachable vertices turned one-sided + flat."""
    return ModifiedRule(base=rule, fraction=fraction, seed=seed)


# --------------------------------------------------------------------------- #
# Two-sided multiplicative band on its own recombining lattice
# --------------------------------------------------------------------------- #

def band_bounds(rule: BinomialBandRule, steps: int, s0: float, payoff) -> tuple[float, float]:
    """(lower, upper) for the multiplicative-band model over ``steps`` periods.

    Nodes are (period, level-sum); prices recombine as s0 * d**i * rho**m with
    rho the level ratio.  Each node is optimized with the same hull step as the
    grid engine.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    upper = _band_sweep(rule, steps, s0, payoff)
    lower = -_band_sweep(rule, steps, s0, payoff.negated())
    return lower, upper


def _band_prices(rule: BinomialBandRule, steps: int, s0: float) -> list[np.ndarray]:
    L = rule.levels
    if L == 2:
        rho = rule.u / rule.d
    else:
        rho = (rule.u / rule.d) ** (1.0 / (L - 1))
    out = []
    for i in range(steps + 1):
        m = np.arange(i * (L - 1) + 1)
        out.append(s0 * rule.d ** i * rho ** m)
    return out

def _band_sweep(rule: BinomialBandRule, steps: int, s0: float, payoff) -> float:
    L = rule.levels
    prices = _band_prices(rule, steps, s0)
    values = np.array([payoff.value_at(x) for x in prices[steps]])
    for i in range(steps - 1, -1, -1):
        nxt = values
        cur = np.empty(i * (L - 1) + 1)
        for m in range(cur.shape[0]):
            s = float(prices[i][m])
            pts = [HullPoint(float(prices[i + 1][m + t]), float(nxt[m + t])) for t in range(L)]
            sol = hull_fast([p for p in pts if p.x > s], [p for p in pts if p.x <= s], s)
            cur[m] = sol.value
        values = cur
    return float(values[0])
