"""Trajectory-grid market models: discretization specs, transition rules, node classes.

A market model lives on the integer grid of vertices ``(k, j)`` with price
``s_k = s0 * exp(k * delta)`` and accumulated variation ``w_j = j * beta**2``.
A :class:`TransitionRule` declares which moves ``(dk, dj)`` are admissible from
a vertex; every rule here expresses admissibility as a per-``dk`` window of
``dj`` values (a "band"), which is what the vectorized sweeps exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

Vertex = tuple[int, int]
# (dk, dj_lo, dj_hi): moves to (k + dk, j + dj) are admissible for dj_lo <= dj <= dj_hi.
Band = tuple[int, int, int]


class NodeClass(Enum):
    UP_DOWN = "up_down"
    FLAT = "flat"
    POSITIVE_ARBITRAGE = "positive_arbitrage"
    NEGATIVE_ARBITRAGE = "negative_arbitrage"
    NOT_ZERO_NEUTRAL = "not_zero_neutral"


class ModelValidationError(ValueError):
    """Raised when a (spec, rule) pair fails structural validation."""

    def __init__(self, message: str, report: "ValidationReport | None" = None):
        super().__init__(message)
        self.report = report


class NotZeroNeutralError(ValueError):
    """All admissible moves from a vertex change price in the same direction."""

    def __init__(self, vertex: Vertex | None = None):
        at = f" at vertex {vertex}" if vertex is not None else ""
        super().__init__(f"not 0-neutral{at}: admissible price moves are one-sided")
        self.vertex = vertex


# --------------------------------------------------------------------------- #
# Grid specification
# --------------------------------------------------------------------------- #

@dataclass(frozen=True)
class GridSpec:
    """Finite discretization of a trajectory set.

    Vertices are the pairs ``(k, j)`` with ``|k| <= n1``, ``0 <= j <= n2`` and
    ``|k| <= p * j``.  ``lam`` lists the variation columns (indices ``j``) at
    which portfolios may liquidate; its last element must equal ``n2``.
    The derived per-step caps are ``d = p * delta`` (log-price) and
    ``c = q * beta**2`` (variation); they are never stored independently.
    """

    s0: float
    delta: float
    beta: float
    p: int
    q: int
    n1: int
    n2: int
    lam: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lam", tuple(int(x) for x in self.lam))
        if self.s0 <= 0.0:
            raise ValueError("s0 must be positive")
        if self.delta <= 0.0 or self.beta <= 0.0:
            raise ValueError("delta and beta must be positive")
        for name in ("p", "q", "n1", "n2"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be an integer >= 1")
        if not self.lam:
            raise ValueError("lam must be non-empty")
        if any(b <= a for a, b in zip(self.lam, self.lam[1:])):
            raise ValueError("lam must be strictly increasing")
        if self.lam[0] < 1:
            raise ValueError("lam entries must be >= 1")
        if self.lam[-1] != self.n2:
            raise ValueError("last element of lam must equal n2")
        if self.n1 > self.p * self.n2:
            raise ValueError("need n1 <= p * n2, otherwise the top price rows are unreachable")

    @property
    def d(self) -> float:
        return self.p * self.delta

    @property
    def c(self) -> float:
        return self.q * self.beta ** 2

    @property
    def width(self) -> int:
        """Full row width 2*n1 + 1; row index of k is k + n1."""
        return 2 * self.n1 + 1

    def price(self, k: int) -> float:
        return self.s0 * math.exp(k * self.delta)

    def column_half_width(self, j: int) -> int:
        return min(self.n1, self.p * j)

    def in_grid(self, k: int, j: int) -> bool:
        return 0 <= j <= self.n2 and abs(k) <= self.column_half_width(j)


def spec_for_rule(
    rule: "TransitionRule",
    s0: float,
    delta: float,
    beta: float,
    n1: int,
    n2: int,
    lam: Sequence[int] | None = None,
) -> GridSpec:
    """GridSpec whose (p, q) caps match the rule's admissible moves."""
    lam_t = tuple(lam) if lam is not None else (n2,)
    return GridSpec(s0=s0, delta=delta, beta=beta, p=rule.p, q=rule.max_dj,
                    n1=n1, n2=n2, lam=lam_t)


def spec_from_total_variance(
    rule: "TransitionRule",
    s0: float,
    v0: float,
    n2: int,
    lam: Sequence[int] | None = None,
) -> GridSpec:
    """Desk parametrization: beta = delta = sqrt(v0 / n2), n1 = n2.

    Trajectories then accumulate total variation v0 by column n2.
    """
    step = math.sqrt(v0 / n2)
    return spec_for_rule(rule, s0=s0, delta=step, beta=step, n1=n2, n2=n2, lam=lam)


# --------------------------------------------------------------------------- #
# Transition rules
# --------------------------------------------------------------------------- #

class TransitionRule:
    """Base for band-structured transition rules.

    Subclasses must provide ``p`` (max |dk|), ``max_dj`` and either a uniform
    ``_bands`` tuple or an override of :meth:`bands_at` / :meth:`band_groups`.
    """

    kind: str = "?"

    @property
    def p(self) -> int:
        raise NotImplementedError

    @property
    def max_dj(self) -> int:
        raise NotImplementedError

    def bands(self) -> tuple[Band, ...]:
        """Vertex-independent bands; only valid when ``uniform`` is True."""
        raise NotImplementedError

    @property
    def uniform(self) -> bool:
        return True

    def bands_at(self, spec: GridSpec, k: int, j: int) -> tuple[Band, ...]:
        return self.bands()

    def band_groups(
        self, spec: GridSpec, j: int
    ) -> list[tuple[Optional[np.ndarray], tuple[Band, ...]]]:
        """Partition of the column's vertices into groups sharing one band set.

        Returns (mask, bands) pairs where ``mask`` is a boolean row over the
        full width (None means "all vertices").  Uniform rules return a single
        group.
        """
        return [(None, self.bands())]


@dataclass(frozen=True)
class MARule(TransitionRule):
    """Jump-bounded quadratic-variation rule: dj between dk**2 and p**2.

    ``allow_flat=False`` additionally forbids dk == 0 (prices must move every
    step); with p == 1 and no flats this is the classical binomial-with-
    variation-clock model.
    """

    p_max: int
    allow_flat: bool = False

    def __post_init__(self):
        if self.p_max < 1:
            raise ValueError("p must be >= 1")

    @property
    def kind(self) -> str:  # type: ignore[override]
        if self.p_max == 1 and not self.allow_flat:
            return "BJN"
        return "MA"

    @property
    def p(self) -> int:
        return self.p_max

    @property
    def max_dj(self) -> int:
        return self.p_max ** 2

    def bands(self) -> tuple[Band, ...]:
        out: list[Band] = []
        hi = self.p_max ** 2
        for dk in range(-self.p_max, self.p_max + 1):
            if dk == 0 and not self.allow_flat:
                continue
            lo = max(dk * dk, 1)
            if lo <= hi:
                out.append((dk, lo, hi))
        return tuple(out)


def bjn_rule() -> MARule:
    """Unit-jump special case: the only admissible move is (dk, dj) = (+-1, 1)."""
    return MARule(p_max=1)


@dataclass(frozen=True)
class MBRule(TransitionRule):
    """Operationally constrained rule with rebalance horizon A (in time ticks).

    Admissible moves satisfy ``0 < |dk| <= p`` and
    ``max(|dk|, dk**2 / A) <= dj <= p**2 / A``; all comparisons are carried
    out in exact integer arithmetic (multiply through by A).
    """

    p_max: int
    A: int
    allow_flat: bool = False

    def __post_init__(self):
        if self.A < 1:
            raise ValueError("A must be >= 1")
        if self.p_max < 1:
            raise ValueError("p must be >= 1")
        if self.p_max == 1 and self.A != 1:
            raise ValueError("p = 1 is only admissible with A = 1")
        if self.p_max * self.p_max < self.A:
            raise ValueError("no admissible moves: need p**2 >= A")

    kind = "MB"

    @property
    def p(self) -> int:
        return self.p_max

    @property
    def p_eta(self) -> float:
        return self.p_max / self.A

    @property
    def max_dj(self) -> int:
        return (self.p_max ** 2) // self.A

    def bands(self) -> tuple[Band, ...]:
        out: list[Band] = []
        hi = self.max_dj
        for dk in range(-self.p_max, self.p_max + 1):
            if dk == 0 and not self.allow_flat:
                continue
            m = abs(dk)
            lo = max(m, -(-(m * m) // self.A), 1)  # ceil(m^2 / A)
            if lo <= hi:
                out.append((dk, lo, hi))
        return tuple(out)


@dataclass(frozen=True)
class BinomialBandRule:
    """Two-sided multiplicative band: next price in [d*S, u*S].

    Hosted on its own recombining lattice (see ``engine.band_bounds``) because
    arbitrary (u, d) factors do not embed in the exponential k-grid.  ``levels``
    geometrically spaced price levels fill the band; the two extremes are
    always present.
    """

    u: float
    d: float
    levels: int = 2

    kind = "BINOMIAL_BAND"

    def __post_init__(self):
        if not (0.0 < self.d < 1.0 < self.u):
            raise ValueError("need 0 < d < 1 < u")
        if self.levels < 2:
            raise ValueError("levels must be >= 2")

    def factors(self) -> tuple[float, ...]:
        if self.levels == 2:
            return (self.d, self.u)
        rho = (self.u / self.d) ** (1.0 / (self.levels - 1))
        return tuple(self.d * rho ** t for t in range(self.levels))


@dataclass(frozen=True)
class ModifiedRule(TransitionRule):
    """Base rule with a seeded set of vertices turned into arbitrage nodes.

    At a selected vertex with k >= 0 the admissible moves become
    ``-p <= dk <= 0`` with ``0 < dj <= p**2`` (negative arbitrage); for k < 0
    the mirrored band applies.  Unselected vertices keep the base bands.
    Selection is a fraction of the base-rule-reachable non-terminal vertices,
    drawn as a prefix of one seeded permutation, so selections are nested
    across fractions for a fixed seed.
    """

    base: TransitionRule
    fraction: float
    seed: int

    kind = "MODIFIED"

    def __post_init__(self):
        if not (0.0 <= self.fraction <= 1.0):
            raise ValueError("fraction must lie in [0, 1]")
        if self.base.kind not in ("MA", "BJN"):
            raise ValueError("arbitrage injection expects an MA-family base rule")
        object.__setattr__(self, "_cache", {})

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def max_dj(self) -> int:
        return max(self.base.max_dj, self.p ** 2)

    @property
    def uniform(self) -> bool:
        return False

    def _mod_bands(self, k: int) -> tuple[Band, ...]:
        hi = self.p ** 2
        if k >= 0:
            return tuple((dk, 1, hi) for dk in range(-self.p, 1))
        return tuple((dk, 1, hi) for dk in range(0, self.p + 1))

    def selection(self, spec: GridSpec) -> frozenset[Vertex]:
        cache = self._cache  # type: ignore[attr-defined]
        got = cache.get(("sel", spec))
        if got is None:
            reach = reachable_masks(spec, self.base)
            pool: list[Vertex] = []
            for j in range(spec.n2):
                row = np.flatnonzero(reach[j])
                pool.extend((int(i) - spec.n1, j) for i in row)
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(pool))
            n_sel = int(round(self.fraction * len(pool)))
            got = frozenset(pool[i] for i in order[:n_sel])
            cache[("sel", spec)] = got
        return got

    def _column_masks(self, spec: GridSpec) -> np.ndarray:
        cache = self._cache  # type: ignore[attr-defined]
        got = cache.get(("mask", spec))
        if got is None:
            got = np.zeros((spec.n2 + 1, spec.width), dtype=bool)
            for k, j in self.selection(spec):
                got[j, k + spec.n1] = True
            cache[("mask", spec)] = got
        return got

    def bands_at(self, spec: GridSpec, k: int, j: int) -> tuple[Band, ...]:
        if (k, j) in self.selection(spec):
            return self._mod_bands(k)
        return self.base.bands_at(spec, k, j)

    def band_groups(self, spec: GridSpec, j: int):
        sel = self._column_masks(spec)[j]
        if not sel.any():
            return [(None, self.base.bands())]
        ks = np.arange(-spec.n1, spec.n1 + 1)
        return [
            (~sel, self.base.bands()),
            (sel & (ks >= 0), self._mod_bands(0)),
            (sel & (ks < 0), self._mod_bands(-1)),
        ]


# --------------------------------------------------------------------------- #
# Per-vertex operations
# --------------------------------------------------------------------------- #

def reachable(spec: GridSpec, rule: TransitionRule, v: Vertex) -> list[Vertex]:
    """All in-grid vertices admissible from v, ascending (j, k)."""
    k, j = v
    if not spec.in_grid(k, j):
        raise ValueError(f"vertex {v} is not in the grid")
    out: list[Vertex] = []
    for dk, lo, hi in rule.bands_at(spec, k, j):
        for dj in range(lo, min(hi, spec.n2 - j) + 1):
            kk, jj = k + dk, j + dj
            if abs(kk) <= spec.column_half_width(jj):
                out.append((kk, jj))
    out.sort(key=lambda w: (w[1], w[0]))
    return out


def classify_node(spec: GridSpec, rule: TransitionRule, v: Vertex) -> NodeClass:
    """Local class of a non-terminal vertex, from the signs of its price moves."""
    k, j = v
    if j >= spec.n2:
        raise ValueError("terminal column vertices have no classification")
    has_up = has_dn = has_flat = False
    for kk, _ in reachable(spec, rule, v):
        if kk > k:
            has_up = True
        elif kk < k:
            has_dn = True
        else:
            has_flat = True
    return _class_from_flags(has_up, has_dn, has_flat)


def _class_from_flags(up: bool, dn: bool, flat: bool) -> NodeClass:
    if up and dn:
        return NodeClass.UP_DOWN
    if up and flat:
        return NodeClass.POSITIVE_ARBITRAGE
    if dn and flat:
        return NodeClass.NEGATIVE_ARBITRAGE
    if flat:
        return NodeClass.FLAT
    return NodeClass.NOT_ZERO_NEUTRAL


# --------------------------------------------------------------------------- #
# Vectorized column machinery (shared with the engine sweep)
# --------------------------------------------------------------------------- #

def shift_row(arr: np.ndarray, dk: int, fill) -> np.ndarray:
    """out[i] = arr[i + dk], padded with ``fill``."""
    out = np.full_like(arr, fill)
    w = arr.shape[0]
    if dk >= 0:
        if dk < w:
            out[: w - dk] = arr[dk:]
    else:
        if -dk < w:
            out[-dk:] = arr[: w + dk]
    return out


def width_mask(spec: GridSpec, j: int) -> np.ndarray:
    ks = np.arange(-spec.n1, spec.n1 + 1)
    return np.abs(ks) <= spec.column_half_width(j)


def reachable_masks(spec: GridSpec, rule: TransitionRule) -> np.ndarray:
    """Boolean (n2+1, width) array: vertices reachable from (0, 0)."""
    n2, w = spec.n2, spec.width
    reach = np.zeros((n2 + 1, w), dtype=bool)
    reach[0, spec.n1] = True
    wmasks = [width_mask(spec, j) for j in range(n2 + 1)]
    for j in range(n2):
        if not reach[j].any():
            continue
        for mask, bands in rule.band_groups(spec, j):
            src = reach[j] if mask is None else (reach[j] & mask)
            if not src.any():
                continue
            for dk, lo, hi in bands:
                for dj in range(lo, min(hi, n2 - j) + 1):
                    reach[j + dj] |= shift_row(src, -dk, False) & wmasks[j + dj]
    return reach


def _landing_masks(spec: GridSpec, rule: TransitionRule) -> np.ndarray:
    """Vertices from which some lam-column can be hit exactly (or that sit on one)."""
    n2, w = spec.n2, spec.width
    lam = set(spec.lam)
    land = np.zeros((n2 + 1, w), dtype=bool)
    wmasks = [width_mask(spec, j) for j in range(n2 + 1)]
    land[n2] = wmasks[n2]
    for j in range(n2 - 1, -1, -1):
        acc = np.zeros(w, dtype=bool)
        if j in lam:
            acc |= wmasks[j]
        else:
            for mask, bands in rule.band_groups(spec, j):
                grp = np.zeros(w, dtype=bool)
                for dk, lo, hi in bands:
                    for dj in range(lo, min(hi, n2 - j) + 1):
                        grp |= shift_row(land[j + dj], dk, False)
                grp &= wmasks[j]
                acc |= grp if mask is None else (grp & mask)
        land[j] = acc
    return land


def _successor_flags(spec: GridSpec, rule: TransitionRule, j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(has_up, has_dn, has_flat) boolean rows for column j < n2.

    A move along band (dk, lo, hi) exists at k iff the window still contains a
    dj with the target inside the cone: dj >= ceil(|k+dk| / p) - j.
    """
    w = spec.width
    ks = np.arange(-spec.n1, spec.n1 + 1)
    has_up = np.zeros(w, dtype=bool)
    has_dn = np.zeros(w, dtype=bool)
    has_flat = np.zeros(w, dtype=bool)
    for mask, bands in rule.band_groups(spec, j):
        up = np.zeros(w, dtype=bool)
        dn = np.zeros(w, dtype=bool)
        fl = np.zeros(w, dtype=bool)
        for dk, lo, hi in bands:
            hi_eff = min(hi, spec.n2 - j)
            if lo > hi_eff:
                continue
            kk = np.abs(ks + dk)
            need = np.maximum(lo, -(-kk // spec.p) - j)
            ok = (need <= hi_eff) & (kk <= spec.n1)
            if dk > 0:
                up |= ok
            elif dk < 0:
                dn |= ok
            else:
                fl |= ok
        if mask is None:
            has_up, has_dn, has_flat = has_up | up, has_dn | dn, has_flat | fl
        else:
            has_up |= up & mask
            has_dn |= dn & mask
            has_flat |= fl & mask
    return has_up, has_dn, has_flat


# --------------------------------------------------------------------------- #
# Validation
# --------------------------------------------------------------------------- #

@dataclass
class ValidationReport:
    """Structural audit of reachable non-terminal vertices."""

    spec: GridSpec
    rule_kind: str
    counts: dict[NodeClass, int]
    classes: dict[Vertex, NodeClass]
    arbitrage_vertices: tuple[Vertex, ...]
    not_zero_neutral: tuple[Vertex, ...]
    unlandable: tuple[Vertex, ...]

    @property
    def ok(self) -> bool:
        return not self.not_zero_neutral and not self.unlandable

    def raise_if_failed(self) -> None:
        if self.not_zero_neutral:
            raise ModelValidationError(
                f"{len(self.not_zero_neutral)} reachable vertices are not 0-neutral, "
                f"first {self.not_zero_neutral[0]}", self)
        if self.unlandable:
            raise ModelValidationError(
                f"{len(self.unlandable)} reachable vertices cannot hit a liquidation "
                f"column exactly, first {self.unlandable[0]}", self)

    def summary(self) -> str:
        lines = [f"model {self.rule_kind}: n1={self.spec.n1} n2={self.spec.n2} "
                 f"p={self.spec.p} lam={self.spec.lam}"]
        for cls in NodeClass:
            n = self.counts.get(cls, 0)
            if n:
                lines.append(f"  {cls.value}: {n}")
        lines.append(f"  q-unreachable: {len(self.unlandable)}")
        lines.append("  status: " + ("ok" if self.ok else "FAILED"))
        return "\n".join(lines)


def validate_model(spec: GridSpec, rule: TransitionRule) -> ValidationReport:
    """Classify every reachable non-terminal vertex and audit liquidation reach.

    Vertices of the grid that are not reachable from (0, 0) are excluded from
    the report.  The result is a plain report; call ``raise_if_failed`` to
    turn defects into exceptions.
    """
    reach = reachable_masks(spec, rule)
    land = _landing_masks(spec, rule)
    n1 = spec.n1
    counts: dict[NodeClass, int] = {}
    classes: dict[Vertex, NodeClass] = {}
    arb: list[Vertex] = []
    nzn: list[Vertex] = []
    unland: list[Vertex] = []
    for j in range(spec.n2):
        row = reach[j]
        if not row.any():
            continue
        up, dn, fl = _successor_flags(spec, rule, j)
        for i in np.flatnonzero(row):
            v = (int(i) - n1, j)
            cls = _class_from_flags(bool(up[i]), bool(dn[i]), bool(fl[i]))
            classes[v] = cls
            counts[cls] = counts.get(cls, 0) + 1
            if cls in (NodeClass.POSITIVE_ARBITRAGE, NodeClass.NEGATIVE_ARBITRAGE):
                arb.append(v)
            elif cls is NodeClass.NOT_ZERO_NEUTRAL:
                nzn.append(v)
            if not land[j, i]:
                unland.append(v)
    return ValidationReport(
        spec=spec,
        rule_kind=rule.kind,
        counts=counts,
        classes=classes,
        arbitrage_vertices=tuple(arb),
        not_zero_neutral=tuple(nzn),
        unlandable=tuple(unland),
    )
