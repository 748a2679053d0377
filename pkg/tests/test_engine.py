import math

import numpy as np
import pytest

from trajbounds.engine import (
    band_bounds,
    compute_bounds,
    convex_hull_step,
    hull_fast,
    inject_arbitrage,
    price,
)
from trajbounds.grid import Payoff, build_grid
from trajbounds.model import (
    BinomialBandRule,
    MARule,
    MBRule,
    NotZeroNeutralError,
    bjn_rule,
    reachable,
    spec_for_rule,
    spec_from_total_variance,
)

V0 = 0.0067
CALL = Payoff.call(1.0)
PUT = Payoff.put(1.0)
BFLY = Payoff.butterfly(1.0, 1.1)


def unit_spec(rule, n1, n2, lam=None, s0=1.0, step=0.05):
    return spec_for_rule(rule, s0=s0, delta=step, beta=step, n1=n1, n2=n2, lam=lam)


class TestConvexHullStep:
    def test_single_chord(self):
        sol = convex_hull_step([(1.1, 0.1)], [(0.9, 0.0)], 1.0)
        assert sol.value == pytest.approx(0.05, abs=1e-15)
        assert sol.slope == pytest.approx(0.5, abs=1e-15)
        assert sol.plus.x == 1.1 and sol.minus.x == 0.9

    def test_horizontal_chord(self):
        sol = convex_hull_step([(1.1, 0.3)], [(0.9, 0.3)], 1.0)
        assert sol.value == 0.3
        assert sol.slope == 0.0

    def test_four_pair_enumeration(self):
        plus = [(1.1, 0.1), (1.2, 0.12)]
        minus = [(0.9, 0.0), (0.8, 0.0)]
        best = -math.inf
        for a in plus:
            for b in minus:
                u = (a[1] - b[1]) / (a[0] - b[0])
                best = max(best, a[1] - u * (a[0] - 1.0))
        sol = convex_hull_step(plus, minus, 1.0)
        assert sol.value == pytest.approx(best, abs=1e-15)
        assert sol.value == pytest.approx(0.1 - (0.1 / 0.3) * 0.1, abs=1e-15)
        assert sol.slope == pytest.approx(0.1 / 0.3, rel=1e-12)

    def test_positive_arbitrage_degenerates_to_flats(self):
        sol = convex_hull_step([(1.1, 0.0), (1.2, 0.0)], [(1.0, 0.4), (1.0, 0.1)], 1.0)
        assert sol.value == 0.4
        assert sol.slope == 0.0  # zero already dominates every up point

    def test_positive_arbitrage_slope_superhedges(self):
        # An up point above the flat maximum forces a positive support slope.
        sol = convex_hull_step([(1.1, 0.6)], [(1.0, 0.4)], 1.0)
        assert sol.value == 0.4
        assert sol.slope == pytest.approx((0.6 - 0.4) / 0.1, rel=1e-12)
        assert sol.value + sol.slope * 0.1 >= 0.6 - 1e-12

    def test_negative_arbitrage(self):
        sol = convex_hull_step([], [(1.0, 0.2), (0.9, 0.1)], 1.0)
        assert sol.value == 0.2
        assert sol.slope == 0.0
        assert sol.plus is None

    def test_flats_only(self):
        sol = convex_hull_step([], [(1.0, 0.3), (1.0, 0.7)], 1.0)
        assert sol.value == 0.7
        assert sol.slope == 0.0

    def test_one_sided_without_flats_raises(self):
        with pytest.raises(NotZeroNeutralError):
            convex_hull_step([(1.1, 0.1)], [], 1.0)
        with pytest.raises(NotZeroNeutralError):
            convex_hull_step([], [(0.9, 0.1)], 1.0)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            convex_hull_step([], [], 1.0)

    def test_side_validation(self):
        with pytest.raises(ValueError):
            convex_hull_step([(0.9, 0.1)], [], 1.0)
        with pytest.raises(ValueError):
            convex_hull_step([], [(1.2, 0.1)], 1.0)

    def test_witness_chord_identity(self):
        # value = y+ - u (x+ - s) = y- - u (x- - s) along the witness chord.
        rng = np.random.default_rng(17)
        for _ in range(200):
            s = 1.0
            plus = [(s + rng.uniform(0.01, 0.5), rng.normal()) for _ in range(4)]
            minus = [(s - rng.uniform(0.01, 0.5), rng.normal()) for _ in range(4)]
            sol = convex_hull_step(plus, minus, s)
            a, b = sol.plus, sol.minus
            assert sol.value == pytest.approx(a.y - sol.slope * (a.x - s), abs=1e-12)
            assert sol.value == pytest.approx(b.y - sol.slope * (b.x - s), abs=1e-12)

    def test_local_superhedge_property(self):
        rng = np.random.default_rng(23)
        for _ in range(300):
            s = float(rng.uniform(0.5, 2.0))
            plus = [(s + rng.uniform(0.001, 1.0), rng.normal()) for _ in range(5)]
            minus = [(s - rng.uniform(0.0, 1.0), rng.normal()) for _ in range(5)]
            sol = convex_hull_step(plus, minus, s)
            for x, y in plus + minus:
                assert sol.value + sol.slope * (x - s) >= y - 1e-10


class TestHullFast:
    def test_matches_enumeration_randomized(self):
        rng = np.random.default_rng(41)
        for _ in range(2000):
            s = 1.0
            n_plus = int(rng.integers(1, 7))
            n_minus = int(rng.integers(1, 7))
            plus = [(s + rng.uniform(0.01, 1.0), rng.normal()) for _ in range(n_plus)]
            minus = [(s - rng.uniform(0.0, 1.0), rng.normal()) for _ in range(n_minus)]
            a = convex_hull_step(plus, minus, s)
            b = hull_fast(plus, minus, s)
            scale = max(1.0, abs(a.value))
            assert abs(a.value - b.value) <= 1e-12 * scale
            assert abs(a.slope - b.slope) <= 1e-9 * max(1.0, abs(a.slope))

    def test_collinear_points(self):
        plus = [(1.1, 0.1), (1.2, 0.2)]
        minus = [(0.9, -0.1), (0.8, -0.2)]
        a = convex_hull_step(plus, minus, 1.0)
        b = hull_fast(plus, minus, 1.0)
        assert a.value == pytest.approx(0.0, abs=1e-15)
        assert b.value == pytest.approx(a.value, abs=1e-15)
        assert b.slope == pytest.approx(a.slope, abs=1e-12)

    def test_single_pair_exact_chord(self):
        a = convex_hull_step([(1.07, 0.21)], [(0.96, -0.05)], 1.0)
        b = hull_fast([(1.07, 0.21)], [(0.96, -0.05)], 1.0)
        assert b.value == a.value
        assert b.slope == a.slope

    def test_degenerate_paths_identical(self):
        cases = [
            ([(1.1, 0.0)], [(1.0, 0.4), (1.0, 0.1)]),
            ([], [(1.0, 0.2), (0.9, 0.5)]),
            ([], [(1.0, 0.3)]),
        ]
        for plus, minus in cases:
            a = convex_hull_step(plus, minus, 1.0)
            b = hull_fast(plus, minus, 1.0)
            assert (a.value, a.slope) == (b.value, b.slope)


class TestComputeBounds:
    def test_zero_payoff_prices_exactly_zero(self):
        zero = Payoff.put(0.0)
        for rule in (bjn_rule(), MARule(2), MARule(3), MBRule(p_max=3, A=2)):
            spec = spec_from_total_variance(rule, 1.0, V0, 30)
            lo, hi = price(spec, rule, zero)
            assert lo == 0.0 and hi == 0.0, rule.kind

    def test_one_step_band_chord(self):
        lo, hi = band_bounds(BinomialBandRule(u=1.1, d=0.9), 1, 1.0, CALL)
        assert hi == pytest.approx(0.05, abs=1e-15)
        assert lo == pytest.approx(0.05, abs=1e-15)

    def test_zero_strike_call_replicates_forward(self):
        rule = MARule(2)
        spec = spec_from_total_variance(rule, 1.0, V0, 40)
        lo, hi = price(spec, rule, Payoff.call(0.0))
        assert lo == pytest.approx(1.0, rel=1e-12)
        assert hi == pytest.approx(1.0, rel=1e-12)

    def test_duality_same_code_path(self):
        rule = MARule(2)
        spec = spec_from_total_variance(rule, 1.0, V0, 25)
        grid = build_grid(spec)
        b_call = compute_bounds(grid, rule, CALL)
        b_neg = compute_bounds(grid, rule, CALL.negated())
        w = np.isfinite(b_call.upper)
        assert np.array_equal(b_call.lower[w], -b_neg.upper[w])
        assert np.array_equal(b_call.upper[w], -b_neg.lower[w])

    def test_nonnegative_payoff_gives_nonnegative_upper(self):
        rule = MBRule(p_max=2, A=2)
        spec = spec_from_total_variance(rule, 1.0, V0, 20, lam=(10, 20))
        bounds = compute_bounds(build_grid(spec), rule, BFLY)
        vals = bounds.upper[np.isfinite(bounds.upper)]
        assert (vals >= 0.0).all()

    def test_interval_order(self):
        for rule in (MARule(2), MBRule(p_max=3, A=2)):
            spec = spec_from_total_variance(rule, 1.0, V0, 30)
            bounds = compute_bounds(build_grid(spec), rule, BFLY)
            w = np.isfinite(bounds.upper)
            assert (bounds.lower[w] <= bounds.upper[w] + 1e-12).all()

    def test_butterfly_bounds_inside_payoff_range(self):
        # The payoff peaks at (k2 - k1) / 2, which caps both bounds.
        for rule in (bjn_rule(), MARule(3)):
            spec = spec_from_total_variance(rule, 1.0, V0, 50)
            lo, hi = price(spec, rule, BFLY)
            assert 0.0 <= lo <= hi <= 0.05 + 1e-12

    def test_terminal_column_equals_payoff(self):
        rule = MARule(2)
        spec = spec_from_total_variance(rule, 1.0, V0, 12)
        grid = build_grid(spec)
        bounds = compute_bounds(grid, rule, CALL)
        for k in grid.column_ks(12):
            z = CALL.value_at(grid.price(k))
            assert bounds.upper_at(k, 12) == z
            assert bounds.lower_at(k, 12) == z
            assert bounds.provenance_at(k, 12) == "TERMINAL_PAYOFF"

    def test_liquidation_column_dominance(self):
        rule = MARule(1)
        spec = unit_spec(rule, 40, 40, lam=(20, 40), step=math.sqrt(V0 / 40))
        grid = build_grid(spec)
        for z in (CALL, BFLY):
            bounds = compute_bounds(grid, rule, z)
            for k in range(-20, 21):
                if not np.isfinite(bounds.upper[20, k + 40]):
                    continue
                zv = z.value_at(grid.price(k))
                assert bounds.upper_at(k, 20) >= zv - 1e-12
                assert bounds.lower_at(k, 20) <= zv + 1e-12

    def test_local_superhedge_inequality(self):
        rule = MARule(2)
        spec = spec_from_total_variance(rule, 1.0, V0, 25)
        grid = build_grid(spec)
        bounds = compute_bounds(grid, rule, CALL)
        checked = 0
        for j in range(25):
            for k in grid.column_ks(j):
                if bounds.provenance_at(k, j) != "CONTINUATION":
                    continue
                up, sl = bounds.upper_at(k, j), bounds.slope_up_at(k, j)
                lo, sd = bounds.lower_at(k, j), bounds.slope_dn_at(k, j)
                s = grid.price(k)
                for kk, jj in reachable(spec, rule, (k, j)):
                    ds = grid.price(kk) - s
                    assert up + sl * ds >= bounds.upper_at(kk, jj) - 1e-9
                    assert lo - sd * ds <= bounds.lower_at(kk, jj) + 1e-9
                    checked += 1
        assert checked > 1000

    def test_banded_equals_generic(self):
        cases = [
            (bjn_rule(), dict(n1=6, n2=6)),
            (MARule(2), dict(n1=6, n2=6)),
            (MARule(2, allow_flat=True), dict(n1=4, n2=6)),
            (MARule(3, allow_flat=True), dict(n1=5, n2=8)),
            (MBRule(p_max=2, A=2), dict(n1=8, n2=8, lam=(4, 8))),
            (inject_arbitrage(bjn_rule(), 0.4, seed=12), dict(n1=8, n2=8)),
            (inject_arbitrage(MARule(3), 0.3, seed=5), dict(n1=9, n2=9, lam=(5, 9))),
        ]
        for rule, kw in cases:
            spec = unit_spec(rule, **kw)
            grid = build_grid(spec)
            for z in (CALL, PUT, BFLY):
                a = compute_bounds(grid, rule, z, method="banded")
                b = compute_bounds(grid, rule, z, method="generic")
                for arr_a, arr_b in ((a.upper, b.upper), (a.lower, b.lower)):
                    both = np.isfinite(arr_a) & np.isfinite(arr_b)
                    assert np.array_equal(np.isfinite(arr_a), np.isfinite(arr_b))
                    assert np.allclose(arr_a[both], arr_b[both], rtol=1e-12, atol=1e-13)
                assert np.array_equal(a.prov, b.prov), (rule.kind, z.kind)

    def test_unit_jump_bounds_coincide_bitwise(self):
        rule = bjn_rule()
        for n2 in (10, 50):
            spec = spec_from_total_variance(rule, 1.0, V0, n2)
            lo, hi = price(spec, rule, CALL)
            assert lo == hi

    def test_not_zero_neutral_propagates_vertex(self):
        from trajbounds.model import ModelValidationError
        rule = MARule(3)
        spec = unit_spec(rule, 5, 10)
        with pytest.raises(ModelValidationError):
            price(spec, rule, CALL)  # validation front-runs the sweep
        grid = build_grid(spec)
        with pytest.raises(NotZeroNeutralError) as e:
            compute_bounds(grid, rule, CALL)
        assert e.value.vertex is not None

    def test_convex_upper_passthrough_is_bitwise(self):
        # Continuation dominates intrinsic for convex payoffs, so intermediate
        # liquidation columns never bind the upper bound.
        rule = MBRule(p_max=3, A=2)
        d0 = math.sqrt(V0 / 40)
        single = spec_for_rule(rule, 1.0, d0, d0, 40, 40, lam=(40,))
        cum = spec_for_rule(rule, 1.0, d0, d0, 40, 40, lam=(10, 20, 30, 40))
        for z in (CALL, PUT):
            _, hs = price(single, rule, z)
            _, hc = price(cum, rule, z)
            assert hs == hc


class TestInjectArbitrage:
    def test_fraction_zero_identity_prices(self):
        base = bjn_rule()
        mod = inject_arbitrage(base, 0.0, seed=1)
        spec = spec_from_total_variance(base, 1.0, V0, 20)
        assert price(spec, mod, CALL) == price(spec, base, CALL)

    def test_fraction_bounds(self):
        with pytest.raises(ValueError):
            inject_arbitrage(bjn_rule(), -0.1, 1)
        with pytest.raises(ValueError):
            inject_arbitrage(bjn_rule(), 1.01, 1)

    def test_full_injection_classifies_arbitrage(self):
        from trajbounds.model import NodeClass, classify_node
        mod = inject_arbitrage(bjn_rule(), 1.0, seed=2)
        spec = unit_spec(mod, 6, 6)
        sel = mod.selection(spec)
        assert sel
        for k, j in sel:
            got = classify_node(spec, mod, (k, j))
            want = NodeClass.NEGATIVE_ARBITRAGE if k >= 0 else NodeClass.POSITIVE_ARBITRAGE
            assert got is want


class TestBandLattice:
    def test_more_levels_keep_convex_value(self):
        # Interior band levels lie under the chord of a convex payoff.
        two = band_bounds(BinomialBandRule(1.1, 0.9, levels=2), 5, 1.0, CALL)
        five = band_bounds(BinomialBandRule(1.1, 0.9, levels=5), 5, 1.0, CALL)
        assert five[1] == pytest.approx(two[1], rel=1e-12)

    def test_rejects_bad_factors(self):
        with pytest.raises(ValueError):
            BinomialBandRule(0.9, 1.1)
        with pytest.raises(ValueError):
            band_bounds(BinomialBandRule(1.1, 0.9), 0, 1.0, CALL)
