import csv
import math

import pytest

from trajbounds.engine import compute_bounds
from trajbounds.grid import Payoff, build_grid, payoff_eval
from trajbounds.model import GridSpec, MARule, bjn_rule, spec_for_rule


def unit_spec(p, n1, n2, lam=None, s0=1.0, step=0.01):
    return GridSpec(s0=s0, delta=step, beta=step, p=p, q=p * p, n1=n1, n2=n2,
                    lam=tuple(lam) if lam else (n2,))


class TestBuildGrid:
    def test_small_exact_vertices(self):
        grid = build_grid(unit_spec(1, 2, 2))
        assert grid.n_vertices == 9
        assert list(grid.vertices()) == [(0, 0), (-1, 1), (0, 1), (1, 1),
                                         (-2, 2), (-1, 2), (0, 2), (1, 2), (2, 2)]

    def test_count_matches_column_sum(self):
        # Production-scale grid: p=3, n1=300, n2=200.
        spec = GridSpec(1.0, 0.0058, 0.0058, p=3, q=9, n1=300, n2=200, lam=(200,))
        grid = build_grid(spec)
        expected = sum(2 * min(300, 3 * j) + 1 for j in range(201))
        assert grid.n_vertices == expected

    def test_offset_round_trips(self):
        grid = build_grid(unit_spec(2, 7, 5))
        for o in range(grid.n_vertices):
            k, j = grid.vertex(o)
            assert grid.offset(k, j) == o
        for k, j in grid.vertices():
            assert grid.vertex(grid.offset(k, j)) == (k, j)

    def test_rejects_invalid_spec(self):
        with pytest.raises(ValueError):
            unit_spec(1, 11, 10)

    def test_prices_match_spec(self):
        spec = unit_spec(1, 5, 5, step=0.02)
        grid = build_grid(spec)
        for k in range(-5, 6):
            assert grid.price(k) == spec.price(k)
            assert grid.price(k) == 1.0 * math.exp(k * 0.02)


class TestPayoff:
    def test_call(self):
        assert Payoff.call(1.0).value_at(1.1) == pytest.approx(0.1, abs=1e-15)
        assert Payoff.call(1.0).value_at(0.9) == 0.0

    def test_put(self):
        assert Payoff.put(1.0).value_at(0.8) == pytest.approx(0.2, abs=1e-15)
        assert Payoff.put(1.0).value_at(1.2) == 0.0

    def test_butterfly_both_branches(self):
        z = Payoff.butterfly(1.0, 1.1)
        assert z.value_at(1.04) == pytest.approx(0.04, abs=1e-15)
        assert z.value_at(1.06) == pytest.approx(0.04, abs=1e-15)
        assert z.value_at(0.99) == 0.0
        assert z.value_at(1.12) == 0.0
        with pytest.raises(ValueError):
            Payoff.butterfly(1.1, 1.0)

    def test_table_exact_lookup(self):
        spec = unit_spec(1, 2, 2)
        table = Payoff.from_table({spec.price(k): float(k) for k in range(-2, 3)})
        assert payoff_eval(table, 2, spec) == 2.0
        assert payoff_eval(table, -1, spec) == -1.0
        with pytest.raises(KeyError):
            table.value_at(123.456)

    def test_payoff_eval_range_check(self):
        spec = unit_spec(1, 2, 2)
        with pytest.raises(ValueError):
            payoff_eval(Payoff.call(1.0), 3, spec)

    def test_negated(self):
        z = Payoff.call(1.0)
        assert z.negated().value_at(1.25) == -z.value_at(1.25)


class TestBoundsCsv:
    def test_round_trip(self, tmp_path):
        rule = MARule(2)
        spec = spec_for_rule(rule, 1.0, 0.05, 0.05, 4, 4)
        grid = build_grid(spec)
        bounds = compute_bounds(grid, rule, Payoff.call(1.0))
        path = tmp_path / "bounds.csv"
        bounds.to_csv(path)
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == grid.n_vertices
        for row in rows:
            k, j = int(row["k"]), int(row["j"])
            assert float(row["s_k"]) == grid.price(k)
            if row["upper"]:
                assert float(row["upper"]) == bounds.upper_at(k, j)
                assert float(row["lower"]) == bounds.lower_at(k, j)
        by_vertex = {(int(r["k"]), int(r["j"])): r for r in rows}
        assert by_vertex[(0, 4)]["provenance"] == "TERMINAL_PAYOFF"
        assert by_vertex[(0, 0)]["provenance"] == "CONTINUATION"
        # One-sided unreachable corner (only down moves remain): left uncomputed.
        assert by_vertex[(4, 2)]["upper"] == ""
        assert by_vertex[(4, 2)]["provenance"] == ""
