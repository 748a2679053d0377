"""Inject arbitrage nodes into the unit-jump model and rescan the bounds.

A selected vertex keeps its variation clock running but loses one price
direction (flat moves become admissible instead), which is an arbitrage
opportunity at that node.  Pricing stays coherent: the bounds remain inside
the static envelope and the lower bound drifts toward it as more nodes are
modified.
"""

from pathlib import Path

from trajbounds import charts
from trajbounds.cli import ExperimentConfig, cmd_arbitrage_scan, write_csv

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

cfg = ExperimentConfig({
    "model": "bjn",
    "p": 1,
    "N2": 100,
    "v0": 0.0067,
    "K": 1.0,
    "payoff": "call",
    "seed": 20240901,
    "fraction_list": (0.0, 0.1, 0.3),
    "s0_list": tuple(round(0.8 + 0.05 * i, 2) for i in range(9)),
})

header, rows, chart = cmd_arbitrage_scan(cfg)
write_csv(OUT / "arbitrage_scan.csv", header, rows)
charts.emit_svg(header, rows, chart, OUT / "arbitrage_scan.svg")
print(f"wrote {OUT / 'arbitrage_scan.csv'} and arbitrage_scan.svg")
print()
print("lower bound at s0 = 1.0 by injected fraction:")
for frac, s0, lo, hi, mlb in rows:
    if s0 == 1.0:
        print(f"  fraction={frac}: lower={lo:.6f} upper={hi:.6f} (envelope lb={mlb})")
