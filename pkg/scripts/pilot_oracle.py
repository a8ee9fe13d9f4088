"""Compute the Monte Carlo test thresholds from the exact offspring generating function.

Writes tests/pilot_thresholds.json.  The survival probabilities come from
iterating the offspring pgf (backward Kolmogorov ODEs, see tests/oracles.py),
never from the simulator under test.

    python scripts/pilot_oracle.py
"""

import json
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from oracles import gw_alive_probability, gw_extinction_probability, tc_brentq  # noqa: E402

LAM, A, B = 2.0, 1.0, 1.0


def lower_threshold(p, n, z=4.0):
    return p - z * math.sqrt(p * (1 - p) / n)


def main():
    tc = tc_brentq(LAM, A, B)
    out = {"rates": [LAM, A, B], "tc": tc, "cases": {}}
    for name, mult, epochs, reps in [
        ("supercritical_1.5tc_50", 1.5, 50, 10_000),
        ("subcritical_0.7tc_200", 0.7, 200, 10_000),
        ("subcritical_0.5tc_200", 0.5, 200, 10_000),
        ("subcritical_0.5tc_100", 0.5, 100, 1_000),
    ]:
        p = gw_alive_probability(LAM, A, B, mult * tc, epochs)
        out["cases"][name] = {
            "period_over_tc": mult,
            "epochs": epochs,
            "reps": reps,
            "alive_probability": p,
            "alive_lower_threshold": max(0.0, lower_threshold(p, reps)),
        }
    out["survival_forever_1.5tc"] = 1.0 - gw_extinction_probability(LAM, A, B, 1.5 * tc)
    grid = {}
    for mult in (0.8, 1.0, 1.2, 1.5, 2.0):
        grid[str(mult)] = gw_alive_probability(LAM, A, B, mult * tc, 40)
    out["alive_probability_40_epochs"] = grid
    path = ROOT / "tests" / "pilot_thresholds.json"
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
