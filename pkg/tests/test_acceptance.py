"""The ten acceptance criteria, each at its stated size and tolerance.

Each test reports one PASS/FAIL line through the ``criterion`` fixture; the
lines are repeated in the terminal summary.  Runtime bounds are part of the
pass condition.  Run alone with ``pytest tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from persistlab.cli import main
from persistlab.critical import (
    DELTA_C_TOL,
    QuadratureSettings,
    delta_c_lower_bound,
    find_delta_c,
    find_tc,
    m_prime,
    m_prime_envelope,
    m_prime_large_delta_bound,
    tc_closed_form_balanced,
)
from persistlab.dynamics import mean_normal, mean_persistent, mean_persistent_deriv, spectral
from persistlab.graphical import build_splitting_tree, color_and_prune, coupling_campaign
from persistlab.model import DeterministicPeriod, Rates, Seed, replicate_rng
from persistlab.simulate import estimate_mean_offspring, estimate_survival, simulate_counts

R = Rates(2.0, 1.0, 1.0)
pytestmark = pytest.mark.acceptance


def _random_rates(rng, n):
    e = rng.uniform(-3.0, 1.0, size=(n, 3))
    return [Rates(*(10.0**e[i])) for i in range(n)]


def _rel(x, ref, scale=None):
    return abs(x - ref) / (abs(ref) if scale is None else scale)


def test_criterion_01_analytic_identities(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_id = worst_ode = 0.0
    for r in _random_rates(rng, 100):
        sd = spectral(r)
        s = sd.sqrt_disc
        scale = abs(sd.nu1) + abs(sd.nu2)  # nu1 + nu2 can cancel to ~0
        worst_id = max(
            worst_id,
            _rel(sd.nu1 * sd.nu2, -r.lam * r.b),
            _rel(sd.nu1 + sd.nu2, r.lam - r.a - r.b, scale),
            _rel(mean_persistent(sd, 0.0), 1.0),
            abs(mean_normal(sd, 0.0)),
            _rel(mean_persistent_deriv(sd, 0.0, 1), -r.b),
            # x'(t) = (b / sqrt(disc)) (nu1 e^{nu1 t} - nu2 e^{nu2 t})
            _rel(r.b / s * (sd.nu1 - sd.nu2), r.b),
        )
        h = 1e-4 / s
        for t in rng.uniform(2 * h, 10.0 / sd.nu1, 5):
            xs = [mean_normal(sd, t + k * h) for k in (-2, -1, 1, 2)]
            ys = [mean_persistent(sd, t + k * h) for k in (-2, -1, 1, 2)]
            xp = (xs[0] - 8 * xs[1] + 8 * xs[2] - xs[3]) / (12 * h)
            yp = (ys[0] - 8 * ys[1] + 8 * ys[2] - ys[3]) / (12 * h)
            x, y = mean_normal(sd, t), mean_persistent(sd, t)
            worst_ode = max(
                worst_ode,
                abs(xp - ((r.lam - r.a) * x + r.b * y)) / (abs(r.lam - r.a) * x + r.b * y),
                abs(yp - (r.a * x - r.b * y)) / (r.a * x + r.b * y),
            )
    dt = time.perf_counter() - t0
    ok = worst_id <= 1e-10 and worst_ode <= 1e-6 and dt < 1.0
    criterion("analytic identity suite", ok,
              f"max identity rel err {worst_id:.2e} (<=1e-10), max ODE residual {worst_ode:.2e} (<=1e-6), {dt:.2f}s (<1s)")


def test_criterion_02_balanced_tc(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for a, b in 10.0 ** rng.uniform(-2.0, 1.0, size=(100, 2)):
        r = Rates(a + b, a, b)
        worst = max(worst, abs(find_tc(r).value - tc_closed_form_balanced(r)))
    ref = find_tc(R).value
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and abs(ref - 1.246450) <= 1e-6 and dt < 1.0
    criterion("balanced closed-form T_c", ok,
              f"max |find_tc - closed form| {worst:.2e} (<=1e-9), T_c(2,1,1)={ref:.10f} (1.246450+-1e-6), {dt:.2f}s (<1s)")


def test_criterion_03_sign_structure(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    bad = 0
    for r in _random_rates(rng, 20):
        sd = spectral(r)
        tc = find_tc(r).value
        below = mean_persistent(sd, np.geomspace(tc * 1e-4, tc, 52)[1:-1])
        above_t = np.geomspace(tc, 5 * tc, 52)[1:-1]
        above_t = above_t[sd.nu1 * above_t < 300]  # beyond, y saturates (and is > 1 anyway)
        above = mean_persistent(sd, above_t)
        bad += int(np.sum(below >= 1.0)) + int(np.sum(above <= 1.0))
    dt = time.perf_counter() - t0
    criterion("sign structure of y around T_c", bad == 0 and dt < 1.0,
              f"{bad} sign violations over 20 triples x 100 points, {dt:.2f}s (<1s)")


def test_criterion_04_mean_matching(criterion):
    t0 = time.perf_counter()
    sd = spectral(R)
    tc = find_tc(R).value
    parts, ok = [], True
    for i, T in enumerate((0.5, 1.0, tc)):
        mean, se = estimate_mean_offspring(R, T, 100_000, Seed(4000 + i))
        z = (mean - mean_persistent(sd, T)) / se
        ok &= abs(z) < 4
        if T == tc:
            ok &= abs(mean - 1.0) < 4 * se
        parts.append(f"T={T:.4f}: {mean:.4f}+-{se:.4f} vs y={mean_persistent(sd, T):.4f} (z={z:+.2f})")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    criterion("Monte Carlo mean-matching", bool(ok), "; ".join(parts) + f"; {dt:.1f}s (<120s)")


def test_criterion_05_threshold_behavior(criterion, pilot):
    t0 = time.perf_counter()
    tc = find_tc(R).value
    sub = estimate_survival(R, DeterministicPeriod(0.7 * tc), 10_000, 200, Seed(5001))
    sup = estimate_survival(R, DeterministicPeriod(1.5 * tc), 10_000, 50, Seed(5002))
    threshold = pilot["cases"]["supercritical_1.5tc_50"]["alive_lower_threshold"]
    dt = time.perf_counter() - t0
    extinct = 1.0 - sub.p_hat
    ok = extinct >= 0.999 and sup.p_hat >= threshold and sup.p_hat > 0 and dt < 300
    criterion("threshold behavior (deterministic kills)", ok,
              f"0.7T_c extinct fraction {extinct:.4f} (>=0.999); 1.5T_c alive {sup.p_hat:.4f} "
              f"(>= pilot {threshold:.4f}; capped {sup.capped}); {dt:.1f}s (<300s)")


def test_criterion_06_m_prime_envelopes(criterion):
    t0 = time.perf_counter()
    outside = 0
    for d in np.geomspace(0.01, 1000.0, 50):
        lo, hi = m_prime_envelope(R, d)
        outside += not (lo <= m_prime(R, d) <= hi)
    m05, m100 = m_prime(R, 0.5), m_prime(R, 100.0)
    bound = m_prime_large_delta_bound(R, 100.0)
    dt = time.perf_counter() - t0
    ok = outside == 0 and m05 > 0 and m100 < 0 and m100 <= bound and dt < 10
    criterion("m' envelopes and regimes", ok,
              f"{outside} grid points outside envelope; m'(0.5)={m05:.5f}; m'(100)={m100:.6f} <= bound {bound:.6f}; {dt:.2f}s (<10s)")


def test_criterion_07_delta_c_bracketing(criterion):
    t0 = time.perf_counter()
    tol = DELTA_C_TOL
    res = find_delta_c(R, tol=tol)
    lower = delta_c_lower_bound(R)
    left, right = m_prime(R, res.value - 10 * tol), m_prime(R, res.value + 10 * tol)
    fine = find_delta_c(R, tol=1e-8, q=QuadratureSettings(node_count=64, refinement_tolerance=1e-13))
    shift = abs(fine.value - res.value)
    dt = time.perf_counter() - t0
    ok = res.value >= lower and left > 0 > right and shift <= 2e-6 and dt < 30
    criterion("delta_c bracketing", ok,
              f"delta_c={res.value:.7f} >= {lower:.5f}; m'(-10tol)={left:+.2e}, m'(+10tol)={right:+.2e}; "
              f"refined shift {shift:.1e} (<=2e-6); {dt:.2f}s (<30s)")


def test_criterion_08_coupling_monotonicity(criterion):
    t0 = time.perf_counter()
    outs = coupling_campaign(R, 0.3, 3.0, 20.0, 10_000, Seed(8008))
    n = len(outs)
    violations = sum(not o.containment_ok for o in outs)
    p_low = sum(o.alive_low for o in outs) / n
    p_high = sum(o.alive_high for o in outs) / n
    trunc = sum(o.truncated for o in outs)
    dt = time.perf_counter() - t0
    ok = violations == 0 and p_low >= p_high and dt < 300
    criterion("coupling monotonicity", ok,
              f"{violations} containment violations in {n}; P(alive at 0.3)={p_low:.4f} >= P(alive at 3)={p_high:.4f}; "
              f"{trunc} low trees truncated at node budget; {dt:.1f}s (<300s)")


def test_criterion_09_cross_simulator(criterion):
    t0 = time.perf_counter()
    reps = 100_000
    times = (0.5, 1.0)
    counts = np.empty((reps, 2, 2))
    for i in range(reps):
        rng = replicate_rng(9009, i)
        ct = color_and_prune(build_splitting_tree(R.lam, 1.0, rng), R.a, R.b, "persistent", rng)
        for j, t in enumerate(times):
            counts[i, j] = ct.counts(t)
    sd = spectral(R)
    parts, ok = [], True
    for j, t in enumerate(times):
        ev = simulate_counts(R, t, reps, Seed(9100 + j)).astype(float)
        for col, name, exact in ((1, "red/y", mean_persistent(sd, t)), (0, "white/x", mean_normal(sd, t))):
            g = counts[:, j, col]
            e = ev[:, col]
            se_g = g.std(ddof=1) / math.sqrt(reps)
            se_e = e.std(ddof=1) / math.sqrt(reps)
            z_exact = (g.mean() - exact) / se_g
            z_cross = (g.mean() - e.mean()) / math.hypot(se_g, se_e)
            ok &= abs(z_exact) < 4 and abs(z_cross) < 4
            parts.append(f"t={t} {name}: graph {g.mean():.4f} exact {exact:.4f} events {e.mean():.4f} "
                         f"(z={z_exact:+.2f}, {z_cross:+.2f})")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    criterion("cross-simulator equivalence", bool(ok), "; ".join(parts) + f"; {dt:.1f}s (<300s)")


def test_criterion_10_figure_reproduction(criterion, tmp_path, capsys):
    t0 = time.perf_counter()
    grid_csv, lam_csv = tmp_path / "grid.csv", tmp_path / "lam.csv"
    code_grid = main(["tc-grid", "--lambda", "2", "--a-min", "1e-6", "--a-max", "1e-3", "--b-min", "1e-6",
                      "--b-max", "1e-3", "--points", "20", "--out", str(grid_csv)])
    code_lam = main(["tc-lambda", "--a", "1e-6", "--b", "1e-3", "--lambda-min", "0.5", "--lambda-max", "10",
                     "--out", str(lam_csv)])
    dt = time.perf_counter() - t0
    capsys.readouterr()
    grid = [ln.split(",") for ln in grid_csv.read_text().splitlines() if ln and not ln.startswith("#")][1:]
    tcs = [float(r[3]) for r in grid]
    summary = [ln for ln in grid_csv.read_text().splitlines() if ln.startswith("# summary:")]
    lam = [ln.split(",") for ln in lam_csv.read_text().splitlines() if ln and not ln.startswith("#")][1:]
    tcl = [float(r[1]) for r in lam]
    decreasing = all(b < a for a, b in zip(tcl, tcl[1:]))
    ratio = float(summary[0].split("ratio=")[1]) if summary else math.nan
    ok = (code_grid == 0 and code_lam == 0 and len(tcs) == 400 and all(math.isfinite(t) for t in tcs)
          and bool(summary) and decreasing and dt < 10)
    criterion("figure reproduction", ok,
              f"tc-grid {len(tcs)} finite cells, max/min ratio {ratio:.4f}; tc-lambda {len(tcl)} rows "
              f"{'strictly decreasing' if decreasing else 'NOT decreasing'} ({tcl[0]:.3f} -> {tcl[-1]:.3f}); {dt:.2f}s (<10s)")
