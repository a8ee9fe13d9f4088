import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import delta_c_brentq, m_prime_quad, tc_brentq
from persistlab.critical import (
    BracketFailure,
    CriticalResult,
    NotBalanced,
    QuadratureSettings,
    abs_log_mean,
    delta_c_lower_bound,
    find_delta_c,
    find_tc,
    m_prime,
    m_prime_envelope,
    m_prime_large_delta_bound,
    tc_closed_form_balanced,
)
from persistlab.dynamics import argmin_persistent, mean_persistent, spectral
from persistlab.model import NonPositiveRate, Rates
from strategies import rates

balanced_rates = st.tuples(
    st.floats(min_value=-3, max_value=1), st.floats(min_value=-3, max_value=1)
).map(lambda e: Rates(10.0 ** e[0] + 10.0 ** e[1], 10.0 ** e[0], 10.0 ** e[1]))


def test_tc_reference(balanced):
    res = find_tc(balanced)
    assert isinstance(res, CriticalResult)
    assert res.value == pytest.approx(1.246450, abs=1e-6)
    assert res.value == pytest.approx(tc_closed_form_balanced(balanced), abs=1e-10)
    lo, hi = res.bracket
    assert lo <= res.value <= hi and hi - lo <= 2e-10
    assert res.residual < 1e-9


def test_tc_matches_brent_on_ode(balanced, figure_rates):
    for r in (balanced, figure_rates, Rates(1.0, 0.1, 0.5)):
        assert find_tc(r).value == pytest.approx(tc_brentq(r.lam, r.a, r.b), rel=1e-8)


def test_tc_figure_regime(figure_rates):
    assert find_tc(figure_rates).value == pytest.approx(8.6797335, abs=1e-6)


@given(balanced_rates)
def test_tc_balanced_closed_form(r):
    assert find_tc(r).value == pytest.approx(tc_closed_form_balanced(r), rel=1e-9)


def test_closed_form_rejects_unbalanced():
    with pytest.raises(NotBalanced):
        tc_closed_form_balanced(Rates(3.0, 1.0, 1.0))
    with pytest.raises(NotBalanced):
        tc_closed_form_balanced(Rates(2.0, 0.5, 1.0))


def test_closed_form_second_point():
    r = Rates(1.1, 1.0, 0.1)
    expected = math.log((math.sqrt(1.1) + math.sqrt(0.1)) / (math.sqrt(1.1) - math.sqrt(0.1))) / math.sqrt(0.11)
    assert tc_closed_form_balanced(r) == pytest.approx(expected, rel=1e-12)
    assert find_tc(r).value == pytest.approx(expected, abs=1e-9)


def test_tc_defining_equation(balanced):
    res = find_tc(balanced, tol=1e-10)
    assert abs(mean_persistent(spectral(balanced), res.value) - 1.0) <= 10 * 1e-10


@given(rates)
@settings(max_examples=50)
def test_tc_is_crossing_past_minimum(r):
    sd = spectral(r)
    tc = find_tc(r).value
    assert tc > argmin_persistent(sd)
    for s in np.geomspace(1e-3, 0.999, 20) * tc:
        assert mean_persistent(sd, s) < 1.0
    for s in np.linspace(1.001, 5.0, 20) * tc:
        if sd.nu1 * s < 300:
            assert mean_persistent(sd, s) > 1.0


def test_tc_requires_positive_a():
    with pytest.raises(NonPositiveRate):
        find_tc(Rates(2.0, 0.0, 1.0))


def test_tc_decreasing_in_lambda():
    tcs = [find_tc(Rates(lam, 1e-6, 1e-3)).value for lam in np.linspace(0.5, 10, 40)]
    assert all(t1 < t0 for t0, t1 in zip(tcs, tcs[1:]))


def test_quadrature_settings_validation():
    with pytest.raises(ValueError):
        QuadratureSettings(node_count=8)


@pytest.mark.parametrize("delta", [0.05, 0.5, 1.349, 5.0, 100.0])
def test_m_prime_matches_adaptive_quad(balanced, delta):
    assert m_prime(balanced, delta) == pytest.approx(m_prime_quad(2.0, 1.0, 1.0, delta), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("delta", [1e-4, 0.01, 0.7, 20.0, 1e3])
def test_m_prime_matches_quad_figure_rates(figure_rates, delta):
    r = figure_rates
    assert m_prime(r, delta) == pytest.approx(m_prime_quad(r.lam, r.a, r.b, delta), rel=1e-8, abs=1e-12)


def test_m_prime_envelope_grid(balanced):
    for d in np.geomspace(0.01, 1000, 50):
        lo, hi = m_prime_envelope(balanced, d)
        assert lo <= m_prime(balanced, d) <= hi


def test_m_prime_regimes(balanced):
    assert m_prime(balanced, 0.5) > 0
    m100 = m_prime(balanced, 100.0)
    assert m100 < 0
    assert m100 <= m_prime_large_delta_bound(balanced, 100.0)
    with pytest.raises(ValueError):
        m_prime_large_delta_bound(balanced, 1.0)


def test_m_prime_rejects_bad_delta(balanced):
    for d in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            m_prime(balanced, d)


def test_delta_c_reference(balanced):
    res = find_delta_c(balanced)
    lower = delta_c_lower_bound(balanced)
    assert lower == pytest.approx(0.7361499744, abs=1e-9)
    assert res.value >= lower
    assert res.value == pytest.approx(delta_c_brentq(2.0, 1.0, 1.0, 0.8, 3.0), abs=2e-6)
    assert res.anomalies == ()


def test_delta_c_sign_consistency_and_refinement(balanced):
    tol = 1e-6
    res = find_delta_c(balanced, tol=tol)
    assert m_prime(balanced, res.value - 10 * tol) > 0
    assert m_prime(balanced, res.value + 10 * tol) < 0
    fine = find_delta_c(balanced, tol=1e-8, q=QuadratureSettings(node_count=64, refinement_tolerance=1e-13))
    assert abs(fine.value - res.value) <= 2e-6
    assert m_prime(balanced, fine.value - 1e-7) > 0 > m_prime(balanced, fine.value + 1e-7)


def test_delta_c_lower_bound_figure_regime(figure_rates):
    v = delta_c_lower_bound(figure_rates)
    assert math.isfinite(v) and v > 0


def test_delta_c_figure_regime(figure_rates):
    r = figure_rates
    res = find_delta_c(r)
    assert res.value == pytest.approx(0.70736, abs=1e-5)
    assert m_prime(r, res.value * 0.99) > 0 > m_prime(r, res.value * 1.01)


def test_abs_log_mean_parts(balanced):
    total, (head, tail) = abs_log_mean(balanced, 1.0, return_parts=True)
    assert head > 0 and tail > 0
    assert total == pytest.approx(head + tail)
    # E|ln y| - E ln y = 2 E[(ln y)^-] = 2 head
    assert total - m_prime(balanced, 1.0) == pytest.approx(2 * head, rel=1e-9)


def test_abs_log_mean_tail_bound(balanced):
    total, (_, tail) = abs_log_mean(balanced, 1.0, return_parts=True)
    assert tail <= math.sqrt(2.0)
    coarse = abs_log_mean(balanced, 1.0, q=QuadratureSettings(node_count=16))
    assert total == pytest.approx(coarse, rel=1e-10)


def test_abs_log_mean_bounds_m_prime(balanced):
    for d in (0.3, 1.0, 10.0):
        assert abs_log_mean(balanced, d) >= abs(m_prime(balanced, d))
