import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from acqkd.errors import DegenerateConfiguration, InvalidParameter
from acqkd.security import (
    bb84_leak,
    gilbert_hamrick_leak,
    lutkenhaus_bound,
    lutkenhaus_leak,
    multiphoton_probability,
)

ETA_T = 10 ** -1.1
ber = st.floats(0, 0.5)
mu = st.floats(1e-4, 2.0)
eff = st.floats(1e-3, 1.0)


def poisson_tail(mu, k_min, terms=80):
    """P(n >= k_min) by direct summation of the Poisson series."""
    term, total = math.exp(-mu), 0.0
    for k in range(terms):
        if k >= k_min:
            total += term
        term *= mu / (k + 1)
    return total


class TestBB84:
    def test_analytic(self):
        est = bb84_leak(0.015, 0.3, n=1000)
        assert est.fraction == pytest.approx(0.33)
        assert est.bits == pytest.approx(330)
        assert est.inputs["v"] == 0

    def test_zero(self):
        assert bb84_leak(0.0, 0.0, n_samples=10**5).fraction == 0.0

    def test_finite_sample_against_resampling(self):
        b, m, n_s, n_p = 0.015, 0.3, 10**5, 10**7
        est = bb84_leak(b, m, n_samples=n_s, n_pulses=n_p)
        v = (est.fraction - 0.33) / 5
        assert v == pytest.approx(math.sqrt(4 * b * (1 - b) / n_s + m / n_p))
        # spread of the plug-in 2B + mu over simulated experiments
        g = np.random.default_rng(0)
        b_hat = g.binomial(n_s, b, 4000) / n_s
        mu_hat = g.poisson(m * n_p, 4000) / n_p
        assert np.std(2 * b_hat + mu_hat) == pytest.approx(v, rel=0.05)

    def test_invalid_ber(self):
        with pytest.raises(InvalidParameter):
            bb84_leak(0.6, 0.3)

    @given(ber, ber, st.floats(0, 2), st.floats(0, 2))
    def test_monotone(self, b1, b2, m1, m2):
        lo = bb84_leak(min(b1, b2), min(m1, m2)).fraction
        hi = bb84_leak(max(b1, b2), max(m1, m2)).fraction
        assert hi >= lo
        assert bb84_leak(b1, m1, n_samples=100).fraction >= bb84_leak(b1, m1).fraction


class TestLutkenhaus:
    def test_ten_km(self):
        r = lutkenhaus_bound(0.2, ETA_T, 1e6)
        assert r.mu_opt == pytest.approx(0.0159, abs=1e-4)
        assert r.secure_rate == pytest.approx(63.1, abs=0.5)

    def test_unit_transmission(self):
        assert lutkenhaus_bound(1.0, 1.0).gain_per_pulse == 0.25

    def test_three_db_quarter(self):
        a = lutkenhaus_bound(0.2, ETA_T).secure_rate
        b = lutkenhaus_bound(0.2, ETA_T / 2).secure_rate
        assert a / b == pytest.approx(4.0)

    @given(eff, eff)
    def test_symmetric(self, x, y):
        assert lutkenhaus_bound(x, y).gain_per_pulse == pytest.approx(lutkenhaus_bound(y, x).gain_per_pulse)

    @pytest.mark.parametrize("args", [(0, 0.1), (0.2, 0), (1.2, 0.1), (0.2, 0.1, 0)])
    def test_validation(self, args):
        with pytest.raises(InvalidParameter):
            lutkenhaus_bound(*args)


class TestMultiphoton:
    @given(st.floats(1e-3, 5))
    def test_matches_series(self, m):
        assert multiphoton_probability(m) == pytest.approx(poisson_tail(m, 2), rel=1e-9, abs=1e-15)

    def test_transmitted_leak_against_series(self):
        m, b = 0.1, 0.01
        p_det = poisson_tail(m * ETA_T * 0.2, 1)
        est = lutkenhaus_leak(m, 0.2, ETA_T, b, n=100)
        assert est.fraction == pytest.approx(poisson_tail(m, 2) / p_det + 2 * b, rel=1e-9)


class TestGilbertHamrick:
    def test_detected_photon_term_against_series(self):
        m = 0.1
        p_det = poisson_tail(m * ETA_T * 0.2, 1)
        term = gilbert_hamrick_leak(m, 0.2, ETA_T, 0.0).fraction
        assert term == pytest.approx(poisson_tail(m, 2) * 0.2 / p_det, rel=1e-9)
        assert term == pytest.approx(0.589, abs=0.002)

    def test_single_photon_limit(self):
        assert gilbert_hamrick_leak(1e-9, 0.2, ETA_T, 0.02).fraction == pytest.approx(0.04, abs=1e-6)

    def test_no_detection_is_degenerate(self):
        with pytest.raises(DegenerateConfiguration):
            gilbert_hamrick_leak(0.0, 0.2, ETA_T, 0.0)

    @given(mu, eff, eff, ber)
    def test_at_most_transmitted_leak(self, m, eb, et, b):
        try:
            gh = gilbert_hamrick_leak(m, eb, et, b).fraction
            tx = lutkenhaus_leak(m, eb, et, b).fraction
        except DegenerateConfiguration:
            return
        assert gh <= tx * (1 + 1e-12)
        assert gh >= 0
