import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from acqkd.errors import DegenerateConfiguration, InvalidParameter
from acqkd.linkmodel import (
    ChannelParams,
    DetectorParams,
    PhaseEncoding,
    ber_budget,
    click_probabilities,
    preset,
    routing_prob,
)

phase = st.floats(-10, 10, allow_nan=False)
contrast = st.floats(1.001, 1e9)
frac = st.floats(1e-6, 1.0)


class TestRouting:
    def test_quadrature_is_even_split(self):
        for c in (2.0, 650.0, 1e12):
            p0, p1 = routing_prob(math.pi / 2, c)
            assert p0 == pytest.approx(0.5) and p1 == pytest.approx(0.5)

    def test_opposite_phase_misroutes_one_in_c_plus_one(self):
        p0, _ = routing_prob(math.pi, 650)
        assert p0 == pytest.approx(1 / 651)
        assert p0 == pytest.approx(1.536e-3, rel=1e-3)

    def test_ideal_interferometer(self):
        assert routing_prob(0.0, 1e15)[1] == pytest.approx(0.0, abs=1e-14)

    def test_contrast_must_exceed_one(self):
        with pytest.raises(InvalidParameter):
            routing_prob(0.0, 1.0)

    @given(phase, contrast)
    def test_probabilities_sum_to_one(self, dphi, c):
        p0, p1 = routing_prob(dphi, c)
        assert p0 + p1 == 1.0
        assert 0.0 <= p1 <= 1.0

    @given(phase, contrast)
    def test_complementary_under_pi_shift(self, dphi, c):
        assert routing_prob(dphi, c)[1] + routing_prob(dphi + math.pi, c)[1] == pytest.approx(1.0, abs=1e-12)


def test_phase_table_round_trip():
    # (basis, bit) choices that share Bob's basis give delta_phi of 0 or pi
    for basis in (0, 1):
        for bit in (0, 1):
            d = PhaseEncoding.from_choices(basis, bit, basis).delta_phi
            assert math.cos(d) == pytest.approx(1.0 if (bit == 1) == (basis == 0) else -1.0)
    for bit in (0, 1):
        d = PhaseEncoding.from_choices(0, bit, 1).delta_phi
        assert math.cos(d) == pytest.approx(0.0, abs=1e-12)


class TestClickProbabilities:
    def test_zero_mu_leaves_darks_only(self):
        ch = ChannelParams(mu=0.0)
        det = DetectorParams(dark_rate_d0=40, dark_rate_d1=70)
        assert click_probabilities(ch, det, 0.0) == pytest.approx((40e-6, 70e-6))

    def test_ten_km_against_direct_product(self):
        ch, det = preset("10km")
        eta = 0.3 * 10**-1.1 * 0.2
        eps = 1 / 651
        sig0 = 1 - math.exp(-eta * (1 - eps))
        sig1 = 1 - math.exp(-eta * eps)
        p0 = 1 - (1 - sig0) * (1 - 40e-6) * (1 - 15e-6)
        p1 = 1 - (1 - sig1) * (1 - 40e-6) * (1 - 25e-6)
        got = click_probabilities(ch, det, 0.0)
        assert got == pytest.approx((p0, p1), rel=1e-12)
        assert got[0] == pytest.approx(4.76e-3, rel=0.02)
        assert got[1] < 1e-4

    def test_total_rate_near_five_thousand(self):
        ch, det = preset("10km")
        assert 4.5e3 < ber_budget(ch, det).detection_rate < 5.2e3

    @given(st.floats(0, 2), st.floats(0, 2), frac, frac, frac, frac, phase)
    def test_monotone_in_mu_eta(self, mu_a, mu_b, et_a, et_b, eb_a, eb_b, dphi):
        lo = (min(mu_a, mu_b), min(et_a, et_b), min(eb_a, eb_b))
        hi = (max(mu_a, mu_b), max(et_a, et_b), max(eb_a, eb_b))
        a = click_probabilities(ChannelParams(mu=lo[0], eta_t=lo[1]), DetectorParams(eta_b=lo[2]), dphi)
        b = click_probabilities(ChannelParams(mu=hi[0], eta_t=hi[1]), DetectorParams(eta_b=hi[2]), dphi)
        assert b[0] >= a[0] - 1e-15 and b[1] >= a[1] - 1e-15


class TestBerBudget:
    def test_ten_km_components(self):
        b = ber_budget(*preset("10km"))
        assert b.ber_contrast == pytest.approx(0.0015, abs=0.0001)
        assert b.ber_dark == pytest.approx(0.0084, abs=0.0004)
        assert b.ber_backscatter == pytest.approx(0.0042, abs=0.0002)
        assert b.ber_total == pytest.approx(0.014, abs=0.0005)

    def test_twenty_km_components(self):
        b = ber_budget(*preset("20km"))
        assert b.ber_dark == pytest.approx(0.02, abs=0.001)
        assert b.ber_backscatter == pytest.approx(0.026, abs=0.001)
        assert 0.046 <= b.ber_total <= 0.048

    def test_noiseless_link(self):
        ch = ChannelParams(contrast=1e18, backscatter_rate_d0=0, backscatter_rate_d1=0)
        b = ber_budget(ch, DetectorParams(dark_rate_d0=0, dark_rate_d1=0))
        assert b.ber_total == pytest.approx(0.0, abs=1e-17)

    def test_backscatter_share_independent_of_mu(self):
        # dark counts off, so the detection rate is signal + backscatter, both ~ mu
        det = DetectorParams(dark_rate_d0=0, dark_rate_d1=0)
        a = ber_budget(ChannelParams(mu=0.01), det).ber_backscatter
        b = ber_budget(ChannelParams(mu=0.02), det).ber_backscatter
        assert a == pytest.approx(b, rel=1e-3)

    def test_degenerate(self):
        ch = ChannelParams(mu=0, backscatter_rate_d0=0, backscatter_rate_d1=0)
        with pytest.raises(DegenerateConfiguration):
            ber_budget(ch, DetectorParams(dark_rate_d0=0, dark_rate_d1=0))

    @given(st.floats(0.001, 2), frac, frac, contrast, st.floats(0, 1e3), st.floats(0, 1e3))
    def test_total_is_sum_of_nonnegative_parts(self, mu, eta_t, eta_b, c, dark, bs):
        ch = ChannelParams(mu=mu, eta_t=eta_t, contrast=c, backscatter_rate_d0=bs, backscatter_rate_d1=bs)
        b = ber_budget(ch, DetectorParams(eta_b=eta_b, dark_rate_d0=dark, dark_rate_d1=dark))
        parts = (b.ber_contrast, b.ber_dark, b.ber_backscatter)
        assert all(p >= 0 for p in parts)
        assert b.ber_total == pytest.approx(sum(parts))


@pytest.mark.parametrize("kw", [
    dict(pulse_rate=0), dict(eta_t=0), dict(eta_t=1.5), dict(mu=-0.1), dict(contrast=1.0),
    dict(backscatter_rate_d0=-1), dict(mu_ref=0),
])
def test_channel_validation(kw):
    with pytest.raises(InvalidParameter):
        ChannelParams(**kw)


@pytest.mark.parametrize("kw", [dict(eta_b=-0.1), dict(eta_b=1.1), dict(dark_rate_d1=-1)])
def test_detector_validation(kw):
    with pytest.raises(InvalidParameter):
        DetectorParams(**kw)


def test_unknown_preset():
    with pytest.raises(InvalidParameter):
        preset("30km")
