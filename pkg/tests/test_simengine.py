import io
import math

import numpy as np
import pytest

from acqkd import _kernels_py, kernels
from acqkd.errors import EmptySession, InvalidInput
from acqkd.linkmodel import ChannelParams, DetectorParams, ber_budget, click_probabilities, preset
from acqkd.simengine import (
    BOTH,
    D0,
    D1,
    NONE,
    decode_array,
    decode_click,
    probability_table,
    read_transcript_csv,
    run_session,
    tally,
)

NOISELESS = (
    ChannelParams(mu=2.0, eta_t=0.5, contrast=1e18, backscatter_rate_d0=0, backscatter_rate_d1=0),
    DetectorParams(eta_b=1.0, dark_rate_d0=0, dark_rate_d1=0),
)


def three_sigma(n, p):
    return 3 * math.sqrt(n * p * (1 - p))


def test_decode_table():
    assert decode_click(0, D0) == 1
    assert decode_click(1, D0) == 0
    assert decode_click(0, D1) == 0
    assert decode_click(1, D1) == 1
    bb = np.array([0, 1, 0, 1], dtype=np.uint8)
    oc = np.array([D0, D0, D1, D1], dtype=np.uint8)
    assert decode_array(bb, oc).tolist() == [1, 0, 0, 1]


@pytest.mark.parametrize("outcome", [None, NONE, BOTH])
def test_decode_rejects_non_single(outcome):
    with pytest.raises(InvalidInput):
        decode_click(0, outcome)


def test_empty_session():
    with pytest.raises(EmptySession):
        run_session(*preset("10km"), 0, seed=1)


def test_noiseless_matched_bases_decode_exactly():
    tr = run_session(*NOISELESS, 20_000, seed=5)
    single = (tr.outcome == D0) | (tr.outcome == D1)
    matched = single & (tr.alice_basis == tr.bob_basis)
    assert matched.sum() > 3000
    bits = decode_array(tr.bob_basis[matched], tr.outcome[matched])
    np.testing.assert_array_equal(bits, tr.alice_bit[matched])
    assert not np.any(tr.outcome[tr.alice_basis == tr.bob_basis] == BOTH)


def test_determinism_across_workers_and_backends(monkeypatch):
    ch, det = preset("10km", mu=1.0)
    ref = run_session(ch, det, 2_500_000, seed=77, workers=3)
    with monkeypatch.context() as m:
        m.setattr(kernels, "sample_pulses", _kernels_py.sample_pulses)
        serial = run_session(ch, det, 2_500_000, seed=77, workers=1)
    for name in ("alice_basis", "alice_bit", "bob_basis", "outcome"):
        np.testing.assert_array_equal(getattr(ref, name), getattr(serial, name))
    assert ref.counts == serial.counts


def test_seed_changes_transcript():
    a = run_session(*preset("10km"), 10_000, seed=1)
    b = run_session(*preset("10km"), 10_000, seed=2)
    assert not np.array_equal(a.alice_bit, b.alice_bit)


def test_transcript_read_only():
    tr = run_session(*preset("10km"), 100, seed=1)
    with pytest.raises(ValueError):
        tr.outcome[0] = 1


def test_tallies_match_recount():
    tr = run_session(*preset("10km", mu=3.0), 50_000, seed=9)
    assert tr.counts == tally(tr.alice_basis, tr.alice_bit, tr.bob_basis, tr.outcome)
    recs = list(tr.pulses())
    assert [r.index for r in recs] == list(range(50_000))
    clicks = sum(r.outcome is not None for r in recs)
    assert clicks == tr.counts["clicks"]
    assert tr.counts["double"] == sum(r.outcome == BOTH for r in recs)


class TestStatistics:
    n = 1_000_000

    @pytest.fixture(scope="class")
    @classmethod
    def session(cls):
        return run_session(*preset("10km"), cls.n, seed=2024)

    def test_click_count_matches_analytic(self, session):
        ch, det = preset("10km")
        # mean per-gate click probability, averaged over the 8 equiprobable settings
        expected = self.n * ber_budget(ch, det).detection_rate / ch.pulse_rate
        assert abs(session.counts["clicks"] - expected) < 3 * math.sqrt(expected)

    def test_matched_basis_fraction_is_half(self, session):
        m = int(np.count_nonzero(session.alice_basis == session.bob_basis))
        assert abs(m - self.n / 2) < three_sigma(self.n, 0.5)

    def test_per_detector_frequency(self, session):
        table = probability_table(*preset("10km"))
        for d, bit in ((0, D0), (1, D1)):
            p = table[session.alice_basis, session.alice_bit, session.bob_basis, d]
            expected = p.sum()
            observed = int(np.count_nonzero(session.outcome & bit))
            assert abs(observed - expected) < 3 * math.sqrt(np.sum(p * (1 - p)))

    def test_mu_zero_gives_dark_counts(self):
        ch, det = preset("10km", mu=0.0)
        tr = run_session(ch, det, self.n, seed=3)
        p = sum(click_probabilities(ch, det, 0.0))
        expected = self.n * p
        assert abs(tr.counts["clicks"] - expected) < 3 * math.sqrt(expected)


def test_csv_round_trip():
    tr = run_session(*preset("10km", mu=50.0), 2000, seed=11)
    text = tr.to_csv()
    assert text.splitlines()[0] == "index,alice_basis,alice_bit,bob_basis,outcome"
    assert set(line.rsplit(",", 1)[1] for line in text.splitlines()[1:]) <= {"-", "0", "1", "B"}
    ab, ak, bb, oc = read_transcript_csv(io.StringIO(text))
    for a, b in ((ab, tr.alice_basis), (ak, tr.alice_bit), (bb, tr.bob_basis), (oc, tr.outcome)):
        np.testing.assert_array_equal(a, b)


@pytest.mark.parametrize("text", [
    "idx,alice_basis,alice_bit,bob_basis,outcome\n",
    "index,alice_basis,alice_bit,bob_basis,outcome\n1,0,0,0,-\n",
    "index,alice_basis,alice_bit,bob_basis,outcome\n0,0,0,0,X\n",
    "index,alice_basis,alice_bit,bob_basis,outcome\n0,0,0\n",
])
def test_csv_rejects_malformed(text):
    with pytest.raises(InvalidInput):
        read_transcript_csv(io.StringIO(text))
