import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from acqkd import rng

U64 = st.integers(min_value=0, max_value=2**64 - 1)

# First outputs of the reference SplitMix64 generator seeded with 0.
SPLITMIX_SEED0 = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_draw_matches_reference_splitmix_stream():
    assert [rng.draw(0, i) for i in range(3)] == SPLITMIX_SEED0


@given(U64, st.integers(min_value=0, max_value=2**40))
def test_array_and_scalar_agree(key, counter):
    arr = rng.draw_array(key, np.array([counter, counter + 1], dtype=np.uint64))
    assert [int(x) for x in arr] == [rng.draw(key, counter), rng.draw(key, counter + 1)]


@given(U64)
def test_unit_interval(h):
    u = rng.to_unit(h)
    assert 0.0 <= u < 1.0
    assert rng.unit_array(np.array([h], dtype=np.uint64))[0] == u


def test_derive_separates_streams():
    keys = {rng.derive(7, label) for label in range(1000)}
    assert len(keys) == 1000


def test_uniformity_of_top_bit():
    h = rng.draw_array(123, np.arange(200_000, dtype=np.uint64))
    ones = int(np.count_nonzero(h >> np.uint64(63)))
    assert abs(ones - 100_000) < 3 * np.sqrt(200_000 * 0.25)


@given(U64, st.integers(min_value=0, max_value=300))
def test_hash_permutation_is_a_permutation(key, n):
    p = rng.hash_permutation(key, n)
    assert sorted(p.tolist()) == list(range(n))
