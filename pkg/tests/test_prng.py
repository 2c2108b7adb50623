import numpy as np
import pytest

from retrorank.numcore.prng import Prng, fnv1a64, mix64

# SplitMix64 reference values for seed 1234567 (computed by the published
# recurrence: state += 0x9E3779B97F4A7C15, then the 30/27/31 xor-multiply
# finalizer), frozen here so any drift from the documented stream fails.
SPLITMIX_SEED = 1234567
SPLITMIX_FIRST3 = [
    6457827717110365317,
    3203168211198807973,
    9817491932198370423,
]


def reference_splitmix(seed, n):
    mask = (1 << 64) - 1
    state = seed & mask
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        out.append(z ^ (z >> 31))
    return out


def test_matches_published_stream():
    rng = Prng(SPLITMIX_SEED)
    assert [rng.next_u64() for _ in range(3)] == SPLITMIX_FIRST3


def test_reference_recurrence_agrees_for_any_seed():
    for seed in [0, 1, 42, 2**63, 2**64 - 1]:
        rng = Prng(seed)
        assert [rng.next_u64() for _ in range(5)] == reference_splitmix(seed, 5)


def test_identical_seeds_identical_streams():
    a, b = Prng(99), Prng(99)
    assert [a.next_float() for _ in range(100)] == [b.next_float() for _ in range(100)]


def test_different_seeds_differ():
    assert Prng(1).next_u64() != Prng(2).next_u64()


def test_floats_in_unit_interval():
    rng = Prng(7)
    values = [rng.next_float() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in values)


def test_fill_matches_scalar_stream():
    scalar = Prng(31415)
    vector = Prng(31415)
    expected = np.array([scalar.uniform(-2.0, 3.0) for _ in range(64)])
    got = vector.fill_uniform((8, 8), -2.0, 3.0).reshape(-1)
    np.testing.assert_array_equal(got, expected)
    # and both streams continue in lockstep afterwards
    assert scalar.next_u64() == vector.next_u64()


def test_substream_is_pure_and_label_dependent():
    master = Prng(5)
    first = master.substream("init").next_u64()
    master.next_u64()  # consuming the parent must not disturb substreams
    assert Prng(5).substream("init").next_u64() == first
    assert Prng(5).substream("dropout").next_u64() != first


def test_shuffle_deterministic():
    a = list(range(20))
    b = list(range(20))
    Prng(17).shuffle(a)
    Prng(17).shuffle(b)
    assert a == b
    assert sorted(a) == list(range(20))


def test_randrange_bounds_and_errors():
    rng = Prng(3)
    assert all(0 <= rng.randrange(7) < 7 for _ in range(200))
    with pytest.raises(ValueError):
        rng.randrange(0)


def test_mix64_and_fnv_are_stable():
    # frozen so substream derivation stays reproducible across releases
    assert mix64(0) == 0
    assert fnv1a64("") == 0xCBF29CE484222325
    assert fnv1a64("init") != fnv1a64("dropout")
