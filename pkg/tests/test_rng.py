from llambert.rng import SplitMix64, fnv1a64, fold_bits, subseed


def test_splitmix_reference_values():
    # first outputs for seed 0 (SplitMix64 reference sequence)
    rng = SplitMix64(0)
    assert rng.next_u64() == 0xE220A8397B1DCDAF
    assert rng.next_u64() == 0x6E789E6AA1B965F4
    assert rng.next_u64() == 0x06C45D188009454F


def test_fnv1a64_reference_values():
    # standard FNV-1a test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_fold_bits_range():
    for h in (0, 1, 0xFFFFFFFFFFFFFFFF, fnv1a64(b"x")):
        for d in (10, 18, 26):
            assert 0 <= fold_bits(h, d) < (1 << d)


def test_next_float_in_unit_interval():
    rng = SplitMix64(3)
    for _ in range(1000):
        assert 0.0 <= rng.next_float() < 1.0


def test_randbelow_bounds_and_determinism():
    a = SplitMix64(7)
    b = SplitMix64(7)
    xs = [a.randbelow(13) for _ in range(200)]
    ys = [b.randbelow(13) for _ in range(200)]
    assert xs == ys
    assert all(0 <= x < 13 for x in xs)
    assert set(xs) == set(range(13))


def test_sample_without_replacement():
    rng = SplitMix64(1)
    items = list(range(100))
    got = rng.sample(items, 30)
    assert len(got) == 30
    assert len(set(got)) == 30
    assert set(got) <= set(items)
    assert items == list(range(100))  # input untouched


def test_subseed_distinguishes_context():
    assert subseed(1, "a") != subseed(1, "b")
    assert subseed(1, "a") != subseed(2, "a")
    assert subseed(1, "x", 2) == subseed(1, "x", 2)
