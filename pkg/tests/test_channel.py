import math

import numpy as np
import pytest

from tepdec import transmit
from tepdec.channel import erase_positions


def test_eps_zero_identity():
    word = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
    rw = transmit(word, 0.0, seed=1)
    assert rw.erasure_count == 0
    assert np.array_equal(rw.values, word.astype(np.int8))


def test_eps_one_total_erasure():
    rw = transmit(np.zeros(100, dtype=np.uint8), 1.0, seed=1)
    assert rw.erasure_count == 100
    assert (rw.values == -1).all()


def test_concentration_large_n():
    n = 1_000_000
    eps = 0.43
    rw = transmit(np.zeros(n, dtype=np.uint8), eps, seed=99)
    frac = rw.erasure_count / n
    bound = 3.0 * math.sqrt(eps * (1 - eps) / n)
    assert abs(frac - eps) <= bound


def test_pattern_independent_of_codeword():
    rng = np.random.default_rng(0)
    w1 = rng.integers(0, 2, 64).astype(np.uint8)
    w2 = rng.integers(0, 2, 64).astype(np.uint8)
    r1 = transmit(w1, 0.4, seed=7)
    r2 = transmit(w2, 0.4, seed=7)
    assert np.array_equal(r1.erased, r2.erased)


def test_known_positions_exact():
    rng = np.random.default_rng(1)
    w = rng.integers(0, 2, 256).astype(np.uint8)
    rw = transmit(w, 0.5, seed=3)
    keep = ~rw.erased
    assert np.array_equal(rw.values[keep], w[keep].astype(np.int8))


def test_determinism():
    w = np.zeros(128, dtype=np.uint8)
    a = transmit(w, 0.3, seed=5)
    b = transmit(w, 0.3, seed=5)
    assert np.array_equal(a.erased, b.erased)


def test_bad_eps():
    with pytest.raises(ValueError):
        transmit(np.zeros(4, dtype=np.uint8), 1.5, seed=0)


def test_erase_positions_helper():
    rw = erase_positions(np.array([1, 0, 1, 1], dtype=np.uint8), [0, 2])
    assert list(rw.values) == [-1, 0, -1, 1]
