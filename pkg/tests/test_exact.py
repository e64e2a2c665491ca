import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardrods._exact import ExactWeights, scalar_to_float


def _total(r, order=None):
    w = ExactWeights(np.asarray(r, dtype=float))
    cum = w.prefix(order)
    return scalar_to_float(w, w.take(cum, len(r)))


@pytest.mark.parametrize("scale", [1.0, 1e-30, 1e30])
def test_prefix_matches_fsum(scale):
    rng = np.random.default_rng(5)
    r = rng.exponential(scale, 500) * rng.choice([1.0, 1e-12, 1e12], 500)
    w = ExactWeights(r)
    cum = w.prefix()
    for k in (0, 1, 17, 250, 500):
        assert scalar_to_float(w, w.take(cum, k)) == math.fsum(r[:k].tolist())


def test_limb_path_is_order_independent():
    rng = np.random.default_rng(9)
    r = np.concatenate([rng.exponential(1.0, 100) * 1e40, rng.exponential(1.0, 100) * 1e-40])
    w = ExactWeights(r)
    assert not w.fast
    ref = math.fsum(r.tolist())
    for _ in range(5):
        assert _total(r, rng.permutation(r.size)) == ref


def test_zero_and_empty_weights():
    assert _total(np.zeros(4)) == 0.0
    assert _total(np.zeros(0)) == 0.0
    with pytest.raises(ValueError):
        ExactWeights([1.0, -1.0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e300, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=40),
       st.randoms(use_true_random=False))
def test_any_order_gives_correctly_rounded_sum(r, rnd):
    order = list(range(len(r)))
    rnd.shuffle(order)
    ref = math.fsum(r)
    if not math.isfinite(ref):
        return
    assert _total(r, np.array(order)) == ref
