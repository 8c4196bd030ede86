import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wedge4 import _kernels_py, kernels
from wedge4 import lambda2 as l2

compiled = pytest.importorskip("wedge4._kernels")
values = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@given(arrays(np.float64, st.integers(0, 300), elements=values))
def test_pairwise_sum_bitwise_equal(x):
    a = _kernels_py.pairwise_sum(x)
    b = compiled.pairwise_sum(x)
    assert np.float64(a).tobytes() == np.float64(b).tobytes()
    assert a == pytest.approx(math.fsum(x), abs=1e-9 * (1 + np.abs(x).sum()))


@given(arrays(np.float64, st.tuples(st.just(6), st.integers(1, 40)), elements=values),
       arrays(np.float64, st.tuples(st.just(6), st.integers(1, 40)), elements=values))
def test_pairing_field_bitwise_equal(a, b):
    m = min(a.shape[1], b.shape[1])
    a, b = a[:, :m], b[:, :m]
    assert np.array_equal(_kernels_py.pairing_field(a, b), compiled.pairing_field(a, b))
    assert np.allclose(compiled.pairing_field(a, b), l2.pairing(a, b), rtol=1e-12, atol=1e-3)


@given(arrays(np.float64, (4, 17), elements=values))
def test_herm2_det_bitwise_equal(v):
    assert np.array_equal(_kernels_py.herm2_det(*v), compiled.herm2_det(*v))


def test_read_only_and_strided_inputs(rng):
    x = rng.standard_normal((6, 8, 8))
    x.setflags(write=False)
    y = x[:, ::2]
    assert np.array_equal(compiled.pairing_field(y, y), _kernels_py.pairing_field(y, y))
    assert compiled.pairwise_sum(y) == _kernels_py.pairwise_sum(y)


@pytest.mark.parametrize("n", [4095, 4096, 4097, 8193, 12289, 100003, 1 << 18])
def test_pairwise_sum_across_blocks(n, rng):
    # sizes on both sides of the compiled kernel's block length
    x = rng.standard_normal(n) * 10.0 ** rng.uniform(-6, 6, n)
    assert kernels.pairwise_sum(x) == _kernels_py.pairwise_sum(x)
    assert kernels.pairwise_sum(x) == pytest.approx(math.fsum(x), rel=1e-9, abs=1e-9)
