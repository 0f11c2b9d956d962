import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ergodrift import _kernels

pytestmark = pytest.mark.skipif(_kernels.NUMBA is None, reason="numba not installed")

finite = st.floats(-1.0, 1.0, allow_nan=False)


def kernel_arrays(min_size=2, max_size=40):
    return arrays(np.float64, st.integers(min_size, max_size), elements=finite).map(
        lambda a: np.concatenate([[1.0], a[1:]])
    )


@seed(1)
@settings(max_examples=50, deadline=None)
@given(kernel_arrays())
def test_inverse_recursion_backends_agree(a):
    np.testing.assert_allclose(
        _kernels.NUMBA.inverse_recursion(a), _kernels.NUMPY.inverse_recursion(a), rtol=1e-12, atol=1e-12
    )


@seed(2)
@settings(max_examples=50, deadline=None)
@given(kernel_arrays(), st.integers(1, 3), st.integers(1, 60), st.data())
def test_moving_average_backends_agree(a, d, n, data):
    x = np.random.default_rng(n).standard_normal((n, d))
    start = data.draw(st.integers(0, n - 1))
    stop = data.draw(st.integers(start + 1, n))
    np.testing.assert_allclose(
        _kernels.NUMBA.moving_average(a, x, start, stop),
        _kernels.NUMPY.moving_average(a, x, start, stop),
        atol=1e-12,
    )


@seed(3)
@settings(max_examples=50, deadline=None)
@given(kernel_arrays(), st.integers(5, 60), st.integers(0, 4))
def test_successful_drift_backends_agree(a, n, lo):
    g = np.random.default_rng(n).standard_normal((n, 2))
    g1, g2 = g.copy(), g.copy()
    start = min(lo + 2, n - 1)
    _kernels.NUMBA.successful_drift(a, g1, start, n, lo)
    _kernels.NUMPY.successful_drift(a, g2, start, n, lo)
    np.testing.assert_allclose(g1, g2, atol=1e-12)


@seed(4)
@settings(max_examples=50, deadline=None)
@given(kernel_arrays(), st.integers(1, 50), st.integers(0, 30))
def test_memory_tail_backends_agree(a, tau, n_max):
    rng = np.random.default_rng(tau)
    g = rng.standard_normal((tau + 5, 2)) * (rng.random((tau + 5, 1)) < 0.5)
    np.testing.assert_allclose(
        _kernels.NUMBA.memory_tail(a, g, tau, n_max, 0), _kernels.NUMPY.memory_tail(a, g, tau, n_max, 0),
        atol=1e-12,
    )


def test_memory_tail_matches_definition():
    rng = np.random.default_rng(0)
    a = rng.standard_normal(9)
    g = rng.standard_normal((20, 1))
    tau, n_max = 15, 12
    out = _kernels.memory_tail(a, g, tau, n_max, 0)
    K = a.shape[0] - 1
    for n in range(n_max + 1):
        ref = sum(a[k] * g[tau + n - k, 0] for k in range(n + 1, K + 1) if tau + n - k < tau)
        assert out[n, 0] == pytest.approx(ref, abs=1e-13)


def test_conv_sum_backends_agree():
    A = np.arange(1, 2001, dtype=float) ** -0.7
    B = np.arange(1, 2001, dtype=float) ** -1.3
    ns = np.array([0, 1, 5, 100, 1999])
    np.testing.assert_allclose(_kernels.NUMBA.conv_sum_grid(A, B, ns), _kernels.NUMPY.conv_sum_grid(A, B, ns), rtol=1e-12)
    assert _kernels.NUMBA.conv_sum(0.7, 1.3, 50) == pytest.approx(_kernels.NUMPY.conv_sum(0.7, 1.3, 50), rel=1e-13)


def test_affine_recursion_backends_agree():
    rng = np.random.default_rng(5)
    M = np.eye(2) * 0.9 + 0.01
    S = rng.standard_normal((2, 2))
    dl = rng.standard_normal((30, 2))
    x0 = np.array([1.0, -2.0])
    np.testing.assert_allclose(
        _kernels.NUMBA.affine_recursion(M, S, x0, dl), _kernels.NUMPY.affine_recursion(M, S, x0, dl), atol=1e-12
    )


def test_backend_flag(monkeypatch):
    monkeypatch.setenv("ERGODRIFT_DISABLE_NUMBA", "1")
    assert _kernels._select()[0] == "numpy"
    monkeypatch.setenv("ERGODRIFT_DISABLE_NUMBA", "0")
    assert _kernels._select()[0] == "numba"


def test_numpy_fallback_end_to_end():
    import subprocess
    import sys
    import os

    code = (
        "import ergodrift, numpy as np\n"
        "from ergodrift.coeffs import make_fbm_coeffs\n"
        "from ergodrift.toeplitz import invert_coeffs, convolution_residual\n"
        "a = make_fbm_coeffs(0.3, 1.0, 256)\n"
        "assert convolution_residual(a, invert_coeffs(a)) < 1e-12\n"
        "print(ergodrift.BACKEND)\n"
    )
    env = dict(os.environ, ERGODRIFT_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
