import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsir import _pykernels, kernels

ck = pytest.importorskip("dpsir._ckernels")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 200), st.integers(2, 30))
def test_bin_counts_agree(seed, n, m):
    t = np.random.default_rng(seed).uniform(-1, 1, n)
    t[0] = 1.0
    np.testing.assert_array_equal(ck.bin_counts(t, m), _pykernels.bin_counts(t, m))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 100), st.integers(1, 6), st.integers(1, 8))
def test_slice_sums_agree(seed, n, p, H):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    lab = rng.integers(0, H, n)
    s1, c1 = ck.slice_sums(X, lab, H)
    s2, c2 = _pykernels.slice_sums(X, lab, H)
    np.testing.assert_allclose(s1, s2, atol=1e-12)
    np.testing.assert_array_equal(c1, c2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 80), st.integers(1, 6), st.integers(1, 3), st.integers(2, 6))
def test_fold_terms_agree(seed, n, p, k, H):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    lab = rng.integers(0, H, n)
    B = rng.standard_normal((p, k))
    R = float(rng.uniform(0.1, 3))
    for a, b in zip(ck.fold_terms(X, lab, B, R, H), _pykernels.fold_terms(X, lab, B, R, H)):
        np.testing.assert_allclose(a, b, atol=1e-11)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_peel_select_agree(seed, d):
    rng = np.random.default_rng(seed)
    s = int(rng.integers(1, d + 1))
    scores = rng.standard_normal(d)
    noise = rng.laplace(size=(s, d))
    np.testing.assert_array_equal(ck.peel_select(scores, noise), _pykernels.peel_select(scores, noise))


def test_fold_terms_oracle():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 3))
    lab = rng.integers(0, 3, 30)
    B = rng.standard_normal((3, 2))
    R = 0.7
    Z = np.clip(X @ B, -R, R)
    kern = np.zeros((3, 2))
    for h in range(3):
        idx = lab == h
        kern += np.outer(X[idx].mean(axis=0), Z[idx].sum(axis=0)) / 30
    got = _pykernels.fold_terms(X, lab, B, R, 3)
    np.testing.assert_allclose(got[0], kern, atol=1e-12)
    np.testing.assert_allclose(got[1], X.T @ Z / 30, atol=1e-12)
    np.testing.assert_allclose(got[2], Z.T @ Z / 30, atol=1e-12)


def test_pure_python_env_forces_fallback(tmp_path):
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from dpsir import kernels; print(kernels.BACKEND)"],
        env={"DPSIR_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
