import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsir.errors import BudgetExceeded, InvalidInput
from dpsir.mechanisms import (
    INFINITE,
    BudgetLedger,
    NoiseSpec,
    PrivacyBudget,
    exponential_select,
    gaussian_mechanism,
    gaussian_sd,
    laplace_mechanism,
    merge_ledgers,
    peel_top_columns,
    peeling_scales,
    symmetric_gaussian,
)


def test_budget_validation():
    with pytest.raises(InvalidInput):
        PrivacyBudget(0.0)
    with pytest.raises(InvalidInput):
        PrivacyBudget(1.0, 1.0)
    assert INFINITE.is_infinite
    b = PrivacyBudget(1.0, 1e-5).scaled(0.25)
    assert (b.epsilon, b.delta) == (0.25, 2.5e-6)
    assert PrivacyBudget.from_dict(INFINITE.to_dict()).is_infinite


def test_ledger_sums_and_cap():
    led = BudgetLedger(cap=PrivacyBudget(1.0, 1e-5))
    led.charge("a", PrivacyBudget(0.5, 5e-6))
    led.charge("b", PrivacyBudget(0.5, 5e-6))
    assert led.total() == (1.0, 1e-5)
    with pytest.raises(BudgetExceeded):
        led.charge("c", PrivacyBudget(1e-3))
    assert len(led.entries) == 2


def test_merge_ledgers_counts_slices_once():
    a, b = BudgetLedger(), BudgetLedger()
    for led in (a, b):
        led.charge("slices", PrivacyBudget(0.1))
    a.charge("init", PrivacyBudget(1.0, 1e-5))
    b.charge("sgd", PrivacyBudget(1.0, 1e-5))
    merged = merge_ledgers(a, b)
    assert [e[0] for e in merged.entries] == ["slices", "init", "sgd"]
    assert merged.epsilon == pytest.approx(2.1)


def test_noise_spec_validation():
    with pytest.raises(InvalidInput):
        NoiseSpec("cauchy", 1.0)
    with pytest.raises(InvalidInput):
        NoiseSpec("laplace", 0.0)


def test_laplace_and_gaussian_scales_recorded():
    rng = np.random.default_rng(0)
    led = BudgetLedger()
    laplace_mechanism(np.zeros(3), 2.0, PrivacyBudget(0.5), rng, led)
    b = PrivacyBudget(0.8, 1e-6)
    gaussian_mechanism(np.zeros(3), 3.0, b, rng, led)
    assert led.noise[0].scale == 4.0
    assert led.noise[1].scale == pytest.approx(math.sqrt(2 * math.log(1.25e6)) * 3.0 / 0.8, rel=1e-15)
    assert gaussian_sd(3.0, b) == led.noise[1].scale


def test_mechanisms_infinite_budget_is_identity():
    x = np.arange(4.0)
    np.testing.assert_array_equal(laplace_mechanism(x, 1.0, INFINITE, None), x)
    np.testing.assert_array_equal(gaussian_mechanism(x, 1.0, INFINITE, None), x)


def test_gaussian_requires_delta():
    with pytest.raises(InvalidInput):
        gaussian_mechanism(np.zeros(2), 1.0, PrivacyBudget(1.0, 0.0), np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        laplace_mechanism(np.zeros(2), -1.0, PrivacyBudget(1.0), np.random.default_rng(0))


def test_mechanisms_are_reproducible():
    x = np.zeros(5)
    a = laplace_mechanism(x, 1.0, PrivacyBudget(1.0), np.random.default_rng(3))
    b = laplace_mechanism(x, 1.0, PrivacyBudget(1.0), np.random.default_rng(3))
    np.testing.assert_array_equal(a, b)


def test_symmetric_gaussian_structure():
    E = symmetric_gaussian(np.random.default_rng(1), 2.0, 200)
    np.testing.assert_array_equal(E, E.T)
    upper = E[np.triu_indices(200)]
    assert np.std(upper) == pytest.approx(2.0, rel=0.02)


def test_peeling_scales_closed_form():
    b = PrivacyBudget(0.7, 1e-4)
    lap, gau = peeling_scales(0.3, 2, 6, b)
    assert lap == pytest.approx(0.3 * 2 * math.sqrt(3 * 2 * 6 * math.log(2e4)) / 0.7, rel=1e-15)
    assert gau == pytest.approx(0.3 * 2 * math.sqrt(2 * 2 * 6 * math.log(2.5e4)) / 0.7, rel=1e-15)


def brute_force_top(A, s):
    norms = np.linalg.norm(A, axis=0)
    return sorted(range(A.shape[1]), key=lambda j: (-norms[j], j))[:s]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 12))
def test_peel_infinite_equals_brute_force(seed, d1, d2):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d1, d2))
    s = int(rng.integers(1, d2 + 1))
    S, rel = peel_top_columns(A, s, INFINITE, 1.0, rng)
    assert list(S) == brute_force_top(A, s)
    np.testing.assert_array_equal(rel, A[:, S])


def test_peel_ties_lowest_index():
    A = np.ones((2, 5))
    S, _ = peel_top_columns(A, 3, INFINITE, 1.0, None)
    assert list(S) == [0, 1, 2]


def test_peel_noisy_distinct_and_recorded():
    rng = np.random.default_rng(2)
    led = BudgetLedger()
    A = rng.standard_normal((3, 40))
    S, rel = peel_top_columns(A, 6, PrivacyBudget(1.0, 1e-5), 0.01, rng, led)
    assert len(set(S.tolist())) == 6 and rel.shape == (3, 6)
    assert [n.label for n in led.noise] == ["peel:select", "peel:release"]


def test_peel_errors():
    with pytest.raises(InvalidInput):
        peel_top_columns(np.ones((2, 3)), 4, INFINITE, 1.0, None)
    with pytest.raises(InvalidInput):
        peel_top_columns(np.ones((2, 3)), 1, PrivacyBudget(1.0), 1.0, np.random.default_rng(0))


def test_exponential_select_infinite_is_argmax():
    assert exponential_select([0.1, 3.0, -2.0], 1.0, math.inf, None) == 1


def test_exponential_select_errors():
    with pytest.raises(InvalidInput):
        exponential_select([], 1.0, 1.0, np.random.default_rng(0))
    with pytest.raises(InvalidInput):
        exponential_select([np.nan], 1.0, 1.0, np.random.default_rng(0))


def test_exponential_select_handles_huge_scores():
    rng = np.random.default_rng(0)
    assert exponential_select([1e6, 0.0], 1.0, 1.0, rng) == 0
