import math
import warnings

import numpy as np
import pytest

from dpsir.errors import DegenerateHistogram, InvalidInput
from dpsir.mechanisms import INFINITE, BudgetLedger, PrivacyBudget
from dpsir.slicing import (
    assign_slices,
    build_dp_histogram,
    categorical_slices,
    cutoffs_from_histogram,
    default_bins,
    estimate_slices,
    make_slices,
    transform_response,
)


def test_transform_monotone_and_bounded():
    y = np.array([-1e9, -3.0, 0.0, 2.0, 1e9])
    t = transform_response(y)
    assert np.all(np.diff(t) > 0) and np.all(np.abs(t) <= 1)
    assert t[2] == 0.0


@pytest.mark.parametrize("n,m", [(1000, 10), (100000, 47), (27, 3), (8, 2), (1, 2)])
def test_default_bins(n, m):
    assert default_bins(n) == m


def test_histogram_infinite_budget_is_exact():
    t = np.array([-1.0, -0.5, -0.01, 0.0, 0.49, 1.0])
    h = build_dp_histogram(t, 4, INFINITE, None)
    # bins [-1,-.5) [-.5,0) [0,.5) [.5,1]; the right end belongs to the last bin
    np.testing.assert_array_equal(h.raw_counts, [1, 2, 2, 1])
    np.testing.assert_array_equal(h.noised_counts, h.raw_counts)
    assert np.sum(h.density) * (2 / 4) == pytest.approx(1.0)


def test_histogram_laplace_scale_and_clamp():
    led = BudgetLedger()
    t = np.zeros(10)
    h = build_dp_histogram(t, 20, PrivacyBudget(0.5), np.random.default_rng(0), led)
    assert led.noise[0].scale == 4.0
    assert np.all(h.noised_counts >= 0)


def test_histogram_all_zero_raises():
    class ZeroRng:
        def random(self, size):
            return np.full(size, 1e-300)  # Laplace draws near -inf scale*log

    with pytest.raises(DegenerateHistogram):
        build_dp_histogram(np.array([0.0]), 4, PrivacyBudget(0.01), ZeroRng())


def test_cutoffs_exact_quantiles():
    t = np.linspace(-0.99, 0.99, 1000)
    h = build_dp_histogram(t, 100, INFINITE, None)
    cut = cutoffs_from_histogram(h, 4)
    np.testing.assert_allclose(cut, [-1, -0.5, 0.0, 0.5, 1], atol=0.02 + 1e-12)


def test_estimate_slices_plan_and_ledger():
    y = np.random.default_rng(1).standard_normal(5000)
    led = BudgetLedger()
    plan = estimate_slices(y, 5, budget=PrivacyBudget(0.1), rng=np.random.default_rng(2), ledger=led)
    assert plan.kind == "continuous" and plan.H == 5 and plan.m == default_bins(5000)
    assert led.entries == [("slices", 0.1, 0.0)]
    assert plan.counts.sum() == 5000
    np.testing.assert_array_equal(assign_slices(y, plan), plan.assignment)
    assert np.all(np.diff(plan.cutoffs) > 0)
    # roughly equal-mass slices
    assert plan.counts.min() > 0.1 * 5000 / 5


def test_estimate_slices_merges_coincident_cutoffs():
    y = np.r_[np.zeros(100), np.ones(5)]
    with pytest.warns(UserWarning, match="merged"):
        plan = estimate_slices(y, 5, budget=INFINITE)
    assert plan.H < 5


def test_estimate_slices_errors():
    with pytest.raises(InvalidInput):
        estimate_slices(np.arange(10.0), 1, budget=INFINITE)
    with pytest.raises(InvalidInput):
        estimate_slices(np.arange(3.0), 5, budget=INFINITE)
    with pytest.raises(InvalidInput):
        estimate_slices(np.arange(30.0), 5)


def test_categorical_slices():
    y = np.array(["b", "a", "b", "c", "a"])
    plan = make_slices(y, 10)
    assert plan.kind == "categorical" and plan.labels == ("a", "b", "c")
    np.testing.assert_array_equal(plan.assignment, [1, 0, 1, 2, 0])
    np.testing.assert_array_equal(assign_slices(y, plan), plan.assignment)
    assert plan.privacy_spent is None
    with pytest.raises(InvalidInput):
        assign_slices(np.array(["z"]), plan)
    with pytest.raises(InvalidInput):
        categorical_slices(np.array(["a", "a"]))


def test_slice_boundaries_half_open():
    y = np.tan(np.array([-0.5, 0.0, 0.5]) * math.pi / 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plan = estimate_slices(np.linspace(-5, 5, 400), 2, budget=INFINITE)
    cut = plan.cutoffs[1]
    on_edge = np.tan(cut * math.pi / 2)
    lab = assign_slices(np.array([on_edge, on_edge + 1e-9]), plan)
    assert lab.tolist() == [0, 1]
    assert assign_slices(y[:1], plan)[0] == 0
