import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsir.errors import DegenerateSpectrum, InvalidInput, SingularCovariance
from dpsir.linalg import projection_loss
from dpsir.lowdim import (
    DpSirConfig,
    default_c_n,
    dp_bic_select,
    dpsir_fit,
    dpsir_init,
    gev_gradient,
    gev_objective,
    init_sigmas,
    make_folds,
    pencil_noise_sd,
    private_ged,
    project_columns,
    resolve_config,
    sgd_noise_sd,
    sgd_sigma,
    update_direction,
)
from dpsir.mechanisms import INFINITE, BudgetLedger, PrivacyBudget
from dpsir.sir import sir_fit

from conftest import random_spd, random_sym


def numeric_gradient(f, B, h=1e-6):
    G = np.zeros_like(B)
    for idx in np.ndindex(B.shape):
        E = np.zeros_like(B)
        E[idx] = h
        G[idx] = (f(B + E) - f(B - E)) / (2 * h)
    return G


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    M, S = random_sym(rng, 5), random_spd(rng, 5)
    B = rng.standard_normal((5, 2))
    pen = float(rng.uniform(0.1, 3))
    g = gev_gradient(B, M, S, pen)
    num = numeric_gradient(lambda b: gev_objective(b, M, S, pen), B)
    assert np.linalg.norm(g - num) <= 1e-5 * max(1.0, np.linalg.norm(num))


def test_update_direction_is_half_gradient_at_half_penalty(rng):
    M, S = random_sym(rng, 4), random_spd(rng, 4)
    B = rng.standard_normal((4, 2))
    np.testing.assert_allclose(update_direction(B, M, S, 1.3), 0.5 * gev_gradient(B, M, S, 0.65), atol=1e-12)


def test_population_minimizer_spans_top_eigvecs(rng):
    # stationary point B = V sqrt(1 + lam/(2 pen)) for the exact objective
    M, S = random_sym(rng, 5), random_spd(rng, 5)
    M = M @ M.T
    from dpsir.linalg import gen_eig

    res = gen_eig(M, S, 2)
    pen = 2.0
    B = res.vectors * np.sqrt(1 + res.eigenvalues / (2 * pen))
    np.testing.assert_allclose(gev_gradient(B, M, S, pen), 0, atol=1e-9)


def test_project_columns():
    B = np.array([[3.0, 0.1], [4.0, 0.0]])
    P = project_columns(B, 1.0)
    np.testing.assert_allclose(P[:, 0], [0.6, 0.8])
    np.testing.assert_array_equal(P[:, 1], B[:, 1])


def test_calibration_closed_forms():
    b = PrivacyBudget(1.0, 1e-5)
    s1, s2 = init_sigmas(15, 20000, 1.5)
    assert (s1, s2) == (2 * 15 * 2.25 / 20000, 7 * 15 * 2.25 / 20000)
    assert pencil_noise_sd(s1, b) == pytest.approx(math.sqrt(s1**2 * 8 * math.log(2.5e5)), rel=1e-15)
    sig = sgd_sigma(0.1, 2.0, 1.5, 0.5, 2, 15, 10, 20000)
    assert sig == pytest.approx(2 * 0.1 * (7 * 2 * 1.5 + 0.5 * (2 * 2 * 1.5 + 4 * 2 * 8 * 1.5)) * math.sqrt(30) * 10 / 20000)
    assert sgd_noise_sd(sig, 10, b) == pytest.approx(math.sqrt(2 * sig**2 * 100 * math.log(1.25e6)), rel=1e-15)


def bic_oracle(lam, n, c):
    best, arg = -np.inf, None
    total = sum(x * x for x in lam)
    for l in range(1, len(lam) + 1):
        g = n * sum(x * x for x in lam[:l]) / total - c * l * (l + 1) / 2
        if g > best:
            best, arg = g, l
    return arg


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=1, max_size=10), st.integers(10, 10**6), st.floats(0.5, 1e4))
def test_dp_bic_matches_oracle(lam, n, c):
    lam = sorted(lam, reverse=True)
    if sum(x * x for x in lam) == 0:
        with pytest.raises(DegenerateSpectrum):
            dp_bic_select(lam, n, c)
        return
    assert dp_bic_select(lam, n, c) == bic_oracle(lam, n, c)


def test_dp_bic_examples():
    assert dp_bic_select([1.0, 0.01, 0.0], 10000, 100.0) == 1
    assert dp_bic_select([1.0, 0.8, 0.0], 10000, 100.0) == 2
    assert dp_bic_select([1.0, 0.8, 0.7], 10000, 100.0, H=2) == 2


def test_default_c_n_clipping():
    b = PrivacyBudget(1.0, 1e-5)
    assert default_c_n(100, 5, 1e-9, b) == 10.0  # capped at n/10
    assert default_c_n(10**6, 1, 1e6, INFINITE) == 1.0  # floored at 1
    mid = default_c_n(20000, 15, 0.5, b)
    assert mid == pytest.approx(math.sqrt(20000 * (15 + 15**3 * math.log(1e5) / 20000) / 0.25))


def test_dpsir_init_infinite_equals_sir(m1_data):
    data, _, plan = m1_data
    a = dpsir_init(data, plan, 1, INFINITE, None)
    b = sir_fit(data, plan, 1)
    assert projection_loss(a.B_hat, b.B_hat) < 1e-10
    np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)


def test_dpsir_init_auto_k_infinite(m1_data):
    data, _, plan = m1_data
    assert dpsir_init(data, plan, "auto", INFINITE, None).k_selected == 1


def test_dpsir_init_ledger_and_noise(m1_data):
    data, _, plan = m1_data
    b = PrivacyBudget(1.0, 1e-5)
    est = dpsir_init(data, plan, 1, b, np.random.default_rng(0), sigma1=1e-4, sigma2=2e-4)
    labels = [e[0] for e in est.ledger.entries]
    assert labels == ["slices", "covariance_release", "kernel_release"]
    assert est.ledger.total() == (math.inf, 1e-5)  # exact slices carry infinite epsilon
    scales = [n.scale for n in est.ledger.noise]
    assert scales == [pencil_noise_sd(1e-4, b), pencil_noise_sd(2e-4, b)]


def test_private_ged_retry_is_charged(rng):
    S = random_spd(rng, 3)
    led = BudgetLedger()
    with pytest.raises(SingularCovariance):
        private_ged(np.eye(3), S, PrivacyBudget(1.0, 1e-5), 100.0, 1e-3, rng, led, 1, 100, 3, retries=1)
    assert [e[0] for e in led.entries] == [
        "covariance_release", "kernel_release", "retry1:covariance_release", "retry1:kernel_release",
    ]


def test_dpsir_init_rejects_bad_k(m1_data):
    data, _, plan = m1_data
    with pytest.raises(InvalidInput):
        dpsir_init(data, plan, plan.H, INFINITE, None)


def test_make_folds_partition(rng):
    folds = make_folds(103, 5, rng)
    allidx = np.sort(np.concatenate(folds))
    np.testing.assert_array_equal(allidx, np.arange(103))
    assert max(len(f) for f in folds) - min(len(f) for f in folds) <= 1
    with pytest.raises(InvalidInput):
        make_folds(3, 5, rng)


def test_resolve_config_defaults(m1_data):
    data, _, plan = m1_data
    init = sir_fit(data, plan, 1)
    cfg, B0 = resolve_config(DpSirConfig(budget=INFINITE), data, init)
    lam1 = init.eigenvalues[0]
    assert cfg.lambda_penalty == pytest.approx(lam1 / 2)
    assert cfg.eta == pytest.approx(0.25 / lam1)
    assert cfg.T == math.ceil(math.log(data.n))
    np.testing.assert_allclose(B0, init.B_hat * math.sqrt(1 + lam1 / cfg.lambda_penalty))
    assert cfg.C == pytest.approx(1.5 * np.linalg.norm(B0))
    assert cfg.R == pytest.approx(2 * cfg.C * math.sqrt(math.log(data.n)))


def test_dpsir_fit_noise_free_improves_on_init(m1_data):
    data, B, plan = m1_data
    rng = np.random.default_rng(1)
    init = dpsir_init(data, plan, 1, PrivacyBudget(1.0, 1e-5), rng, sigma1=2e-4, sigma2=5e-4)
    fit = dpsir_fit(data, DpSirConfig(budget=INFINITE), init, rng, plan=plan, truth=B)
    assert projection_loss(fit.B_hat, B) < projection_loss(init.B_hat, B)
    assert fit.iterations_run == math.ceil(math.log(data.n))
    assert len(fit.diagnostics["distance_trace"]) == fit.iterations_run


def test_dpsir_fit_ledger_and_noise(m1_data):
    data, _, plan = m1_data
    b = PrivacyBudget(1.0, 1e-5)
    init = sir_fit(data, plan, 1)
    fit = dpsir_fit(data, DpSirConfig(budget=b), init, np.random.default_rng(0), plan=plan)
    cfg = fit.diagnostics["config"]
    assert [e[0] for e in fit.ledger.entries] == ["slices", "sgd"]
    sd = sgd_noise_sd(sgd_sigma(cfg.eta, cfg.R, cfg.c_x, cfg.lambda_penalty, 1, data.p, cfg.T, data.n), cfg.T, b)
    assert all(n.scale == sd for n in fit.ledger.noise) and len(fit.ledger.noise) == cfg.T
    assert np.all(np.linalg.norm(fit.B_hat, axis=0) <= cfg.C * (1 + 1e-12))


def test_dpsir_fit_deterministic(m1_data):
    data, _, plan = m1_data
    init = sir_fit(data, plan, 1)
    cfg = DpSirConfig(budget=PrivacyBudget(1.0, 1e-5), noise_multiplier=1e-3)
    a = dpsir_fit(data, cfg, init, np.random.default_rng(5), plan=plan)
    b = dpsir_fit(data, cfg, init, np.random.default_rng(5), plan=plan)
    np.testing.assert_array_equal(a.B_hat, b.B_hat)


def test_dpsir_fit_requires_plan_or_hist(m1_data):
    data, _, plan = m1_data
    with pytest.raises(InvalidInput):
        dpsir_fit(data, DpSirConfig(budget=INFINITE), sir_fit(data, plan, 1), np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(InvalidInput):
        DpSirConfig(budget=INFINITE, eta=-1.0)
    with pytest.raises(InvalidInput):
        DpSirConfig(budget=INFINITE, T=0)
