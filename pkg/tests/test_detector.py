import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import ncx2

from fdjs.detector import (
    DetectorParams,
    Hypothesis,
    RocConstants,
    SampleModel,
    empirical_rates,
    p_fa_of_p_md,
    p_fa_of_threshold,
    p_md_of_threshold,
    roc_constants,
    roc_derivative,
    threshold_for_p_md,
)
from fdjs.numerics import RngStream

REF = DetectorParams(n_samples=1000, alpha_i=1.0, alpha_s=0.5)


def test_params_validation():
    with pytest.raises(ValueError):
        DetectorParams(0, 1.0, 0.5)
    with pytest.raises(ValueError):
        DetectorParams(10, -0.1, 0.5)
    with pytest.raises(ValueError):
        DetectorParams(10, 1.0, 0.0)
    with pytest.raises(ValueError):
        RocConstants(c=0.5, k=1.0)


def test_p_fa_median_threshold():
    # gamma at the H0 mean gives Q(0) = 1/2.
    assert p_fa_of_threshold(REF, REF.alpha_i + 1.0) == 0.5


def test_p_fa_reference_value():
    # Q(0.2 * sqrt(1000/3)); frozen from an independent scipy evaluation.
    assert p_fa_of_threshold(REF, 2.2) == pytest.approx(1.3036481642769715e-04, rel=1e-9)


def test_p_fa_monotone_in_gamma():
    assert p_fa_of_threshold(REF, 2.0) > p_fa_of_threshold(REF, 2.1)


def test_p_md_median_threshold():
    assert p_md_of_threshold(REF, REF.alpha_i + REF.alpha_s + 1.0) == 0.5


def test_p_md_reference_value():
    # Q(0.3 * sqrt(1000/5)); frozen from an independent scipy evaluation.
    assert p_md_of_threshold(REF, 2.2) == pytest.approx(1.1045248499264027e-05, rel=1e-9)


def test_p_md_vanishes_for_low_threshold():
    assert p_md_of_threshold(REF, -50.0) == 0.0


def test_threshold_for_median():
    g = threshold_for_p_md(REF, 0.5)
    assert g == pytest.approx(REF.alpha_i + REF.alpha_s + 1.0, abs=1e-14)


def test_threshold_roundtrip():
    g = threshold_for_p_md(REF, 0.1)
    assert p_md_of_threshold(REF, g) == pytest.approx(0.1, abs=1e-10)
    assert g == pytest.approx(2.409380619756318, abs=1e-12)


def test_threshold_matches_bisection():
    # Independent oracle: bisection on p_md_of_threshold.
    lo, hi = -10.0, 20.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if p_md_of_threshold(REF, mid) < 0.1:
            lo = mid
        else:
            hi = mid
    assert threshold_for_p_md(REF, 0.1) == pytest.approx(0.5 * (lo + hi), abs=1e-10)


def test_threshold_rejects_boundaries():
    with pytest.raises(ValueError):
        threshold_for_p_md(REF, 0.0)
    with pytest.raises(ValueError):
        threshold_for_p_md(REF, 1.0)


def test_roc_constants_reference():
    rc = roc_constants(REF)
    assert rc.c == pytest.approx(-math.sqrt(5.0 / 3.0), rel=1e-14)
    assert rc.k == pytest.approx(0.5 * math.sqrt(1000.0 / 3.0), rel=1e-14)


def test_roc_constants_chance_line_limit():
    rc = roc_constants(DetectorParams(1000, 0.0, 1e-12))
    assert rc.c == pytest.approx(-1.0, abs=1e-11)
    assert rc.k == pytest.approx(0.0, abs=1e-9)


def test_roc_constants_signs():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = DetectorParams(int(rng.integers(1, 5000)),
                           float(rng.uniform(0.0, 100.0)),
                           float(rng.uniform(1e-3, 20.0)))
        rc = roc_constants(p)
        assert rc.c < 0.0
        assert rc.k > 0.0


def test_roc_elimination_consistency():
    # Eq-(4) composition must reproduce the threshold-parameterized curve.
    rng = np.random.default_rng(99)
    for _ in range(50):
        p = DetectorParams(int(rng.integers(100, 5000)),
                           float(rng.uniform(0.05, 50.0)),
                           float(rng.uniform(0.05, 10.0)))
        rc = roc_constants(p)
        # thresholds spanning miss rates from ~Q(5) to ~Q(-5)
        for t in np.linspace(-5.0, 5.0, 50):
            gamma = p.alpha_i + p.alpha_s + 1.0 - t * math.sqrt(
                (2 * p.alpha_i + 2 * p.alpha_s + 2 * p.alpha_s * p.alpha_i + 1) / p.n_samples)
            direct = p_fa_of_threshold(p, gamma)
            via_roc = p_fa_of_p_md(rc, p_md_of_threshold(p, gamma))
            assert abs(direct - via_roc) < 1e-9


def test_p_fa_of_p_md_median():
    rc = roc_constants(REF)
    assert p_fa_of_p_md(rc, 0.5) == pytest.approx(
        p_fa_of_threshold(REF, threshold_for_p_md(REF, 0.5)), rel=1e-12)


def test_p_fa_of_p_md_chance_line():
    rc = RocConstants(c=-1.0, k=0.0)
    for p in (0.01, 0.2, 0.5, 0.9):
        assert p_fa_of_p_md(rc, p) == pytest.approx(1.0 - p, rel=1e-12)


def test_p_fa_of_p_md_reference():
    rc = roc_constants(REF)
    assert p_fa_of_p_md(rc, 0.1) == pytest.approx(3.885780586188048e-14, rel=1e-3)


def test_p_fa_of_p_md_boundary_clamped():
    rc = roc_constants(REF)
    # Clamped, not raising; limits are one-sided.
    assert p_fa_of_p_md(rc, 0.0) > p_fa_of_p_md(rc, 0.5)
    assert p_fa_of_p_md(rc, 1.0) < 1e-30


def test_roc_derivative_chance_line():
    rc = RocConstants(c=-1.0, k=0.0)
    for p in (0.05, 0.3, 0.7):
        assert roc_derivative(rc, p) == pytest.approx(-1.0, rel=1e-12)


def test_roc_derivative_negative():
    rc = roc_constants(REF)
    for p in np.linspace(0.01, 0.99, 25):
        assert roc_derivative(rc, p) < 0.0


def test_roc_derivative_matches_finite_difference():
    rc = roc_constants(DetectorParams(800, 2.0, 0.8))
    h = 1e-6
    for p in np.linspace(0.05, 0.95, 19):
        fd = (p_fa_of_p_md(rc, p + h) - p_fa_of_p_md(rc, p - h)) / (2 * h)
        assert roc_derivative(rc, p) == pytest.approx(fd, rel=1e-5)


def test_roc_dominance_in_alpha_s():
    # Stronger signal, same interference: ROC pointwise beneath.
    weak = roc_constants(DetectorParams(1000, 1.0, 0.3))
    strong = roc_constants(DetectorParams(1000, 1.0, 0.5))
    for p in np.linspace(0.01, 0.99, 33):
        assert p_fa_of_p_md(strong, p) < p_fa_of_p_md(weak, p)


@given(st.integers(50, 3000), st.floats(0.0, 50.0), st.floats(0.01, 10.0),
       st.floats(-3.0, 3.0), st.floats(0.05, 1.5))
@settings(max_examples=100)
def test_threshold_monotonicity_property(n, ai, as_, g0, dg):
    p = DetectorParams(n, ai, as_)
    assert p_fa_of_threshold(p, g0) >= p_fa_of_threshold(p, g0 + dg)
    assert p_md_of_threshold(p, g0) <= p_md_of_threshold(p, g0 + dg)


# --- sample-level oracle ---------------------------------------------------


def test_empirical_rates_median_h0():
    p = DetectorParams(600, 1.0, 0.5)
    rate = empirical_rates(SampleModel.from_params(p, Hypothesis.H0), p,
                           p.alpha_i + 1.0, 10**5, RngStream(101))
    assert abs(rate - 0.5) < 3.0 * math.sqrt(0.25 / 10**5)


def test_empirical_rates_match_closed_forms():
    p = DetectorParams(1000, 1.0, 0.5)
    trials = 2 * 10**5
    # Probe at the one-sigma quantiles where the closed forms are tight.
    g_fa = p.alpha_i + 1.0 + math.sqrt((2 * p.alpha_i + 1) / p.n_samples)
    pf = p_fa_of_threshold(p, g_fa)
    emp = empirical_rates(SampleModel.from_params(p, Hypothesis.H0), p, g_fa,
                          trials, RngStream(102))
    assert abs(emp - pf) < 3.0 * math.sqrt(pf * (1 - pf) / trials)

    g_md = threshold_for_p_md(p, 0.15)
    emp_det = empirical_rates(SampleModel.from_params(p, Hypothesis.H1), p, g_md,
                              trials, RngStream(103))
    assert abs((1.0 - emp_det) - 0.15) < 3.0 * math.sqrt(0.15 * 0.85 / trials)


def test_empirical_rates_match_exact_distribution():
    # Under H0 the window energy is exactly ncx2(2N, 2N*alpha_i)/(2N).
    p = DetectorParams(500, 2.0, 0.5)
    trials = 4 * 10**5
    for gamma, seed in ((3.1, 104), (3.0, 105)):
        exact = float(ncx2.sf(2 * p.n_samples * gamma, 2 * p.n_samples,
                              2 * p.n_samples * p.alpha_i))
        emp = empirical_rates(SampleModel.from_params(p, Hypothesis.H0), p, gamma,
                              trials, RngStream(seed))
        assert abs(emp - exact) < 3.5 * math.sqrt(exact * (1 - exact) / trials)


def test_window_sampler_agrees_with_literal_synthesis():
    # The O(1)-per-window sampler and the O(N) literal per-sample synthesis
    # draw from the same law; compare at a well-powered operating point.
    p = DetectorParams(300, 1.0, 0.8)
    trials = 50_000
    for hyp, gamma in ((Hypothesis.H0, 2.1), (Hypothesis.H1, 2.7)):
        model = SampleModel.from_params(p, hyp)
        a = empirical_rates(model, p, gamma, trials, RngStream(301))
        b = empirical_rates(model, p, gamma, trials, RngStream(302), method="samples")
        pooled = 0.5 * (a + b)
        sd = math.sqrt(2.0 * pooled * (1 - pooled) / trials)
        assert abs(a - b) < 4.0 * sd


def test_empirical_rates_deterministic():
    p = DetectorParams(400, 0.5, 0.5)
    m = SampleModel.from_params(p, Hypothesis.H0)
    a = empirical_rates(m, p, 1.6, 30_000, RngStream(55, 3))
    b = empirical_rates(m, p, 1.6, 30_000, RngStream(55, 3))
    assert a == b


def test_empirical_rates_validation():
    p = DetectorParams(100, 1.0, 0.5)
    m = SampleModel.from_params(p, Hypothesis.H0)
    with pytest.raises(ValueError):
        empirical_rates(m, p, 2.0, 0, RngStream(1))
    with pytest.raises(ValueError):
        empirical_rates(m, p, 2.0, 10, RngStream(1), method="magic")
    with pytest.raises(ValueError):
        empirical_rates(SampleModel(0.2, 0.5, Hypothesis.H0), p, 2.0, 10, RngStream(1))
