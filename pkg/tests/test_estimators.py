import numpy as np
import pytest

import scorehazard.dataset as dataset
import scorehazard.estimators as estimators
from scorehazard.dataset import EpisodeSet, RiskTable
from scorehazard.exceptions import NumericError, ValidationError


def brute_force_inclusion(scores, events, s):
    """Product over distinct event scores <= s of (1 - d/Y), counted directly."""
    scores = np.asarray(scores)
    events = np.asarray(events)
    value = 1.0
    for t in np.unique(scores[events == 1]):
        if t > s:
            break
        d = np.sum((scores == t) & (events == 1))
        y = np.sum(scores >= t)
        value *= 1.0 - d / y
    return value


def episodes_of(scores, events):
    n = len(scores)
    return EpisodeSet(scores, events, np.zeros((n, 0)), ())


class TestNormalQuantile:
    def test_ninety_five(self):
        """z for 95% coverage."""
        assert estimators.normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-6)

    @pytest.mark.parametrize("level", [0.0, 1.0, 1.5, -0.1])
    def test_out_of_range(self, level):
        """Coverage must lie strictly between 0 and 1."""
        with pytest.raises(ValidationError):
            estimators.normal_quantile(level)


class TestProductLimit:
    def test_hand_computed_steps(self, km_table):
        """Steps 0.8, 0.533333, 0.266667."""
        curve = estimators.product_limit(km_table)
        np.testing.assert_allclose(
            curve.estimate, [0.8, 0.533333, 0.266667], atol=1e-6
        )

    def test_greenwood_variance(self, km_table):
        """Greenwood variance 0.061630 at the second step."""
        curve = estimators.product_limit(km_table)
        assert curve.variance[0] == pytest.approx(0.64 * 0.05)
        assert curve.variance[1] == pytest.approx(0.061630, abs=1e-6)
        assert curve.variance[2] == pytest.approx(0.050963, abs=1e-6)

    def test_paper_tau_variance(self, km_table):
        """The alternative variance sums 1 / Y^2."""
        curve = estimators.product_limit(km_table, variance_mode="paper_tau")
        expected = curve.estimate**2 * np.cumsum([1 / 25, 1 / 9, 1 / 4])
        np.testing.assert_allclose(curve.variance, expected)
        assert curve.variance_mode == "paper_tau"

    def test_unknown_variance_mode(self, km_table):
        """Only the two documented modes are accepted."""
        with pytest.raises(ValidationError, match="variance mode"):
            estimators.product_limit(km_table, variance_mode="exact")

    def test_bounds_clipped(self, km_table):
        """Bounds stay inside [0, 1] and around the estimate."""
        curve = estimators.product_limit(km_table, confidence_level=0.99)
        assert np.all(curve.ci_low >= 0.0)
        assert np.all(curve.ci_high <= 1.0)
        assert np.all(curve.ci_low <= curve.estimate)
        assert np.all(curve.estimate <= curve.ci_high)

    def test_greenwood_undefined_when_exhausted(self, caplog):
        """Once Y = d the Greenwood variance is NaN."""
        table = RiskTable.from_rows([(0.1, 1, 3), (0.5, 2, 2)])
        curve = estimators.product_limit(table)
        assert curve.estimate[-1] == 0.0
        assert np.isfinite(curve.variance[0])
        assert np.isnan(curve.variance[1])
        assert list(curve.variance_defined) == [True, False]
        assert "Greenwood variance undefined" in caplog.text

    def test_no_censoring_is_empirical(self):
        """Without censoring the estimate is the empirical exceedance fraction."""
        scores = [0.15, 0.05, 0.95, 0.35, 0.75, 0.55]
        curve = estimators.product_limit(
            dataset.risk_table(episodes_of(scores, [1] * 6))
        )
        expected = [5 / 6, 4 / 6, 3 / 6, 2 / 6, 1 / 6, 0.0]
        np.testing.assert_allclose(curve.estimate, expected, atol=1e-12)

    def test_brute_force_oracle(self):
        """Small random sets match a direct product over risk sets."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            scores = np.round(rng.uniform(0, 1, n), 1)
            events = (rng.random(n) < 0.7).astype(int)
            events[0] = 1
            curve = estimators.product_limit(
                dataset.risk_table(episodes_of(scores, events))
            )
            for s in np.unique(scores):
                assert curve.evaluate(s) == pytest.approx(
                    brute_force_inclusion(scores, events, s)
                )

    def test_monotone_transform_invariance(self):
        """A strictly increasing transform of the scores leaves the steps unchanged."""
        rng = np.random.default_rng(5)
        scores = rng.uniform(0, 1, 40)
        events = (rng.random(40) < 0.5).astype(int)
        events[0] = 1
        before = estimators.product_limit(
            dataset.risk_table(episodes_of(scores, events))
        )
        after = estimators.product_limit(
            dataset.risk_table(episodes_of(np.exp(3 * scores), events))
        )
        np.testing.assert_allclose(before.estimate, after.estimate)
        np.testing.assert_allclose(before.variance, after.variance)
        np.testing.assert_allclose(after.scores, np.exp(3 * before.scores))


class TestEvaluate:
    def test_between_steps(self, km_episodes):
        """The curve is right-continuous and constant between jumps."""
        curve = estimators.product_limit(dataset.risk_table(km_episodes))
        assert curve.evaluate(0.1) == pytest.approx(0.8)
        assert curve.evaluate(0.39) == pytest.approx(0.8)
        assert curve.evaluate(0.5) == pytest.approx(0.533333, abs=1e-6)
        assert curve.evaluate(0.9) == pytest.approx(0.266667, abs=1e-6)

    def test_before_first_event(self):
        """Inside the domain but below the first event score the curve is 1."""
        episodes = episodes_of([0.05, 0.1, 0.4, 0.7], [0, 1, 1, 0])
        curve = estimators.product_limit(dataset.risk_table(episodes))
        assert curve.evaluate(0.07) == 1.0

    def test_outside_domain(self, km_episodes):
        """Scores outside the observed range give NaN."""
        curve = estimators.product_limit(dataset.risk_table(km_episodes))
        assert np.isnan(curve.evaluate(0.05))
        assert np.isnan(curve.evaluate(0.95))

    def test_vectorised(self, km_episodes):
        """Arrays evaluate elementwise."""
        curve = estimators.product_limit(dataset.risk_table(km_episodes))
        values = curve.evaluate(np.array([0.0, 0.2, 0.8]))
        assert np.isnan(values[0])
        np.testing.assert_allclose(values[1:], [0.8, 0.266667], atol=1e-6)


class TestNelsonAalen:
    def test_hand_computed(self, km_table):
        """A = 1/5 + 1/3 + 1/2 with variance 1/25 + 1/9 + 1/4."""
        curve = estimators.nelson_aalen(km_table)
        assert curve.estimate[-1] == pytest.approx(1.033333, abs=1e-6)
        assert curve.variance[-1] == pytest.approx(0.401111, abs=1e-6)
        np.testing.assert_allclose(curve.increments, [1 / 5, 1 / 3, 1 / 2])

    def test_bounds(self, km_table):
        """The lower bound is clipped at zero."""
        curve = estimators.nelson_aalen(km_table)
        assert np.all(curve.ci_low >= 0.0)
        assert np.all(curve.ci_high > curve.estimate)

    def test_evaluate(self):
        """Zero below the first event, NaN beyond the domain."""
        table = RiskTable.from_rows(
            [(0.1, 1, 5), (0.4, 1, 3), (0.7, 1, 2)], domain=(0.0, 0.9)
        )
        curve = estimators.nelson_aalen(table)
        assert curve.evaluate(0.05) == 0.0
        assert curve.evaluate(0.45) == pytest.approx(1 / 5 + 1 / 3)
        assert np.isnan(curve.evaluate(1.0))

    def test_product_integral(self):
        """The product-limit curve is the product integral of the hazard increments."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            scores = rng.uniform(0, 1, n)
            events = (rng.random(n) < 0.6).astype(int)
            events[0] = 1
            table = dataset.risk_table(episodes_of(scores, events))
            inclusion = estimators.product_limit(table)
            hazard = estimators.nelson_aalen(table)
            np.testing.assert_allclose(
                inclusion.estimate,
                np.cumprod(1.0 - hazard.increments),
                rtol=1e-12,
                atol=1e-15,
            )


class TestDerivedInclusion:
    def test_exponential_inclusion(self, km_table):
        """exp(-A) stays above the product-limit curve."""
        hazard = estimators.nelson_aalen(km_table)
        curve = estimators.exponential_inclusion(hazard)
        np.testing.assert_allclose(curve.estimate, np.exp(-hazard.estimate))
        assert np.all(curve.estimate >= estimators.product_limit(km_table).estimate)
        assert np.all(curve.ci_low <= curve.estimate)
        assert np.all(curve.estimate <= curve.ci_high)

    def test_conditional_inclusion(self, km_table):
        """I(0.7 | 0.4) = I(0.7) / I(0.4)."""
        curve = estimators.product_limit(km_table)
        assert estimators.conditional_inclusion(curve, 0.4, 0.7) == pytest.approx(0.5)

    def test_conditional_needs_ordered_scores(self, km_table):
        """v must exceed u."""
        curve = estimators.product_limit(km_table)
        with pytest.raises(ValidationError):
            estimators.conditional_inclusion(curve, 0.5, 0.5)

    def test_conditional_outside_domain(self, km_table):
        """Scores outside the domain give NaN."""
        curve = estimators.product_limit(km_table)
        assert np.isnan(estimators.conditional_inclusion(curve, 0.4, 0.95))

    def test_conditional_zero_denominator(self):
        """Conditioning on a score where inclusion is zero fails."""
        table = RiskTable.from_rows([(0.1, 1, 2), (0.5, 1, 1)], domain=(0.1, 1.0))
        curve = estimators.product_limit(table)
        with pytest.raises(NumericError):
            estimators.conditional_inclusion(curve, 0.6, 0.8)
