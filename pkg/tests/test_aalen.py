import numpy as np
import pytest

import scorehazard.aalen as aalen
import scorehazard.dataset as dataset
import scorehazard.estimators as estimators
from scorehazard.dataset import EpisodeSet
from scorehazard.exceptions import (
    EmptyEventsError,
    EstimabilityError,
    UnknownCovariateError,
)


def normal_episodes(seed, n=40, p=2):
    rng = np.random.default_rng(seed)
    events = (rng.random(n) < 0.7).astype(int)
    events[0] = 1
    names = tuple(f"x{k + 1}" for k in range(p))
    return EpisodeSet(rng.uniform(0, 1, n), events, rng.normal(size=(n, p)), names)


class TestAalenFit:
    def test_intercept_only_is_nelson_aalen(self, km_episodes):
        """Without covariates the intercept curve is the Nelson-Aalen estimate."""
        fit = aalen.aalen_fit(km_episodes)
        hazard = estimators.nelson_aalen(dataset.risk_table(km_episodes))
        assert fit.covariate_names == ("intercept",)
        np.testing.assert_allclose(fit.cumulative[:, 0], hazard.estimate, atol=1e-12)
        np.testing.assert_allclose(fit.variance[:, 0], hazard.variance, atol=1e-12)

    def test_two_groups(self, make_synthetic):
        """A binary covariate's curve sums the differences of the group rates."""
        episodes = make_synthetic(300, [0.5], seed=1)
        fit = aalen.aalen_fit(episodes)
        z = episodes.covariates[:, 0]
        intercept = 0.0
        difference = 0.0
        for k, s in enumerate(fit.scores):
            at_risk = episodes.scores >= s
            jumps = (episodes.scores == s) & (episodes.events == 1)
            rate0 = np.sum(jumps & (z == 0)) / np.sum(at_risk & (z == 0))
            rate1 = np.sum(jumps & (z == 1)) / np.sum(at_risk & (z == 1))
            intercept += rate0
            difference += rate1 - rate0
            assert fit.cumulative[k, 0] == pytest.approx(intercept, abs=1e-10)
            assert fit.cumulative[k, 1] == pytest.approx(difference, abs=1e-10)

    def test_residuals_orthogonal(self):
        """Each increment solves the normal equations of its risk set."""
        episodes = normal_episodes(8)
        fit = aalen.aalen_fit(episodes)
        for k, s in enumerate(fit.scores):
            at_risk = episodes.scores >= s
            x = np.column_stack(
                [np.ones(at_risk.sum()), episodes.covariates[at_risk]]
            )
            jumps = ((episodes.scores == s) & (episodes.events == 1))[at_risk]
            residual = jumps - x @ fit.increments[k]
            np.testing.assert_allclose(x.T @ residual, 0.0, atol=1e-9)

    def test_shift_equivariance(self):
        """Shifting a covariate by c moves the intercept by -c B_z only."""
        episodes = normal_episodes(12, p=1)
        shifted = episodes.with_covariates(episodes.covariates + 3.0)
        base = aalen.aalen_fit(episodes)
        moved = aalen.aalen_fit(shifted)
        np.testing.assert_array_equal(moved.scores, base.scores)
        np.testing.assert_allclose(
            moved.cumulative[:, 1], base.cumulative[:, 1], rtol=1e-8, atol=1e-8
        )
        np.testing.assert_allclose(
            moved.cumulative[:, 0],
            base.cumulative[:, 0] - 3.0 * base.cumulative[:, 1],
            rtol=1e-8,
            atol=1e-8,
        )

    def test_monotone_transform_invariance(self):
        """Only the order of the scores matters; the curves just move along s."""
        episodes = normal_episodes(21)
        moved_episodes = episodes.with_scores(np.exp(5 * episodes.scores) - 3.0)
        base = aalen.aalen_fit(episodes)
        moved = aalen.aalen_fit(moved_episodes)
        np.testing.assert_allclose(moved.scores, np.exp(5 * base.scores) - 3.0)
        np.testing.assert_allclose(
            moved.cumulative, base.cumulative, rtol=1e-10, atol=1e-12
        )
        np.testing.assert_allclose(
            moved.variance, base.variance, rtol=1e-10, atol=1e-12
        )

    def test_stops_at_singular_design(self, caplog):
        """Once one group leaves the risk set the curves stop."""
        episodes = EpisodeSet(
            [0.1, 0.2, 0.3, 0.4, 0.5],
            [1, 1, 1, 1, 1],
            [[1.0], [0.0], [1.0], [0.0], [0.0]],
            ("z",),
        )
        fit = aalen.aalen_fit(episodes)
        assert fit.last_estimable_score == 0.3
        np.testing.assert_array_equal(fit.scores, [0.1, 0.2, 0.3])
        assert np.all(fit.scores <= fit.last_estimable_score)
        assert "Design singular" in caplog.text

    def test_too_few_at_risk(self):
        """Two episodes cannot carry an intercept and two covariates."""
        episodes = EpisodeSet(
            [0.1, 0.2], [1, 0], [[1.0, 0.0], [0.0, 1.0]], ("a", "b")
        )
        with pytest.raises(EstimabilityError):
            aalen.aalen_fit(episodes)

    def test_singular_at_first_score(self):
        """A constant covariate is collinear with the intercept."""
        episodes = EpisodeSet(
            [0.1, 0.2, 0.3], [1, 1, 0], [[2.0], [2.0], [2.0]], ("c",)
        )
        with pytest.raises(EstimabilityError, match="singular"):
            aalen.aalen_fit(episodes)

    def test_no_events(self):
        """An additive fit needs at least one event."""
        episodes = EpisodeSet([0.1, 0.2], [0, 0], [[1.0], [0.0]], ("z",))
        with pytest.raises(EmptyEventsError):
            aalen.aalen_fit(episodes)

    def test_to_frame(self):
        """Long format has one block of rows per curve."""
        fit = aalen.aalen_fit(normal_episodes(3))
        frame = fit.to_frame()
        assert list(frame.columns) == ["covariate", "score", "B_cum", "variance"]
        assert len(frame) == 3 * fit.scores.size
        assert list(frame["covariate"].unique()) == ["intercept", "x1", "x2"]


class TestCoefficientCurve:
    def test_bands(self):
        """Bands are B -/+ z sqrt(variance)."""
        fit = aalen.aalen_fit(normal_episodes(5))
        curve = aalen.coefficient_curve(fit, "x2", z=2.0)
        q = fit.index("x2")
        np.testing.assert_allclose(curve.estimate, fit.cumulative[:, q])
        np.testing.assert_allclose(
            curve.ci_high - curve.estimate, 2.0 * np.sqrt(fit.variance[:, q])
        )
        assert np.all(curve.ci_low <= curve.ci_high)

    def test_unknown_covariate(self):
        """Asking for a curve the fit does not hold fails."""
        fit = aalen.aalen_fit(normal_episodes(5))
        with pytest.raises(UnknownCovariateError, match="missing"):
            aalen.coefficient_curve(fit, "missing")
