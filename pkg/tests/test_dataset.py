import numpy as np
import pytest

import scorehazard.dataset as dataset
from scorehazard.dataset import EpisodeSet, Label, RecordSet, RiskTable, ScoredRecord
from scorehazard.exceptions import (
    EmptyEventsError,
    UnknownCovariateError,
    ValidationError,
)


def record(oid, score, label, terminal=False, **covariates):
    return ScoredRecord(oid, score, Label(label), terminal, covariates)


class TestRecordSet:
    def test_valid_records(self):
        """Records with a common covariate set are accepted in input order."""
        records = RecordSet(
            [
                record("a", 0.2, "responder", x=1.0),
                record("a", 0.9, "responder", True, x=2.0),
                record("b", 0.5, "unlabeled", x=0.0),
            ]
        )
        assert len(records) == 3
        assert records.covariate_names == ("x",)
        np.testing.assert_array_equal(records.covariate_matrix(), [[1.0], [2.0], [0.0]])

    def test_non_finite_score(self):
        """A NaN score is rejected."""
        with pytest.raises(ValidationError, match="score"):
            RecordSet([record("a", float("nan"), "unlabeled")])

    def test_differing_covariates(self):
        """Every record must carry the same covariate names."""
        with pytest.raises(ValidationError, match="differ"):
            RecordSet(
                [
                    record("a", 0.1, "unlabeled", x=1.0),
                    record("b", 0.2, "unlabeled", y=1.0),
                ]
            )

    def test_terminal_on_non_responder(self):
        """Only responder rows may be terminal."""
        with pytest.raises(ValidationError, match="terminal"):
            RecordSet([record("a", 0.1, "non_responder", True)])

    def test_two_terminal_rows(self):
        """An observation has at most one terminal row."""
        with pytest.raises(ValidationError, match="more than one terminal"):
            RecordSet(
                [
                    record("a", 0.1, "responder", True),
                    record("a", 0.2, "responder", True),
                ]
            )

    def test_to_frame_layout(self):
        """Frames use the canonical column order."""
        frame = RecordSet([record("a", 0.9, "responder", True, x=2.0)]).to_frame()
        assert list(frame.columns) == ["id", "score", "label", "terminal", "x"]
        assert frame.loc[0, "terminal"] == 1
        assert frame.loc[0, "label"] == "responder"


class TestBuildEpisodes:
    def test_lookback_rows_censored(self):
        """A responder series gives censored rows and one event at the terminal row."""
        records = RecordSet(
            [
                record("d", 0.2, "responder"),
                record("d", 0.4, "responder"),
                record("d", 0.9, "responder", True),
            ]
        )
        episodes = dataset.build_episodes(records)
        np.testing.assert_array_equal(episodes.scores, [0.2, 0.4, 0.9])
        np.testing.assert_array_equal(episodes.events, [0, 0, 1])

    def test_non_responders_truncated(self):
        """Non-responder rows produce no episodes."""
        records = RecordSet(
            [record("n", 0.3, "non_responder"), record("n", 0.6, "non_responder")]
        )
        assert len(dataset.build_episodes(records)) == 0

    def test_unlabeled_censored(self):
        """A single unlabeled row becomes a censored episode."""
        episodes = dataset.build_episodes(RecordSet([record("u", 0.5, "unlabeled")]))
        np.testing.assert_array_equal(episodes.scores, [0.5])
        np.testing.assert_array_equal(episodes.events, [0])

    def test_responder_without_terminal(self):
        """A responder series must end in a terminal row."""
        with pytest.raises(ValidationError, match="without a terminal"):
            dataset.build_episodes(RecordSet([record("d", 0.2, "responder")]))

    def test_cardinality(self):
        """Episodes = responder rows + unlabeled rows."""
        records = RecordSet(
            [
                record("d", 0.2, "responder"),
                record("d", 0.9, "responder", True),
                record("u", 0.5, "unlabeled"),
                record("n", 0.4, "non_responder"),
            ]
        )
        assert len(dataset.build_episodes(records)) == 3


class TestEpisodeSet:
    def test_select_reorders(self):
        """select returns the named columns in the requested order."""
        episodes = EpisodeSet([0.1, 0.2], [1, 0], [[1.0, 2.0], [3.0, 4.0]], ("a", "b"))
        selected = episodes.select(["b", "a"])
        assert selected.covariate_names == ("b", "a")
        np.testing.assert_array_equal(selected.covariates, [[2.0, 1.0], [4.0, 3.0]])

    def test_select_unknown(self):
        """Unknown names raise UnknownCovariateError, which is also a KeyError."""
        episodes = EpisodeSet([0.1], [1], [[1.0]], ("a",))
        with pytest.raises(KeyError):
            episodes.select(["missing"])
        with pytest.raises(UnknownCovariateError, match="missing"):
            episodes.select(["missing"])

    def test_events_must_be_binary(self):
        """Event indicators outside {0, 1} are rejected."""
        with pytest.raises(ValidationError):
            EpisodeSet([0.1], [2], np.zeros((1, 0)), ())

    def test_read_only(self):
        """Arrays are frozen."""
        episodes = EpisodeSet([0.1], [1], np.zeros((1, 0)), ())
        with pytest.raises(ValueError):
            episodes.scores[0] = 1.0


class TestRiskTable:
    def test_hand_count(self, km_episodes):
        """Rows (0.1, 1, 5), (0.4, 1, 3), (0.7, 1, 2)."""
        table = dataset.risk_table(km_episodes)
        np.testing.assert_array_equal(table.scores, [0.1, 0.4, 0.7])
        np.testing.assert_array_equal(table.events, [1, 1, 1])
        np.testing.assert_array_equal(table.at_risk, [5, 3, 2])
        np.testing.assert_array_equal(table.censored, [1, 0, 1])
        assert table.n_total == 5
        assert table.domain == (0.1, 0.9)

    def test_tied_events(self):
        """Two events at 0.4 share one row with d = 2."""
        episodes = EpisodeSet([0.1, 0.4, 0.4, 0.8], [1, 1, 1, 0], np.zeros((4, 0)), ())
        table = dataset.risk_table(episodes)
        np.testing.assert_array_equal(table.scores, [0.1, 0.4])
        np.testing.assert_array_equal(table.events, [1, 2])
        np.testing.assert_array_equal(table.at_risk, [4, 3])

    def test_no_censoring(self):
        """All events at distinct scores: Y = 4, 3, 2, 1."""
        episodes = EpisodeSet([0.4, 0.1, 0.3, 0.2], [1, 1, 1, 1], np.zeros((4, 0)), ())
        table = dataset.risk_table(episodes)
        np.testing.assert_array_equal(table.at_risk, [4, 3, 2, 1])

    def test_censored_tie_is_at_risk(self):
        """A censored episode tied with an event score counts in that risk set."""
        episodes = EpisodeSet([0.5, 0.5, 0.9], [1, 0, 1], np.zeros((3, 0)), ())
        table = dataset.risk_table(episodes)
        np.testing.assert_array_equal(table.at_risk, [3, 1])
        np.testing.assert_array_equal(table.censored, [1, 0])

    def test_no_events(self):
        """A table needs at least one event."""
        episodes = EpisodeSet([0.1, 0.2], [0, 0], np.zeros((2, 0)), ())
        with pytest.raises(EmptyEventsError, match="no responder events"):
            dataset.risk_table(episodes)

    def test_brute_force_and_permutation(self):
        """Counts match a direct re-count and ignore input order."""
        rng = np.random.default_rng(3)
        scores = np.round(rng.uniform(0, 1, 60), 2)
        events = (rng.random(60) < 0.6).astype(int)
        events[0] = 1
        episodes = EpisodeSet(scores, events, np.zeros((60, 0)), ())
        table = dataset.risk_table(episodes)

        assert table.events.sum() == events.sum()
        for s, y in zip(table.scores, table.at_risk):
            assert y == np.sum(scores >= s)

        order = rng.permutation(60)
        shuffled = dataset.risk_table(
            EpisodeSet(scores[order], events[order], np.zeros((60, 0)), ())
        )
        np.testing.assert_array_equal(shuffled.at_risk, table.at_risk)
        np.testing.assert_array_equal(shuffled.censored, table.censored)

    def test_invalid_rows(self):
        """At-risk counts may not grow."""
        with pytest.raises(ValidationError):
            RiskTable.from_rows([(0.1, 1, 3), (0.2, 1, 4)], n_total=5)
        with pytest.raises(ValidationError):
            RiskTable.from_rows([(0.2, 1, 3), (0.1, 1, 2)])
