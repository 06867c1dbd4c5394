"""Scored observations, analysis episodes and risk tables.

A classifier's output score is used in place of time. Observations are
responders (in the modeled class), non-responders (out of it) or unlabeled.
Non-responders sit in an absorbing state and are truncated from the analysis;
unlabeled rows and the lookback rows that precede a responder's terminal row
are kept as censored episodes.

Typical flow::

    import scorehazard as sh

    records = sh.load_data.load_records("scored.csv")
    episodes = sh.dataset.build_episodes(records)
    table = sh.dataset.risk_table(episodes)
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from scorehazard.exceptions import (
    EmptyEventsError,
    UnknownCovariateError,
    ValidationError,
)

LOG = logging.getLogger(__name__)


class Label(str, Enum):
    """Response state of an observation."""

    RESPONDER = "responder"
    NON_RESPONDER = "non_responder"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class ScoredRecord:
    """One scored row of one observation.

    Attributes:
        observation_id: Identifier shared by all rows of the same observation.
        score: Classifier output used as the process index.
        label: Response state of the observation.
        is_terminal: True only on the final row of a responder's series.
        covariates: Covariate name to value, in column order.
    """

    observation_id: str
    score: float
    label: Label
    is_terminal: bool
    covariates: Mapping[str, float] = field(default_factory=dict)


class RecordSet:
    """Validated collection of scored records sharing one covariate set.

    Attributes:
        records: The records, in input order.
        covariate_names: Ordered covariate names common to every record.
        metadata: Free-form provenance (normalization constants and the like).

    Raises:
        ValidationError: On a non-finite score or covariate, differing
            covariate sets, a terminal flag on a non-responder row, or more
            than one terminal row per observation.
    """

    def __init__(
        self,
        records: Iterable[ScoredRecord],
        covariate_names: Optional[Sequence[str]] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> None:
        self.records: Tuple[ScoredRecord, ...] = tuple(records)
        if covariate_names is None:
            covariate_names = (
                list(self.records[0].covariates) if self.records else []
            )
        self.covariate_names: Tuple[str, ...] = tuple(covariate_names)
        self.metadata: Dict[str, Any] = dict(metadata or {})
        self._validate()

    def _validate(self) -> None:
        expected = set(self.covariate_names)
        terminal_counts: Counter = Counter()
        for index, record in enumerate(self.records):
            if not math.isfinite(record.score):
                raise ValidationError(f"record {index}: score is not finite")
            if set(record.covariates) != expected:
                raise ValidationError(
                    f"record {index} ({record.observation_id}): covariates "
                    f"{sorted(record.covariates)} differ from {sorted(expected)}"
                )
            for name, value in record.covariates.items():
                if not math.isfinite(value):
                    raise ValidationError(
                        f"record {index}: covariate {name!r} is not finite"
                    )
            if record.is_terminal:
                if record.label is not Label.RESPONDER:
                    raise ValidationError(
                        f"record {index}: terminal flag on a "
                        f"{record.label.value} row"
                    )
                terminal_counts[record.observation_id] += 1
        repeated = [oid for oid, count in terminal_counts.items() if count > 1]
        if repeated:
            raise ValidationError(
                f"observations with more than one terminal row: {repeated[:5]}"
            )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def covariate_matrix(self) -> np.ndarray:
        """Return the covariates as an (n, p) float array in name order."""
        return np.array(
            [[r.covariates[name] for name in self.covariate_names] for r in self],
            dtype=float,
        ).reshape(len(self), len(self.covariate_names))

    def to_frame(self) -> pd.DataFrame:
        """Return the records in the canonical column layout."""
        rows = [
            {
                "id": r.observation_id,
                "score": r.score,
                "label": r.label.value,
                "terminal": int(r.is_terminal),
                **{name: r.covariates[name] for name in self.covariate_names},
            }
            for r in self.records
        ]
        columns = ["id", "score", "label", "terminal", *self.covariate_names]
        return pd.DataFrame(rows, columns=columns)


def _frozen(array: Any, dtype: Any) -> np.ndarray:
    out = np.array(array, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EpisodeSet:
    """Analysis-ready episodes: score, event indicator and covariate vector.

    Attributes:
        scores: (n,) episode scores.
        events: (n,) 0/1 event indicators.
        covariates: (n, p) covariate matrix.
        covariate_names: Names of the p covariate columns.
    """

    scores: np.ndarray
    events: np.ndarray
    covariates: np.ndarray
    covariate_names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        scores = _frozen(self.scores, float).reshape(-1)
        events = _frozen(self.events, int).reshape(-1)
        covariates = _frozen(self.covariates, float).reshape(
            scores.size, len(self.covariate_names)
        )
        covariates.setflags(write=False)
        if events.size != scores.size:
            raise ValidationError("scores and events differ in length")
        if np.any((events != 0) & (events != 1)):
            raise ValidationError("event indicators must be 0 or 1")
        if not np.all(np.isfinite(scores)):
            raise ValidationError("episode scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "events", events)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "covariate_names", tuple(self.covariate_names))

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def covariate_matrix(self) -> np.ndarray:
        return self.covariates

    def select(self, names: Sequence[str]) -> "EpisodeSet":
        """Return a copy holding only the named covariate columns, in that order.

        Raises:
            UnknownCovariateError: If a name is not a covariate of this set.
        """
        index = []
        for name in names:
            if name not in self.covariate_names:
                raise UnknownCovariateError(f"unknown covariate {name!r}")
            index.append(self.covariate_names.index(name))
        return EpisodeSet(
            self.scores, self.events, self.covariates[:, index], tuple(names)
        )

    def with_scores(self, scores: np.ndarray) -> "EpisodeSet":
        """Return a copy with the scores replaced (same order)."""
        return EpisodeSet(scores, self.events, self.covariates, self.covariate_names)

    def with_covariates(self, covariates: np.ndarray) -> "EpisodeSet":
        """Return a copy with the covariate matrix replaced (same names)."""
        return EpisodeSet(self.scores, self.events, covariates, self.covariate_names)

    def require_events(self) -> None:
        """Raise EmptyEventsError when there is no event episode."""
        if self.n_events == 0:
            raise EmptyEventsError("no responder events")


def build_episodes(records: RecordSet) -> EpisodeSet:
    """Apply the truncation and censoring policy to a record set.

    Responder terminal rows become events, responder non-terminal rows and
    unlabeled rows become censored episodes, and non-responder rows are
    dropped. Each lookback row is its own censored episode.

    Args:
        records: Validated records.

    Returns:
        EpisodeSet: Episodes in input order.

    Raises:
        ValidationError: If a responder observation has no terminal row.
    """
    terminal_ids = {r.observation_id for r in records if r.is_terminal}
    missing: List[str] = sorted(
        {
            r.observation_id
            for r in records
            if r.label is Label.RESPONDER and r.observation_id not in terminal_ids
        }
    )
    if missing:
        raise ValidationError(
            f"responder observations without a terminal row: {missing[:5]}"
        )

    kept = [r for r in records if r.label is not Label.NON_RESPONDER]
    names = records.covariate_names
    scores = np.array([r.score for r in kept], dtype=float)
    events = np.array([int(r.is_terminal) for r in kept], dtype=int)
    covariates = np.array(
        [[r.covariates[name] for name in names] for r in kept], dtype=float
    ).reshape(len(kept), len(names))

    LOG.info(
        "Built %d episodes (%d events) from %d records",
        len(kept),
        int(events.sum()),
        len(records),
    )
    return EpisodeSet(scores, events, covariates, names)


@dataclass(frozen=True)
class RiskTable:
    """Distinct event scores with event, at-risk and censored counts.

    Row i covers the score interval [s_i, s_(i+1)). ``censored[i]`` counts the
    censored episodes in that interval, so ``at_risk[i+1] = at_risk[i] -
    events[i] - censored[i]``.

    Attributes:
        scores: Strictly increasing distinct event scores s_i.
        events: Event counts d_i.
        at_risk: Risk-set sizes Y_i (episodes with score >= s_i).
        censored: Censored counts c_i in [s_i, s_(i+1)).
        n_total: Number of episodes the table was built from.
        domain: (s_min, s_max) over all episode scores; defaults to the
            event score range.
    """

    scores: np.ndarray
    events: np.ndarray
    at_risk: np.ndarray
    censored: np.ndarray
    n_total: int
    domain: Optional[Tuple[float, float]] = None

    def __post_init__(self) -> None:
        for name, dtype in (
            ("scores", float),
            ("events", int),
            ("at_risk", int),
            ("censored", int),
        ):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        if self.scores.size == 0:
            raise EmptyEventsError("no responder events")
        if np.any(np.diff(self.scores) <= 0):
            raise ValidationError("risk table scores must be strictly increasing")
        if np.any(self.events < 1):
            raise ValidationError("every risk table row needs at least one event")
        if np.any(self.at_risk < self.events):
            raise ValidationError("at-risk count below event count")
        if np.any(self.censored < 0):
            raise ValidationError("censored counts must be non-negative")
        if np.any(np.diff(self.at_risk) > 0):
            raise ValidationError("at-risk counts must be non-increasing")
        if self.at_risk[0] > self.n_total:
            raise ValidationError("at-risk count exceeds the number of episodes")
        if self.domain is None:
            object.__setattr__(
                self, "domain", (float(self.scores[0]), float(self.scores[-1]))
            )

    def __len__(self) -> int:
        return int(self.scores.size)

    @classmethod
    def from_rows(
        cls,
        rows: Sequence[Tuple[float, int, int]],
        n_total: Optional[int] = None,
        domain: Optional[Tuple[float, float]] = None,
    ) -> "RiskTable":
        """Build a table from (s_i, d_i, Y_i) triples; censored counts are implied."""
        scores = np.array([row[0] for row in rows], dtype=float)
        events = np.array([row[1] for row in rows], dtype=int)
        at_risk = np.array([row[2] for row in rows], dtype=int)
        following = np.append(at_risk[1:], 0) if at_risk.size else at_risk
        censored = at_risk - events - following
        if n_total is None:
            n_total = int(at_risk[0]) if at_risk.size else 0
        return cls(scores, events, at_risk, censored, n_total, domain)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "score": self.scores,
                "events": self.events,
                "at_risk": self.at_risk,
                "censored": self.censored,
            }
        )


def risk_table(episodes: EpisodeSet) -> RiskTable:
    """Tabulate distinct event scores with their event and at-risk counts.

    The risk set at s_i holds every episode with score >= s_i, so a censored
    episode tied with an event score is still at risk there.

    Args:
        episodes: Episodes with at least one event.

    Returns:
        RiskTable: One row per distinct event score, ascending.

    Raises:
        EmptyEventsError: If no episode is an event.
    """
    episodes.require_events()
    ordered = np.sort(episodes.scores)
    event_scores, events = np.unique(
        episodes.scores[episodes.events == 1], return_counts=True
    )
    n = ordered.size
    at_risk = n - np.searchsorted(ordered, event_scores, side="left")

    censored_scores = np.sort(episodes.scores[episodes.events == 0])
    bounds = np.searchsorted(censored_scores, event_scores, side="left")
    upper = np.append(bounds[1:], censored_scores.size)
    censored = upper - bounds

    LOG.debug("Risk table with %d distinct event scores", event_scores.size)
    return RiskTable(
        event_scores,
        events,
        at_risk,
        censored,
        n,
        (float(ordered[0]), float(ordered[-1])),
    )
