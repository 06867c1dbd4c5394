"""Additive hazards model with score-dependent cumulative coefficients.

At every distinct event score the episodes still at risk are regressed on
their covariates by least squares; the increments add up to the cumulative
regression functions B_q(s). Plotted against score, the slope of B_q shows
where covariate q raises or lowers the chance of response.

Examples:
    ```python
    import scorehazard as sh

    fit = sh.aalen.aalen_fit(episodes)
    curve = sh.aalen.coefficient_curve(fit, "smart_242")
    ```
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from scorehazard.dataset import EpisodeSet
from scorehazard.exceptions import EstimabilityError, UnknownCovariateError

LOG = logging.getLogger(__name__)

INTERCEPT = "intercept"
SINGULAR_RATIO = 1e-10


@dataclass(frozen=True)
class AalenFit:
    """Cumulative regression functions of the additive model.

    Attributes:
        covariate_names: ``"intercept"`` followed by the covariates.
        scores: Event scores up to ``last_estimable_score``.
        cumulative: (m, q) array, B_q at each score.
        variance: (m, q) array, the variance of B_q at each score.
        last_estimable_score: Last event score with a non-singular design.
    """

    covariate_names: Tuple[str, ...]
    scores: np.ndarray
    cumulative: np.ndarray
    variance: np.ndarray
    last_estimable_score: float

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.cumulative, axis=0, prepend=0.0)

    def index(self, covariate: str) -> int:
        try:
            return self.covariate_names.index(covariate)
        except ValueError:
            raise UnknownCovariateError(
                f"unknown covariate {covariate!r}; "
                f"fit holds {list(self.covariate_names)}"
            ) from None

    def to_frame(self) -> pd.DataFrame:
        """Long format: covariate, score, B_cum, variance."""
        frames = [
            pd.DataFrame(
                {
                    "covariate": name,
                    "score": self.scores,
                    "B_cum": self.cumulative[:, q],
                    "variance": self.variance[:, q],
                }
            )
            for q, name in enumerate(self.covariate_names)
        ]
        return pd.concat(frames, ignore_index=True)


@dataclass(frozen=True)
class CoefficientCurve:
    covariate: str
    scores: np.ndarray
    estimate: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


def _least_squares_operator(design: np.ndarray) -> np.ndarray:
    """Return (X^T X)^-1 X^T, or raise LinAlgError when X is rank deficient."""
    u, sigma, vt = scipy.linalg.svd(design, full_matrices=False)
    if sigma.size < design.shape[1] or sigma.min() < SINGULAR_RATIO * sigma.max():
        raise scipy.linalg.LinAlgError("design is singular")
    return (vt.T / sigma) @ u.T


def aalen_fit(episodes: EpisodeSet) -> AalenFit:
    """Fit the additive hazards model by per-score least squares.

    At each event score s_k the design X holds one row [1, z_j] per episode at
    risk. The increment is dB = (X^T X)^-1 X^T dD, with dD the 0/1 event
    vector at s_k, and the variance grows by the diagonal of
    (X^T X)^-1 X^T diag(dD) X (X^T X)^-1. Accumulation stops at the first
    singular design.

    Args:
        episodes: Episodes with at least one event.

    Returns:
        AalenFit: Cumulative curves for the intercept and each covariate.

    Raises:
        EmptyEventsError: If there is no event.
        EstimabilityError: If the design is singular at the first event score,
            including when no more episodes are at risk there than covariates.
    """
    episodes.require_events()
    names = (INTERCEPT,) + episodes.covariate_names
    q = len(names)

    order = np.argsort(-episodes.scores, kind="mergesort")
    scores = episodes.scores[order]
    events = episodes.events[order]
    design = np.hstack([np.ones((scores.size, 1)), episodes.covariates[order]])
    event_scores = np.unique(scores[events == 1])
    ascending = scores[::-1]
    ends = scores.size - np.searchsorted(ascending, event_scores, side="left")

    if ends[0] <= q - 1:
        raise EstimabilityError(
            f"{ends[0]} episodes at risk at the first event score for {q - 1} "
            "covariates; the additive model needs more at-risk episodes than "
            "covariates"
        )

    cumulative = np.zeros((event_scores.size, q))
    variance = np.zeros((event_scores.size, q))
    running = np.zeros(q)
    running_var = np.zeros(q)
    estimable = 0
    for k, (score, end) in enumerate(zip(event_scores, ends)):
        x = design[:end]
        try:
            operator = _least_squares_operator(x)
        except scipy.linalg.LinAlgError:
            if k == 0:
                raise EstimabilityError(
                    f"design is singular at the first event score {score:g}"
                ) from None
            LOG.warning(
                "Design singular at score %g; cumulative curves stop at %g",
                score,
                event_scores[k - 1],
            )
            break
        jumps = ((scores[:end] == score) & (events[:end] == 1)).astype(float)
        running = running + operator @ jumps
        running_var = running_var + (operator**2) @ jumps
        cumulative[k] = running
        variance[k] = running_var
        estimable = k + 1

    LOG.info(
        "Additive model estimated at %d of %d event scores",
        estimable,
        event_scores.size,
    )
    return AalenFit(
        covariate_names=names,
        scores=event_scores[:estimable],
        cumulative=cumulative[:estimable],
        variance=variance[:estimable],
        last_estimable_score=float(event_scores[estimable - 1]),
    )


def coefficient_curve(
    fit: AalenFit, covariate: str, z: float = 1.96
) -> CoefficientCurve:
    """Return B_q(s) with pointwise bands B_q -/+ z sqrt(variance).

    Raises:
        UnknownCovariateError: If ``covariate`` is not in the fit.
    """
    q = fit.index(covariate)
    estimate = fit.cumulative[:, q]
    half_width = z * np.sqrt(fit.variance[:, q])
    return CoefficientCurve(
        covariate=covariate,
        scores=fit.scores,
        estimate=estimate,
        ci_low=estimate - half_width,
        ci_high=estimate + half_width,
    )
