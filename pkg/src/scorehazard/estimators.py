"""Nonparametric inclusion and cumulative hazard estimators over score.

The inclusion function I(s) = P(S > s) plays the role of a survival function
with the classifier score as the time index. Both estimators work from a
:class:`~scorehazard.dataset.RiskTable` and return right-continuous step
curves that jump at the distinct responder scores.

Examples:
    ```python
    import scorehazard as sh

    table = sh.dataset.risk_table(episodes)
    inclusion = sh.estimators.product_limit(table, confidence_level=0.95)
    hazard = sh.estimators.nelson_aalen(table)
    inclusion.evaluate(0.5)
    ```
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.stats import norm

import scorehazard.config as config
from scorehazard.dataset import RiskTable
from scorehazard.exceptions import NumericError, ValidationError

LOG = logging.getLogger(__name__)

VARIANCE_MODES = ("greenwood", "paper_tau")

ArrayLike = Union[float, np.ndarray]


def normal_quantile(confidence_level: float) -> float:
    """Return z_(1 - alpha/2) for a two-sided interval at ``confidence_level``."""
    if not 0.0 < confidence_level < 1.0:
        raise ValidationError("confidence_level must lie in (0, 1)")
    return float(norm.ppf(0.5 + confidence_level / 2.0))


def _step_lookup(
    grid: np.ndarray, values: np.ndarray, s: ArrayLike, before: float
) -> np.ndarray:
    position = np.searchsorted(grid, np.asarray(s, dtype=float), side="right") - 1
    return np.where(position >= 0, values[np.clip(position, 0, None)], before)


@dataclass(frozen=True)
class InclusionCurve:
    """Product-limit estimate of I(s) with pointwise variance and bounds.

    Attributes:
        scores: Event scores s_i where the curve jumps.
        estimate: I_hat(s_i).
        variance: Variance estimate at s_i, NaN where undefined.
        ci_low: Lower confidence bound, clipped to [0, 1].
        ci_high: Upper confidence bound, clipped to [0, 1].
        domain: (s_min, s_max) of the scores the table was built from.
        confidence_level: Coverage of the bounds.
        variance_mode: ``"greenwood"`` or ``"paper_tau"``.
    """

    scores: np.ndarray
    estimate: np.ndarray
    variance: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    domain: Tuple[float, float]
    confidence_level: float
    variance_mode: str = "greenwood"

    @property
    def variance_defined(self) -> np.ndarray:
        return np.isfinite(self.variance)

    def evaluate(self, s: ArrayLike) -> ArrayLike:
        """Evaluate I_hat at ``s``; 1 before the first jump, NaN outside the domain."""
        values = _step_lookup(self.scores, self.estimate, s, 1.0)
        s = np.asarray(s, dtype=float)
        out = np.where((s < self.domain[0]) | (s > self.domain[1]), np.nan, values)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CumulativeHazardCurve:
    """Nelson-Aalen estimate of the cumulative hazard A(s).

    Attributes:
        scores: Event scores s_i.
        estimate: A_hat(s_i).
        variance: sigma^2_A(s_i).
        ci_low: Linear lower bound, clipped at 0.
        ci_high: Linear upper bound.
        domain: (s_min, s_max) of the observed scores.
        confidence_level: Coverage of the bounds.
    """

    scores: np.ndarray
    estimate: np.ndarray
    variance: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    domain: Tuple[float, float]
    confidence_level: float

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.estimate, prepend=0.0)

    def evaluate(self, s: ArrayLike) -> ArrayLike:
        """Evaluate A_hat at ``s``; 0 before the first jump, NaN outside the domain."""
        values = _step_lookup(self.scores, self.estimate, s, 0.0)
        s = np.asarray(s, dtype=float)
        out = np.where((s < self.domain[0]) | (s > self.domain[1]), np.nan, values)
        return float(out) if out.ndim == 0 else out


def product_limit(
    table: RiskTable,
    confidence_level: float = config.confidence_level,
    variance_mode: str = config.variance_mode,
) -> InclusionCurve:
    """Product-limit (Kaplan-Meier) estimate of the inclusion function.

    I_hat(s_k) = prod_(i<=k) (1 - d_i / Y_i). The Greenwood variance is
    I_hat^2 sum d_i / (Y_i (Y_i - d_i)); ``paper_tau`` uses
    I_hat^2 sum 1 / Y_j^2 instead. Bounds are I_hat -/+ z sqrt(variance),
    clipped to [0, 1].

    Args:
        table: Risk table.
        confidence_level: Two-sided coverage in (0, 1).
        variance_mode: ``"greenwood"`` (default) or ``"paper_tau"``.

    Returns:
        InclusionCurve: One point per table row. Once a row has Y_i = d_i the
        Greenwood variance is undefined (NaN) from that row on.
    """
    if variance_mode not in VARIANCE_MODES:
        raise ValidationError(f"unknown variance mode {variance_mode!r}")
    z = normal_quantile(confidence_level)
    d = table.events.astype(float)
    y = table.at_risk.astype(float)

    estimate = np.cumprod(1.0 - d / y)

    if variance_mode == "greenwood":
        exhausted = y == d
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(exhausted, np.nan, d / (y * (y - d)))
        variance = estimate**2 * np.cumsum(terms)
        if exhausted.any():
            LOG.warning(
                "Greenwood variance undefined from score %g on (Y = d)",
                table.scores[np.argmax(exhausted)],
            )
    else:
        variance = estimate**2 * np.cumsum(1.0 / y**2)

    half_width = z * np.sqrt(variance)
    ci_low = np.clip(estimate - half_width, 0.0, 1.0)
    ci_high = np.clip(estimate + half_width, 0.0, 1.0)

    return InclusionCurve(
        scores=table.scores,
        estimate=estimate,
        variance=variance,
        ci_low=ci_low,
        ci_high=ci_high,
        domain=table.domain,
        confidence_level=confidence_level,
        variance_mode=variance_mode,
    )


def nelson_aalen(
    table: RiskTable,
    confidence_level: float = config.confidence_level,
) -> CumulativeHazardCurve:
    """Nelson-Aalen estimate of the cumulative hazard over score.

    A_hat(s_k) = sum_(i<=k) d_i / Y_i with variance sum_(i<=k) d_i / Y_i^2.

    Args:
        table: Risk table.
        confidence_level: Coverage of the linear bounds.

    Returns:
        CumulativeHazardCurve: One point per table row.
    """
    z = normal_quantile(confidence_level)
    d = table.events.astype(float)
    y = table.at_risk.astype(float)
    estimate = np.cumsum(d / y)
    variance = np.cumsum(d / y**2)
    half_width = z * np.sqrt(variance)
    return CumulativeHazardCurve(
        scores=table.scores,
        estimate=estimate,
        variance=variance,
        ci_low=np.clip(estimate - half_width, 0.0, None),
        ci_high=estimate + half_width,
        domain=table.domain,
        confidence_level=confidence_level,
    )


def exponential_inclusion(hazard: CumulativeHazardCurve) -> InclusionCurve:
    """Inclusion curve exp(-A_hat(s)) from a cumulative hazard curve.

    The variance follows from the delta method, I^2 sigma^2_A, and the bounds
    are the transformed hazard bounds.
    """
    estimate = np.exp(-hazard.estimate)
    return InclusionCurve(
        scores=hazard.scores,
        estimate=estimate,
        variance=estimate**2 * hazard.variance,
        ci_low=np.exp(-hazard.ci_high),
        ci_high=np.clip(np.exp(-hazard.ci_low), 0.0, 1.0),
        domain=hazard.domain,
        confidence_level=hazard.confidence_level,
        variance_mode="delta",
    )


def conditional_inclusion(curve: InclusionCurve, u: float, v: float) -> float:
    """Return I(v | u) = I(v) / I(u), the chance of exceeding v given S > u.

    Raises:
        ValidationError: If v <= u.
        NumericError: If I(u) is zero.
    """
    if not v > u:
        raise ValidationError("conditional inclusion needs v > u")
    at_u = curve.evaluate(u)
    at_v = curve.evaluate(v)
    if np.isnan(at_u) or np.isnan(at_v):
        return float("nan")
    if at_u == 0.0:
        raise NumericError(f"inclusion is zero at u={u}")
    return float(at_v / at_u)
