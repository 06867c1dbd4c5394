"""Multiplicative hazards model over score.

The hazard of responding at score s given covariates Z is
alpha(s | Z) = alpha_0(s) exp(beta^T Z). The score only orders the risk sets;
beta is estimated by maximising the Breslow form of the partial likelihood,
where the d_i events tied at s_i share the risk-set sum raised to d_i.

Examples:
    ```python
    import scorehazard as sh

    fit = sh.coxph.cox_fit(episodes)
    print(fit.summary())

    kept, dropped = sh.coxph.collinearity_filter(episodes, threshold=0.95)
    fit = sh.coxph.stepwise_select(episodes.select(kept))
    baseline = sh.coxph.baseline_hazard(fit, episodes)
    ```
"""

import dataclasses
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg
from scipy.stats import chi2, norm

import scorehazard.config as config
from scorehazard.dataset import EpisodeSet, RecordSet
from scorehazard.estimators import normal_quantile
from scorehazard.exceptions import (
    CollinearityError,
    ConvergenceError,
    DimensionalityError,
    FitError,
    NumericError,
    ValidationError,
)

LOG = logging.getLogger(__name__)

MAX_ABS_BETA = 20.0
MAX_FINAL_MOVE = 0.1
MAX_HALVINGS = 10
GRADIENT_TOL = 1e-6


@dataclass(frozen=True)
class SelectionStep:
    """One accepted move of the stepwise search."""

    action: str
    covariate: str
    p_value: float

    def to_dict(self) -> dict:
        return {"action": self.action, "covariate": self.covariate, "p": self.p_value}


@dataclass(frozen=True)
class CoxFit:
    """Fitted proportional hazards model.

    Attributes:
        covariate_names: Names of the fitted covariates, in column order.
        beta: Coefficient estimates.
        covariance: Inverse of the observed information at ``beta``.
        se: Standard errors, sqrt(diag(covariance)).
        z: Wald statistics beta / se.
        p_value: Two-sided normal p-values 2 (1 - Phi(|z|)).
        hazard_ratio: exp(beta).
        log_likelihood: Log partial likelihood at ``beta``.
        null_log_likelihood: Log partial likelihood at beta = 0.
        iterations: Newton-Raphson iterations used.
        converged: Whether the log-likelihood change fell below tolerance.
        n_episodes: Episodes in the fitted data.
        n_events: Event episodes in the fitted data.
        selection_trace: Moves made by :func:`stepwise_select`, if any.
    """

    covariate_names: Tuple[str, ...]
    beta: np.ndarray
    covariance: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    hazard_ratio: np.ndarray
    log_likelihood: float
    null_log_likelihood: float
    iterations: int
    converged: bool
    n_episodes: int = 0
    n_events: int = 0
    selection_trace: Tuple[SelectionStep, ...] = ()

    @classmethod
    def from_estimates(
        cls,
        covariate_names: Sequence[str],
        beta: Sequence[float],
        covariance: Optional[np.ndarray] = None,
        se: Optional[Sequence[float]] = None,
        log_likelihood: float = float("nan"),
        null_log_likelihood: float = float("nan"),
        iterations: int = 0,
        converged: bool = True,
        n_episodes: int = 0,
        n_events: int = 0,
    ) -> "CoxFit":
        """Derive the Wald columns from coefficients and their covariance.

        Either ``covariance`` or ``se`` must be given; ``se`` alone is taken as
        a diagonal covariance.

        Examples:
            ```python
            fit = CoxFit.from_estimates(["smart_197_i"], [0.4998], se=[0.1634])
            fit.hazard_ratio  # array([1.6484...])
            ```
        """
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if covariance is None:
            if se is None:
                raise ValidationError("from_estimates needs covariance or se")
            covariance = np.diag(np.asarray(se, dtype=float) ** 2)
        covariance = np.asarray(covariance, dtype=float).reshape(beta.size, beta.size)
        se = np.sqrt(np.diag(covariance))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = beta / se
        return cls(
            covariate_names=tuple(covariate_names),
            beta=beta,
            covariance=covariance,
            se=se,
            z=z,
            p_value=2.0 * norm.sf(np.abs(z)),
            hazard_ratio=np.exp(beta),
            log_likelihood=float(log_likelihood),
            null_log_likelihood=float(null_log_likelihood),
            iterations=int(iterations),
            converged=bool(converged),
            n_episodes=int(n_episodes),
            n_events=int(n_events),
        )

    def summary(self) -> pd.DataFrame:
        """Coefficient table with columns covariate, coeff, exp_coeff, se, z, p."""
        return pd.DataFrame(
            {
                "covariate": list(self.covariate_names),
                "coeff": self.beta,
                "exp_coeff": self.hazard_ratio,
                "se": self.se,
                "z": self.z,
                "p": self.p_value,
            }
        )

    def confidence_intervals(
        self, confidence_level: float = config.confidence_level
    ) -> pd.DataFrame:
        """Wald intervals beta -/+ z se and their exponentials."""
        half_width = normal_quantile(confidence_level) * self.se
        lower = self.beta - half_width
        upper = self.beta + half_width
        return pd.DataFrame(
            {
                "covariate": list(self.covariate_names),
                "lower": lower,
                "upper": upper,
                "exp_lower": np.exp(lower),
                "exp_upper": np.exp(upper),
            }
        )

    def to_dict(self) -> dict:
        """Plain-type representation used by the JSON writer."""
        return {
            "covariates": self.summary().to_dict(orient="records"),
            "log_likelihood": self.log_likelihood,
            "null_log_likelihood": self.null_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_episodes": self.n_episodes,
            "n_events": self.n_events,
            "selection_trace": [step.to_dict() for step in self.selection_trace],
        }


@dataclass(frozen=True)
class BaselineHazard:
    """Breslow estimate of the baseline cumulative hazard A_0(s).

    Attributes:
        scores: Distinct event scores s_i.
        increments: dA_0(s_i).
        cumulative: A_0(s_i), the running sum of the increments.
    """

    scores: np.ndarray
    increments: np.ndarray
    cumulative: np.ndarray

    def evaluate(self, s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """A_0 at ``s`` as a right-continuous step function (0 before s_1)."""
        s = np.asarray(s, dtype=float)
        position = np.searchsorted(self.scores, s, side="right") - 1
        out = np.where(position >= 0, self.cumulative[np.clip(position, 0, None)], 0.0)
        return float(out) if out.ndim == 0 else out

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "score": self.scores,
                "baseline_hazard": self.increments,
                "cumulative_baseline_hazard": self.cumulative,
            }
        )


@dataclass(frozen=True)
class LikelihoodRatioTest:
    statistic: float
    degrees_of_freedom: int
    p_value: float


@dataclass(frozen=True)
class DroppedCovariate:
    """A covariate removed by :func:`collinearity_filter`.

    ``partner`` is the kept covariate it correlates with, or ``None`` when the
    column has zero variance (``r`` is then NaN).
    """

    name: str
    partner: Optional[str]
    r: float


class _RiskSets:
    """Episodes sorted by descending score with the prefix end of each risk set.

    The risk set of the k-th distinct event score s_k is every episode with
    score >= s_k, which is the first ``ends[k]`` rows in descending order.
    """

    def __init__(self, episodes: EpisodeSet) -> None:
        order = np.argsort(-episodes.scores, kind="mergesort")
        ascending = np.sort(episodes.scores)
        self.covariates = episodes.covariates[order]
        self.events = episodes.events[order]
        self.event_scores, self.tied = np.unique(
            episodes.scores[episodes.events == 1], return_counts=True
        )
        self.ends = ascending.size - np.searchsorted(
            ascending, self.event_scores, side="left"
        )

    def log_sums(self, eta: np.ndarray, values: Optional[np.ndarray] = None):
        """Return log sum exp(eta_j) over each risk set, and optionally the
        risk-set weighted means of the columns of ``values``.

        The running log-sum-exp keeps every partial sum relative to the largest
        linear predictor seen so far, so no exponent is taken of an uncentred
        predictor. Signed values are split into positive and negative parts.
        """
        log_s0 = np.logaddexp.accumulate(eta)[self.ends - 1]
        if values is None:
            return log_s0, None
        with np.errstate(divide="ignore"):
            positive = np.log(np.clip(values, 0.0, None))
            negative = np.log(np.clip(-values, 0.0, None))
        shifted = eta[:, None]
        log_pos = np.logaddexp.accumulate(shifted + positive, axis=0)[self.ends - 1]
        log_neg = np.logaddexp.accumulate(shifted + negative, axis=0)[self.ends - 1]
        means = np.exp(log_pos - log_s0[:, None]) - np.exp(log_neg - log_s0[:, None])
        return log_s0, means


def _check_beta(episodes: EpisodeSet, beta: Sequence[float]) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != len(episodes.covariate_names):
        raise ValidationError(
            f"beta has {beta.size} entries for "
            f"{len(episodes.covariate_names)} covariates"
        )
    return beta


def _partial_loglik(
    risk: _RiskSets, beta: np.ndarray
) -> Tuple[float, np.ndarray, np.ndarray]:
    z = risk.covariates
    n, p = z.shape
    eta = z @ beta
    pairs = (z[:, :, None] * z[:, None, :]).reshape(n, p * p)
    log_s0, means = risk.log_sums(eta, np.hstack([z, pairs]))
    first = means[:, :p]
    second = means[:, p:].reshape(means.shape[0], p, p)
    d = risk.tied.astype(float)

    events = risk.events == 1
    value = float(eta[events].sum() - d @ log_s0)
    gradient = z[events].sum(axis=0) - d @ first
    spread = second - first[:, :, None] * first[:, None, :]
    hessian = -np.einsum("k,kab->ab", d, spread)
    hessian = (hessian + hessian.T) / 2.0

    finite = np.isfinite(value) and np.all(np.isfinite(gradient))
    if not (finite and np.all(np.isfinite(hessian))):
        raise NumericError(f"partial likelihood is not finite at beta={beta.tolist()}")
    return value, gradient, hessian


def partial_loglik(
    episodes: EpisodeSet, beta: Sequence[float]
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Breslow log partial likelihood with its gradient and Hessian.

    value = sum over events of beta^T z_i
            - sum over distinct event scores of d_i log sum_(j in R_i) exp(beta^T z_j)

    Args:
        episodes: Episodes with at least one event.
        beta: Coefficients, one per covariate.

    Returns:
        tuple: (value, gradient, hessian); the Hessian is negative semidefinite.

    Raises:
        EmptyEventsError: If there is no event.
        ValidationError: If ``beta`` does not match the covariate count.
        NumericError: If the result is not finite.
    """
    episodes.require_events()
    beta = _check_beta(episodes, beta)
    return _partial_loglik(_RiskSets(episodes), beta)


def _null_space_covariates(information: np.ndarray, names: Sequence[str]) -> List[str]:
    values, vectors = scipy.linalg.eigh(information)
    scale = max(float(np.max(np.abs(values))), 1.0)
    weak = vectors[:, values <= 1e-10 * scale]
    if weak.size == 0:
        weak = vectors[:, :1]
    return [name for name, row in zip(names, np.abs(weak)) if np.max(row) > 0.1]


def _newton_direction(
    hessian: np.ndarray, gradient: np.ndarray, names: Sequence[str]
) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(-hessian)
    except scipy.linalg.LinAlgError:
        culprits = _null_space_covariates(-hessian, names)
        raise CollinearityError(
            f"information matrix is singular; collinear covariates: {culprits}",
            culprits,
        ) from None
    return scipy.linalg.cho_solve(factor, gradient)


def _diverging(
    names: Sequence[str], beta: np.ndarray, flagged: np.ndarray, limit: float
) -> ConvergenceError:
    return ConvergenceError(
        "coefficients diverge (monotone likelihood): "
        + ", ".join(
            f"{name}={value:.3g}"
            for name, value, size in zip(names, beta, flagged)
            if size > limit
        )
    )


def cox_fit(
    episodes: EpisodeSet,
    tol: float = config.tol,
    max_iter: int = config.max_iter,
) -> CoxFit:
    """Fit beta by Newton-Raphson on the Breslow partial likelihood.

    Covariates are centred and scaled to unit variance before iterating and
    the estimates are mapped back afterwards, so the fit does not depend on
    the units of Z. Iteration starts at beta = 0. Each step solves
    (-H) delta = g and is halved (at most ten times) while it lowers the
    likelihood. The fit has converged once the log-likelihood changes by less
    than ``tol``.

    Args:
        episodes: Episodes to fit; every covariate column is used.
        tol: Convergence threshold on the log-likelihood change.
        max_iter: Maximum number of Newton iterations.

    Returns:
        CoxFit: Estimates, Wald statistics and likelihood values.

    Raises:
        EmptyEventsError: If there is no event.
        DimensionalityError: If there are fewer events than covariates.
        CollinearityError: If a covariate is constant or the information
            matrix is singular.
        ConvergenceError: If some |beta_k| times the range of Z_k passes 20,
            or the likelihood flattens while the predictor still moves, both
            signs of a monotone likelihood; or if the iteration budget runs
            out with a non-vanishing gradient.
    """
    episodes.require_events()
    names = episodes.covariate_names
    p = len(names)
    if episodes.n_events < p:
        raise DimensionalityError(
            f"{episodes.n_events} responder events for {p} covariates; the model "
            "needs at least as many events as covariates"
        )
    if p:
        constant = [
            name for name, span in zip(names, np.ptp(episodes.covariates, axis=0))
            if span == 0
        ]
        if constant:
            raise CollinearityError(
                f"covariate(s) with zero variance: {constant}", constant
            )

    # Newton runs on centred, unit-variance columns; beta is rescaled at the end.
    center = episodes.covariates.mean(axis=0)
    scale = episodes.covariates.std(axis=0)
    standard = episodes.with_covariates((episodes.covariates - center) / scale)
    spread = np.ptp(standard.covariates, axis=0)

    risk = _RiskSets(standard)
    beta = np.zeros(p)
    loglik, gradient, hessian = _partial_loglik(risk, beta)
    null_loglik = loglik
    iterations = 0
    converged = p == 0
    last_move = np.zeros(p)

    while not converged and iterations < max_iter:
        iterations += 1
        step = _newton_direction(hessian, gradient, names)
        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + step
            try:
                new = _partial_loglik(risk, candidate)
            except NumericError:
                new = None
            if new is not None and new[0] >= loglik:
                break
            step = step / 2.0
        if new is None or new[0] < loglik:
            LOG.debug("No ascent after %d halvings; stopping", MAX_HALVINGS)
            converged = True
            break

        if np.any(np.abs(candidate) * spread > MAX_ABS_BETA):
            raise _diverging(
                names, candidate / scale, np.abs(candidate) * spread, MAX_ABS_BETA
            )

        change = new[0] - loglik
        last_move = np.abs(candidate - beta) * spread
        beta = candidate
        loglik, gradient, hessian = new
        LOG.debug(
            "Iteration %d: loglik=%.12g change=%.3g beta=%s",
            iterations,
            loglik,
            change,
            np.array2string(beta / scale, precision=6),
        )
        converged = abs(change) < tol

    # A flat likelihood that still moves the predictor is drifting to infinity.
    if converged and np.any(last_move > MAX_FINAL_MOVE):
        raise _diverging(names, beta / scale, last_move, MAX_FINAL_MOVE)

    if not converged:
        if np.max(np.abs(gradient)) > GRADIENT_TOL:
            raise ConvergenceError(
                f"no convergence in {max_iter} iterations "
                f"(gradient norm {np.linalg.norm(gradient):.3g})"
            )
        LOG.warning("Stopped after %d iterations with a vanishing gradient", max_iter)

    if p:
        try:
            factor = scipy.linalg.cho_factor(-hessian)
        except scipy.linalg.LinAlgError:
            culprits = _null_space_covariates(-hessian, names)
            raise CollinearityError(
                f"information matrix is singular at the optimum; "
                f"collinear covariates: {culprits}",
                culprits,
            ) from None
        covariance = scipy.linalg.cho_solve(factor, np.eye(p))
        covariance = (covariance + covariance.T) / 2.0 / np.outer(scale, scale)
    else:
        covariance = np.zeros((0, 0))

    LOG.info(
        "Cox fit on %d covariates: loglik=%.6f after %d iterations",
        p,
        loglik,
        iterations,
    )
    return CoxFit.from_estimates(
        names,
        beta / scale,
        covariance=covariance,
        log_likelihood=loglik,
        null_log_likelihood=null_loglik,
        iterations=iterations,
        converged=converged,
        n_episodes=len(episodes),
        n_events=episodes.n_events,
    )


def hazard_ratio(fit: CoxFit, z_a: Sequence[float], z_b: Sequence[float]) -> float:
    """Return exp(beta^T (z_a - z_b)), the same at every score."""
    z_a = np.asarray(z_a, dtype=float).reshape(-1)
    z_b = np.asarray(z_b, dtype=float).reshape(-1)
    p = fit.beta.size
    if z_a.size != p or z_b.size != p:
        raise ValidationError(
            f"covariate vectors of length {z_a.size} and {z_b.size}, expected {p}"
        )
    return float(np.exp(fit.beta @ (z_a - z_b)))


def likelihood_ratio_test(fit: CoxFit) -> LikelihoodRatioTest:
    """Test beta = 0 with 2 (l(beta_hat) - l(0)) against chi-squared(p)."""
    df = int(fit.beta.size)
    statistic = max(2.0 * (fit.log_likelihood - fit.null_log_likelihood), 0.0)
    p_value = float(chi2.sf(statistic, df)) if df else 1.0
    return LikelihoodRatioTest(statistic, df, p_value)


def collinearity_filter(
    data: Union[RecordSet, EpisodeSet],
    threshold: float = config.collinearity_threshold,
) -> Tuple[List[str], List[DroppedCovariate]]:
    """Greedy Pearson screen over the covariates in column order.

    A covariate is dropped when its absolute correlation with an already kept
    covariate exceeds ``threshold``. Constant covariates are always dropped.

    Args:
        data: Records or episodes holding the covariates.
        threshold: Correlation threshold in (0, 1].

    Returns:
        tuple: Kept names, and the dropped covariates with their culprits.

    Raises:
        ValidationError: If the threshold is out of range or there are fewer
            than two rows.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValidationError("collinearity threshold must lie in (0, 1]")
    matrix = data.covariate_matrix()
    names = list(data.covariate_names)
    if matrix.shape[0] < 2:
        raise ValidationError("collinearity screening needs at least two rows")

    centred = matrix - matrix.mean(axis=0)
    norms = np.sqrt((centred**2).sum(axis=0))
    kept: List[int] = []
    dropped: List[DroppedCovariate] = []
    for j, name in enumerate(names):
        if norms[j] == 0.0:
            dropped.append(DroppedCovariate(name, None, float("nan")))
            continue
        culprit = None
        for k in kept:
            r = float(centred[:, j] @ centred[:, k] / (norms[j] * norms[k]))
            if abs(r) > threshold:
                culprit = DroppedCovariate(name, names[k], float(np.clip(r, -1, 1)))
                break
        if culprit is None:
            kept.append(j)
        else:
            dropped.append(culprit)

    for item in dropped:
        LOG.info(
            "Dropping collinear covariate %s (partner %s, r=%.4f)",
            item.name,
            item.partner,
            item.r,
        )
    return [names[k] for k in kept], dropped


def stepwise_select(
    episodes: EpisodeSet,
    alpha_in: float = config.alpha_in,
    alpha_out: float = config.alpha_out,
    tol: float = config.tol,
    max_iter: int = config.max_iter,
) -> CoxFit:
    """Forward and backward selection on Wald p-values.

    Each round adds the candidate with the smallest p-value if it is below
    ``alpha_in``, then removes the included covariate with the largest
    p-value if it is above ``alpha_out``, until neither move applies. A
    candidate whose fit fails is skipped with a warning; if every candidate
    fails in the first round the first failure is raised.

    Args:
        episodes: Episodes holding every candidate covariate.
        alpha_in: Entry threshold.
        alpha_out: Removal threshold.
        tol: Passed to :func:`cox_fit`.
        max_iter: Passed to :func:`cox_fit`.

    Returns:
        CoxFit: Fit of the final covariate set, with the moves in
        ``selection_trace``. With no covariate selected the fit is empty.
    """
    if alpha_in > alpha_out:
        LOG.warning(
            "alpha_in %.3g exceeds alpha_out %.3g; selection may cycle",
            alpha_in,
            alpha_out,
        )
    candidates = list(episodes.covariate_names)
    included: List[str] = []
    trace: List[SelectionStep] = []
    seen = {frozenset()}
    first_round = True

    def fit_of(names: Sequence[str]) -> CoxFit:
        return cox_fit(episodes.select(names), tol=tol, max_iter=max_iter)

    while True:
        best: Optional[Tuple[float, str]] = None
        failures: List[FitError] = []
        pool = [name for name in candidates if name not in included]
        for name in pool:
            try:
                fit = fit_of(included + [name])
            except FitError as e:
                LOG.warning("Skipping candidate %s: %s", name, e)
                failures.append(e)
                continue
            p_value = float(fit.p_value[-1])
            if best is None or p_value < best[0]:
                best = (p_value, name)
        if first_round and pool and len(failures) == len(pool) and not included:
            raise failures[0]
        first_round = False

        changed = False
        if best is not None and best[0] < alpha_in:
            included.append(best[1])
            trace.append(SelectionStep("add", best[1], best[0]))
            LOG.info("Stepwise: add %s (p=%.4g)", best[1], best[0])
            changed = True

        if included:
            fit = fit_of(included)
            worst = int(np.argmax(fit.p_value))
            if fit.p_value[worst] > alpha_out:
                name = included.pop(worst)
                trace.append(SelectionStep("remove", name, float(fit.p_value[worst])))
                LOG.info("Stepwise: remove %s (p=%.4g)", name, fit.p_value[worst])
                changed = True

        state = frozenset(included)
        if not changed:
            break
        if state in seen:
            LOG.warning("Stepwise selection revisited %s; stopping", sorted(state))
            break
        seen.add(state)

    final = fit_of(included)
    return dataclasses.replace(final, selection_trace=tuple(trace))


def baseline_hazard(fit: CoxFit, episodes: EpisodeSet) -> BaselineHazard:
    """Breslow baseline hazard: dA_0(s_i) = d_i / sum_(j in R_i) exp(beta^T z_j).

    Args:
        fit: Fit whose coefficients are used.
        episodes: The episodes the fit was made on; extra covariate columns
            are ignored.

    Returns:
        BaselineHazard: Increments and cumulative values at each event score.
    """
    episodes.require_events()
    if episodes.covariate_names != fit.covariate_names:
        episodes = episodes.select(fit.covariate_names)
    if not fit.converged:
        LOG.warning("Baseline hazard computed from a fit that did not converge")
    risk = _RiskSets(episodes)
    log_s0, _ = risk.log_sums(risk.covariates @ fit.beta)
    increments = risk.tied * np.exp(-log_s0)
    return BaselineHazard(risk.event_scores, increments, np.cumsum(increments))


def predict_inclusion(
    fit: CoxFit, baseline: BaselineHazard, z: Sequence[float]
) -> np.ndarray:
    """Inclusion I(s | z) = exp(-A_0(s) exp(beta^T z)) at the baseline scores."""
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != fit.beta.size:
        raise ValidationError(
            f"covariate vector of length {z.size}, expected {fit.beta.size}"
        )
    return np.exp(-baseline.cumulative * np.exp(fit.beta @ z))
