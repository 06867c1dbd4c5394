"""Synthetic scored data with known hazards, and a brute-force maximiser.

Event scores follow an exponential baseline over score, so inverse-transform
sampling is exact: score = -ln(U) / (rate exp(beta^T Z)). Random numbers come
from numpy's Philox counter-based generator, whose stream is fixed by the
seed on every platform. Draws are taken in this order: each covariate column
in turn, the event uniforms, the censoring indicators, and the uniforms that
place each censored observation at an earlier score.

Examples:
    ```python
    import scorehazard as sh

    cfg = sh.synthgen.SynthConfig(
        n=1000,
        true_beta=(0.7,),
        covariate_spec=(sh.synthgen.CovariateSpec.parse("bernoulli:0.5"),),
        seed=7,
    )
    records = sh.synthgen.generate(cfg)
    ```
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from scorehazard.dataset import EpisodeSet, Label, RecordSet, ScoredRecord
from scorehazard.exceptions import UnsupportedError, ValidationError

LOG = logging.getLogger(__name__)

GRID_CHUNK = 4096
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CovariateSpec:
    """Distribution of one synthetic covariate.

    Attributes:
        kind: ``"bernoulli"`` or ``"uniform"``.
        params: ``(p,)`` for bernoulli, ``(a, b)`` for uniform.
    """

    kind: str
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if self.kind == "bernoulli":
            if len(self.params) != 1 or not 0.0 <= self.params[0] <= 1.0:
                raise ValidationError("bernoulli covariate needs p in [0, 1]")
        elif self.kind == "uniform":
            if len(self.params) != 2 or not self.params[0] < self.params[1]:
                raise ValidationError("uniform covariate needs a < b")
        else:
            raise ValidationError(f"unknown covariate kind {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "CovariateSpec":
        """Parse ``bernoulli:p`` or ``uniform:a:b``."""
        kind, *values = text.strip().split(":")
        try:
            params = tuple(float(v) for v in values)
        except ValueError:
            raise ValidationError(f"bad covariate spec {text!r}") from None
        return cls(kind.lower(), params)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "bernoulli":
            return (rng.random(n) < self.params[0]).astype(float)
        return rng.uniform(self.params[0], self.params[1], n)


@dataclass(frozen=True)
class SynthConfig:
    """Settings of a synthetic data set.

    Attributes:
        n: Number of observations.
        true_beta: Log hazard ratio per covariate.
        baseline_rate: Exponential baseline hazard over score.
        censor_fraction: Chance that an observation is turned unlabeled.
        covariate_spec: Distribution of each covariate; defaults to
            bernoulli(0.5) for every coefficient.
        seed: Philox seed, 0 <= seed < 2**64.
    """

    n: int
    true_beta: Tuple[float, ...] = ()
    baseline_rate: float = 1.0
    censor_fraction: float = 0.0
    covariate_spec: Tuple[CovariateSpec, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "true_beta", tuple(float(b) for b in self.true_beta))
        spec = tuple(self.covariate_spec)
        if not spec:
            spec = tuple(CovariateSpec("bernoulli", (0.5,)) for _ in self.true_beta)
        object.__setattr__(self, "covariate_spec", spec)

        if int(self.n) != self.n or self.n < 0:
            raise ValidationError("n must be a non-negative integer")
        if not (math.isfinite(self.baseline_rate) and self.baseline_rate > 0):
            raise ValidationError("baseline_rate must be positive")
        if not 0.0 <= self.censor_fraction < 1.0:
            raise ValidationError("censor_fraction must lie in [0, 1)")
        if len(spec) != len(self.true_beta):
            raise ValidationError(
                f"{len(self.true_beta)} coefficients for {len(spec)} covariates"
            )
        if not all(math.isfinite(b) for b in self.true_beta):
            raise ValidationError("true_beta must be finite")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")

    @property
    def covariate_names(self) -> Tuple[str, ...]:
        return tuple(f"x{k + 1}" for k in range(len(self.true_beta)))


def generate(config: SynthConfig) -> RecordSet:
    """Draw a synthetic record set; the same config always gives the same records.

    Every observation is a single-row responder whose terminal row sits at its
    event score, unless it is censored: then its label becomes ``unlabeled``
    and its score is moved uniformly below the event score.

    Args:
        config: Validated settings.

    Returns:
        RecordSet: ``n`` records with ids ``obs_00000``, ``obs_00001``, ...
    """
    rng = np.random.Generator(np.random.Philox(int(config.seed)))
    n = int(config.n)
    beta = np.asarray(config.true_beta, dtype=float)

    columns = [spec.draw(rng, n) for spec in config.covariate_spec]
    covariates = np.column_stack(columns) if columns else np.zeros((n, 0))
    uniforms = 1.0 - rng.random(n)
    scores = -np.log(uniforms) / (config.baseline_rate * np.exp(covariates @ beta))
    censored = rng.random(n) < config.censor_fraction
    position = rng.random(n)
    scores = np.where(censored, position * scores, scores)

    names = config.covariate_names
    records = [
        ScoredRecord(
            observation_id=f"obs_{i:05d}",
            score=float(scores[i]),
            label=Label.UNLABELED if censored[i] else Label.RESPONDER,
            is_terminal=not censored[i],
            covariates={name: float(covariates[i, k]) for k, name in enumerate(names)},
        )
        for i in range(n)
    ]
    LOG.info(
        "Generated %d observations (%d censored) with seed %d",
        n,
        int(censored.sum()),
        config.seed,
    )
    metadata = {
        "generator": "philox",
        "seed": int(config.seed),
        "true_beta": list(config.true_beta),
        "baseline_rate": float(config.baseline_rate),
        "censor_fraction": float(config.censor_fraction),
        "covariate_spec": [
            ":".join([spec.kind, *(f"{v:g}" for v in spec.params)])
            for spec in config.covariate_spec
        ],
    }
    return RecordSet(records, names, metadata=metadata)


@dataclass(frozen=True)
class GridOptimum:
    """Result of :func:`grid_oracle`.

    Attributes:
        beta: Grid point with the largest log partial likelihood.
        log_likelihood: The likelihood there.
        at_boundary: True when ``beta`` is the first or last grid point.
    """

    beta: float
    log_likelihood: float
    at_boundary: bool

    def __float__(self) -> float:
        return self.beta


def grid_oracle(episodes: EpisodeSet, lo: float, hi: float, step: float) -> GridOptimum:
    """Maximise the single-covariate partial likelihood by exhaustive grid search.

    The likelihood is evaluated straight from its definition, grouping each
    risk set by distinct covariate value:
    l(b) = b sum_events z_i - sum_k d_k log sum_v C_kv exp(b v),
    where C_kv counts the episodes at risk at s_k with covariate value v.
    Ties go to the smallest grid point, so a flat likelihood returns ``lo``.

    Args:
        episodes: Episodes with exactly one covariate and at least one event.
        lo: First grid point.
        hi: Upper end of the grid.
        step: Grid spacing.

    Raises:
        UnsupportedError: If there is not exactly one covariate.
        ValidationError: If ``step`` is not positive or ``hi < lo``.
    """
    if len(episodes.covariate_names) != 1:
        raise UnsupportedError("grid search handles exactly one covariate")
    if not step > 0 or hi < lo:
        raise ValidationError("grid needs step > 0 and lo <= hi")
    episodes.require_events()

    z = episodes.covariates[:, 0]
    scores = episodes.scores
    is_event = episodes.events == 1
    event_scores, tied = np.unique(scores[is_event], return_counts=True)
    values, column = np.unique(z, return_inverse=True)
    counts = np.zeros((event_scores.size, values.size))
    for k, s in enumerate(event_scores):
        counts[k] = np.bincount(column[scores >= s], minlength=values.size)
    total = float(z[is_event].sum())

    m = int(math.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(m)
    loglik = np.empty(m)
    for start in range(0, m, GRID_CHUNK):
        b = grid[start : start + GRID_CHUNK]
        exponent = b[:, None] * values[None, :]
        centre = exponent.max(axis=1, keepdims=True)
        sums = np.exp(exponent - centre) @ counts.T
        loglik[start : start + GRID_CHUNK] = b * total - (np.log(sums) + centre) @ tied

    best = float(loglik.max())
    index = int(np.argmax(loglik >= best - TIE_TOLERANCE * (1.0 + abs(best))))
    at_boundary = index in (0, m - 1)
    if at_boundary:
        LOG.warning(
            "Grid maximum at the boundary b=%g of [%g, %g]", grid[index], lo, hi
        )
    return GridOptimum(float(grid[index]), float(loglik[index]), at_boundary)
