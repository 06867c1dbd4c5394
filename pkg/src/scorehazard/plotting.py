"""SVG figures for inclusion curves and coefficient estimates.

Figures are drawn on a standalone ``matplotlib.figure.Figure`` with no pyplot
state, and saved with a fixed SVG hash salt and without a date stamp so that
reruns give identical files.
"""

import logging
from typing import Tuple

import matplotlib
import numpy as np
from matplotlib.figure import Figure

from scorehazard.aalen import CoefficientCurve
from scorehazard.coxph import CoxFit
from scorehazard.estimators import InclusionCurve

LOG = logging.getLogger(__name__)

SVG_SALT = "scorehazard"
BAND_ALPHA = 0.25


def stepped_path(
    edges: np.ndarray, values: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Outline of a step function that holds ``values[i]`` on [edges[i], edges[i+1]).

    Args:
        edges: Step boundaries, one more than ``values``.
        values: Level of each step.

    Returns:
        tuple: x and y coordinates of the outline.
    """
    edges = np.asarray(edges, dtype=float)
    values = np.asarray(values, dtype=float)
    if edges.size != values.size + 1:
        raise ValueError("edges must be 1 element longer than values")
    x = np.repeat(edges, 2)[1:-1]
    y = np.repeat(values, 2)
    return x, y


def _save(figure: Figure, path: str) -> str:
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        figure.savefig(path, format="svg", metadata={"Date": None})
    LOG.info("Wrote %s", path)
    return path


def _with_start(start_value: float, *series: np.ndarray) -> list:
    """Prepend the level held before the first jump to each series."""
    return [np.concatenate([[start_value], np.asarray(s, dtype=float)]) for s in series]


def band_steps(edges: np.ndarray, *levels: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Repeat the last level of each series so that ``fill_between`` with
    ``step="post"`` shades up to ``edges[-1]``.

    Returns:
        tuple: ``edges`` followed by one extended series per level.
    """
    edges = np.asarray(edges, dtype=float)
    extended = []
    for level in levels:
        level = np.asarray(level, dtype=float)
        if edges.size != level.size + 1:
            raise ValueError("edges must be 1 element longer than levels")
        extended.append(np.append(level, level[-1:]))
    return (edges, *extended)


def _inclusion_figure(curve: InclusionCurve) -> Figure:
    low, high = curve.domain
    edges = np.concatenate([[low], curve.scores, [high]])
    estimate, ci_low, ci_high = _with_start(
        1.0, curve.estimate, curve.ci_low, curve.ci_high
    )
    ci_low[0] = ci_high[0] = 1.0

    figure = Figure(figsize=(6, 4))
    axes = figure.add_subplot()
    x, y = stepped_path(edges, estimate)
    axes.plot(x, y, color="C0", label="I(s)")
    band_x, band_low, band_high = band_steps(
        edges, np.nan_to_num(ci_low, nan=0.0), np.nan_to_num(ci_high, nan=1.0)
    )
    axes.fill_between(
        band_x,
        band_low,
        band_high,
        step="post",
        alpha=BAND_ALPHA,
        color="C0",
        label=f"{curve.confidence_level:.0%} band",
    )
    axes.set_xlabel("Score")
    axes.set_ylabel("Inclusion probability P(S > s)")
    axes.set_ylim(-0.02, 1.02)
    axes.legend(loc="upper right")
    return figure


def plot_inclusion_curve(curve: InclusionCurve, path: str) -> str:
    """Step plot of I(s) with its confidence band over the observed domain."""
    return _save(_inclusion_figure(curve), path)


def plot_coefficient_curve(curve: CoefficientCurve, path: str) -> str:
    """Step plot of a cumulative regression function B_q(s) with its band."""
    if curve.scores.size == 0:
        raise ValueError("coefficient curve has no points")
    edges = np.concatenate([curve.scores, [curve.scores[-1]]])
    figure = Figure(figsize=(6, 4))
    axes = figure.add_subplot()
    x, y = stepped_path(edges, curve.estimate)
    axes.plot(x, y, color="C1", label=f"B({curve.covariate})")
    axes.fill_between(
        curve.scores,
        curve.ci_low,
        curve.ci_high,
        step="post",
        alpha=BAND_ALPHA,
        color="C1",
    )
    axes.axhline(0.0, color="0.5", linewidth=0.8)
    axes.set_xlabel("Score")
    axes.set_ylabel(f"Cumulative coefficient {curve.covariate}")
    axes.legend(loc="upper left")
    return _save(figure, path)


def plot_cox_coefficients(fit: CoxFit, path: str, confidence_level: float) -> str:
    """Coefficient estimates of a Cox fit with Wald interval bars."""
    figure = Figure(figsize=(6, 1.5 + 0.4 * max(fit.beta.size, 1)))
    axes = figure.add_subplot()
    if fit.beta.size == 0:
        axes.text(0.5, 0.5, "no covariates in the model", ha="center", va="center")
        axes.set_axis_off()
        return _save(figure, path)
    intervals = fit.confidence_intervals(confidence_level)
    positions = np.arange(fit.beta.size)
    axes.errorbar(
        fit.beta,
        positions,
        xerr=[
            fit.beta - intervals["lower"].to_numpy(),
            intervals["upper"].to_numpy() - fit.beta,
        ],
        fmt="o",
        color="C0",
        capsize=3,
    )
    axes.axvline(0.0, color="0.5", linewidth=0.8, linestyle="--")
    axes.set_yticks(positions)
    axes.set_yticklabels(list(fit.covariate_names))
    axes.set_xlabel(f"log hazard ratio ({confidence_level:.0%} CI)")
    figure.tight_layout()
    return _save(figure, path)
