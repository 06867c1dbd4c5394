"""Writers for every artifact the toolkit emits.

Tables are written as comma-separated UTF-8 with ``\\n`` line endings and
12 significant digits, undefined values as empty cells. JSON is written with
sorted keys and two-space indentation. Nothing written here carries a
timestamp, so identical inputs give byte-identical files.

Examples:
    ```python
    import scorehazard as sh

    sh.save_data.save_curve(inclusion, "run1/inclusion_curve.csv")
    sh.save_data.save_cox_json(fit, "run1/cox_summary.json")
    ```
"""

import hashlib
import json
import logging
import math
import os
from typing import Any, Union

import numpy as np
import pandas as pd

from scorehazard.aalen import AalenFit
from scorehazard.coxph import BaselineHazard, CoxFit, likelihood_ratio_test
from scorehazard.dataset import RecordSet, RiskTable
from scorehazard.estimators import CumulativeHazardCurve, InclusionCurve

LOG = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


def file_sha256(path: str) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _prepare(path: str) -> str:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    return path


def save_frame(frame: pd.DataFrame, path: str) -> str:
    frame.to_csv(
        _prepare(path),
        index=False,
        float_format=FLOAT_FORMAT,
        na_rep="",
        lineterminator="\n",
        encoding="utf-8",
    )
    LOG.info("Wrote %s", path)
    return path


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays to JSON types; NaN becomes null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def save_json(payload: Any, path: str) -> str:
    text = json.dumps(_plain(payload), sort_keys=True, indent=2) + "\n"
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    LOG.info("Wrote %s", path)
    return path


def save_records(records: RecordSet, path: str) -> str:
    """Write records in the canonical ``id,score,label,terminal,...`` layout."""
    return save_frame(records.to_frame(), path)


def save_metadata(records: RecordSet, path: str) -> str:
    """Write the provenance sidecar of a record set."""
    return save_json(records.metadata, path)


def save_curve(curve: Union[InclusionCurve, CumulativeHazardCurve], path: str) -> str:
    """Write a step curve as ``score,estimate,variance,ci_low,ci_high``."""
    frame = pd.DataFrame(
        {
            "score": curve.scores,
            "estimate": curve.estimate,
            "variance": curve.variance,
            "ci_low": curve.ci_low,
            "ci_high": curve.ci_high,
        }
    )
    return save_frame(frame, path)


def save_risk_table(table: RiskTable, path: str) -> str:
    return save_frame(table.to_frame(), path)


def save_cox_json(fit: CoxFit, path: str) -> str:
    return save_json(fit.to_dict(), path)


def format_cox_summary(fit: CoxFit, confidence_level: float) -> str:
    """Plain-text report of a Cox fit."""
    test = likelihood_ratio_test(fit)
    lines = [
        "Proportional hazards fit over score (Breslow ties)",
        f"episodes: {fit.n_episodes}  events: {fit.n_events}",
        f"log partial likelihood: {fit.log_likelihood:.6f}"
        f"  (null {fit.null_log_likelihood:.6f})",
        f"likelihood ratio test: {test.statistic:.4f}"
        f" on {test.degrees_of_freedom} df, p={test.p_value:.4g}",
        f"iterations: {fit.iterations}  converged: {fit.converged}",
        "",
    ]
    if fit.beta.size:
        lines.append(fit.summary().to_string(index=False, float_format="{:.4f}".format))
        lines.append("")
        lines.append(f"{confidence_level:.0%} confidence intervals")
        intervals = fit.confidence_intervals(confidence_level)
        lines.append(intervals.to_string(index=False, float_format="{:.4f}".format))
    else:
        lines.append("no covariates in the model")
    if fit.selection_trace:
        lines.append("")
        lines.append("selection trace")
        lines.extend(
            f"  {step.action} {step.covariate} (p={step.p_value:.4g})"
            for step in fit.selection_trace
        )
    return "\n".join(lines) + "\n"


def save_cox_text(fit: CoxFit, path: str, confidence_level: float = 0.95) -> str:
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_cox_summary(fit, confidence_level))
    LOG.info("Wrote %s", path)
    return path


def save_baseline_hazard(baseline: BaselineHazard, path: str) -> str:
    return save_frame(baseline.to_frame(), path)


def save_aalen_curves(fit: AalenFit, path: str) -> str:
    """Write all cumulative coefficient curves in long format."""
    return save_frame(fit.to_frame(), path)
