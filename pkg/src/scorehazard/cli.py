"""Command line for scorehazard.

``explain`` runs the whole score-dependent explanation: episodes, risk table,
inclusion and cumulative hazard curves, collinearity screening, stepwise Cox
selection, the baseline hazard and the additive model. The other
subcommands each run one stage.

Exit codes: 0 on success, 2 for invalid input or arguments, 3 when a model
cannot be fitted. Artifacts written before a failure are kept and the run
manifest records the failed stage.
"""

import argparse
import logging
import os
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import scorehazard.config as config
from scorehazard import __version__
from scorehazard.aalen import aalen_fit, coefficient_curve
from scorehazard.coxph import (
    baseline_hazard,
    collinearity_filter,
    cox_fit,
    stepwise_select,
)
from scorehazard.dataset import EpisodeSet, RecordSet, build_episodes, risk_table
from scorehazard.estimators import VARIANCE_MODES, nelson_aalen, product_limit
from scorehazard.exceptions import FitError, InputError
from scorehazard.load_data import RecordSchema, backblaze_adapt, load_records
from scorehazard.plotting import (
    plot_coefficient_curve,
    plot_cox_coefficients,
    plot_inclusion_curve,
)
from scorehazard.save_data import (
    file_sha256,
    save_aalen_curves,
    save_baseline_hazard,
    save_cox_json,
    save_cox_text,
    save_curve,
    save_json,
    save_metadata,
    save_records,
    save_risk_table,
)
from scorehazard.synthgen import CovariateSpec, SynthConfig, generate

LOG = logging.getLogger(__name__)

MANIFEST = "manifest.json"


@dataclass
class RunManifest:
    """Record of one run: what went in, what came out, and how it ended.

    Output files are listed by name relative to ``output_dir`` with their
    SHA-256; the manifest does not list itself.
    """

    subcommand: str
    options: Dict[str, Any]
    output_dir: str
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, str] = field(default_factory=dict)
    status: str = "running"
    failed_stage: Optional[str] = None
    message: Optional[str] = None
    version: str = __version__

    def add_input(self, path: str) -> None:
        self.inputs[path] = file_sha256(path)

    def add_output(self, path: str) -> None:
        name = os.path.relpath(path, self.output_dir).replace(os.sep, "/")
        self.outputs[name] = file_sha256(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool": "scorehazard",
            "version": self.version,
            "subcommand": self.subcommand,
            "options": self.options,
            "output_dir": self.output_dir,
            "inputs": [{"path": p, "sha256": h} for p, h in self.inputs.items()],
            "outputs": [
                {"file": f, "sha256": h} for f, h in sorted(self.outputs.items())
            ],
            "status": self.status,
            "failed_stage": self.failed_stage,
            "message": self.message,
        }

    def write(self) -> str:
        return save_json(self.to_dict(), os.path.join(self.output_dir, MANIFEST))


class _Run:
    """Output directory, manifest and current stage of a directory command."""

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args
        self.out = args.out
        os.makedirs(self.out, exist_ok=True)
        self.manifest = RunManifest(args.command, _options(args), self.out)
        self.stage = "load"

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def emit(
        self, writer: Callable[..., str], obj: Any, name: str, *extra: Any
    ) -> None:
        path = writer(obj, self.path(name), *extra)
        self.manifest.add_output(path)

    def load(self) -> EpisodeSet:
        self.stage = "load"
        self.manifest.add_input(self.args.input)
        schema = RecordSchema(delimiter=self.args.delimiter)
        records = load_records(self.args.input, schema)
        self.stage = "episodes"
        return build_episodes(records)


def _options(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("handler", "command", "out", "input")
    }


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


def _nonparametric(run: _Run, episodes: EpisodeSet) -> None:
    run.stage = "risk_table"
    table = risk_table(episodes)
    run.emit(save_risk_table, table, "risk_table.csv")
    run.stage = "product_limit"
    inclusion = product_limit(table, run.args.conf, run.args.variance)
    hazard = nelson_aalen(table, run.args.conf)
    run.emit(save_curve, inclusion, "inclusion_curve.csv")
    run.emit(plot_inclusion_curve, inclusion, "inclusion_curve.svg")
    run.emit(save_curve, hazard, "cumulative_hazard.csv")


def _select_cox(run: _Run, episodes: EpisodeSet, stepwise: bool = True):
    run.stage = "collinearity"
    kept, dropped = collinearity_filter(episodes, run.args.threshold)
    candidates = episodes.select(kept)
    if stepwise:
        run.stage = "stepwise"
        fit = stepwise_select(
            candidates,
            alpha_in=run.args.alpha_in,
            alpha_out=run.args.alpha_out,
            tol=run.args.tol,
            max_iter=run.args.max_iter,
        )
    else:
        run.stage = "cox_fit"
        fit = cox_fit(candidates, tol=run.args.tol, max_iter=run.args.max_iter)
    run.emit(save_cox_json, fit, "cox_summary.json")
    run.emit(save_cox_text, fit, "cox_summary.txt", run.args.conf)
    run.emit(plot_cox_coefficients, fit, "cox_coefficients.svg", run.args.conf)

    run.stage = "baseline_hazard"
    baseline = baseline_hazard(fit, episodes)
    run.emit(save_baseline_hazard, baseline, "baseline_hazard.csv")
    return fit


def _additive(run: _Run, episodes: EpisodeSet) -> None:
    run.stage = "aalen"
    fit = aalen_fit(episodes)
    run.emit(save_aalen_curves, fit, "aalen_curves.csv")
    for name in fit.covariate_names:
        run.emit(
            plot_coefficient_curve,
            coefficient_curve(fit, name),
            f"aalen_{_safe_name(name)}.svg",
        )


def _handle_explain(run: _Run) -> None:
    episodes = run.load()
    _nonparametric(run, episodes)
    fit = _select_cox(run, episodes)
    _additive(run, episodes.select(fit.covariate_names))


def _handle_km(run: _Run) -> None:
    _nonparametric(run, run.load())


def _handle_cox(run: _Run) -> None:
    _select_cox(run, run.load(), stepwise=not run.args.all_covariates)


def _handle_aalen(run: _Run) -> None:
    _additive(run, run.load())


def _handle_synth(args: argparse.Namespace) -> None:
    specs = tuple(CovariateSpec.parse(text) for text in args.covariate or ())
    cfg = SynthConfig(
        n=args.n,
        true_beta=tuple(args.beta or ()),
        baseline_rate=args.baseline_rate,
        censor_fraction=args.censor_fraction,
        covariate_spec=specs,
        seed=args.seed,
    )
    save_records(generate(cfg), args.out)


def _handle_adapt_backblaze(args: argparse.Namespace) -> None:
    if args.lookback < 0:
        raise InputError("--lookback must be non-negative")
    records: RecordSet = backblaze_adapt(
        args.input, args.lookback, scores=args.scores, delimiter=args.delimiter
    )
    save_records(records, args.out)
    stem, _ = os.path.splitext(args.out)
    save_metadata(records, stem + ".meta.json")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-v",
        "--verbose",
        type=int,
        choices=(0, 1, 2),
        default=config.verbose_level,
        help="0 warnings only, 1 stage messages, 2 optimizer detail",
    )


def _add_input(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--input", required=True, help="Canonical scored CSV")
    parser.add_argument(
        "--out",
        default=config.default_output_dir(),
        help=f"Output directory (default: ${config.ENV_OUTPUT_DIR} or .)",
    )
    parser.add_argument("--delimiter", default=",", help="Field separator")


def _add_curve_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--conf",
        type=float,
        default=config.confidence_level,
        help="Confidence level of the bands",
    )
    parser.add_argument(
        "--variance",
        choices=VARIANCE_MODES,
        default=config.variance_mode,
        help="Variance of the product-limit estimate",
    )


def _add_cox_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--threshold",
        type=float,
        default=config.collinearity_threshold,
        help="Absolute correlation above which a covariate is dropped",
    )
    parser.add_argument("--alpha-in", type=float, default=config.alpha_in)
    parser.add_argument("--alpha-out", type=float, default=config.alpha_out)
    parser.add_argument("--tol", type=float, default=config.tol)
    parser.add_argument("--max-iter", type=int, default=config.max_iter)


def build_parser() -> argparse.ArgumentParser:
    """Construct the argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(
        prog="scorehazard",
        description="Survival analysis over classifier scores",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    explain = subparsers.add_parser("explain", help="Run the full explanation")
    _add_input(explain)
    _add_curve_options(explain)
    _add_cox_options(explain)
    explain.set_defaults(handler=_handle_explain)

    km = subparsers.add_parser("km", help="Inclusion and cumulative hazard curves")
    _add_input(km)
    _add_curve_options(km)
    km.set_defaults(handler=_handle_km)

    cox = subparsers.add_parser("cox", help="Proportional hazards fit")
    _add_input(cox)
    _add_cox_options(cox)
    cox.add_argument("--conf", type=float, default=config.confidence_level)
    cox.add_argument(
        "--all-covariates",
        action="store_true",
        help="Fit every screened covariate instead of stepwise selection",
    )
    cox.set_defaults(handler=_handle_cox)

    aalen = subparsers.add_parser("aalen", help="Additive hazards curves")
    _add_input(aalen)
    aalen.set_defaults(handler=_handle_aalen)

    synth = subparsers.add_parser("synth", help="Generate a synthetic scored CSV")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument(
        "--beta", type=float, action="append", help="Repeat per covariate"
    )
    synth.add_argument("--baseline-rate", type=float, default=1.0)
    synth.add_argument("--censor-fraction", type=float, default=0.0)
    synth.add_argument(
        "--covariate",
        action="append",
        help="bernoulli:p or uniform:a:b, one per --beta (default bernoulli:0.5)",
    )
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="Output CSV path")
    synth.set_defaults(handler=_handle_synth)

    adapt = subparsers.add_parser(
        "adapt-backblaze", help="Convert Backblaze daily rows to the canonical CSV"
    )
    adapt.add_argument("--input", required=True, help="Backblaze daily CSV")
    adapt.add_argument("--lookback", type=int, default=config.lookback_days)
    adapt.add_argument("--scores", help="CSV with serial_number,date,score")
    adapt.add_argument("--delimiter", default=",")
    adapt.add_argument("--out", required=True, help="Output CSV path")
    adapt.set_defaults(handler=_handle_adapt_backblaze)

    for sub in (explain, km, cox, aalen, synth, adapt):
        _add_common(sub)
    return parser


DIRECTORY_COMMANDS = {"explain", "km", "cox", "aalen"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if getattr(args, "handler", None) is None:
        parser.print_help()
        return 2

    config.Setup(verbose=args.verbose)
    run: Optional[_Run] = None
    try:
        if args.command in DIRECTORY_COMMANDS:
            run = _Run(args)
            args.handler(run)
        else:
            args.handler(args)
    except (InputError, OSError) as e:
        return _fail(run, e, 2)
    except FitError as e:
        return _fail(run, e, 3)

    if run is not None:
        run.manifest.status = "ok"
        run.manifest.write()
    LOG.info("%s finished", args.command)
    return 0


def _fail(run: Optional[_Run], error: Exception, code: int) -> int:
    message = str(error)
    stage = run.stage if run is not None else None
    LOG.error("%s%s", f"[{stage}] " if stage else "", message)
    print(f"error: {message}", file=sys.stderr)
    if run is not None:
        run.manifest.status = "failed"
        run.manifest.failed_stage = stage
        run.manifest.message = message
        run.manifest.write()
    return code


def run_cli(argv: Optional[List[str]] = None) -> None:
    """Console-script entry point."""
    sys.exit(main(argv))
