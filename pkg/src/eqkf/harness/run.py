"""Scenario execution and report emission.

:func:`run_scenario` runs every requested method against one shared
simulated measurement stream and records, per step and method, the truth,
the reported mean, the estimation error norm, the constraint residual
(against the true, possibly nonlinear, constraint), and covariance health
metrics.  :func:`emit_report` serializes the result as CSV or as a
structured JSON document whose config section round-trips through
:func:`eqkf.harness.config.load_config`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .. import constrained, kalman
from ..constrained import POSTERIOR_INVERSE, ProjectionSpec
from ..errors import (
    DegenerateResidual,
    FilterError,
    ScenarioStepError,
    UnsupportedFormat,
)
from ..kalman import Measurement, StateEstimate, SystemModel
from ..matops import min_eigenvalue
from .config import MethodSpec, ScenarioConfig
from .simulate import SimulationResult, simulate_truth

# Identifier of the random generator algorithm used by the simulator,
# recorded in structured reports for reproducibility.
RNG_ALGORITHM = "numpy-default-rng(PCG64)"

# Methods whose means coincide in exact arithmetic, used for the summary
# divergence diagnostics.
_EQUIVALENT_GROUPS = (
    ("augmented", "fusion", "projection"),
    ("restricted_gain", "projection_identity"),
)


@dataclass(frozen=True)
class StepRecord:
    """One (step, method) row of a run."""

    step: int
    method: str
    truth: np.ndarray
    mean: np.ndarray
    err_norm: float
    constraint_residual: float
    cov_min_eig: float
    cov_asym: float


@dataclass(frozen=True)
class RunSummary:
    """Per-method aggregates and cross-method divergence diagnostics."""

    rmse: Mapping[str, float]
    max_constraint_residual: Mapping[str, float]
    divergence: Mapping[str, float]

    def to_document(self) -> dict:
        return {
            "rmse": dict(self.rmse),
            "max_constraint_residual": dict(self.max_constraint_residual),
            "divergence": dict(self.divergence),
        }


@dataclass(frozen=True)
class RunReport:
    """Everything produced by one scenario run."""

    config: ScenarioConfig
    records: tuple[StepRecord, ...]
    summary: RunSummary


def advance_method(
    state: StateEstimate,
    z: Measurement,
    model: SystemModel,
    spec: MethodSpec,
    config: ScenarioConfig,
) -> tuple[StateEstimate, StateEstimate]:
    """Run one predict/update cycle of ``spec`` from ``state``.

    Returns ``(reported, next_state)``: the estimate to report for this
    step and the estimate the recursion continues from.  They differ only
    when the scenario runs constrained methods with ``feedback`` off, in
    which case the recursion continues from the unconstrained update.
    Nonlinear constraints are relinearized about the predicted mean.
    """
    pred = kalman.predict(state, model)
    if spec.name == "unconstrained" or config.constraint is None:
        est, _ = kalman.update_joseph(pred, z, model)
        return est, est

    lin = config.linear_constraint_at(pred.mean)
    unconstrained: StateEstimate | None = None

    if spec.name == "augmented":
        result = constrained.augmented_update(pred, z, model, lin)
    elif spec.name == "fusion":
        result = constrained.fusion_constrained_update(pred, z, model, lin)
    elif spec.name == "soft_augmented":
        result = constrained.soft_augmented_update(
            pred, z, model, lin, config.soft_noise
        )
    elif spec.name == "restricted_gain":
        try:
            _, result = constrained.restricted_gain_update(pred, z, model, lin)
        except DegenerateResidual:
            # A vanishing innovation cannot carry a gain correction; the
            # identity-weight projection reaches the same corrected mean.
            unconstrained, _ = kalman.update_joseph(pred, z, model)
            result = constrained.project(
                unconstrained, lin, ProjectionSpec(weight=np.eye(pred.dim))
            )
    elif spec.name == "projection":
        unconstrained, _ = kalman.update_joseph(pred, z, model)
        if isinstance(spec.weight, str):
            weight = (
                POSTERIOR_INVERSE
                if spec.weight == POSTERIOR_INVERSE
                else np.eye(pred.dim)
            )
        else:
            weight = spec.weight
        result = constrained.project(
            unconstrained, lin, ProjectionSpec(weight=weight, feedback=config.feedback)
        )
    else:  # pragma: no cover - method names are validated at load time
        raise ValueError(f"unknown method '{spec.name}'")

    if config.feedback:
        return result.estimate, result.estimate
    if unconstrained is None:
        unconstrained, _ = kalman.update_joseph(pred, z, model)
    return result.estimate, unconstrained


def _relative_divergence(a: np.ndarray, b: np.ndarray) -> float:
    scale = 1.0 + max(float(np.abs(a).max()), float(np.abs(b).max()))
    return float(np.abs(a - b).max()) / scale


def run_scenario(
    config: ScenarioConfig, sim: SimulationResult | None = None
) -> RunReport:
    """Run every configured method over one simulated trajectory.

    Numerical failures are re-raised as ``ScenarioStepError`` carrying the
    one-based step index and method label.
    """
    if sim is None:
        sim = simulate_truth(config)
    labels = [spec.label for spec in config.methods]
    states: dict[str, StateEstimate] = {
        label: config.initial_estimate for label in labels
    }
    means: dict[str, list[np.ndarray]] = {label: [] for label in labels}
    records: list[StepRecord] = []
    sq_err: dict[str, float] = {label: 0.0 for label in labels}
    max_resid: dict[str, float] = {label: 0.0 for label in labels}

    for k in range(1, config.steps + 1):
        model = config.model_at(k - 1)
        z = sim.measurements[k - 1]
        x_true = sim.truth[k]
        for spec in config.methods:
            label = spec.label
            try:
                reported, next_state = advance_method(
                    states[label], z, model, spec, config
                )
            except FilterError as exc:
                raise ScenarioStepError(k, label, exc) from exc
            states[label] = next_state
            err = float(np.linalg.norm(x_true - reported.mean))
            residual = config.true_residual(reported.mean)
            cov = reported.covariance
            records.append(
                StepRecord(
                    step=k,
                    method=label,
                    truth=x_true,
                    mean=reported.mean,
                    err_norm=err,
                    constraint_residual=residual,
                    cov_min_eig=min_eigenvalue(cov),
                    cov_asym=float(np.abs(cov - cov.T).max()) if cov.size else 0.0,
                )
            )
            means[label].append(reported.mean)
            sq_err[label] += err * err
            max_resid[label] = max(max_resid[label], residual)

    steps = max(config.steps, 1)
    rmse = {label: float(np.sqrt(sq_err[label] / steps)) for label in labels}
    divergence: dict[str, float] = {}
    for group in _EQUIVALENT_GROUPS:
        present = [label for label in group if label in means]
        for i, first in enumerate(present):
            for second in present[i + 1 :]:
                worst = 0.0
                for ma, mb in zip(means[first], means[second]):
                    worst = max(worst, _relative_divergence(ma, mb))
                divergence[f"{first}|{second}"] = worst
    summary = RunSummary(rmse=rmse, max_constraint_residual=max_resid, divergence=divergence)
    return RunReport(config=config, records=tuple(records), summary=summary)


def _format_value(v: float) -> str:
    return repr(float(v))


def _csv_text(report: RunReport) -> str:
    n = report.config.state_dim
    columns = (
        ["step", "method"]
        + [f"t{i}" for i in range(n)]
        + [f"m{i}" for i in range(n)]
        + ["err_norm", "constraint_residual", "cov_min_eig", "cov_asym"]
    )
    lines = [",".join(columns)]
    for rec in sorted(report.records, key=lambda r: (r.step, r.method)):
        cells = [str(rec.step), rec.method]
        cells += [_format_value(v) for v in rec.truth]
        cells += [_format_value(v) for v in rec.mean]
        cells += [
            _format_value(rec.err_norm),
            _format_value(rec.constraint_residual),
            _format_value(rec.cov_min_eig),
            _format_value(rec.cov_asym),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _structured_text(report: RunReport) -> str:
    doc = {
        "config": report.config.to_document(),
        "rng": RNG_ALGORITHM,
        "records": [
            {
                "step": rec.step,
                "method": rec.method,
                "truth": list(map(float, rec.truth)),
                "mean": list(map(float, rec.mean)),
                "err_norm": rec.err_norm,
                "constraint_residual": rec.constraint_residual,
                "cov_min_eig": rec.cov_min_eig,
                "cov_asym": rec.cov_asym,
            }
            for rec in sorted(report.records, key=lambda r: (r.step, r.method))
        ],
        "summary": report.summary.to_document(),
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_report(report: RunReport, format: str = "csv") -> str:
    """Serialize a run report.

    ``csv`` produces one row per (step, method) with the exact column
    order ``step, method, t0.., m0.., err_norm, constraint_residual,
    cov_min_eig, cov_asym``; an empty run yields just the header.
    ``structured`` produces a JSON document embedding the configuration
    echo, the generator algorithm identifier, all records, and the
    summary.  Anything else raises ``UnsupportedFormat``.
    """
    if format == "csv":
        return _csv_text(report)
    if format == "structured":
        return _structured_text(report)
    raise UnsupportedFormat(f"unknown report format '{format}'")
