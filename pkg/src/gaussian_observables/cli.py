#!/usr/bin/env python
# -*- coding: utf-8 -*-
# ---------------------------------------------------------------------------
"""Command-line front end.

Observable and state files are JSON with explicit dimensions. Matrices are stored
row-major and phase-space vectors use the interleaved (q1, p1, ..., qs, ps) order.
"""
# ---------------------------------------------------------------------------
from __future__ import annotations
import argparse
from dataclasses import replace
import hashlib
import json
import logging
import math
from pathlib import Path
import sys
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from gaussian_observables import fock_oracle, naimark, observable, statistics
from gaussian_observables.configuration import ObservablesConfig, initialize_config, initialize_logging
from gaussian_observables.errors import ObservableError, SchemaError, ValidityError
from gaussian_observables.observable import GaussianObservable
from gaussian_observables.statistics import GaussianState

SCHEMA_VERSION = "1.0"

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INVALID = 2


class ReportLoggingAdapter(logging.LoggerAdapter):
    """Stamps the running command and input digest onto every record."""

    def process(self, msg, kwargs):
        extra = self.extra.copy()
        if "extra" in kwargs:
            extra.update(kwargs["extra"])
        kwargs["extra"] = extra
        return msg, kwargs


logger = logging.getLogger(__name__)


def _require(data: Dict[str, Any], key: str, kind: str) -> Any:
    if key not in data:
        raise SchemaError(f"{kind} file is missing field '{key}'")
    return data[key]


def _matrix(data: Dict[str, Any], key: str, rows: int, cols: int, kind: str) -> np.ndarray:
    values = _require(data, key, kind)
    if not isinstance(values, list) or len(values) != rows * cols:
        length = len(values) if isinstance(values, list) else "a non-list"
        raise SchemaError(f"{kind} field '{key}' must have {rows * cols} entries, got {length}")
    try:
        matrix = np.asarray(values, dtype=float).reshape(rows, cols)
    except (TypeError, ValueError):
        raise SchemaError(f"{kind} field '{key}' must contain numbers")
    if not np.all(np.isfinite(matrix)):
        raise SchemaError(f"{kind} field '{key}' must contain finite numbers")
    return matrix


def _dimension(data: Dict[str, Any], key: str, kind: str) -> int:
    value = _require(data, key, kind)
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise SchemaError(f"{kind} field '{key}' must be a positive integer, got {value!r}")
    return value


def _check_version(data: Dict[str, Any], kind: str) -> None:
    version = _require(data, "schema_version", kind)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{kind} field 'schema_version' must be '{SCHEMA_VERSION}', got {version!r}")


def observable_from_dict(data: Dict[str, Any]) -> GaussianObservable:
    kind = "Observable"
    if not isinstance(data, dict):
        raise SchemaError(f"{kind} file must contain a JSON object")
    _check_version(data, kind)
    s = _dimension(data, "s", kind)
    m = _dimension(data, "m", kind)
    K = _matrix(data, "K", 2 * s, m, kind)
    alpha = _matrix(data, "alpha", m, m, kind)
    l = _matrix(data, "l", 1, m, kind).reshape(-1) if "l" in data else None
    return GaussianObservable(s=s, K=K, alpha=alpha, l=l, label=str(data.get("label", "")))


def observable_to_dict(obs: GaussianObservable) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "s": obs.s,
        "m": obs.m,
        "K": obs.K.reshape(-1).tolist(),
        "alpha": obs.alpha.reshape(-1).tolist(),
        "l": obs.l.tolist(),
        "label": obs.label,
    }


def state_from_dict(data: Dict[str, Any]) -> GaussianState:
    kind = "State"
    if not isinstance(data, dict):
        raise SchemaError(f"{kind} file must contain a JSON object")
    _check_version(data, kind)
    s = _dimension(data, "s", kind)
    mean = _matrix(data, "mean", 1, 2 * s, kind).reshape(-1)
    gamma = _matrix(data, "gamma", 2 * s, 2 * s, kind)
    return GaussianState(s=s, mean=mean, gamma=gamma, label=str(data.get("label", "")))


def state_to_dict(state: GaussianState) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "s": state.s,
        "mean": state.mean.tolist(),
        "gamma": state.gamma.reshape(-1).tolist(),
        "label": state.label,
    }


def load_json(path: Path) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as file:
            return json.load(file)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path} is not valid JSON: {e}")


def input_digest(*documents: Dict[str, Any]) -> str:
    """sha256 of the canonical JSON encoding of the parsed inputs."""
    digest = hashlib.sha256()
    for document in documents:
        digest.update(json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8"))
    return digest.hexdigest()


def _tolist(array: np.ndarray) -> List:
    return np.asarray(array, dtype=float).tolist()


def _norm_value(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def cmd_validate(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    report = observable.validate(obs, config.tolerances.psd)
    results = {"valid": report.valid, "min_eigenvalue": report.min_eigenvalue, "message": report.message}
    return results, EXIT_OK if report.valid else EXIT_INVALID


def cmd_classify(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    tolerances = config.tolerances
    classification = observable.classify(obs, tolerances.rank, tolerances.psd)
    decomposition = classification.decomposition
    norm = observable.density_norm(obs, classification)
    results: Dict[str, Any] = {
        "summary": classification.summary,
        "s1": classification.s1,
        "s2": classification.s2,
        "s3": classification.s3,
        "r_delta": decomposition.r_delta,
        "r_alpha": decomposition.r_alpha,
        "a": list(decomposition.a),
        "bounded": classification.bounded,
        "norm": _norm_value(norm.value),
        "alpha_residual": decomposition.alpha_residual,
        "delta_residual": decomposition.delta_residual,
        "ill_conditioned": decomposition.ill_conditioned,
        "warnings": list(classification.warnings),
    }
    if classification.type1 is not None:
        results["type1"] = {
            "subtype": classification.type1.subtype,
            "beta": _tolist(classification.type1.beta),
            "prefactor": classification.type1.prefactor,
            "coordinates": classification.type1.coordinates,
        }
    return results, EXIT_OK


def cmd_naimark(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    tolerances = config.tolerances
    ext = naimark.extend(obs, tolerances.rank, tolerances.psd)
    residuals = naimark.verify(ext, obs)
    dims = naimark.hybrid_ancilla_dims(obs, tolerances.rank, tolerances.psd)
    results = {
        "s_C": ext.s_C,
        "alpha_C": _tolist(ext.alpha_C),
        "Lambda": _tolist(ext.Lambda),
        "proj_residual": residuals.proj_residual,
        "com_residual": residuals.com_residual,
        "involution_residual": residuals.involution_residual,
        "state_validity_min_eig": residuals.state_validity_min_eig,
        "commuting_X_residual": residuals.commuting_X_residual,
        "projection_residual": residuals.projection_residual,
        "symplectic_basis_residual": residuals.symplectic_basis_residual,
        "hybrid": {
            "quantum_modes": dims.quantum_modes,
            "classical_remark": dims.classical_remark,
            "classical_block": dims.classical_block,
            "consistent": dims.consistent,
        },
    }
    return results, EXIT_OK


def _state_for(obs: GaussianObservable, args) -> GaussianState:
    if args.state is None:
        return statistics.vacuum_state(obs.s)
    return state_from_dict(load_json(Path(args.state)))


def cmd_distribution(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    state = _state_for(obs, args)
    dist = statistics.outcome_distribution(obs, state, config.tolerances.psd)
    return {"mean": _tolist(dist.mean), "covariance": _tolist(dist.covariance), "state": state.label}, EXIT_OK


def cmd_sample(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    state = _state_for(obs, args)
    dist = statistics.outcome_distribution(obs, state, config.tolerances.psd)
    samples = statistics.sample(dist, config.sampling.n, config.sampling.seed)
    results: Dict[str, Any] = {"n": config.sampling.n, "seed": config.sampling.seed, "state": state.label}
    if len(samples):
        mean, covariance = statistics.empirical_moments(samples)
        results.update({"empirical_mean": _tolist(mean), "empirical_covariance": _tolist(covariance)})
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps({"samples": _tolist(samples)}, sort_keys=True), encoding="utf-8")
        results["out"] = str(out)
    else:
        results["samples"] = _tolist(samples)
    return results, EXIT_OK


def cmd_oracle_check(obs: GaussianObservable, args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    cutoff = config.oracle.cutoff
    tolerances = config.tolerances
    observable.require_valid(obs, tolerances.psd)
    norm = observable.density_norm(obs, observable.classify(obs, tolerances.rank, tolerances.psd))
    results: Dict[str, Any] = {"analytic_norm": _norm_value(norm.value)}
    if obs.s == 1 and obs.m <= 2:
        if norm.finite:
            estimate = fock_oracle.density_norm_estimate(obs, cutoff // 2, config.oracle)
            results["oracle_norm"] = estimate.value
            results["oracle_cutoffs"] = list(estimate.cutoffs)
            results["converged"] = estimate.converged
            results["norm_agrees"] = abs(estimate.value - norm.value) <= config.oracle.convergence_rtol * norm.value
        else:
            cutoffs = (max(cutoff // 4, 1), max(cutoff // 2, 1), cutoff)
            probe = fock_oracle.divergence_probe(obs, cutoffs)
            results["oracle_cutoffs"] = list(probe.cutoffs)
            results["probe_values"] = list(probe.values)
            results["probe_growth"] = probe.growth
        state = _state_for(obs, args)
        dist = statistics.outcome_distribution(obs, state, config.tolerances.psd)
        grid = [np.full(obs.m, t) for t in (-0.5, 0.25, 0.5)]
        residual = max(
            abs(fock_oracle.state_trace_cf(state, obs, w, cutoff) - dist.characteristic_value(w)) for w in grid
        )
        results["characteristic_residual"] = residual
    else:
        results["oracle"] = "skipped: Fourier inversion needs s = 1 and m <= 2"
    return results, EXIT_OK


def cmd_prototypes(args, config: ObservablesConfig) -> Tuple[Dict[str, Any], int]:
    out = Path(args.out or "prototypes")
    out.mkdir(parents=True, exist_ok=True)
    written = []
    prototypes = [
        observable.heterodyne_vacuum(1),
        observable.heterodyne_thermal(1, [1.0]),
        observable.noisy_homodyne(1, 0.5),
        observable.sharp_homodyne(1),
    ]
    for obs in prototypes:
        path = out / f"{obs.label}.json"
        path.write_text(json.dumps(observable_to_dict(obs), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        written.append(str(path))
    path = out / "vacuum_state.json"
    path.write_text(json.dumps(state_to_dict(statistics.vacuum_state(1)), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    written.append(str(path))
    return {"written": written}, EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "naimark": cmd_naimark,
    "distribution": cmd_distribution,
    "sample": cmd_sample,
    "oracle-check": cmd_oracle_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussian-observables",
        description="Validate, decompose and dilate multi-mode Gaussian observables.",
    )
    parser.add_argument("command", choices=sorted(list(COMMANDS) + ["prototypes"]))
    parser.add_argument("input", nargs="?", help="observable file (JSON)")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--tol", type=float, help="rank and PSD tolerance")
    parser.add_argument("--seed", type=int, help="sampling seed")
    parser.add_argument("--n", type=int, help="number of samples")
    parser.add_argument("--cutoff", type=int, help="Fock-space cutoff for oracle-check")
    parser.add_argument("--state", help="state file (JSON), vacuum when omitted")
    parser.add_argument("--config", help="configuration file (TOML)")
    parser.add_argument("--logging-config", help="logging configuration file (YAML)")
    parser.add_argument("--out", help="output path for prototypes or samples")
    return parser


def apply_overrides(config: ObservablesConfig, args) -> ObservablesConfig:
    tolerances, oracle, sampling = config.tolerances, config.oracle, config.sampling
    if args.tol is not None:
        tolerances = replace(tolerances, rank=args.tol, psd=args.tol)
    if args.cutoff is not None:
        oracle = replace(oracle, cutoff=args.cutoff)
    if args.seed is not None:
        sampling = replace(sampling, seed=args.seed)
    if args.n is not None:
        sampling = replace(sampling, n=args.n)
    return ObservablesConfig(tolerances=tolerances, oracle=oracle, sampling=sampling)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "unbounded"
    return json.dumps(value) if isinstance(value, (list, dict)) else str(value)


def render_text(report: Dict[str, Any]) -> str:
    results = report["results"]
    lines = []
    if "summary" in results:
        norm = _format_value(results["norm"]) if results["norm"] is not None else "unbounded"
        lines.append(
            f"{results['summary']}, s1={results['s1']}, s2={results['s2']}, s3={results['s3']}, "
            f"bounded={_format_value(results['bounded'])}, norm={norm}"
        )
    elif "message" in results:
        lines.append(results["message"])
    lines.extend(f"{key}: {_format_value(value)}" for key, value in sorted(results.items()))
    lines.append(f"input_digest: {report['input_digest']}")
    return "\n".join(lines)


def run(args: argparse.Namespace) -> Tuple[int, Dict[str, Any]]:
    """Run one parsed command and return (exit status, report)."""
    if args.logging_config:
        initialize_logging(args.logging_config)
    config = apply_overrides(initialize_config(args.config), args)
    tolerances = {"rank": config.tolerances.rank, "psd": config.tolerances.psd, "residual": config.tolerances.residual}

    if args.command == "prototypes":
        results, status = cmd_prototypes(args, config)
        return status, {"command": "prototypes", "input_digest": input_digest({}), "results": results, "tolerances": tolerances}

    document = load_json(Path(args.input))
    documents = [document]
    if args.state is not None:
        documents.append(load_json(Path(args.state)))
    digest = input_digest(*documents)
    command_logger = ReportLoggingAdapter(logger, {"command": args.command, "input_digest": digest})
    command_logger.info("Running command", extra={"input": args.input})

    report: Dict[str, Any] = {
        "command": args.command,
        "input": Path(args.input).name,
        "input_digest": digest,
        "tolerances": tolerances,
    }
    if args.command == "oracle-check":
        report["oracle_cutoff"] = config.oracle.cutoff
    try:
        obs = observable_from_dict(document)
        results, status = COMMANDS[args.command](obs, args, config)
    except ValidityError as e:
        results = {"valid": False, "min_eigenvalue": e.min_eigenvalue, "message": e.message}
        status = EXIT_INVALID
    report["results"] = results
    command_logger.info("Command finished", extra={"status": status})
    return status, report


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_INPUT_ERROR
    if args.command != "prototypes" and args.input is None:
        print(f"error: command '{args.command}' needs an observable file", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        status, report = run(args)
    except (ObservableError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if args.json:
        print(json.dumps(report, sort_keys=True, indent=2))
    else:
        print(render_text(report))
    return status


if __name__ == "__main__":
    sys.exit(main())
