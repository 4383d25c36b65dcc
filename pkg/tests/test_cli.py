import json

import numpy as np
import pytest

from gaussian_observables.cli import (
    EXIT_INPUT_ERROR,
    EXIT_INVALID,
    EXIT_OK,
    SCHEMA_VERSION,
    main,
    observable_from_dict,
    observable_to_dict,
    state_from_dict,
    state_to_dict,
)
from gaussian_observables.errors import SchemaError
from gaussian_observables.observable import GaussianObservable
from gaussian_observables.statistics import squeezed_vacuum

from conftest import random_symplectic

PROTOTYPES = ["heterodyne_vacuum", "heterodyne_thermal", "noisy_homodyne", "sharp_homodyne"]


def write_observable(path, K, alpha, s=1):
    K = np.asarray(K, dtype=float)
    document = {
        "schema_version": SCHEMA_VERSION,
        "s": s,
        "m": K.shape[1],
        "K": K.reshape(-1).tolist(),
        "alpha": np.asarray(alpha, dtype=float).reshape(-1).tolist(),
    }
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def test_prototype_files_are_regenerated_exactly(tmp_path, prototypes_dir, capsys):
    assert main(["prototypes", "--out", str(tmp_path)]) == EXIT_OK
    for name in PROTOTYPES + ["vacuum_state"]:
        generated = (tmp_path / f"{name}.json").read_bytes()
        assert generated == (prototypes_dir / f"{name}.json").read_bytes()


def test_classify_heterodyne_text(prototypes_dir, capsys):
    assert main(["classify", str(prototypes_dir / "heterodyne_vacuum.json")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "Type 1b" in out.splitlines()[0]
    assert "0.159155" in out


def test_classify_sharp_homodyne_is_unbounded(prototypes_dir, capsys):
    assert main(["classify", str(prototypes_dir / "sharp_homodyne.json"), "--json"]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)["results"]
    assert results["summary"] == "Type 3"
    assert results["bounded"] is False
    assert results["norm"] is None


def test_naimark_noisy_homodyne_json(prototypes_dir, capsys):
    assert main(["naimark", str(prototypes_dir / "noisy_homodyne.json"), "--json"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == "naimark"
    assert report["results"]["s_C"] == 1
    assert report["results"]["com_residual"] < 1e-12


def test_validate_reports_invalid_observable(tmp_path, capsys):
    path = write_observable(tmp_path / "bad.json", np.eye(2), 0.25 * np.eye(2))
    assert main(["validate", str(path)]) == EXIT_INVALID
    assert "min eigenvalue -0.25" in capsys.readouterr().out


def test_invalid_observable_stops_other_commands(tmp_path, capsys):
    path = write_observable(tmp_path / "bad.json", np.eye(2), 0.25 * np.eye(2))
    assert main(["classify", str(path), "--json"]) == EXIT_INVALID
    results = json.loads(capsys.readouterr().out)["results"]
    assert results["valid"] is False
    assert results["min_eigenvalue"] == pytest.approx(-0.25)


def test_schema_error_exit_code(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text(json.dumps({"schema_version": SCHEMA_VERSION, "s": 1, "m": 2, "K": [1, 0, 0, 1]}))
    assert main(["classify", str(path)]) == EXIT_INPUT_ERROR
    assert "alpha" in capsys.readouterr().err


def test_non_finite_entries_are_input_errors(tmp_path, capsys):
    path = write_observable(tmp_path / "nan.json", [[float("nan"), 0.0], [0.0, 1.0]], np.eye(2))
    assert main(["classify", str(path)]) == EXIT_INPUT_ERROR
    err = capsys.readouterr().err
    assert "'K'" in err
    assert "finite" in err


@pytest.mark.parametrize("command", ["validate", "classify", "naimark", "distribution", "sample"])
def test_tolerance_flag_applies_to_every_command(tmp_path, command, capsys):
    path = str(write_observable(tmp_path / "quarter.json", np.eye(2), 0.25 * np.eye(2)))
    assert main([command, path, "--json", "--n", "10"]) == EXIT_INVALID
    capsys.readouterr()
    assert main([command, path, "--json", "--n", "10", "--tol", "0.3"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["tolerances"]["psd"] == 0.3


@pytest.mark.parametrize("command", ["validate", "classify", "naimark"])
def test_rotated_sharp_homodyne_is_valid(tmp_path, command, capsys):
    K = random_symplectic(np.random.default_rng(3), 2)[:, [0, 2]]
    path = str(write_observable(tmp_path / "rotated.json", K, np.zeros((2, 2)), s=2))
    assert main([command, path, "--json"]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)["results"]
    if command == "classify":
        assert results["summary"] == "Type 3"
        assert results["ill_conditioned"] is False
    if command == "naimark":
        assert results["s_C"] == 0


def test_malformed_json_exit_code(tmp_path, capsys):
    path = tmp_path / "garbage.json"
    path.write_text("{not json")
    assert main(["validate", str(path)]) == EXIT_INPUT_ERROR


def test_missing_file_exit_code(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "absent.json")]) == EXIT_INPUT_ERROR
    assert main(["validate"]) == EXIT_INPUT_ERROR
    assert main(["frobnicate", "x.json"]) == EXIT_INPUT_ERROR


def test_json_output_is_byte_stable(prototypes_dir, capsys):
    path = str(prototypes_dir / "heterodyne_thermal.json")
    main(["classify", path, "--json"])
    first = capsys.readouterr().out
    main(["classify", path, "--json"])
    assert capsys.readouterr().out == first
    assert json.loads(first)["input_digest"]


def test_sample_is_reproducible(prototypes_dir, tmp_path, capsys):
    path = str(prototypes_dir / "heterodyne_vacuum.json")
    out = tmp_path / "samples" / "draws.json"
    assert main(["sample", path, "--json", "--seed", "3", "--n", "20", "--out", str(out)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    first = json.loads(out.read_text())["samples"]
    assert len(first) == 20 and report["results"]["seed"] == 3
    main(["sample", path, "--json", "--seed", "3", "--n", "20", "--out", str(out)])
    assert json.loads(out.read_text())["samples"] == first


def test_distribution_with_state_file(prototypes_dir, capsys):
    path = str(prototypes_dir / "heterodyne_vacuum.json")
    state = str(prototypes_dir / "vacuum_state.json")
    assert main(["distribution", path, "--json", "--state", state]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)["results"]
    np.testing.assert_allclose(results["covariance"], np.eye(2))
    assert results["state"] == "vacuum"


def test_config_file_sets_sampling_defaults(prototypes_dir, config_file, capsys):
    path = str(prototypes_dir / "noisy_homodyne.json")
    assert main(["sample", path, "--json", "--config", str(config_file)]) == EXIT_OK
    results = json.loads(capsys.readouterr().out)["results"]
    assert (results["n"], results["seed"]) == (50, 7)


@pytest.mark.parametrize("name", PROTOTYPES)
@pytest.mark.parametrize("command", ["validate", "classify", "naimark", "distribution", "sample"])
def test_commands_run_on_prototypes(prototypes_dir, name, command, capsys):
    assert main([command, str(prototypes_dir / f"{name}.json"), "--json", "--n", "10"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == command
    assert report["input"] == f"{name}.json"


@pytest.mark.oracle
@pytest.mark.parametrize("name", PROTOTYPES)
def test_oracle_check_on_prototypes(prototypes_dir, name, capsys):
    assert main(["oracle-check", str(prototypes_dir / f"{name}.json"), "--json", "--cutoff", "20"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    results = report["results"]
    assert report["oracle_cutoff"] == 20
    assert results["characteristic_residual"] < 1e-5
    if results["analytic_norm"] is None:
        assert results["probe_growth"] > 1.0
    else:
        assert results["norm_agrees"]


def test_observable_round_trip():
    obs = GaussianObservable(s=1, K=[[1.0, 0.5], [0.0, 2.0]], alpha=np.eye(2), l=[0.1, -0.2], label="x")
    restored = observable_from_dict(observable_to_dict(obs))
    np.testing.assert_array_equal(restored.K, obs.K)
    np.testing.assert_array_equal(restored.alpha, obs.alpha)
    np.testing.assert_array_equal(restored.l, obs.l)
    assert restored.label == "x"


def test_state_round_trip():
    state = squeezed_vacuum(0.2)
    restored = state_from_dict(state_to_dict(state))
    np.testing.assert_array_equal(restored.gamma, state.gamma)


@pytest.mark.parametrize(
    "change",
    [
        {"schema_version": "0.9"},
        {"s": 0},
        {"m": True},
        {"K": [1.0, 0.0]},
        {"alpha": ["a", "b", "c", "d"]},
        {"alpha": [float("inf"), 0.0, 0.0, 1.0]},
        {"l": [float("nan"), 0.0]},
    ],
)
def test_schema_violations(change):
    document = observable_to_dict(GaussianObservable(s=1, K=np.eye(2), alpha=np.eye(2)))
    document.update(change)
    with pytest.raises(SchemaError):
        observable_from_dict(document)
