"""
Tests for the nonlocal-lab command line.
"""

import json

import pandas as pd
import pytest

from nonlocal_compactness import analysis
from nonlocal_compactness.cli import (
    EXIT_DEGENERATE,
    EXIT_HYPOTHESIS,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from nonlocal_compactness.reports import read_report

SQUARE = {"shape": "box", "bounds": [[0, 0], [1, 1]]}


def write_config(tmp_path, document, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(document, indent=2))
    return path


def run_cli(tmp_path, command, document, *extra):
    path = write_config(tmp_path, document)
    out = tmp_path / "out"
    code = main([command, "--config", str(path), "--out", str(out), *extra])
    return code, out


class TestKernelCheck:
    """Test the kernel-check command."""

    def test_fractional_kernel(self, tmp_path, capsys):
        kernel = {"kind": "fractional", "d": 2, "p": 2, "s": 0.5}
        document = {"kernel": kernel}
        code, out = run_cli(tmp_path, "kernel-check", document)
        assert code == EXIT_OK
        payload = read_report(out / "report.json")["payload"]
        verdicts = {
            c["condition_id"]: c["verdict"] for c in payload["conditions"]
        }
        assert verdicts["mass_ratio_limit"] == "satisfied"
        assert payload["integrable_quotient"] == "inf"
        curve = pd.read_csv(out / "mass_ratio_limit.csv")
        assert list(curve.columns) == ["delta", "ratio"]
        assert "mass_ratio_limit" in capsys.readouterr().out

    def test_cone_restricted_kernel(self, tmp_path):
        document = {
            "kernel": {
                "kind": "cone_restricted",
                "base_kind": "fractional",
                "d": 2,
                "p": 2,
                "s": 0.5,
                "cone": {"axis": [0, 1], "aperture": 0.5},
            }
        }
        code, out = run_cli(tmp_path, "kernel-check", document)
        assert code == EXIT_OK
        assert (out / "cone_condition.csv").exists()
        assert not (out / "mass_ratio_limit.csv").exists()


class TestUsageErrors:
    """Test exit code 1."""

    def test_p_below_one(self, tmp_path, caplog):
        document = {"kernel": {"kind": "fractional", "d": 2, "p": 0.5}}
        code, _ = run_cli(tmp_path, "kernel-check", document)
        assert code == EXIT_USAGE
        assert "p ≥ 1 required" in caplog.text

    def test_missing_config(self, tmp_path):
        code = main(["seminorm", "--config", str(tmp_path / "none.json")])
        assert code == EXIT_USAGE

    def test_bad_arguments(self):
        assert main(["kernel-check"]) == EXIT_USAGE
        assert main(["plot", "--config", "x.json"]) == EXIT_USAGE

    def test_negative_seed(self, tmp_path):
        document = {"kernel": {"kind": "indicator", "d": 2, "p": 2}}
        code, _ = run_cli(
            tmp_path, "kernel-check", document, "--seed", "-1"
        )
        assert code == EXIT_USAGE

    def test_zero_threads(self, tmp_path):
        document = {"kernel": {"kind": "indicator", "d": 2, "p": 2}}
        code, _ = run_cli(
            tmp_path, "kernel-check", document, "--threads", "0"
        )
        assert code == EXIT_USAGE


class TestSeminormCommand:
    """Test the seminorm command."""

    @pytest.fixture
    def document(self):
        return {
            "kernel": {"kind": "indicator", "d": 2, "p": 2},
            "domain": SQUARE,
            "grid": {"n_per_axis": 8},
            "field": {"name": "rotation"},
            "parameters": {"symgrad": True},
        }

    def test_rotation_vanishes(self, tmp_path, document):
        code, out = run_cli(tmp_path, "seminorm", document)
        assert code == EXIT_OK
        payload = read_report(out / "report.json")["payload"]
        assert payload["seminorm"]["value"] <= 1e-12
        assert payload["full_difference"] > 0
        assert payload["symgrad"]["ratio"] == 0.0
        assert payload["seed"] == 0

    def test_runs_are_reproducible(self, tmp_path, document):
        path = write_config(tmp_path, document)
        digests = []
        for name, threads in (("a", "1"), ("b", "2")):
            out = tmp_path / name
            main(
                [
                    "seminorm",
                    "--config",
                    str(path),
                    "--out",
                    str(out),
                    "--threads",
                    threads,
                ]
            )
            metadata = read_report(out / "report.json")["metadata"]
            digests.append(metadata["payload_sha256"])
        assert digests[0] == digests[1]


class TestOtherCommands:
    """Test exit codes and artifacts of the remaining commands."""

    def test_degenerate_cone(self, tmp_path):
        document = {
            "domain": SQUARE,
            "grid": {"n_per_axis": 8},
            "field": {"name": "constant"},
            "parameters": {"cone": {"axis": [0, 1], "aperture": 1e-9}},
        }
        code, _ = run_cli(tmp_path, "mollify", document)
        assert code == EXIT_DEGENERATE

    def test_poincare_writes_minimizer(self, tmp_path):
        document = {
            "kernel": {"kind": "indicator", "d": 2, "p": 2},
            "domain": SQUARE,
            "grid": {"n_per_axis": 4},
        }
        code, out = run_cli(tmp_path, "poincare", document)
        assert code == EXIT_OK
        minimizer = pd.read_csv(out / "minimizer.csv")
        assert list(minimizer.columns) == ["x_1", "x_2", "u_1", "u_2"]
        payload = read_report(out / "report.json")["payload"]
        assert payload["poincare"]["method"] == "dense_eigen"

    def test_boundary(self, tmp_path):
        document = {
            "kernel": {"kind": "indicator", "d": 2, "p": 2},
            "domain": SQUARE,
            "grid": {"n_per_axis": 16},
            "field": {"name": "fourier"},
            "parameters": {"r0": 0.4, "radii": [0.2, 0.1]},
        }
        code, out = run_cli(tmp_path, "boundary", document)
        assert code == EXIT_OK
        checks = pd.read_csv(out / "boundary_check.csv")
        assert checks["r"].tolist() == [0.2, 0.1]
        assert (out / "boundary_mass.csv").exists()

    def test_hypothesis_violation(self, tmp_path, monkeypatch):
        monkeypatch.setattr(analysis, "GROWTH_LIMIT", 1.0)
        document = {
            "kernel": {"kind": "indicator", "d": 2, "p": 2},
            "domain": SQUARE,
            "grid": {"n_per_axis": 8},
            "sequence": {
                "kind": "oscillatory",
                "family": "rescaled",
                "n_values": [1, 2],
            },
            "parameters": {"deltas": [0.25]},
        }
        code, out = run_cli(tmp_path, "sequence", document)
        assert code == EXIT_HYPOTHESIS
        payload = read_report(out / "report.json")["payload"]
        assert payload["compactness"]["hypothesis_violated"]
        assert payload["compactness"]["verdict"] is None

    @pytest.mark.slow
    def test_mollify(self, tmp_path):
        document = {
            "domain": SQUARE,
            "grid": {"n_per_axis": 16},
            "field": {"name": "bump", "center": [0.5, 0.5], "radius": 0.3},
            "parameters": {"deltas": [0.25, 0.125], "p": 2},
        }
        code, out = run_cli(tmp_path, "mollify", document)
        assert code == EXIT_OK
        gaps = pd.read_csv(out / "gap_curve.csv")
        assert gaps["delta"].tolist() == [0.25, 0.125]
        payload = read_report(out / "report.json")["payload"]
        for chain in payload["gap_chain"]:
            assert chain["gap"] <= chain["bound"]
        assert len(pd.read_csv(out / "f_curve.csv")) == 16

    @pytest.mark.slow
    def test_compactness(self, tmp_path):
        document = {
            "kernel": {"kind": "indicator", "d": 2, "p": 2},
            "domain": SQUARE,
            "grid": {"n_per_axis": 16},
            "sequence": {"kind": "oscillatory", "n_values": [1, 2]},
            "parameters": {"deltas": [0.25, 0.125]},
        }
        code, out = run_cli(tmp_path, "compactness", document)
        assert code == EXIT_OK
        for name in ("gap_curve.csv", "boundary_mass.csv", "bound_curve.csv"):
            assert (out / name).exists()
