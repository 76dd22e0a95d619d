"""
Tests for report and curve files.
"""

import json
import math

import numpy as np

from nonlocal_compactness import __version__
from nonlocal_compactness.reports import (
    dump_payload,
    payload_digest,
    read_report,
    write_curve,
    write_report,
)


class TestPayloads:
    """Test canonical payload serialization."""

    def test_non_finite_values_become_strings(self):
        text = dump_payload({"a": math.inf, "b": -math.inf, "c": math.nan})
        assert json.loads(text) == {"a": "inf", "b": "-inf", "c": "nan"}

    def test_numpy_values(self):
        payload = {
            "array": np.arange(3),
            "flag": np.bool_(True),
            "count": np.int64(4),
            "value": np.float64(0.5),
        }
        assert json.loads(dump_payload(payload)) == {
            "array": [0, 1, 2],
            "flag": True,
            "count": 4,
            "value": 0.5,
        }

    def test_digest_ignores_key_order(self):
        a = {"x": 1.0, "y": [1, 2]}
        b = {"y": [1, 2], "x": 1.0}
        assert payload_digest(a) == payload_digest(b)
        assert payload_digest(a) != payload_digest({"x": 2.0, "y": [1, 2]})


class TestReportFiles:
    """Test report.json and CSV curves."""

    def test_write_report(self, tmp_path):
        payload = {"value": 0.25, "seed": 0}
        path = write_report(tmp_path / "out", "seminorm", payload)
        assert path.name == "report.json"
        document = read_report(path)
        assert document["payload"] == payload
        metadata = document["metadata"]
        assert metadata["command"] == "seminorm"
        assert metadata["version"] == __version__
        assert metadata["payload_sha256"] == payload_digest(payload)

    def test_payloads_are_reproducible(self, tmp_path):
        payload = {"gap": [[0.5, 0.125]], "verdict": "no_obstruction"}
        first = write_report(tmp_path / "a", "mollify", payload)
        second = write_report(tmp_path / "b", "mollify", payload)
        assert read_report(first)["payload"] == read_report(second)["payload"]

    def test_write_curve(self, tmp_path):
        path = write_curve(
            tmp_path,
            "gap_curve.csv",
            [(0.5, 0.1), (0.25, 1.0)],
            ["delta", "gap"],
        )
        raw = path.read_bytes()
        assert b"\r\n" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == "delta,gap"
        # 17 significant digits
        assert lines[1] == "0.5,0.10000000000000001"
        assert len(lines) == 3
