import json

import pytest

from koopgram import defaults
from koopgram.demo import run_demo
from koopgram.errors import KoopgramError


@pytest.mark.parametrize("example", [1, 2, 3, 4])
def test_report_structure(example):
    report, artifacts = run_demo(example, seed=1)
    assert report["type"] == "demo-report" and report["example"] == example
    assert report["seed"] == 1
    assert report["passed"]
    for name, chk in report["checks"].items():
        assert name.startswith(f"example{example}.")
        assert name in defaults.THRESHOLDS
        assert {"passed", "value", "threshold", "comparison", "provenance"} <= set(chk)
        assert chk["provenance"] in ("reference-pattern", "oracle")
    json.dumps(report, allow_nan=False)
    for name, text in artifacts.items():
        assert name.endswith(".csv") and text.endswith("\n")


def test_failing_stage_is_named():
    with pytest.raises(KoopgramError, match="stage 'data'"):
        run_demo(1, x0=(50.0, 50.0))


def test_custom_x0():
    report, _ = run_demo(1, x0=(0.1, -0.2))
    assert report["config"]["x0"] == [0.1, -0.2]


def test_unknown_example():
    with pytest.raises(ValueError):
        run_demo(5)


def test_reported_thresholds_never_tighter_than_defaults():
    report, _ = run_demo(3)
    for name, chk in report["checks"].items():
        if isinstance(chk["threshold"], float):
            assert chk["threshold"] == defaults.THRESHOLDS[name][0]
