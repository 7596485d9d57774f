import csv
import json

import numpy as np
import pytest

from freebound.cli import compare, main

BENCH = """
task = "{task}"

[problem]
family = "homogeneous_logistic"
d = 1.0
mu = 1.0
omega = 1.0
L = 1.0

[problem.coeffs]
a = 1.0
b = 1.0

[numerics]
{numerics}
"""


def write(tmp_path, task, numerics="", name="run.toml", text=None):
    p = tmp_path / name
    p.write_text(text if text is not None else BENCH.format(task=task, numerics=numerics))
    return str(p)


def test_periodic_state_artifacts(tmp_path):
    cfg = write(tmp_path, "periodic-state", "nt = 16\nnx = 16")
    assert main(["periodic-state", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rows = list(csv.reader((tmp_path / "o" / "periodic_state.csv").open()))
    assert rows[0] == ["t", "x", "p"] and len(rows) == 16 * 16 + 1
    assert max(abs(float(r[2]) - 1.0) for r in rows[1:]) <= 1e-8
    res = json.loads((tmp_path / "o" / "result.json").read_text())
    assert res["ok"] and res["result"]["lambda1_zero"] == pytest.approx(-1.0, abs=1e-6)
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["status"] == 0 and "periodic_state.csv" in man["files"]


def test_reruns_are_bit_identical(tmp_path):
    cfg = write(tmp_path, "periodic-state", "nt = 16\nnx = 16")
    main(["periodic-state", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["periodic-state", "--config", cfg, "--out", str(tmp_path / "b")])
    for f in ("result.json", "periodic_state.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_output_env_wins(tmp_path, monkeypatch):
    monkeypatch.setenv("FREEBOUND_OUT", str(tmp_path / "env"))
    cfg = write(tmp_path, "periodic-state", "nt = 16\nnx = 16")
    assert main(["periodic-state", "--config", cfg, "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "result.json").exists()
    assert not (tmp_path / "flag").exists()


def test_bad_family_exits_2(tmp_path, capsys):
    text = BENCH.format(task="semiwave", numerics="").replace("homogeneous_logistic", "bistable")
    assert main(["semiwave", "--config", write(tmp_path, "", text=text)]) == 2
    assert "problem.family" in capsys.readouterr().err


def test_unknown_numerics_key_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "semiwave", "colour = 1")
    assert main(["semiwave", "--config", cfg]) == 2
    assert "numerics.colour" in capsys.readouterr().err


def test_task_mismatch_exits_2(tmp_path):
    cfg = write(tmp_path, "semiwave")
    assert main(["dichotomy", "--config", cfg]) == 2


def test_compute_error_is_recorded(tmp_path):
    cfg = write(tmp_path, "speed-direct", "T = 1.5")
    assert main(["speed-direct", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = json.loads((tmp_path / "o" / "result.json").read_text())["error"]
    assert err["type"] == "PreconditionError" and err["origin"] == "freebound.speed_lab"


def test_compare_needs_two_files(tmp_path, capsys):
    cfg = write(tmp_path, "semiwave")
    main(["semiwave", "--config", cfg, "--out", str(tmp_path / "s")])
    assert main(["compare", str(tmp_path / "s" / "result.json")]) == 2
    assert "two" in capsys.readouterr().err


def test_three_way_compare(tmp_path):
    runs = {
        "semiwave": "",
        "speed-direct": "T = 30.0",
        "speed-cauchy": "T = 20.0",
    }
    paths = []
    for task, num in runs.items():
        cfg = write(tmp_path, task, num, name=f"{task}.toml")
        assert main([task, "--config", cfg, "--out", str(tmp_path / task)]) == 0
        paths.append(str(tmp_path / task / "result.json"))
    table = compare(paths)
    gaps = np.array(table["gaps"])
    assert gaps.shape == (3, 3)
    assert np.allclose(gaps, gaps.T) and np.all(np.diag(gaps) == 0)
    assert gaps[0, 1] <= 0.03
    assert main(["compare", *paths, "--out", str(tmp_path / "cmp")]) == 0
    assert (tmp_path / "cmp" / "compare.csv").exists()


def test_compare_rejects_mixed_problems(tmp_path, capsys):
    a = write(tmp_path, "semiwave", name="a.toml")
    b = write(tmp_path, "", name="b.toml", text=BENCH.format(task="semiwave", numerics="").replace("mu = 1.0", "mu = 2.0"))
    main(["semiwave", "--config", a, "--out", str(tmp_path / "a")])
    main(["semiwave", "--config", b, "--out", str(tmp_path / "b")])
    assert main(["compare", str(tmp_path / "a" / "result.json"), str(tmp_path / "b" / "result.json")]) == 2
    assert "mu" in capsys.readouterr().err
