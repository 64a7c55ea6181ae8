import csv
import json
import shutil

import numpy as np
import pytest

from evolvability.cli import EXIT_CONFIG, EXIT_IO, main
from evolvability.experiment import ConfigError, ExperimentConfig
from evolvability.markov import TransitionMatrix
from evolvability.niches import NicheGrid
from oracles import expected_distinct

SMALL_PUSH = {
    "environment": {"type": "push", "hidden_dims": [8]},
    "mutation": {"offspring_count": 8},
    "walk_length": 6,
    "runs_per_config": 3,
}


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _run(tmp_path, command, config, *extra):
    cfg = _write(tmp_path / f"cfg_{command}.json", config)
    return main([command, "--config", cfg, *extra])


def test_pressure_sweep_row_accounting(tmp_path, capsys):
    config = {
        "environment": {"type": "push", "hidden_dims": [8]},
        "walks": [{"kind": "selective"}, {"kind": "random"}],
        "runs_per_config": 5,
        "walk_length": 10,
        "mutation": {"offspring_count": 10},
    }
    assert _run(tmp_path, "pressure-sweep", config, "--out", str(tmp_path / "o")) == 0
    summary = _read_csv(tmp_path / "o" / "summary.csv")
    assert len(summary) == 2 * 10
    assert list(summary[0]) == ["walk_kind", "metric", "step", "mean", "ci95", "run_count"]
    assert {r["run_count"] for r in summary} == {"5"}
    runs = _read_csv(tmp_path / "o" / "runs.csv")
    assert len(runs) == 2 * 5 * 10
    payload = json.loads(capsys.readouterr().out)
    assert payload["spearman"]["n"] == 10
    assert payload == json.loads((tmp_path / "o" / "stats.json").read_text())


def test_same_seed_byte_identical_across_jobs(tmp_path):
    outs = []
    for jobs in (1, 8, 1):
        out = tmp_path / f"j{jobs}_{len(outs)}"
        assert _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(out), "--jobs", str(jobs)) == 0
        outs.append(out)
    for name in ("runs.csv", "summary.csv", "stats.json"):
        first = (outs[0] / name).read_bytes()
        assert all((o / name).read_bytes() == first for o in outs[1:]), name


def test_different_seed_changes_results(tmp_path):
    _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(tmp_path / "a"), "--seed", "1")
    _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(tmp_path / "b"), "--seed", "2")
    assert (tmp_path / "a" / "runs.csv").read_bytes() != (tmp_path / "b" / "runs.csv").read_bytes()


def test_crash_resume_gives_identical_outputs(tmp_path):
    out = tmp_path / "o"
    assert _run(tmp_path, "metric-comparison", SMALL_PUSH, "--out", str(out)) == 0
    reference = (out / "runs.csv").read_bytes()
    states = sorted((out / "state" / "metrics").glob("*.json"))
    assert len(states) == 4 * 3
    for p in states[::2]:
        p.unlink()
    (out / "runs.csv").unlink()
    assert _run(tmp_path, "metric-comparison", SMALL_PUSH, "--out", str(out), "--jobs", "3") == 0
    assert (out / "runs.csv").read_bytes() == reference


def test_resume_reads_persisted_state(tmp_path):
    out = tmp_path / "o"
    _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(out))
    path = out / "state" / "pressure" / "c000_r000.json"
    state = json.loads(path.read_text())
    state["result"]["steps"][0][4] = 123.0  # evolvability_expected of step 0
    path.write_text(json.dumps(state))
    _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(out))
    assert _read_csv(out / "runs.csv")[0]["evolvability_expected"] == "123.0"


def test_stale_state_from_other_config_is_ignored(tmp_path):
    out = tmp_path / "o"
    _run(tmp_path, "pressure-sweep", SMALL_PUSH, "--out", str(out))
    fresh = tmp_path / "fresh"
    other = dict(SMALL_PUSH, walk_length=4)
    _run(tmp_path, "pressure-sweep", other, "--out", str(fresh))
    shutil.copytree(out / "state", tmp_path / "mixed" / "state")
    _run(tmp_path, "pressure-sweep", other, "--out", str(tmp_path / "mixed"))
    assert (tmp_path / "mixed" / "runs.csv").read_bytes() == (fresh / "runs.csv").read_bytes()


@pytest.mark.parametrize(
    "bad",
    [
        {"runs_per_config": 0},
        {"mutation": {"scale": -1}},
        {"walks": [{"kind": "teleport"}]},
        {"environment": {"type": "maze"}},
        {"colour": "blue"},
        {"metrics": ["knn", "cosine"]},
    ],
)
def test_config_errors_exit_code(tmp_path, bad, capsys):
    assert _run(tmp_path, "metric-comparison", bad) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_unreadable_config_is_config_error(tmp_path):
    assert main(["pressure-sweep", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["pressure-sweep", "--config", str(tmp_path / "broken.json")]) == EXIT_CONFIG


def test_single_pressure_level_rejected(tmp_path):
    assert _run(tmp_path, "pressure-sweep", {"walks": [{"kind": "random"}]}) == EXIT_CONFIG


def test_output_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert _run(tmp_path, "dissimila-scan", {"dissimila": {"sample_count": 2}}, "--out", str(blocker / "x")) == EXIT_IO


def test_profile_merging():
    cfg = ExperimentConfig.from_dict({"walk_length": 7}, "paper", seed=5)
    assert cfg.runs == 50 and cfg.raw["walk_length"] == 7 and cfg.seed == 5
    assert ExperimentConfig.from_dict(None, "desk").runs == 10
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(None, "cluster")
    a = ExperimentConfig.from_dict(None, out="x", jobs=1)
    b = ExperimentConfig.from_dict(None, out="y", jobs=4)
    assert a.fingerprint() == b.fingerprint()


def test_metric_comparison_emits_h_and_p(tmp_path, capsys):
    config = dict(SMALL_PUSH, metrics=["kde", "knn"])
    assert _run(tmp_path, "metric-comparison", config, "--out", str(tmp_path / "o")) == 0
    payload = json.loads(capsys.readouterr().out)
    assert set(payload["kruskal_wallis"]) == {"H", "p"}
    assert 0.0 <= payload["kruskal_wallis"]["p"] <= 1.0
    summary = _read_csv(tmp_path / "o" / "summary.csv")
    by_metric = {}
    for row in summary:
        by_metric.setdefault(row["metric"], []).append(row)
    assert set(by_metric) == {"kde", "knn"}
    assert len(by_metric["kde"]) == len(by_metric["knn"]) == 6


MARKOV_CONST = {
    "environment": {"type": "constant", "dims": [3, 4, 2], "value": [0.35, 0.75]},
    "markov": {"budget": 150, "l_values": [1, 2], "U": 4, "repeats": 30, "sample_size": 10, "genotype_count": 3},
}


def test_markov_constant_landscape_one_over_n(tmp_path):
    out = tmp_path / "o"
    with pytest.warns(UserWarning):
        assert _run(tmp_path, "markov-estimate", MARKOV_CONST, "--out", str(out)) == 0
    rows = _read_csv(out / "genotypes.csv")
    assert len(rows) == 3
    for row in rows:
        for col in ("child_coverage", "l1_mean", "l2_mean"):
            assert float(row[col]) == 0.01
    T = TransitionMatrix.load(out / "transition_matrix.json")
    assert T.observed.sum() == 1
    niches = _read_csv(out / "niches.csv")
    assert len(niches) == 100
    assert all(float(r["l2_mean"]) == 0.01 for r in niches)
    assert sum(r["status"] == "observed" for r in niches) == 1


def test_markov_injected_matrix_reproduces_oracle(tmp_path):
    grid = NicheGrid.square(2)
    t = np.array(
        [[0.5, 0.5, 0.0, 0.0], [0.0, 0.2, 0.8, 0.0], [0.25, 0.25, 0.25, 0.25], [0.0, 0.0, 0.0, 0.0]]
    )
    TransitionMatrix(t, grid=grid).save(tmp_path / "t.json")
    config = {
        "environment": {"type": "constant", "dims": [3, 4, 2], "value": [0.25, 0.25]},
        "grid": grid.to_dict(),
        "markov": {
            "transition_matrix": str(tmp_path / "t.json"),
            "l_values": [1, 2, 3],
            "U": 2,
            "repeats": 20_000,
            "sample_size": 5,
            "genotype_count": 1,
        },
    }
    assert _run(tmp_path, "markov-estimate", config, "--out", str(tmp_path / "o")) == 0
    niches = _read_csv(tmp_path / "o" / "niches.csv")
    assert [r["status"] for r in niches] == ["observed"] * 3 + ["unobserved"]
    for j, row in enumerate(niches):
        D = np.eye(4)[j]
        for l in (1, 2, 3):
            exact = expected_distinct(t, D, l, 2) / 4
            mean, se = float(row[f"l{l}_mean"]), float(row[f"l{l}_se"])
            assert abs(mean - exact) <= 3 * se + 1e-12, (j, l)
    (geno,) = _read_csv(tmp_path / "o" / "genotypes.csv")
    # constant behavior (0.25, 0.25) lies in niche 0
    exact = expected_distinct(t, np.eye(4)[0], 3, 2) / 4
    assert abs(float(geno["l3_mean"]) - exact) <= 3 * float(geno["l3_se"])


def test_markov_l1_column_matches_child_coverage(tmp_path):
    config = {
        "environment": {"type": "linear", "dims": [3, 4, 2], "offset": [0.5, 0.5]},
        "mutation": {"scale": 0.2},
        "markov": {"budget": 300, "l_values": [1], "U": 5, "repeats": 4000, "sample_size": 20,
                   "genotype_count": 4, "niches": False},
    }
    assert _run(tmp_path, "markov-estimate", config, "--out", str(tmp_path / "o")) == 0
    for row in _read_csv(tmp_path / "o" / "genotypes.csv"):
        assert abs(float(row["l1_mean"]) - float(row["child_coverage"])) <= 3 * float(row["l1_se"]) + 1e-12


def test_markov_rejects_mismatched_matrix(tmp_path):
    TransitionMatrix(np.eye(3)).save(tmp_path / "t.json")
    config = {"environment": {"type": "constant", "dims": [3, 4, 2]},
              "markov": {"transition_matrix": str(tmp_path / "t.json")}}
    assert _run(tmp_path, "markov-estimate", config, "--out", str(tmp_path / "o")) == EXIT_CONFIG


def test_dissimila_constant_landscape(tmp_path):
    config = {"environment": {"type": "constant", "dims": [3, 4, 2]}, "dissimila": {"sample_count": 6}}
    assert _run(tmp_path, "dissimila-scan", config, "--out", str(tmp_path / "o")) == 0
    rows = _read_csv(tmp_path / "o" / "dissimila.csv")
    assert len(rows) == 6
    assert all(float(r["r_star"]) == 0.0 for r in rows)


def test_dissimila_sorted_ascending(tmp_path):
    config = dict(SMALL_PUSH, dissimila={"sample_count": 12}, mutation={"scale": 1.0, "offspring_count": 8})
    assert _run(tmp_path, "dissimila-scan", config, "--out", str(tmp_path / "o")) == 0
    rows = _read_csv(tmp_path / "o" / "dissimila.csv")
    r = [float(x["r_star"]) for x in rows]
    assert r == sorted(r)
    assert all(0.0 <= v < 2.0 for v in r)
    assert len({x["digest"] for x in rows}) == 12
