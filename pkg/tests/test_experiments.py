import copy
import io
import json
import math

import numpy as np
import pytest

from gfid.errors import ConfigError, IoError
from gfid.experiments import (
    PRESETS,
    ResultRow,
    ScenarioConfig,
    child_seed,
    emit_csv,
    load_config,
    load_preset,
    preset_document,
    read_csv,
    run_scenario,
    run_trial,
    summarize,
)

BASE = {
    "name": "tiny",
    "trials": 3,
    "seed": 7,
    "graph": {"model": "er", "n": 12, "p": 0.4},
    "filters": {"rule": "iid_normal", "orders": [2, 2]},
    "input": {"kind": "full"},
    "noise": {"sigma": 0.0},
    "method": {"kind": "ls", "variant": "multi_known"},
    "grid": {"noise.sigma": [0.0, 0.01]},
}


def doc(**changes):
    d = copy.deepcopy(BASE)
    for dotted, value in changes.items():
        target = d
        keys = dotted.split("__")
        for k in keys[:-1]:
            target = target[k]
        if value is None:
            del target[keys[-1]]
        else:
            target[keys[-1]] = value
    return d


@pytest.mark.parametrize("name", PRESETS)
def test_presets_validate(name):
    cfg = load_preset(name)
    assert cfg.name == name
    assert cfg.trials >= 1 and cfg.full_trials >= cfg.trials
    assert cfg.n_cells >= 1


def test_fig1a_row_count():
    cfg = load_preset("fig1a")
    assert cfg.n_cells == 24 * 4
    assert cfg.trials == 200 and cfg.full_trials == 1000
    assert load_preset("fig2a").full_scale().trials == 20000


@pytest.mark.parametrize("changes,path", [
    (dict(trials=0), "trials"),
    (dict(trials=None), "<root>.trials"),
    (dict(graph__model="grid"), "graph.model"),
    (dict(graph__p=1.5), "graph.p"),
    (dict(graph__n=None), "graph.n"),
    (dict(filters__orders=[2]), "filters.orders"),
    (dict(filters__rule="fancy"), "filters.rule"),
    (dict(input__kind="bandlimited"), "input.k"),
    (dict(input__kind="bandlimited", input__k=13), "input.k"),
    (dict(noise__sigma=-1, grid={}), "noise.sigma"),
    (dict(method__kind="magic"), "method.kind"),
    (dict(method__variant="single_known"), "method.variant"),
    (dict(method__variant="multi_overshoot"), "method.overshoot"),
    (dict(method__constraint="nonnegative"), "method.constraint"),
    (dict(grid={"noise.sigma": []}), "grid.noise.sigma"),
    (dict(grid={"noise.sigma": [0.0, -0.5]}), "noise.sigma"),
    (dict(grid={"graph": [{"model": "er"}]}), "grid.graph"),
    (dict(error_metric="loose"), "error_metric"),
    (dict(extra=1), "<root>"),
])
def test_config_errors_name_the_field(changes, path):
    with pytest.raises(ConfigError) as info:
        ScenarioConfig.from_dict(doc(**changes))
    assert info.value.path == path


def test_overshoot_below_true_order():
    d = doc(method__variant="multi_overshoot", method__overshoot=[1, 3])
    with pytest.raises(ConfigError, match="overshoot"):
        ScenarioConfig.from_dict(d)


def test_grid_section_switch_drops_old_parameters():
    d = doc(grid={"graph": [{"label": "ws", "model": "watts_strogatz", "n": 12, "mean_degree": 4,
                             "rewire_p": 0.2}, {"label": "dense", "p": 0.6}]})
    cfg = ScenarioConfig.from_dict(d)
    assert cfg.cell(0).graph_model == "watts_strogatz"
    assert cfg.cell(1).graph_params == {"n": 12, "p": 0.6}
    assert cfg.cell_labels(1) == ("dense",)


def test_load_config_errors(tmp_path):
    with pytest.raises(IoError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE))
    assert load_config(good).n_cells == 2


def test_child_seed_is_stable():
    # frozen from numpy's SeedSequence; a change here breaks CSV reproducibility
    assert child_seed(2021, 0, 0) == 401918031
    assert child_seed(2021, 3, 17) == 2207893035
    assert len({child_seed(1, c, t) for c in range(5) for t in range(50)}) == 250
    assert child_seed(2021, 0, 0) == int(np.random.SeedSequence([2021, 0, 0]).generate_state(1)[0])


def test_rows_ordered_and_noiseless_exact():
    cfg = ScenarioConfig.from_dict(BASE)
    rows = list(run_scenario(cfg))
    assert [(r.cell, r.trial) for r in rows] == [(("0.0",), 0), (("0.0",), 1), (("0.0",), 2),
                                                 (("0.01",), 0), (("0.01",), 1), (("0.01",), 2)]
    for r in rows[:3]:
        assert r.error < 1e-8 and r.success
        assert r.wall_ms is None


def test_emit_csv_layout(tmp_path):
    cfg = ScenarioConfig.from_dict(BASE)
    path = tmp_path / "out.csv"
    assert emit_csv(run_scenario(cfg, timing=True), path, cfg.cell_keys) == 6
    lines = path.read_text().splitlines()
    assert lines[0] == "scenario,noise.sigma,trial,seed,error,success,diag,wall_ms"
    first = lines[1].split(",")
    assert first[0] == "tiny" and first[1] == "0.0" and first[2] == "0"
    assert float(first[-1]) >= 0
    keys, records = read_csv(path)
    assert keys == ("noise.sigma",) and len(records) == 6


def test_empty_stream_gives_header_only():
    buf = io.StringIO()
    assert emit_csv(iter(()), buf, ("a", "b")) == 0
    assert buf.getvalue() == "scenario,a,b,trial,seed,error,success,diag,wall_ms\n"


def test_emit_csv_io_error(tmp_path):
    with pytest.raises(IoError):
        emit_csv([], tmp_path / "no" / "such" / "dir.csv")


def test_byte_identical_serial_parallel(tmp_path):
    cfg = load_preset("fig2b").with_trials(2)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_scenario(cfg), a, cfg.cell_keys)
    emit_csv(run_scenario(cfg, workers=2), b, cfg.cell_keys)
    assert a.read_bytes() == b.read_bytes()


def test_seed_override_changes_rows():
    cfg = ScenarioConfig.from_dict(BASE)
    a = [r.error for r in run_scenario(cfg.with_trials(2))]
    b = [r.error for r in run_scenario(cfg.with_trials(2).with_seed(8))]
    assert a[2:] != b[2:]


def test_trial_failure_is_isolated():
    # distinct spectrum can never hold on the karate graph, so every trial fails cleanly
    d = doc(graph={"model": "karate", "distinct_spectrum": True}, grid={})
    cfg = ScenarioConfig.from_dict(d)
    rows = list(run_scenario(cfg))
    assert len(rows) == 3
    assert all(math.isnan(r.error) and not r.success for r in rows)
    stats = summarize(rows)
    assert stats[()]["failed"] == 3 and stats[()]["rate"] == 0.0


def test_l1_trial_reports_certificate():
    cfg = load_preset("fig2a")
    spec = cfg.cell(2)
    error, success, diag = run_trial(spec, child_seed(1, 2, 0))
    assert np.isfinite(diag) and diag >= 0
    assert success == (error < 0.01)


def test_summarize_from_csv_records(tmp_path):
    cfg = ScenarioConfig.from_dict(BASE)
    rows = list(run_scenario(cfg))
    path = tmp_path / "r.csv"
    emit_csv(rows, path, cfg.cell_keys)
    keys, records = read_csv(path)
    assert summarize(records, keys) == summarize(rows)


def test_result_row_fields():
    row = ResultRow("s", ("a",), 1, 99, 0.5, True, float("nan"), 1.23456)
    assert row.fields() == ["s", "a", "1", "99", "0.5", "1", "nan", "1.235"]


def test_preset_document_roundtrip():
    d = preset_document("fig3b")
    assert ScenarioConfig.from_dict(d).to_dict()["grid"] == d["grid"]
