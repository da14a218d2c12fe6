import json

import numpy as np
import pytest

from xlris.bench import (
    CSV_HEADER,
    ExperimentPlan,
    PlanError,
    emit,
    emit_energy_profile,
    energy_profile,
    load_plan,
    run_sweep,
)
from xlris.config import desk_profile


@pytest.fixture(scope="module")
def small_plan():
    return ExperimentPlan(
        cfg=desk_profile(),
        axis="T",
        values=(32, 64),
        fixed=10.0,
        methods=("oracle", "bomp", "p-somp"),
        trials=2,
        seed=3,
    )


@pytest.fixture(scope="module")
def table(small_plan):
    return run_sweep(small_plan)


@pytest.mark.parametrize(
    "bad",
    [
        dict(trials=0),
        dict(values=(64, 32)),
        dict(values=(32, 32)),
        dict(values=()),
        dict(methods=()),
        dict(methods=("magic",)),
        dict(axis="frequency"),
        dict(values=(31.5,)),
    ],
)
def test_invalid_plans(small_plan, bad):
    data = dict(cfg=small_plan.cfg, axis="T", values=(32,), fixed=10.0)
    data.update(bad)
    with pytest.raises(PlanError):
        ExperimentPlan(**data)


def test_rows_cover_methods_times_points(small_plan, table):
    assert len(table.rows) == 3 * 2
    assert {(r.method, r.value) for r in table.rows} == {
        (m, v) for m in small_plan.methods for v in small_plan.values
    }
    assert all(r.trials == 2 and r.failures == 0 for r in table.rows)


def test_oracle_row_is_floor(table):
    for value in (32, 64):
        oracle = table.row("oracle", value)
        assert oracle.nmse_db <= -240
        assert all(oracle.nmse_db < r.nmse_db for r in table.rows if r.method != "oracle")


def test_mean_of_linear_ratios(table):
    r = table.row("bomp", 32)
    assert r.nmse_db == pytest.approx(10 * np.log10(r.nmse_linear))


def test_worker_count_does_not_change_results(small_plan, table):
    parallel = run_sweep(small_plan, jobs=2)
    for a, b in zip(table.rows, parallel.rows):
        assert (a.method, a.value, a.nmse_linear, a.std_err) == (b.method, b.value, b.nmse_linear, b.std_err)


def test_emit_files_and_determinism(tmp_path, small_plan, table):
    paths = emit(table, tmp_path / "a")
    again = emit(run_sweep(small_plan), tmp_path / "b")
    assert paths["csv"].read_bytes() == again["csv"].read_bytes()
    lines = paths["csv"].read_text().splitlines()
    assert lines[0].split(",") == list(CSV_HEADER)
    assert len(lines) - 1 == len(small_plan.methods) * len(small_plan.values)
    series = paths["series_bomp"].read_text().splitlines()
    assert series[0] == "T,nmse_db" and len(series) == 3


def test_json_metadata_round_trips_to_plan(tmp_path, small_plan, table):
    paths = emit(table, tmp_path)
    plan = load_plan(paths["json"])
    assert plan == small_plan
    meta = json.loads(paths["json"].read_text())
    assert meta["versions"]["xlris"] and meta["plan"]["seed"] == 3
    # parse-emit-parse is idempotent
    assert ExperimentPlan.from_dict(plan.to_dict()) == plan


def test_empty_table_errors_before_writing(tmp_path, small_plan):
    from xlris.bench import ResultTable

    out = tmp_path / "never"
    with pytest.raises(PlanError):
        emit(ResultTable(small_plan, []), out)
    assert not out.exists()


def test_solver_failure_is_recorded(monkeypatch, small_plan):
    from xlris.solvers import METHODS

    def broken(problem, solver_cfg):
        raise np.linalg.LinAlgError("singular")

    monkeypatch.setitem(METHODS, "bomp", broken)
    plan = ExperimentPlan(
        cfg=small_plan.cfg, axis="T", values=(16,), fixed=10.0, methods=("bomp", "oracle"), trials=2
    )
    table = run_sweep(plan)
    assert table.row("bomp", 16).failures == 2
    assert np.isnan(table.row("bomp", 16).nmse_db)
    assert table.row("oracle", 16).failures == 0
    assert len(table.errors) == 2 and "singular" in table.errors[0]


def test_snr_axis_is_monotone_with_slack():
    plan = ExperimentPlan(
        cfg=desk_profile(), axis="snr", values=(0.0, 20.0), fixed=64, methods=("p-somp",), trials=3, seed=1
    )
    table = run_sweep(plan)
    lo, hi = table.row("p-somp", 0.0), table.row("p-somp", 20.0)
    assert hi.nmse_db <= lo.nmse_db + 1.0


def test_energy_profile(tmp_path):
    cfg = desk_profile()
    prof = energy_profile(cfg, trials=3, seed=2)
    assert prof.energy.shape == (3, cfg.dim // 8, cfg.n_subcarriers)
    assert prof.counts.shape == (3, cfg.n_subcarriers)
    assert np.all(prof.counts >= 1) and np.all(prof.counts <= cfg.dim // 8)
    paths = emit_energy_profile(prof, cfg, 2, tmp_path)
    rows = paths["csv"].read_text().splitlines()
    assert rows[0] == "trial,block,subcarrier,energy"
    assert len(rows) - 1 == prof.energy.size
