import csv
from dataclasses import replace

import numpy as np
import pytest

from mwsmpc.controller import (MissionConfigError, MissionSpec, Planner, plan_step, run_batch,
                               run_mission, write_steps_csv, write_summary_csv, write_trace_csv)
from mwsmpc.estimator import AffinePolicy
from mwsmpc.model import LinearSystem, build_stacked_prediction
from mwsmpc.qp import QpStatus
from mwsmpc.scenario import ScenarioBatch, build_h_rows, reduce_rowmax

S0 = [-8.0, 0.0]


@pytest.fixture(scope="module")
def quick_spec(case_spec):
    return replace(case_spec, mc_samples=400)


def test_spec_validation():
    base = dict(n_mission=4, s0_bound=0.9, gammas=0.99, beta=1e-3, q_cost=np.eye(2), r_cost=[[1.0]])
    assert MissionSpec(**base).gammas == (0.99,) * 3
    assert MissionSpec(**base).certified_bound == pytest.approx(0.9 * 0.99 ** 3)
    for bad in (dict(gammas=(0.9, 0.9)), dict(gammas=1.2), dict(beta=0.0), dict(s0_bound=1.5),
                dict(sk_cap=1.0), dict(n_mission=0), dict(mc_samples=0)):
        with pytest.raises(ValueError):
            MissionSpec(**{**base, **bad})


def test_noise_free_mission(case_poly, case_design, quick_spec):
    quiet = LinearSystem([[1, 1], [0, 1]], [[0.5], [1]], np.zeros((2, 2)))
    trace = run_mission(quick_spec, quiet, case_poly, case_design, S0)
    assert trace.success and trace.first_violation is None
    assert trace.sk_values[0] == 0.98
    np.testing.assert_allclose(trace.sk_values[1:], 0.99)
    assert all(s is QpStatus.OPTIMAL for s in trace.qp_statuses)
    # zero-noise scenarios collapse to the nominal constraint offsets
    pred = build_stacked_prediction(quiet, case_design.K, case_poly, 11)
    red = reduce_rowmax(build_h_rows(ScenarioBatch(np.zeros((2482, 22))), pred))
    np.testing.assert_array_equal(red.i_max, pred.c_stack)


def test_scenario_counts_and_dimensions(case_system, case_poly, case_design, quick_spec):
    trace = run_mission(quick_spec, case_system, case_poly, case_design, S0)
    assert trace.nk_values[0] == 2482
    assert [d.decision_dim for d in trace.steps] == list(range(11, 0, -1))
    assert np.all(trace.sk_values[1:] <= 0.995)


def test_applied_input_is_first_planned_input(case_system, case_poly, case_design, quick_spec):
    planner = Planner(quick_spec, case_system, case_poly, case_design)
    pol, diag = planner.plan_step(0, S0, None)
    assert diag.status is QpStatus.OPTIMAL and not diag.fallback
    assert pol.u_bar.shape == (11, 1)
    trace = planner.run_mission(S0)
    np.testing.assert_array_equal(trace.inputs[0], pol.u_bar[0])
    assert pol.nominal_consistent(case_system)


def test_fallback_keeps_previous_policy(case_system, case_poly, case_design, quick_spec):
    prev = AffinePolicy.from_inputs(case_system, 0, S0, np.zeros(11), case_design.K)
    pol, diag = plan_step(5, [5.0, 5.0], prev, quick_spec, case_system, case_poly, case_design)
    assert diag.fallback and diag.status is not QpStatus.OPTIMAL
    assert pol is prev
    s = np.array([5.0, 5.0])
    np.testing.assert_allclose(pol(5, s), prev.u_bar[5] + case_design.K @ (s - prev.s_bar[5]))


def test_infeasible_start_is_a_config_error(case_poly, case_design, quick_spec):
    loud = LinearSystem([[1, 1], [0, 1]], [[0.5], [1]], 4 * np.eye(2))
    with pytest.raises(MissionConfigError):
        run_mission(quick_spec, loud, case_poly, case_design, S0)


def test_previous_policy_required(case_system, case_poly, case_design, quick_spec):
    with pytest.raises(ValueError):
        plan_step(1, S0, None, quick_spec, case_system, case_poly, case_design)
    with pytest.raises(ValueError):
        run_mission(quick_spec, case_system, case_poly, case_design, [5.0, 0.0])


def test_failure_is_recorded(case_poly, case_design):
    # deliberately loose targets with heavy noise
    spec = MissionSpec(6, 0.3, (0.5,) * 5, 0.1, np.eye(2), [[0.1]], mc_samples=300, seed=3)
    noisy = LinearSystem([[1, 1], [0, 1]], [[0.5], [1]], 0.5 * np.eye(2))
    trace = run_mission(spec, noisy, case_poly, case_design, S0, mission=1)
    assert not trace.success
    safe = case_poly.contains(trace.states)
    assert trace.first_violation == int(np.argmin(safe))
    assert safe[:trace.first_violation].all()


def test_mission_determinism(case_system, case_poly, case_design, quick_spec):
    a = run_mission(quick_spec, case_system, case_poly, case_design, S0, mission=3)
    b = run_mission(quick_spec, case_system, case_poly, case_design, S0, mission=3)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.sk_values, b.sk_values)
    c = run_mission(quick_spec, case_system, case_poly, case_design, S0, mission=4)
    assert not np.array_equal(a.states, c.states)


def test_single_mission_batch(case_system, case_poly, case_design, quick_spec):
    res = run_batch(quick_spec, case_system, case_poly, case_design, S0, 1, keep_traces=True)
    ref = run_mission(quick_spec, case_system, case_poly, case_design, S0, 0)
    np.testing.assert_array_equal(res.traces[0].states, ref.states)
    assert res.successes == int(ref.success)
    np.testing.assert_array_equal(res.mean_sk, ref.sk_values[1:])
    assert sum(res.status_counts.values()) == 11


def test_batch_master_seed_overrides(case_system, case_poly, case_design, quick_spec):
    a = run_batch(quick_spec, case_system, case_poly, case_design, S0, 2, master_seed=99,
                  keep_traces=True)
    ref = run_mission(replace(quick_spec, seed=99), case_system, case_poly, case_design, S0, 1)
    np.testing.assert_array_equal(a.traces[1].states, ref.states)


def test_csv_writers(tmp_path, case_system, case_poly, case_design, quick_spec):
    res = run_batch(quick_spec, case_system, case_poly, case_design, S0, 2, keep_traces=True,
                    trace_dir=tmp_path / "tr")
    with open(tmp_path / "tr" / "mission_0.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "s1", "s2", "u1", "Sk", "Nk", "qp_status", "fallback", "safe"]
    assert len(rows) == 13
    assert rows[1][5] == "2482" and rows[1][6] == "Optimal"
    assert rows[-1][3:8] == [""] * 5
    assert float(rows[1][1]) == -8.0

    write_summary_csv(tmp_path / "summary.csv", res)
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines[0] == "missions,successes,ratio,S_certified"
    assert lines[1].split(",")[0] == "2"
    assert lines[1].split(",")[3] == "0.886294"

    write_steps_csv(tmp_path / "steps.csv", res)
    steps = (tmp_path / "steps.csv").read_text().splitlines()
    assert steps[0] == "k,mean_Sk,mean_Nk,fallbacks" and len(steps) == 12

    single = tmp_path / "one.csv"
    write_trace_csv(single, res.traces[1], case_poly)
    assert single.read_text() == (tmp_path / "tr" / "mission_1.csv").read_text()


def test_worker_count_does_not_change_results(case_system, case_poly, case_design, quick_spec):
    serial = run_batch(quick_spec, case_system, case_poly, case_design, S0, 3, keep_traces=True)
    pooled = run_batch(quick_spec, case_system, case_poly, case_design, S0, 3, workers=2, keep_traces=True)
    for a, b in zip(serial.traces, pooled.traces):
        np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(serial.mean_sk, pooled.mean_sk)
