import json
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from magnomech.checks import SUITES, run_checks
from magnomech.cli import main, read_trajectory_csv, simulate, step_count, trajectory_header
from magnomech.errors import ContractError
from magnomech.nonholonomic import multiplier_oracle_vf
from magnomech.scenarios import load_builtin

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_RUNS = {"lorentz2d": ("2", "0.01"), "knife_edge_magnetic": ("1", "0.01")}

NON_CLOSED = {
    "schema_version": 1,
    "name": "non_closed_field",
    "n": 3,
    "hamiltonian": "0.5*(p1^2 + p2^2 + p3^2)",
    "magnetic": {"matrix": [[0, "q3", 0], ["-q3", 0, 0], [0, 0, 0]]},
    "gamma": [0, 0, 0],
}


def scenario_file(tmp_path, data):
    path = tmp_path / f"{data['name']}.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


def verdicts(report):
    return {r.check_id: r.verdict for r in report.records}


# ------------------------------------------------------------------ checks


def test_lorentz_identities_all_pass(builtin):
    v = verdicts(run_checks(builtin("lorentz2d"), "lemma34"))
    assert v and set(v.values()) == {"pass"}


def test_magnetic_knife_edge_distributional_suite(builtin):
    rep = run_checks(builtin("knife_edge_magnetic"), "dist")
    v = verdicts(rep)
    assert v["dist.oracle_agreement"] == "pass"
    assert not rep.failed
    assert all(x in ("pass", "info") for k, x in v.items() if k != "dist.hj1")


def test_missing_gamma_gives_skipped(builtin):
    rep = run_checks(builtin("zero_field"), "hj1")
    assert {r.verdict for r in rep.records} == {"skipped"}
    assert all("missing input: gamma" in r.note for r in rep.records)
    assert not rep.failed


def test_records_sorted_and_suite_prefixed(builtin):
    rep = run_checks(builtin("knife_edge"), "all")
    ids = [r.check_id for r in rep.records]
    assert ids == sorted(ids)
    assert {i.split(".")[0] for i in ids} == set(SUITES) - {"all"}


def test_report_body_deterministic(builtin):
    scn = builtin("lorentz2d")
    a = run_checks(scn, "hj1", seed=42).body_json()
    b = run_checks(scn, "hj1", seed=42).body_json()
    assert a == b
    assert run_checks(scn, "hj1", seed=7).body_json() != a


def test_tolerance_override_reclassifies(builtin):
    scn = builtin("lorentz2d")
    rep = run_checks(scn, "lemma34", tol=0.0)
    assert all(r.tolerance == 0.0 for r in rep.records if r.verdict != "info")


def test_non_closed_field_fails_closedness(tmp_path):
    from magnomech.scenarios import parse_scenario

    rep = run_checks(parse_scenario(scenario_file(tmp_path, NON_CLOSED)), "lemma34")
    v = verdicts(rep)
    assert v["lemma34.closedness"] == "fail" and rep.failed


# ------------------------------------------------------------------ cli exit codes


def test_exit_codes(tmp_path, capsys):
    assert main(["check", "lorentz2d", "--suite", "lemma34"]) == 0
    assert main(["check", scenario_file(tmp_path, NON_CLOSED), "--suite", "lemma34"]) == 1
    assert main(["check", "zero_field", "--suite", "hj1"]) == 0
    bad = dict(NON_CLOSED, schema_version=9, name="bad")
    assert main(["check", scenario_file(tmp_path, bad), "--suite", "lemma34"]) == 2
    assert main(["check", "no_such_scenario"]) == 2
    assert main(["simulate", "lorentz2d", "--t-end", "1", "--dt", "0.3", "--out", str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert "schema_version" in err and "does not divide" in err


def test_report_file_body_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert main(["check", "knife_edge", "--suite", "dist", "--report", str(p)]) == 0
    a, b = (json.loads(p.read_text()) for p in paths)
    assert json.dumps(a["body"]) == json.dumps(b["body"])
    assert set(a["timing"]) == {c["check_id"] for c in a["body"]["checks"]}


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert "lorentz2d" in out and "knife_edge_magnetic" in out


# ------------------------------------------------------------------ simulate


def test_step_count():
    assert step_count(10, 1e-3) == 10000
    assert step_count(1.0, 0.1) == 10
    for bad in ((1.0, 0.3), (0, 0.1), (1.0, -0.1)):
        with pytest.raises(ContractError):
            step_count(*bad)


def test_lorentz_long_run_matches_circle(builtin):
    traj = simulate(builtin("lorentz2d"), 10.0, 1e-3)
    t = traj.t
    exact = np.stack([np.sin(t), 1 - np.cos(t), np.cos(t), np.sin(t)], axis=1)
    assert len(t) == 10001
    assert np.max(np.abs(np.linalg.norm(traj.z[:, 2:], axis=1) - 1)) <= 1e-8
    assert np.max(np.abs(traj.z - exact)) <= 1e-8


def test_straight_glide_is_affine(builtin):
    scn = builtin("knife_edge")
    traj = simulate(scn, 2.0, 1e-2, z0=[0, 0, 0, 1, 0, 0])
    assert np.max(np.abs(traj.z[:, 0] - traj.t)) <= 1e-9
    assert np.max(np.abs(traj.z[:, [1, 2, 4, 5]])) <= 1e-12


def test_zero_field_rows_constant(builtin):
    traj = simulate(builtin("zero_field"), 1.0, 0.1)
    assert np.array_equal(traj.z, np.tile(traj.z[0], (len(traj.t), 1)))


def test_knife_edge_against_independent_integrator(builtin):
    scn = builtin("knife_edge")
    z0 = np.array([0.0, 0.0, 0.2, 0.9 * np.cos(0.2), 0.9 * np.sin(0.2), 0.7])
    traj = simulate(scn, 1.0, 1e-2, z0=z0)
    ref = solve_ivp(lambda t, z: multiplier_oracle_vf(scn.nonholonomic, z), (0, 1), z0, rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(traj.z[-1] - ref.y[:, -1])) <= 1e-8


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden_trajectory_reproduced(name, tmp_path, capsys):
    t_end, dt = GOLDEN_RUNS[name]
    out = tmp_path / f"{name}.csv"
    assert main(["simulate", name, "--t-end", t_end, "--dt", dt, "--out", str(out)]) == 0
    header, rows = read_trajectory_csv(out)
    g_header, g_rows = read_trajectory_csv(GOLDEN / f"{name}.csv")
    n = load_builtin(name).n
    assert header == g_header == trajectory_header(n)
    assert rows.shape == g_rows.shape == (int(round(float(t_end) / float(dt))) + 1, 2 * n + 3)
    assert np.max(np.abs(rows - g_rows)) <= 1e-12
    summary = out.read_text().splitlines()[-1]
    assert summary.startswith("# summary,max_constraint_norm=")


def test_golden_lorentz_matches_circle():
    _, rows = read_trajectory_csv(GOLDEN / "lorentz2d.csv")
    t = rows[:, 0]
    exact = np.stack([np.sin(t), 1 - np.cos(t), np.cos(t), np.sin(t)], axis=1)
    assert np.max(np.abs(rows[:, 1:5] - exact)) <= 1e-9
