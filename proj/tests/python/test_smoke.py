import json
import os
from pathlib import Path

import numpy as np
import pytest

import crda

FIXTURES = Path(os.environ.get("CRDA_FIXTURE_DIR", Path(__file__).resolve().parents[2] / "fixtures"))


@pytest.fixture(scope="module")
def mini3():
    return crda.load_case(FIXTURES / "mini3.json")


@pytest.fixture(scope="module")
def mini3_inputs(mini3):
    return crda.compute_inputs(mini3)


def test_load_case(mini3):
    assert mini3.num_compromised == 3
    assert mini3.num_scenarios == 8
    assert mini3.attack_buses == [9, 28, 29]
    assert len(mini3.hash) == 64


def test_missing_case_raises():
    with pytest.raises(crda.CaseError):
        crda.load_case(FIXTURES / "no-such-case.json")


def test_invalid_case_raises():
    doc = json.loads((FIXTURES / "mini3.json").read_text())
    doc["loads"][0]["damping"] = 0.0
    with pytest.raises(crda.CaseError):
        crda.parse_case(doc)


def test_scenario_round_trip():
    for m in range(64):
        assert crda.scenario_index(crda.index_to_availability(m, 6)) == m
    assert crda.scenario_index([1, 0, 0, 0, 0, 0]) == 62


def test_order_matrix():
    o = crda.order_matrix(3, 2)
    assert o.shape == (2, 9)
    steps = np.abs(np.diff(o, axis=1)).sum(axis=0)
    assert (steps == 1).all()


def test_system_matrix(mini3):
    b = crda.system_matrix(mini3, [0.0] * 3, [0.0] * 2)
    assert b.shape[0] == b.shape[1]
    assert np.max(np.linalg.eigvals(b).real) == pytest.approx(crda.spectral_abscissa(mini3, [0.0] * 3, [0.0] * 2))


def test_worst_case_gains(mini3):
    gains, abscissa = crda.worst_case_gains(mini3, 0)
    assert gains == [0.0, 0.0, 0.0]
    full, worst = crda.worst_case_gains(mini3, 7)
    assert worst >= abscissa
    assert all(0.0 <= g <= b + 1e-12 for g, b in zip(full, crda.attack_gain_bounds(mini3)))


def test_inputs(mini3_inputs):
    assert mini3_inputs.samples == 4
    assert mini3_inputs.max_error <= 0.1
    assert sorted(mini3_inputs.attack_gains) == list(range(8))


def test_joint_matches_oracle(mini3, mini3_inputs):
    plan = crda.solve_joint(mini3, mini3_inputs)
    oracle = crda.oracle_optimum(mini3, mini3_inputs)
    assert plan["status"] == "optimal"
    assert plan["audit_passed"]
    assert oracle["feasible"]
    assert plan["objective"] == pytest.approx(oracle["objective"], abs=1e-6)
    assert len(plan["steps"]) == mini3.horizon
    route = plan["routes"][0]["route"]
    assert route[0] == "st" and route[-1] == "en"

    decoupled = crda.solve_decoupled(mini3, mini3_inputs)
    assert decoupled["objective"] >= plan["objective"] - 1e-6


def test_simulate(mini3, mini3_inputs):
    plan = crda.solve_joint(mini3, mini3_inputs)
    first = plan["steps"][0]
    attack = crda.worst_case_gains(mini3, first["scenario"])[0]
    traj = crda.simulate(mini3, attack, first["gains"], horizon=5.0)
    assert not traj["diverged"]
    assert traj["time"].shape == (501,)
    assert traj["states"].shape[0] == 501
    assert traj["max_abs_omega"] < 0.04

    open_loop = crda.simulate(mini3, attack, [0.0, 0.0], horizon=30.0)
    assert open_loop["diverged"] == (crda.spectral_abscissa(mini3, attack, [0.0, 0.0]) > 0)


def test_export_lp(mini3, mini3_inputs):
    text = crda.export_lp(mini3, mini3_inputs, "routing")
    assert text.splitlines()[-1] == "End"
    assert "Binaries" in text
    with pytest.raises(crda.ModelError):
        crda.export_lp(mini3, mini3_inputs, "nope")


def test_backends():
    assert "highs" in crda.available_backends()
