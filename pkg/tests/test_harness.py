import json

import numpy as np
import pytest

from online_persuasion.errors import ConfigError, NumericalFailure, ParamError
from online_persuasion.harness import (CSV_HEADER, ExperimentConfig, adversary_sequence,
                                       check_rounds, commitment_value, csv_text,
                                       generate_instance, random_security_game, read_rounds,
                                       regret_report, run_experiment, simplex_grid)
from online_persuasion.harness import cli
from online_persuasion.harness.environments import Trace
from online_persuasion.harness.instances import SecurityGame
from online_persuasion.persuasion import receiver_actions
from online_persuasion.regret import BANDIT, simulate, synthetic_problem

BASE = dict(environment="single_receiver", algorithm="OgdFull", feedback="full", horizon=50,
            seed=3, instance={"generate": {"n": 1, "states": 3, "types": 3, "actions": 3}})


def cfg(**kw):
    return ExperimentConfig.from_dict({**BASE, **kw})


# -- configuration -----------------------------------------------------------

@pytest.mark.parametrize("bad", [
    {"algorithm": "BarrierBandit"},                 # bandit with full feedback
    {"environment": "nowhere"},
    {"horizon": 0},
    {"seed": -1},
    {"features": ["dual-ellipsoid"]},               # only for type reporting
    {"tolerances": {"speed": 1.0}},
    {"adversary": {"kind": "clever"}},
    {"colour": "red"},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**BASE, **bad})


def test_config_missing_key():
    data = dict(BASE)
    del data["seed"]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_relative_instance_path(tmp_path):
    inst = generate_instance({"n": 1, "states": 2, "types": 2, "actions": 2}, 1)
    inst.save(tmp_path / "inst.json")
    data = {**BASE, "instance": {"path": "inst.json"}}
    (tmp_path / "c.json").write_text(json.dumps(data))
    c = ExperimentConfig.load(tmp_path / "c.json")
    assert c.instance["path"] == str(tmp_path / "inst.json")
    assert ExperimentConfig.from_dict(c.to_dict()) == c


# -- instances and adversaries ----------------------------------------------------

def test_generate_instance_deterministic():
    a = generate_instance({"n": 2, "states": 3}, 42)
    b = generate_instance({"n": 2, "states": 3}, 42)
    np.testing.assert_array_equal(a.receiver_utils, b.receiver_utils)
    np.testing.assert_array_equal(a.prior, b.prior)


def test_generated_instances_valid():
    for s in range(1000):
        inst = generate_instance({"n": 1 + s % 3, "states": 1 + s % 4, "types": 1 + s % 3,
                                  "actions": 2 + s % 2}, s)
        assert np.all(inst.prior > 0) and inst.prior.sum() == pytest.approx(1.0)
        assert inst.receiver_utils.min() >= 0 and inst.receiver_utils.max() <= 1
        assert inst.sender_tensor.min() >= 0 and inst.sender_tensor.max() <= 1


def test_anonymous_instances_monotone():
    inst = generate_instance({"n": 8, "sender": "anonymous"}, 0)
    assert inst.sender_util.is_monotone()


@pytest.mark.parametrize("params", [{"n": 4}, {"states": 0}, {"actions": 3, "sender": "anonymous"},
                                    {"n": "x"}, {"speed": 1}, {"sender": "other"}])
def test_generate_instance_param_errors(params):
    with pytest.raises(ParamError):
        generate_instance(params, 0)


@pytest.mark.parametrize("kind", ["constant", "periodic", "iid", "two_phase"])
def test_adversaries(kind):
    a = adversary_sequence(kind, 4, 200, 5)
    assert len(a) == 200 and a.min() >= 0 and a.max() < 4
    np.testing.assert_array_equal(a, adversary_sequence(kind, 4, 200, 5))
    if kind == "two_phase":
        assert a[0] != a[-1] and len(set(a[:100])) == 1 and len(set(a[100:])) == 1


# -- runs and records ---------------------------------------------------------

def test_one_round_regret_is_initial_gap(tmp_path):
    trace, summ = run_experiment(cfg(horizon=1), tmp_path)
    assert summ["regret"] == pytest.approx(trace.comparator[0] - trace.expected[0])
    assert summ["regret"] >= -1e-9


def test_rounds_csv_and_prefix_sums(tmp_path):
    trace, summ = run_experiment(cfg(), tmp_path)
    text = (tmp_path / "rounds.csv").read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_rounds(tmp_path / "rounds.csv")
    assert len(rows) == 50
    assert check_rounds(rows) <= 1e-9
    assert rows[-1]["cum_regret"] == pytest.approx(summ["regret"], abs=1e-9)
    assert summ["schema"] == "v1" and summ["status"] == "complete"
    assert summ["max_deviation_gain"] <= 1e-6


def test_identical_seeds_identical_bytes(tmp_path):
    for env in (cfg(), cfg(environment="security_game", instance={}, params={"targets": 3})):
        run_experiment(env, tmp_path / "a")
        run_experiment(env, tmp_path / "b")
        assert (tmp_path / "a" / "rounds.csv").read_bytes() == \
            (tmp_path / "b" / "rounds.csv").read_bytes()
    run_experiment(cfg(seed=4), tmp_path / "c")
    assert (tmp_path / "a" / "rounds.csv").read_bytes() != (tmp_path / "c" / "rounds.csv").read_bytes()


def test_empty_suffix_leaves_report_unchanged(tmp_path):
    trace, _ = run_experiment(cfg(), tmp_path)
    longer = Trace(trace.decisions, trace.types + [], np.append(trace.states, []).astype(int),
                   np.append(trace.utility, []), np.append(trace.expected, []),
                   np.append(trace.comparator, []), trace.bound, trace.bound_name)
    assert regret_report(longer) == regret_report(trace)
    assert csv_text(longer) == csv_text(trace)


def test_monte_carlo_replay(tmp_path):
    trace, summ = run_experiment(cfg(horizon=30), tmp_path)
    from online_persuasion.harness import load_instance
    inst = load_instance(cfg())
    t = 29
    scheme = trace.decisions[t].reshape(inst.d, inst.n_signals)
    profile = tuple(int(v) for v in trace.types[t].split("-"))
    rng = np.random.default_rng(0)
    n = 1_000_000
    theta = rng.choice(inst.d, size=n, p=inst.prior)
    u = rng.random(n)
    cdf = np.cumsum(np.clip(scheme, 0, None), axis=1)
    cdf /= cdf[:, -1:]
    signal = np.minimum((u[:, None] > cdf[theta]).sum(axis=1), inst.n_signals - 1)
    table = np.zeros((inst.n_signals, inst.d))
    for s in range(inst.n_signals):
        if (inst.prior * scheme[:, s]).sum() > 1e-12:
            acts = receiver_actions(inst, scheme, s, profile)
            table[s] = inst.sender_tensor[acts]
    samples = table[signal, theta]
    sigma = samples.std() / np.sqrt(n)
    assert abs(samples.mean() - trace.expected[t]) <= 3 * sigma + 1e-12


def test_partial_feedback_learner_never_sees_types():
    # the bandit learner's plays depend on the observed scalars only
    prob = synthetic_problem(3, 4, seed=1)
    T = 100

    def observe(x, d, t):
        return np.full(len(x), 0.5 + 0.3 * np.sin(t))

    a = simulate(prob, adversary_sequence("iid", 3, T, 1)[None, :], BANDIT, [2],
                 record_plays=True, observe=observe)
    b = simulate(prob, adversary_sequence("constant", 3, T, 9)[None, :], BANDIT, [2],
                 record_plays=True, observe=observe)
    np.testing.assert_array_equal(a.plays, b.plays)


def test_type_reporting_run(tmp_path):
    c = cfg(environment="type_reporting", algorithm="FTRL", feedback="type_reporting",
            horizon=20, instance={"generate": {"n": 2, "states": 2, "types": 2, "actions": 2,
                                               "sender": "anonymous"}})
    trace, summ = run_experiment(c, tmp_path)
    assert summ["max_ic_gain"] <= 1e-6
    assert summ["regret"] <= summ["bound"]


# -- security games --------------------------------------------------------------

def test_one_target_zero_regret(tmp_path):
    c = cfg(environment="security_game", instance={}, params={"targets": 1, "types": 2})
    trace, summ = run_experiment(c, tmp_path)
    assert summ["regret"] == pytest.approx(0.0, abs=1e-12)
    assert np.all(trace.decisions == 1.0)


def test_one_attacker_type_converges_to_grid_stackelberg(tmp_path):
    c = cfg(environment="security_game", instance={}, params={"targets": 3, "types": 1,
                                                              "seed": 4}, horizon=3000)
    trace, summ = run_experiment(c, tmp_path)
    game = random_security_game(3, 1, 4)
    grid = simplex_grid(3, 64)
    best = 1.0 - game.losses(grid)[:, 0].min()
    assert trace.expected[-100:].mean() == pytest.approx(best, abs=1e-2)
    assert summ["discretization_error"] >= 0
    assert commitment_value(game, np.ones(1)) >= best - 1e-9


def test_security_game_attacker_ties_lowest_index():
    g = SecurityGame(np.full((1, 3), 0.2), np.full((1, 3), 0.8), np.ones((1, 3)), np.zeros((1, 3)))
    assert g.attacked(np.array([1 / 3, 1 / 3, 1 / 3]))[0, 0] == 0
    assert g.attacked(np.array([0.5, 0.2, 0.3]))[0, 0] == 1


def test_simplex_grid_size():
    assert len(simplex_grid(3, 64)) == 65 * 66 // 2
    np.testing.assert_allclose(simplex_grid(3, 4).sum(axis=1), 1.0)


# -- command line -------------------------------------------------------------------

def write_config(tmp_path, **kw):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({**BASE, "horizon": 20, **kw}))
    return str(path)


def test_cli_run_and_report(tmp_path, capsys):
    path = write_config(tmp_path)
    out = tmp_path / "run"
    assert cli.main(["run", "--config", path, "--out", str(out), "--seed", "9"]) == 0
    assert (out / "rounds.csv").exists()
    assert json.loads((out / "summary.json").read_text())["config"]["seed"] == 9
    assert cli.main(["report", "--out", str(out)]) == 0
    assert "regret" in capsys.readouterr().out


def test_cli_generate(tmp_path):
    out = tmp_path / "inst.json"
    assert cli.main(["generate", "--seed", "3", "--n", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["n"] == 2
    assert cli.main(["generate", "--n", "9", "--out", str(out)]) == 3


def test_cli_sweep(tmp_path):
    path = write_config(tmp_path)
    root = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", path, "--out", str(root), "--horizons", "16", "32",
                     "--seeds", "1", "2", "--workers", "1"]) == 0
    agg = json.loads((root / "aggregate.json").read_text())
    assert [c["T"] for c in agg["cells"]] == [16, 32]
    assert all(c["runs"] == 2 for c in agg["cells"])
    assert cli.main(["report", "--out", str(root)]) == 0


def test_cli_exit_codes(tmp_path, monkeypatch):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    path = write_config(tmp_path, instance={"path": "nowhere.json"})
    assert cli.main(["run", "--config", path]) == 3
    inst = tmp_path / "inst.json"
    inst.write_text(json.dumps({"n": 1, "states": 2, "prior": [0.0, 1.0], "actions": 2,
                                "types": 1, "receiver_utils": [[[[0, 1], [1, 0]]]],
                                "sender_util": {"kind": "tensor", "data": [[0, 0], [1, 1]]}}))
    path = write_config(tmp_path, instance={"path": str(inst)})
    assert cli.main(["run", "--config", path]) == 3

    def boom(cfg):
        raise NumericalFailure("LP failed")

    monkeypatch.setattr("online_persuasion.harness.records.run_environment", boom)
    out = tmp_path / "failed"
    assert cli.main(["run", "--config", write_config(tmp_path), "--out", str(out)]) == 4
    assert (out / "PARTIAL").exists()
    assert json.loads((out / "summary.json").read_text())["status"] == "aborted"
    assert cli.main(["report", "--out", str(out)]) == 4
