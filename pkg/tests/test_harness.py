import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from main import main
from src.agents.agent import OracleAgent, RandomAgent, make_agent
from src.config.experiment_config import AgentSpec, EnvSpec
from src.core.errors import ValidationError
from src.envs.features import A1, A2
from src.envs.roster import multi_user_spawn
from src.envs.seqrec import SeqRecEnvironment, toy_config
from src.envs.streak_toy import StreakToyEnvironment
from src.harness.aggregate import aggregate, write_aggregate
from src.harness.csvio import RECORD_FIELDS, RunRecord, read_records, write_records
from src.harness.evaluate import evaluate_frozen, rollout_frozen
from src.harness.metrics import compute_metrics, mean_stderr, run_score
from src.harness.plotting import emit_plot, plot_records
from src.harness.runner import rollout, run_experiment


def toy_env():
    env = SeqRecEnvironment(toy_config())
    env.reset()
    return env


def records_for(agent, seed, rewards, user=0):
    return [RunRecord(agent, seed, user, k + 1, float(r), 10) for k, r in enumerate(rewards)]


def test_random_rollout_records_every_life_cycle():
    env = toy_env()
    agent = RandomAgent("random", env.action_table(), env.noop, seed=0)
    out = rollout(agent, env, seed=0, life_cycles=20)
    assert [r.life_cycle for r in out.records] == list(range(1, 21))
    assert all(r.steps == 10 and r.reward in (0.0, 1.0) for r in out.records)
    assert env.active_users == []


def test_rollout_logs_transitions():
    env = toy_env()
    agent = RandomAgent("random", env.action_table(), env.noop, seed=0)
    out = rollout(agent, env, seed=0, life_cycles=2, log_transitions=True)
    # two life-cycles of ten steps plus the no-op between them
    assert len(out.transitions) == 21
    assert out.transitions[10]["action"] == "noop"
    assert {row["run_id"] for row in out.transitions} == {"random-seed0"}


def test_leaving_step_is_stored_without_next_actions():
    env = toy_env()
    agent = make_agent(AgentSpec("eg", "egreedy"), env, seed=0)
    rollout(agent, env, seed=0, life_cycles=2)
    stored = list(agent.buffers[0])
    # only the engaged steps are stored; the no-op between life-cycles is not
    assert len(stored) == 20
    assert [t.terminal for t in stored] == ([False] * 9 + [True]) * 2
    assert all(t.next_actions == () for t in stored if t.terminal)
    assert all(t.next_actions == (A1, A2) for t in stored if not t.terminal)


def life_cycle_segments(transitions, user):
    """Engaged rows of one user, split at the no-op steps between life-cycles"""
    segments, current = [], []
    for row in sorted((r for r in transitions if r["user"] == user), key=lambda r: r["t"]):
        if row["action"] == "noop":
            segments.append(current)
            current = []
        else:
            current.append(row)
    return segments + [current]


@pytest.mark.parametrize("spawned", [False, True])
def test_transition_log_rederives_the_records(spawned):
    config = multi_user_spawn(4, np.random.default_rng(2), target=2.0, budget=4) if spawned else toy_config(2.0, 4)
    env = SeqRecEnvironment(config)
    env.reset()
    agent = RandomAgent("random", env.action_table(), env.noop, seed=1)
    out = rollout(agent, env, seed=0, life_cycles=30, log_transitions=True)

    assert all(0 <= row["L"] <= 4 for row in out.transitions)
    rewards = [r.reward for r in out.records]
    assert 0.0 < sum(rewards) < len(rewards)
    for user in config.user_ids:
        records = sorted((r for r in out.records if r.user == user), key=lambda r: r.life_cycle)
        segments = life_cycle_segments(out.transitions, user)
        assert len(segments) == len(records) == 30
        for record, segment in zip(records, segments):
            # at most one rewarding step per life-cycle
            assert sum(row["reward"] > 0 for row in segment) <= 1
            assert len(segment) == record.steps <= 4
            assert sum(row["reward"] for row in segment) == pytest.approx(record.reward)


def test_rvf_agent_draws_one_index_per_life_cycle():
    env = toy_env()
    agent = make_agent(AgentSpec("ens", "ensemble_de"), env, seed=0)
    rollout(agent, env, seed=0, life_cycles=5)
    assert sum(entry.refreshed for entry in agent.index_log) == 5
    digests_per_lifecycle = {}
    lifecycle = 0
    for entry in agent.index_log:
        lifecycle += entry.refreshed
        digests_per_lifecycle.setdefault(lifecycle, set()).add(entry.digest)
    assert all(len(d) == 1 for d in digests_per_lifecycle.values())


def test_windowed_environment_refreshes_at_the_boundary():
    env = StreakToyEnvironment(window=5)
    env.reset()
    agent = make_agent(AgentSpec("epi", "epinet_de"), env, seed=0)
    out = rollout(agent, env, seed=0, life_cycles=3)
    assert len(out.records) == 3 and all(r.steps == 5 for r in out.records)
    assert [e.t for e in agent.index_log if e.refreshed] == [0, 5, 10]


def test_oracle_scores_one_on_frozen_toy_evaluation():
    env = toy_env()
    agent = OracleAgent("oracle", env.action_table(), env.noop, 0, env.oracle_action)
    records = rollout_frozen(agent, env, seed=0, life_cycles=10)
    assert compute_metrics(records).rows["oracle"].mean == 1.0


def test_run_experiment_writes_the_artifacts(tmp_path, quick_config):
    config = replace(quick_config("random", "egreedy", seeds=(0, 1), life_cycles=5), write_transitions=True)
    result = run_experiment(config, tmp_path)
    assert len(result.records) == 2 * 2 * 5
    for name in ("records.csv", "metrics.json", "summary.txt", "learning_curve.svg", "transitions.csv"):
        assert (tmp_path / name).exists()
    report = json.loads((tmp_path / "metrics.json").read_text())
    assert set(report["metrics"]) == {"random", "egreedy"}
    assert report["failures"] == [] and report["commitment_violations"] == {}


def emitted_files(root):
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_runs_are_deterministic(tmp_path, quick_config):
    config = replace(
        quick_config("egreedy", "ensemble_de", "epinet_de", seeds=(3,), life_cycles=4),
        write_transitions=True,
        write_decisions=True,
        write_checkpoints=True,
    )
    run_experiment(config, tmp_path / "a")
    run_experiment(config, tmp_path / "b")
    files = emitted_files(tmp_path / "a")
    assert files == emitted_files(tmp_path / "b")
    assert len(files) == 9
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_timings_only_reach_the_log(tmp_path, quick_config, caplog):
    with caplog.at_level(logging.INFO):
        run_experiment(quick_config("egreedy", seeds=(0,), life_cycles=2), tmp_path)
    assert "per run over 1 runs" in caplog.text
    report = json.loads((tmp_path / "metrics.json").read_text())
    assert "wall_seconds" not in report["metrics"]["egreedy"]


def test_worker_pool_matches_serial_run(tmp_path, quick_config):
    config = quick_config("egreedy", seeds=(0, 1), life_cycles=3)
    run_experiment(config, tmp_path / "serial")
    run_experiment(replace(config, workers=2), tmp_path / "pool")
    assert (tmp_path / "serial" / "records.csv").read_bytes() == (tmp_path / "pool" / "records.csv").read_bytes()


def test_random_agent_bound_on_toy(tmp_path, quick_config):
    config = quick_config("random", seeds=tuple(range(10)), life_cycles=100)
    result = run_experiment(config, tmp_path)
    assert len(result.records) == 1000
    assert result.metrics.rows["random"].mean <= 0.01


def test_frozen_checkpoint_evaluation(tmp_path, quick_config):
    config = replace(
        quick_config("epinet_de", seeds=(0,), life_cycles=2, spawn=4, eval_spawn=2), write_checkpoints=True
    )
    run_experiment(config, tmp_path)
    checkpoint = tmp_path / "checkpoints" / "epinet_de-seed0.ckpt"
    table, records = evaluate_frozen(checkpoint, config)
    assert {r.user for r in records} == {4, 5}
    assert len(records) == 2 * 2
    assert table.rows["epinet_de"].n_seeds == 1


def test_evaluation_needs_a_held_out_roster(tmp_path, quick_config):
    config = replace(quick_config("ensemble_de", seeds=(0,), life_cycles=1), write_checkpoints=True)
    run_experiment(config, tmp_path)
    with pytest.raises(ValidationError):
        evaluate_frozen(tmp_path / "checkpoints" / "ensemble_de-seed0.ckpt", config)


def test_two_seed_mean_and_stderr():
    records = records_for("a", 0, [1, 0]) + records_for("a", 1, [1] * 7 + [0] * 3)
    row = compute_metrics(records).rows["a"]
    assert row.mean == pytest.approx(0.6)
    assert row.stderr == pytest.approx(0.1)
    assert row.std == pytest.approx(0.1 * np.sqrt(2))


def test_single_seed_reports_zero_stderr_with_warning(caplog):
    with caplog.at_level(logging.WARNING):
        mean, stderr, std = mean_stderr([0.4], "a")
    assert (mean, stderr, std) == (0.4, 0.0, 0.0)
    assert "Only one seed" in caplog.text


def test_run_score_averages_users_first():
    records = records_for("a", 0, [1, 1, 1, 1], user=0) + records_for("a", 0, [0, 0], user=1)
    assert run_score(records) == pytest.approx(0.5)


def test_metrics_are_rederivable_from_records():
    rng = np.random.default_rng(0)
    records = [RunRecord("a", s, u, k, float(rng.integers(2)), 10) for s in range(4) for u in range(3) for k in range(1, 6)]
    row = compute_metrics(records).rows["a"]
    per_seed = [np.mean([np.mean([r.reward for r in records if r.seed == s and r.user == u]) for u in range(3)]) for s in range(4)]
    assert row.mean == pytest.approx(np.mean(per_seed), rel=1e-12)


def test_aggregate_of_split_files_equals_the_union(tmp_path):
    left = records_for("a", 0, [1, 0, 1]) + records_for("a", 1, [0, 0, 1])
    right = records_for("a", 2, [1, 1, 1]) + records_for("b", 0, [0, 1])
    first = write_records(tmp_path / "left.csv", left)
    second = write_records(tmp_path / "right.csv", right)
    assert aggregate([first, second]).to_dict() == compute_metrics(left + right).to_dict()


def test_records_csv_is_versioned_and_sorted(tmp_path):
    path = write_records(tmp_path / "r.csv", records_for("b", 1, [0.5]) + records_for("a", 0, [1.0]))
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(RECORD_FIELDS)
    assert lines[1] == "1,a,0,0,1,1.0,10"
    assert lines[2] == "1,b,1,0,1,0.5,10"
    assert read_records(path) == sorted(records_for("b", 1, [0.5]) + records_for("a", 0, [1.0]))


def test_aggregate_rejects_foreign_schemas(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("seed,reward\n0,1.0\n")
    with pytest.raises(ValidationError):
        aggregate([bad])
    wrong_version = tmp_path / "v2.csv"
    wrong_version.write_text(",".join(RECORD_FIELDS) + "\n2,a,0,0,1,1.0,10\n")
    with pytest.raises(ValidationError):
        aggregate([wrong_version])


def test_aggregate_rejects_duplicate_runs(tmp_path):
    path = write_records(tmp_path / "r.csv", records_for("a", 0, [1.0]))
    with pytest.raises(ValidationError):
        aggregate([path, path])


def test_aggregate_across_files(tmp_path):
    first = write_records(tmp_path / "a.csv", records_for("a", 0, [1, 0]))
    second = write_records(tmp_path / "b.csv", records_for("a", 1, [1] * 7 + [0] * 3))
    table = aggregate([first, second])
    assert table.rows["a"].mean == pytest.approx(0.6)
    write_aggregate(table, tmp_path / "out")
    assert json.loads((tmp_path / "out" / "aggregate.json").read_text())["a"]["seeds"] == [0, 1]
    assert "a" in (tmp_path / "out" / "aggregate.txt").read_text()


def test_plot_has_one_entry_per_agent_and_is_deterministic(tmp_path):
    records = records_for("alpha", 0, [0.5] * 5) + records_for("beta", 0, [0.0, 1.0, 1.0, 1.0, 1.0])
    csv = write_records(tmp_path / "r.csv", records)
    first = emit_plot([csv], tmp_path / "one.svg")
    second = emit_plot([csv], tmp_path / "two.svg")
    svg = first.read_text()
    assert "alpha" in svg and "beta" in svg
    assert first.read_bytes() == second.read_bytes()


def test_plot_needs_records(tmp_path):
    empty = write_records(tmp_path / "empty.csv", [])
    with pytest.raises(ValidationError):
        emit_plot([empty], tmp_path / "x.svg")
    with pytest.raises(ValidationError):
        plot_records([], tmp_path / "x.svg")


def test_cli_casestudy(tmp_path, capsys):
    out = tmp_path / "claims.json"
    assert main(["casestudy", "--claim", "single-ucb", "--trials", "20", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["single-ucb"]["passed"] is True


def test_cli_reports_invalid_input(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.toml"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("nothing,here\n")
    assert main(["aggregate", str(bad)]) == 2


def test_cli_run_aggregate_and_plot(tmp_path):
    config = tmp_path / "toy.toml"
    config.write_text(
        "[experiment]\nname = 'cli'\nseeds = [0, 1]\nlife_cycles = 3\n\n"
        "[environment]\nkind = 'seqrec'\n\n"
        "[[agents]]\nname = 'random'\nkind = 'random'\n"
    )
    assert main(["run", "--config", str(config), "--out", str(tmp_path / "run")]) == 0
    records = tmp_path / "run" / "records.csv"
    assert len(read_records(records)) == 6
    assert main(["aggregate", str(records), "--out", str(tmp_path / "agg")]) == 0
    assert main(["plot", str(records), "--out", str(tmp_path / "curve.svg")]) == 0
    assert (tmp_path / "curve.svg").exists()
