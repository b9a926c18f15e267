"""End-to-end harness behavior: bookkeeping, determinism, replay, resume,
matchmaking wiring, reports, config files, and the CLI."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from evocommons import cli, learner
from evocommons.config import (
    config_to_text,
    load_config,
    mini_cleanup_config,
    mini_harvest_config,
    parse_config_text,
)
from evocommons.errors import ConfigError, IntegrityError, NumericError
from evocommons.evolution import RewardMode
from evocommons.harness import RunPaths, latest_checkpoint, load_checkpoint, run_experiment
from evocommons.matchmaking import Matchmaking
from evocommons.replay import replay_episode, validate_run
from evocommons.reports import read_episode_table, report_weights
from evocommons.social_reward import FeatureMode


def run(tmp_path, name="run", episodes=3, factory=mini_harvest_config, **overrides):
    cfg = factory(total_episodes=episodes, output_dir=str(tmp_path / name), **overrides)
    return cfg, run_experiment(cfg)


def read_lines(path):
    with open(path) as fh:
        return [line for line in fh if not line.startswith("#")]


class TestBookkeeping:
    def test_two_episodes_two_records_one_checkpoint(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        paths = RunPaths(result.run_dir)
        assert result.episodes_written == 2
        assert len(read_lines(paths.episodes_csv)) == 1 + 2  # header + rows
        checkpoints = os.listdir(paths.checkpoints_dir)
        assert len(checkpoints) == 1

    def test_episode_columns(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        table = read_episode_table(result.run_dir)
        for col in ("episode", "collective_return", "equality", "tagging",
                    "sustainability", "return_0", "intrinsic_2"):
            assert col in table
        assert table["episode"].tolist() == [0.0, 1.0]

    def test_sampled_ids_resolve_in_checkpoint(self, tmp_path):
        cfg, result = run(tmp_path, episodes=3)
        state = load_checkpoint(latest_checkpoint(result.run_dir))
        known_p = {ind.id for ind in state.policy_pop}
        known_r = {ind.id for ind in state.reward_pop}
        table = read_episode_table(result.run_dir)
        for cell in table["policy_ids"]:
            assert {int(x) for x in cell.split(";")} <= known_p
        for cell in table["reward_ids"]:
            assert {int(x) for x in cell.split(";")} <= known_r

    def test_refuses_to_clobber_an_existing_run(self, tmp_path):
        cfg, _ = run(tmp_path, episodes=1)
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_reward_mode_none_zero_intrinsic_columns(self, tmp_path):
        cfg, result = run(tmp_path, episodes=3, evo__reward_mode=RewardMode.NONE)
        table = read_episode_table(result.run_dir)
        for i in range(cfg.env.num_players):
            assert np.all(table[f"intrinsic_{i}"] == 0.0)

    def test_fitness_moves_after_episodes(self, tmp_path):
        cfg, result = run(tmp_path, episodes=6)
        state = load_checkpoint(latest_checkpoint(result.run_dir))
        played = [ind for ind in state.policy_pop if ind.episodes_played > 0]
        assert played
        assert any(ind.fitness != 0.0 for ind in played)
        assert all(ind.steps_played == ind.episodes_played * cfg.env.episode_length
                   for ind in state.policy_pop)


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path):
        blobs = []
        for name in ("one", "two"):
            cfg, result = run(tmp_path, name=name, episodes=4)
            paths = RunPaths(result.run_dir)
            with open(paths.episodes_csv, "rb") as fh:
                episodes = fh.read()
            with open(paths.losses_csv, "rb") as fh:
                losses = fh.read()
            blobs.append((episodes, losses))
        assert blobs[0] == blobs[1]

    def test_different_seeds_differ(self, tmp_path):
        tables = []
        for seed in (0, 1):
            cfg, result = run(tmp_path, name=f"s{seed}", episodes=3, seed=seed)
            tables.append(read_episode_table(result.run_dir)["collective_return"])
        assert not np.array_equal(tables[0], tables[1])

    def test_multi_arena_runs_complete_deterministically(self, tmp_path):
        blobs = []
        for name in ("ma1", "ma2"):
            cfg, result = run(tmp_path, name=name, episodes=6, arenas=3)
            with open(RunPaths(result.run_dir).episodes_csv, "rb") as fh:
                blobs.append(fh.read())
        assert blobs[0] == blobs[1]


class TestReplay:
    def test_every_episode_validates(self, tmp_path):
        cfg, result = run(tmp_path, episodes=3)
        assert validate_run(result.run_dir) == 3

    def test_missing_episode_is_integrity_error(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        with pytest.raises(IntegrityError):
            replay_episode(result.run_dir, 99)

    def test_truncated_record_is_integrity_error(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        path = RunPaths(result.run_dir).replay_jsonl
        lines = [json.loads(l) for l in open(path)]
        lines[0]["actions"] = lines[0]["actions"][:-5]
        with open(path, "w") as fh:
            for line in lines:
                fh.write(json.dumps(line) + "\n")
        with pytest.raises(IntegrityError):
            replay_episode(result.run_dir, 0)

    def test_corrupted_returns_detected(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        path = RunPaths(result.run_dir).replay_jsonl
        lines = [json.loads(l) for l in open(path)]
        lines[1]["returns"][0] += 1.0
        with open(path, "w") as fh:
            for line in lines:
                fh.write(json.dumps(line) + "\n")
        with pytest.raises(IntegrityError):
            replay_episode(result.run_dir, 1)

    def test_text_frames_written_only_on_request(self, tmp_path):
        cfg, result = run(tmp_path, episodes=1)
        summary = replay_episode(result.run_dir, 0)
        assert summary["frames"] is None
        summary = replay_episode(result.run_dir, 0, render="text",
                                 frames_dir=str(tmp_path / "frames"))
        assert os.path.exists(summary["frames"])
        content = open(summary["frames"]).read()
        assert content.count("== step") == cfg.env.episode_length + 1


class TestResume:
    def test_resume_reaches_same_record_count(self, tmp_path):
        full_cfg = mini_harvest_config(total_episodes=6,
                                       output_dir=str(tmp_path / "full"))
        run_experiment(full_cfg)

        part_cfg = mini_harvest_config(total_episodes=3, checkpoint_every=3,
                                       output_dir=str(tmp_path / "part"))
        run_experiment(part_cfg)
        part_cfg2 = mini_harvest_config(total_episodes=6, checkpoint_every=3,
                                        output_dir=str(tmp_path / "part"))
        run_experiment(part_cfg2, resume=True)

        full_rows = read_lines(RunPaths(str(tmp_path / "full")).episodes_csv)
        part_rows = read_lines(RunPaths(str(tmp_path / "part")).episodes_csv)
        assert len(part_rows) == len(full_rows) == 7  # header + 6

    def test_resume_is_bit_exact(self, tmp_path):
        full_cfg = mini_harvest_config(total_episodes=6,
                                       output_dir=str(tmp_path / "full"))
        run_experiment(full_cfg)
        part_cfg = mini_harvest_config(total_episodes=4, checkpoint_every=2,
                                       output_dir=str(tmp_path / "part"))
        run_experiment(part_cfg)
        part_cfg2 = mini_harvest_config(total_episodes=6, checkpoint_every=2,
                                        output_dir=str(tmp_path / "part"))
        run_experiment(part_cfg2, resume=True)
        full = open(RunPaths(str(tmp_path / "full")).episodes_csv).read()
        part = open(RunPaths(str(tmp_path / "part")).episodes_csv).read()
        assert full == part

    def test_resume_without_checkpoint_fails(self, tmp_path):
        with pytest.raises(ConfigError):
            run_experiment(mini_harvest_config(output_dir=str(tmp_path / "void")),
                           resume=True)


class TestMatchmakingWiring:
    def test_assortative_with_shared_rejected(self, tmp_path):
        cfg = mini_harvest_config(matchmaking=Matchmaking.ASSORTATIVE,
                                  output_dir=str(tmp_path / "x"))
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_assortative_individual_runs(self, tmp_path):
        cfg, result = run(tmp_path, episodes=8,
                          matchmaking=Matchmaking.ASSORTATIVE,
                          evo__reward_mode=RewardMode.INDIVIDUAL)
        assert result.episodes_written == 8
        table = read_episode_table(result.run_dir)
        for pids, rids in zip(table["policy_ids"], table["reward_ids"]):
            assert pids == rids  # individual mode pairs nets by id

    def test_assortative_none_runs(self, tmp_path):
        cfg, result = run(tmp_path, episodes=6,
                          matchmaking=Matchmaking.ASSORTATIVE,
                          evo__reward_mode=RewardMode.NONE)
        assert result.episodes_written == 6

    def test_shared_mode_one_reward_net_per_episode(self, tmp_path):
        cfg, result = run(tmp_path, episodes=4)
        table = read_episode_table(result.run_dir)
        for rids in table["reward_ids"]:
            assert len(set(rids.split(";"))) == 1


class TestProspectiveMode:
    def test_prospective_runs_and_differs_from_retrospective(self, tmp_path):
        cfg_r, res_r = run(tmp_path, name="retro", episodes=3)
        cfg_p, res_p = run(tmp_path, name="pro", episodes=3,
                           feature_mode=FeatureMode.PROSPECTIVE)
        retro = read_episode_table(res_r.run_dir)
        pro = read_episode_table(res_p.run_dir)
        # identical seeds, same returns stream until intrinsic rewards diverge
        assert not np.array_equal(
            np.concatenate([retro[f"intrinsic_{i}"] for i in range(3)]),
            np.concatenate([pro[f"intrinsic_{i}"] for i in range(3)]))


class TestNumericFailurePath:
    def test_flagged_episode_keeps_run_alive(self, tmp_path, monkeypatch):
        calls = {"n": 0}
        real_act = learner.act

        def flaky_act(params, x, rng):
            calls["n"] += 1
            if calls["n"] == 150:
                raise NumericError("injected blow-up")
            return real_act(params, x, rng)

        monkeypatch.setattr(learner, "act", flaky_act)
        cfg, result = run(tmp_path, episodes=3)
        assert result.episodes_written == 3
        assert result.flagged_episodes == 1
        table = read_episode_table(result.run_dir)
        assert table["flagged"].sum() == 1.0
        flagged_row = int(np.argmax(table["flagged"]))
        assert np.isnan(table["collective_return"][flagged_row])
        # flagged episodes are excluded from the replay log, the rest validate
        assert validate_run(result.run_dir) == 2


class TestConfigFiles:
    def test_round_trip(self):
        cfg = mini_cleanup_config(total_episodes=5, seed=9)
        text = config_to_text(cfg)
        again = config_to_text(parse_config_text(text))
        assert text == again

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("bogus_key = 1\n")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError):
            parse_config_text("universe.answer = 42\n")

    def test_bad_enum_lists_options(self):
        with pytest.raises(ConfigError, match="cleanup"):
            parse_config_text("env.game = chess\n")

    def test_comments_and_packaged_layout_names(self, tmp_path):
        text = "\n".join([
            "# a tiny run",
            "seed = 3",
            "total_episodes = 1",
            "env.game = harvest   # mini map below",
            "env.layout = harvest_mini",
            "env.num_players = 3",
            "env.episode_length = 50",
            "env.obs_window = 7",
            "evo.population_size = 8",
            "learner.unroll_length = 25",
        ])
        cfg = parse_config_text(text)
        assert cfg.seed == 3 and cfg.env.num_players == 3
        assert "#" in cfg.env.layout  # resolved to the actual map text
        cfg.output_dir = str(tmp_path / "r")
        assert run_experiment(cfg).episodes_written == 1

    def test_layout_from_file_path(self, tmp_path):
        from evocommons.gridworld import load_layout
        path = tmp_path / "custom.txt"
        path.write_text(load_layout("harvest_mini"))
        cfg = parse_config_text(f"env.layout = {path}\n")
        assert cfg.env.layout == load_layout("harvest_mini")

    def test_output_root_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("EVOCOMMONS_OUTPUT_ROOT", str(tmp_path))
        cfg = mini_harvest_config(total_episodes=1, output_dir="nested/run")
        result = run_experiment(cfg)
        assert result.run_dir == str(tmp_path / "nested" / "run")
        assert os.path.exists(os.path.join(result.run_dir, "episodes.csv"))


class TestReportsAndCli:
    def test_weight_report_schema(self, tmp_path):
        cfg, result = run(tmp_path, episodes=2)
        out = str(tmp_path / "weights.csv")
        rows = report_weights(latest_checkpoint(result.run_dir), out_csv=out)
        n = cfg.env.num_players
        assert len(rows) == 2 + 2 + 2 * n  # |v| + |b| + |W|
        assert [r["param"] for r in rows[:4]] == ["v[0]", "v[1]", "b[0]", "b[1]"]
        assert all(r["count"] == cfg.evo.population_size for r in rows)
        lines = open(out).read().splitlines()
        assert lines[0].startswith("#") and "param" in lines[1]

    def test_report_on_all_zero_population(self, tmp_path):
        cfg, result = run(tmp_path, episodes=1)
        ck_path = latest_checkpoint(result.run_dir)
        doc = json.load(open(ck_path))
        for item in doc["reward_population"]:
            item["theta_flat"] = [0.0] * len(item["theta_flat"])
        zeroed = str(tmp_path / "zero.json")
        json.dump(doc, open(zeroed, "w"))
        rows = report_weights(zeroed)
        assert all(r["mean"] == 0.0 and r["std"] == 0.0 for r in rows)

    def test_cli_round_trip(self, tmp_path):
        cfg = mini_harvest_config(total_episodes=2)
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(config_to_text(cfg))
        run_dir = tmp_path / "cli_run"

        assert cli.main(["validate-config", str(cfg_path)]) == 0
        assert cli.main(["train", str(cfg_path), "--output", str(run_dir)]) == 0
        assert cli.main(["replay", str(run_dir), "1"]) == 0
        ck = latest_checkpoint(str(run_dir))
        assert cli.main(["report-weights", ck, "--out", str(tmp_path / "w.csv")]) == 0
        assert cli.main(["plot", str(run_dir)]) == 0
        assert os.path.exists(run_dir / "metrics.png")

    def test_cli_strict_order_flag_accepted(self, tmp_path):
        cfg = mini_harvest_config(total_episodes=1)
        cfg_path = tmp_path / "exp.cfg"
        cfg_path.write_text(config_to_text(cfg))
        assert cli.main(["train", str(cfg_path), "--output", str(tmp_path / "r"),
                         "--strict-order"]) == 0

    def test_cli_error_paths_exit_nonzero(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("env.game = chess\n")
        assert cli.main(["validate-config", str(bad)]) == 2
        assert cli.main(["replay", str(tmp_path), "0"]) == 2

    def test_console_entry_point(self, tmp_path):
        proc = subprocess.run([sys.executable, "-m", "evocommons.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "train" in proc.stdout and "report-weights" in proc.stdout
