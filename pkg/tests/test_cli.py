import csv

import pytest
import yaml

from leorach.cli import main
from leorach.config import RunConfig, dump_config, from_dict, load_config

TINY = {
    "constellation": {"num_satellites": 2},
    "users": {"count": 2},
    "env": {"slots_per_episode": 5},
    "protocol": {"lower_hidden": [8], "upper_hidden": [8], "relay_hidden": [8], "ae_hidden": 6},
    "train": {"episodes": 3, "eval_every": 2, "eval_episodes": 1},
    "run": {"seeds": [0, 1], "eval_episodes": 2},
    "sweep": {"user_counts": [2, 3, 4], "rho_grid": [0.0, 0.5]},
}


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return str(path)


def files(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = RunConfig()
        assert from_dict(yaml.safe_load(dump_config(cfg))) == cfg

    def test_dump_defaults(self, capsys):
        assert main(["--dump-defaults"]) == 0
        assert from_dict(yaml.safe_load(capsys.readouterr().out)) == RunConfig()

    def test_partial_file_fills_defaults(self, tiny):
        cfg = load_config(tiny)
        assert cfg.constellation.num_satellites == 2
        assert cfg.budget == RunConfig().budget

    @pytest.mark.parametrize("bad", [
        {"bogus": {}},
        {"users": {"count": 0}},
        {"users": {"count": 2, "positions": [1.0]}},
        {"users": {"layout": "clustered"}},
        {"protocol": {"variant": "ALOHA"}},
        {"protocol": {"uplink_code_dim": 8}},
        {"train": {"gamma": 2.0}},
        {"budget": {"num_pilots": 0}},
        {"run": {"seeds": []}},
        {"env": {"unknown_key": 1}},
    ])
    def test_invalid_rejected(self, bad):
        with pytest.raises(ValueError):
            from_dict(bad)

    def test_env_config(self):
        env = RunConfig().env_config(seed=3)
        assert env.num_users == 3 and env.rng_seed == 3
        assert env.constellation.revolution_slots == 200


class TestCommands:
    def test_invalid_config_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.yaml"
        path.write_text("users: {count: 0}\n")
        assert main(["train", "--config", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_checkpoint(self, tiny, tmp_path):
        assert main(["eval", "--config", tiny, "--out", str(tmp_path / "none")]) == 1

    def test_no_command(self):
        assert main([]) == 2

    def test_sweep_users_shape(self, tiny, tmp_path):
        assert main(["sweep-users", "--config", tiny, "--out", str(tmp_path)]) == 0
        rows = list(csv.reader(open(tmp_path / "sweep_users.csv")))
        assert rows[0] == ["num_users", "variant", "signaling_bits_per_slot"]
        assert len(rows) == 1 + 3 * 3

    def test_validate(self, capsys):
        assert main(["validate"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    @pytest.mark.parametrize("variant", ["eRACH", "Ce2RACH"])
    def test_train_eval_deterministic(self, tiny, tmp_path, variant):
        outs = []
        for k in range(2):
            out = tmp_path / f"run{k}"
            assert main(["train", "--config", tiny, "--variant", variant, "--out", str(out)]) == 0
            assert main(["eval", "--config", tiny, "--variant", variant, "--out", str(out)]) == 0
            outs.append(files(out))
        assert outs[0] == outs[1]
        names = set(outs[0])
        for seed in (0, 1):
            rid = f"{variant}-s{seed}"
            assert {f"{rid}.train.metrics.v1.csv", f"{rid}.eval.metrics.v1.csv",
                    f"{rid}.slots.csv", f"{rid}.grid.csv"} <= names
        assert (tmp_path / "run0" / f"{variant}-s0.npz").exists()

    def test_eval_explicit_checkpoint(self, tiny, tmp_path):
        assert main(["train", "--config", tiny, "--seed", "1", "--out", str(tmp_path)]) == 0
        ckpt = tmp_path / "eRACH-s1.npz"
        assert main(["eval", "--config", tiny, "--seed", "1", "--checkpoint", str(ckpt),
                     "--out", str(tmp_path / "e")]) == 0
        assert main(["eval", "--config", tiny, "--variant", "De2RACH", "--seed", "1",
                     "--checkpoint", str(ckpt), "--out", str(tmp_path / "e")]) == 1

    def test_compare(self, tiny, tmp_path, capsys):
        assert main(["compare", "--config", tiny, "--seed", "0", "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(open(tmp_path / "compare.summary.csv")))
        assert [r["label"] for r in rows] == ["Ce2RACH", "De2RACH", "eRACH",
                                              "eRACH w.o. interference"]
        assert "Avg. Txpt." in capsys.readouterr().out

    def test_sweep_rho(self, tiny, tmp_path):
        assert main(["sweep-rho", "--config", tiny, "--seed", "0", "--out", str(tmp_path)]) == 0
        rows = list(csv.DictReader(open(tmp_path / "sweep_rho.csv")))
        assert [float(r["rho_fraction"]) for r in rows] == [0.0, 0.5]

    def test_interference_flag(self, tiny, tmp_path):
        assert main(["train", "--config", tiny, "--seed", "0", "--interference", "off",
                     "--out", str(tmp_path)]) == 0
        assert (tmp_path / "eRACH-s0-nointerf.npz").exists()
