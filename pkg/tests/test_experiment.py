import filecmp

import numpy as np
import pytest
import yaml

from mfris_sagin import experiment as ex
from mfris_sagin.cli import main
from mfris_sagin.config import desk_config, dump_config, load_config
from oracles import mean_std_sheet


def tiny(**kw):
    base = dict(environment__episode_length=3, agent__batch_size=2, agent__hidden=[8], episodes=3,
                final_window=2, method__compress=False)
    base.update(kw)
    return desk_config(**base)


def test_episode_seed_is_shared_and_distinct():
    seen = {ex.episode_seed(s, e) for s in range(5) for e in range(300)}
    assert len(seen) == 5 * 300


def test_metric_schema_is_the_same_for_every_method(tmp_path):
    for kind in ("chimera", "hybrid_single", "zf", "no_ris"):
        rows = ex.train_seed(tiny(method__kind=kind), 0, tmp_path / kind)
        header = (tmp_path / kind / "metrics.csv").read_text().splitlines()[0].split(",")
        assert header == ex.METRIC_COLUMNS
        assert len(rows) == 3
        assert all(r["method"] == kind for r in rows)


def test_final_means_and_summary_match_sheet():
    rows = [{"method": "m", "seed": s, "episode": e, "reward": 10 * s + e, "ee": s + 0.1 * e,
             "sum_rate": 1.0, "energy": 2.0} for s in range(3) for e in range(5)]
    fm = ex.final_means(rows, 2)
    assert fm[1]["reward"] == pytest.approx(13.5)
    summ = ex.summarize(rows, 2)[0]
    m, sd = mean_std_sheet([3.5, 13.5, 23.5])
    assert summ["reward_mean"] == pytest.approx(m)
    assert summ["reward_std"] == pytest.approx(sd)
    assert summ["n_seeds"] == 3


def test_report_averages_two_seeds(tmp_path):
    cfg = tiny(method__kind="zf", seeds=[0, 1])
    rows = ex.run_experiment(cfg, tmp_path)
    text, summ = ex.report(tmp_path)
    fm = ex.final_means(rows, cfg.final_window)
    assert summ[0]["n_seeds"] == 2
    assert summ[0]["reward_mean"] == pytest.approx(np.mean([fm[0]["reward"], fm[1]["reward"]]))
    assert "zf" in text
    assert (tmp_path / "report.csv").exists()


def test_report_on_empty_directory_fails(tmp_path):
    with pytest.raises(FileNotFoundError):
        ex.report(tmp_path)
    assert main(["report", str(tmp_path)]) == 2


def test_sweep_over_elements_gives_one_row_per_value_and_seed(tmp_path):
    values = [2, 4, 8, 16, 32]
    cfg = tiny(method__kind="zf", seeds=[0, 1], episodes=2, final_window=1)
    cfg = cfg.model_validate({**cfg.model_dump(mode="json"), "sweep": {"axis": "channel.elements", "values": values}})
    rows = ex.run_sweep(cfg, tmp_path)
    assert len(rows) == len(values) * 2
    for p, v in enumerate(values):
        assert sum(1 for r in rows if r["point"] == p) == 2
    agg = ex.aggregate_sweep(rows)
    for a in agg:
        vals = [r["ee"] for r in rows if r["point"] == a["point"]]
        m, sd = mean_std_sheet(vals)
        assert a["ee_mean"] == pytest.approx(m)
        assert a["ee_std"] == pytest.approx(sd, abs=1e-15)
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + len(values) * 2


def test_elements_override_factorises_into_grid():
    for m in (2, 4, 8, 16, 32, 64):
        c = desk_config().with_override("channel.elements", m)
        assert c.channel.m_h * c.channel.m_v == m


def test_resume_continues_where_it_stopped(tmp_path):
    cfg = tiny(method__kind="chimera", episodes=4)
    full = ex.train_seed(cfg, 0, tmp_path / "full")
    ex.train_seed(cfg, 0, tmp_path / "part", episodes=2)
    resumed = ex.train_seed(cfg, 0, tmp_path / "part", resume=True)
    assert resumed == full
    assert filecmp.cmp(tmp_path / "full" / "metrics.csv", tmp_path / "part" / "metrics.csv", shallow=False)


def test_checkpoints_written_per_agent(tmp_path):
    ex.train_seed(tiny(method__kind="chimera"), 0, tmp_path)
    ck = tmp_path / "checkpoints"
    assert (ck / "trainer_state.pkl").exists()
    assert sorted(p.name for p in (ck / "agent0").iterdir()) == sorted(
        f"{n}.ckpt" for n in ("dqn_primal", "dqn_dual", "ddpg_primal", "ddpg_dual"))


def test_rerun_from_snapshot_is_byte_identical(tmp_path):
    cfg = tiny(method__kind="hybrid_single", seeds=[0, 1])
    ex.run_experiment(cfg, tmp_path / "a")
    snap = load_config(tmp_path / "a" / "config.yaml")
    assert snap.content_hash() == (tmp_path / "a" / "config.sha256").read_text().strip()
    ex.run_experiment(snap, tmp_path / "b")
    for rel in ("seed0/metrics.csv", "seed1/metrics.csv", "summary.csv"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_workers_do_not_change_results(tmp_path):
    cfg = tiny(method__kind="hybrid_single", seeds=[0, 1])
    ex.run_experiment(cfg, tmp_path / "serial")
    ex.run_experiment(cfg, tmp_path / "pool", workers=2)
    assert (tmp_path / "serial" / "summary.csv").read_bytes() == (tmp_path / "pool" / "summary.csv").read_bytes()


# ------------------------------------------------------------------------ CLI

def write_cfg(path, cfg, **extra):
    dump_config(cfg, path)
    if extra:
        data = yaml.safe_load(path.read_text())
        data.update(extra)
        path.write_text(yaml.safe_dump(data))
    return path


def test_cli_train_and_report(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", tiny(method__kind="chimera"))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "run"), "--seeds", "0,1"]) == 0
    assert (tmp_path / "run" / "seed1" / "metrics.csv").exists()
    assert main(["report", "--out", str(tmp_path / "run")]) == 0
    assert "chimera" in capsys.readouterr().out


def test_cli_baseline_and_wrong_command(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", tiny())
    assert main(["baseline", "--config", str(cfg), "--out", str(tmp_path / "b"), "--method", "mmse"]) == 0
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "t"), "--seeds", "0"]) == 0
    bad = write_cfg(tmp_path / "z.yaml", tiny(method__kind="zf"))
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_cli_rejects_invalid_config(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("channel:\n  n_antennas: -3\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("method:\n  kind: fixed_alpha\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    bad.write_text("- just\n- a list\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["sweep", "--config", str(write_cfg(tmp_path / "ok.yaml", tiny())), "--out", str(tmp_path / "s")]) == 2
    with pytest.raises(SystemExit):
        main(["train", "--seeds", "a,b"])


def test_cli_sweep(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "s.yaml", tiny(method__kind="zf", episodes=1, final_window=1),
                    sweep={"axis": "environment.p_max_dbm.0", "values": [1]})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s")]) == 2
    cfg = write_cfg(tmp_path / "s.yaml", tiny(method__kind="zf", episodes=1, final_window=1),
                    sweep={"axis": "channel.elements", "values": [4, 8]})
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "s"), "--seeds", "0"]) == 0
    out = capsys.readouterr().out
    assert "channel.elements=4" in out and "channel.elements=8" in out
