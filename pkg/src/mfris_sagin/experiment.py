"""Training loop, run directories, sweeps and summaries."""
from __future__ import annotations

import csv
import json
import pickle
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .baselines import (CentralDdpgLearner, CentralDqnLearner, GaLearner, HybridSingleLearner,
                        LinearPrecodingPolicy, MaddpgLearner)
from .chimera import ChimeraLearner
from .config import ExperimentConfig, dump_config
from .env import SaginEnv, make_clamp
from .neural import save_nets
from .pretrain import identity_compressors, pretrain_compressors

SCHEMA_VERSION = 1
REPORT_COLUMNS = ["agent", "model", "ratio", "latent", "nmse", "block_accuracy", "cross_entropy"]
METRIC_COLUMNS = ["schema_version", "method", "seed", "episode", "reward", "ee", "sum_rate", "energy",
                  "c1", "c2", "c3", "c4", "c5", "battery_min"]
CHIMERA_KINDS = {"chimera", "no_ris", "fixed_alpha", "passive_beta", "elements_fraction", "layer_subset",
                 "fixed_haps"}
BASELINE_KINDS = {"central_dqn", "central_ddpg", "maddpg", "hybrid_single", "ga", "zf", "mmse"}


def episode_seed(seed: int, episode: int) -> int:
    """Shared by every method so that runs see the same channel draws."""
    return seed * 1_000_003 + episode


def effective_config(cfg: ExperimentConfig) -> ExperimentConfig:
    """Drop undeployed layers for the layer-subset ablation."""
    if cfg.method.kind != "layer_subset":
        return cfg
    keep = set(cfg.method.layers)
    data = cfg.model_dump(mode="json")
    for layer, key in (("space", "n_space"), ("air", "n_air"), ("ground", "n_ground")):
        if layer not in keep:
            data["topology"][key] = 0
    return ExperimentConfig.model_validate(data)


def make_env(cfg: ExperimentConfig, seed: int) -> SaginEnv:
    cfg = effective_config(cfg)
    probe = SaginEnv(cfg)
    return SaginEnv(cfg, make_clamp(cfg.method, probe.layers, cfg.channel.n_elements, seed))


def make_learner(cfg: ExperimentConfig, env: SaginEnv, seed: int, compressors=None):
    kind = cfg.method.kind
    if kind in CHIMERA_KINDS:
        comps = compressors if compressors is not None else identity_compressors(env)
        return ChimeraLearner(env, comps, cfg.agent, seed, twin=cfg.method.twin)
    if kind == "hybrid_single":
        return HybridSingleLearner(env, cfg.agent, seed)
    if kind == "central_dqn":
        return CentralDqnLearner(env, cfg.agent, seed)
    if kind == "central_ddpg":
        return CentralDdpgLearner(env, cfg.agent, seed)
    if kind == "maddpg":
        return MaddpgLearner(env, cfg.agent, seed)
    if kind == "ga":
        return GaLearner(env, cfg.method, seed)
    if kind in ("zf", "mmse"):
        return LinearPrecodingPolicy(env, kind)
    raise ValueError(f"unsupported method {kind!r}")


def needs_compressors(cfg: ExperimentConfig) -> bool:
    return cfg.method.kind in CHIMERA_KINDS and cfg.method.compress


def run_episode(env, learner, seed: int, explore: bool = True, on_slot=None):
    """Play one episode; returns the per-episode metric dict."""
    obs = env.reset(seed)
    learner.begin_episode(obs)
    acc = {k: [] for k in ("reward", "ee", "sum_rate", "energy")}
    pens, batt = [], []
    done = False
    while not done:
        actions = learner.act(env, obs, explore)
        obs, rewards, res, done = env.step(actions)
        if explore:
            learner.observe(rewards, obs, done)
        acc["reward"].append(float(np.sum(res.rewards)))
        acc["ee"].append(float(np.sum(res.ee)))
        acc["sum_rate"].append(float(np.sum(res.rates)))
        acc["energy"].append(float(np.sum(res.e_tot)))
        pens.append(np.maximum(res.penalties, 0).sum(axis=0))
        batt.append(float(res.battery.min()))
        if on_slot is not None:
            on_slot(actions, res)
    if explore:
        learner.end_episode()
    row = {k: float(np.mean(v)) for k, v in acc.items()}
    p = np.mean(pens, axis=0)
    row.update({f"c{i + 1}": float(p[i]) for i in range(5)})
    row["battery_min"] = float(np.min(batt))
    return row


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_csv(path, rows, columns) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_checkpoint(run_dir: Path, learner, state: dict) -> None:
    ck = run_dir / "checkpoints"
    ck.mkdir(parents=True, exist_ok=True)
    for agent_id, subs in learner.nets().items():
        for sub, nets in subs.items():
            save_nets(ck / agent_id / f"{sub}.ckpt", nets)
    with open(ck / "trainer_state.pkl", "wb") as fh:
        pickle.dump(state, fh)


def train_seed(cfg: ExperimentConfig, seed: int, run_dir, compressors=None, resume: bool = False,
               episodes: int | None = None) -> list[dict]:
    """Train one method for one seed; writes metrics and checkpoints under run_dir."""
    run_dir = Path(run_dir)
    episodes = cfg.episodes if episodes is None else episodes
    state_file = run_dir / "checkpoints" / "trainer_state.pkl"
    if resume and state_file.exists():
        with open(state_file, "rb") as fh:
            st = pickle.load(fh)
        env, learner, rows, start = st["env"], st["learner"], st["rows"], st["episode"]
    else:
        if compressors is None and needs_compressors(cfg):
            compressors = load_or_pretrain(cfg, run_dir.parent)
        env = make_env(cfg, seed)
        learner = make_learner(cfg, env, seed, compressors)
        rows, start = [], 0
    for ep in range(start, episodes):
        row = run_episode(env, learner, episode_seed(seed, ep))
        row.update({"schema_version": SCHEMA_VERSION, "method": cfg.method.kind, "seed": seed, "episode": ep})
        rows.append(row)
        last = ep + 1 == episodes
        if last or (cfg.checkpoint_every and (ep + 1) % cfg.checkpoint_every == 0):
            save_checkpoint(run_dir, learner, {"env": env, "learner": learner, "rows": rows, "episode": ep + 1})
    write_csv(run_dir / "metrics.csv", rows, METRIC_COLUMNS)
    return rows


def load_or_pretrain(cfg: ExperimentConfig, out_dir, seed: int | None = None):
    """Compressors cached under out_dir/vae; trained on first use."""
    path = Path(out_dir) / "vae" / "compressors.pkl"
    if path.exists():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    models, report = pretrain_compressors(effective_config(cfg), cfg.seeds[0] if seed is None else seed)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        pickle.dump(models, fh)
    write_csv(path.parent / "report.csv", report, REPORT_COLUMNS)
    return models


def write_run_header(cfg: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "config.yaml")
    (out / "seeds.json").write_text(json.dumps(list(cfg.seeds)) + "\n")
    (out / "config.sha256").write_text(cfg.content_hash() + "\n")


def _train_task(args):
    cfg_json, seed, run_dir, compressors = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    return train_seed(cfg, seed, run_dir, compressors)


def run_experiment(cfg: ExperimentConfig, out, workers: int = 1, resume: bool = False) -> list[dict]:
    """All seeds of one method; one sub-directory per seed."""
    out = Path(out)
    write_run_header(cfg, out)
    comps = load_or_pretrain(cfg, out) if needs_compressors(cfg) else None
    tasks = [(cfg.model_dump_json(), s, str(out / f"seed{s}"), comps) for s in cfg.seeds]
    if resume or workers <= 1:
        rows = []
        for cj, s, d, c in tasks:
            rows += train_seed(cfg, s, d, c, resume=resume)
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = [r for part in ex.map(_train_task, tasks) for r in part]
    write_csv(out / "summary.csv", summarize(rows, cfg.final_window), SUMMARY_COLUMNS)
    return rows


def final_means(rows: list[dict], window: int) -> dict:
    """Per seed: mean reward and EE over the last ``window`` episodes."""
    by_seed = {}
    for r in rows:
        by_seed.setdefault(int(r["seed"]), []).append(r)
    out = {}
    for s, rs in sorted(by_seed.items()):
        rs = sorted(rs, key=lambda r: int(r["episode"]))[-window:]
        out[s] = {k: float(np.mean([float(r[k]) for r in rs])) for k in ("reward", "ee", "sum_rate", "energy")}
    return out


SUMMARY_COLUMNS = ["schema_version", "method", "n_seeds", "reward_mean", "reward_std", "ee_mean", "ee_std",
                   "sum_rate_mean", "energy_mean"]


def summarize(rows: list[dict], window: int) -> list[dict]:
    by_method = {}
    for r in rows:
        by_method.setdefault(str(r["method"]), []).append(r)
    out = []
    for m, rs in sorted(by_method.items()):
        fm = final_means(rs, window)
        rew = np.array([v["reward"] for v in fm.values()])
        ee = np.array([v["ee"] for v in fm.values()])
        out.append({"schema_version": SCHEMA_VERSION, "method": m, "n_seeds": len(fm),
                    "reward_mean": float(rew.mean()), "reward_std": float(rew.std()),
                    "ee_mean": float(ee.mean()), "ee_std": float(ee.std()),
                    "sum_rate_mean": float(np.mean([v["sum_rate"] for v in fm.values()])),
                    "energy_mean": float(np.mean([v["energy"] for v in fm.values()]))})
    return out


SWEEP_COLUMNS = ["schema_version", "point", "axis", "value", "seed", "reward", "ee", "sum_rate", "energy"]


def _sweep_task(args):
    cfg_json, point, value, seed, run_dir = args
    cfg = ExperimentConfig.model_validate_json(cfg_json)
    rows = train_seed(cfg, seed, run_dir)
    fm = final_means(rows, cfg.final_window)[seed]
    return {"schema_version": SCHEMA_VERSION, "point": point, "axis": "", "value": value, "seed": seed, **fm}


def run_sweep(cfg: ExperimentConfig, out, workers: int = 1) -> list[dict]:
    """Cross product of sweep values and seeds; point seed = seed XOR point index."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    out = Path(out)
    write_run_header(cfg, out)
    tasks = []
    for p, value in enumerate(cfg.sweep.values):
        pcfg = cfg.with_override(cfg.sweep.axis, value)
        if needs_compressors(pcfg):
            load_or_pretrain(pcfg, out / f"point{p}")
        for s in cfg.seeds:
            tasks.append((pcfg.model_dump_json(), p, value, s ^ p, str(out / f"point{p}" / f"seed{s ^ p}")))
    if workers <= 1:
        rows = [_sweep_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_task, tasks))
    for r in rows:
        r["axis"] = cfg.sweep.axis
    write_csv(out / "sweep.csv", rows, SWEEP_COLUMNS)
    write_csv(out / "sweep_summary.csv", aggregate_sweep(rows), AGG_COLUMNS)
    return rows


AGG_COLUMNS = ["schema_version", "point", "value", "n", "reward_mean", "reward_std", "ee_mean", "ee_std"]


def aggregate_sweep(rows) -> list[dict]:
    pts = {}
    for r in rows:
        pts.setdefault(int(r["point"]), []).append(r)
    out = []
    for p, rs in sorted(pts.items()):
        rew = np.array([float(r["reward"]) for r in rs])
        ee = np.array([float(r["ee"]) for r in rs])
        out.append({"schema_version": SCHEMA_VERSION, "point": p, "value": rs[0]["value"], "n": len(rs),
                    "reward_mean": float(rew.mean()), "reward_std": float(rew.std()),
                    "ee_mean": float(ee.mean()), "ee_std": float(ee.std())})
    return out


def report(run_dir, window: int | None = None) -> tuple[str, list[dict]]:
    """Summary over every metrics.csv below run_dir."""
    run_dir = Path(run_dir)
    files = sorted(run_dir.rglob("metrics.csv")) if run_dir.exists() else []
    if not files:
        raise FileNotFoundError(f"no metrics.csv under {run_dir}")
    rows = [r for f in files for r in read_csv(f)]
    if window is None:
        snap = run_dir / "config.yaml"
        window = 100
        if snap.exists():
            from .config import load_config
            window = load_config(snap).final_window
    summary = summarize(rows, window)
    lines = [f"{'method':<16}{'seeds':>6}{'reward':>22}{'EE':>26}"]
    for s in summary:
        lines.append(f"{s['method']:<16}{s['n_seeds']:>6}"
                     f"{s['reward_mean']:>12.4g} +- {s['reward_std']:<8.3g}"
                     f"{s['ee_mean']:>14.4g} +- {s['ee_std']:<8.3g}")
    write_csv(run_dir / "report.csv", summary, SUMMARY_COLUMNS)
    return "\n".join(lines), summary
