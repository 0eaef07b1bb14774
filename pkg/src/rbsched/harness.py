"""Episode runner, CSV logging and cumulative-histogram export."""

from __future__ import annotations

import csv
import dataclasses
import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as config_mod
from . import env as E
from . import metrics as M
from . import schedulers as S
from .agent import DdpgAgent
from .allocation import postprocess
from .config import RunConfig
from .seeding import derive_seed, stream

log = logging.getLogger(__name__)

CSV_FIELDS = [
    "episode",
    "scheduler",
    "sum_reward",
    "sum_capacity",
    "sum_timeouts",
    "sum_ev_timeouts",
    "sum_packet_rate",
]
METRICS = CSV_FIELDS[2:]
TRACE_FIELDS = [
    "episode",
    "t",
    "user",
    "is_ev",
    "power_fading",
    "new_request",
    "granted",
    "timeout_blocks",
]


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVALUATE = "eval"
    BASELINE = "baseline"


class HarnessError(RuntimeError):
    pass


@dataclass
class EpisodeRecord:
    episode: int
    scheduler: str
    sum_reward: float = 0.0
    sum_capacity: float = 0.0
    sum_timeouts: int = 0
    sum_ev_timeouts: int = 0
    sum_packet_rate: float = 0.0

    def add(self, m: M.StepMetrics) -> None:
        self.sum_reward += m.reward
        self.sum_capacity += m.sum_capacity
        self.sum_timeouts += m.sum_timeouts
        self.sum_ev_timeouts += m.ev_timeouts
        self.sum_packet_rate += m.sum_packet_rate

    def row(self) -> list:
        return [
            self.episode,
            self.scheduler,
            repr(float(self.sum_reward)),
            repr(float(self.sum_capacity)),
            int(self.sum_timeouts),
            int(self.sum_ev_timeouts),
            repr(float(self.sum_packet_rate)),
        ]


def episode_stream_name(mode: Mode) -> str:
    # training episodes never coincide with evaluation/baseline episodes
    return "train-episode" if mode is Mode.TRAIN else "eval-episode"


def csv_name(mode: Mode, scheduler: S.SchedulerKind) -> str:
    return f"{mode.value}_{scheduler.value}.csv"


class Runner:
    """Runs episodes of one scheduler against the environment."""

    def __init__(self, cfg: RunConfig, mode: Mode, agent: DdpgAgent | None = None):
        self.cfg = cfg
        self.mode = Mode(mode)
        if self.mode is Mode.BASELINE:
            if cfg.scheduler is S.SchedulerKind.DDPG:
                raise HarnessError("baseline mode needs one of mt, mmf, ds, random")
            self.kind = cfg.scheduler
        else:
            self.kind = S.SchedulerKind.DDPG
            if agent is None:
                raise HarnessError("train/eval mode needs an agent")
        self.agent = agent
        self.random_rng = stream(cfg.seed, "agent-explore")

    def decide(self, obs: E.Observation, episode: int):
        kind = self.kind
        if kind is S.SchedulerKind.MAX_THROUGHPUT:
            return S.schedule_mt(obs), None
        if kind is S.SchedulerKind.MAX_MIN_FAIR:
            return S.schedule_mmf(obs), None
        if kind is S.SchedulerKind.DELAY_SENSITIVE:
            return S.schedule_ds(obs, self.cfg.ds_prio_weight), None
        if kind is S.SchedulerKind.RANDOM:
            shares = S.schedule_random(obs, self.random_rng)
            return postprocess(shares, obs.demand, obs.num_resources, eval_mode=True), None
        return self.agent.schedule(obs, episode, training=self.mode is Mode.TRAIN)

    def run_episode(self, episode: int, trace: list | None = None) -> EpisodeRecord:
        env_cfg = self.cfg.env
        seed = derive_seed(self.cfg.seed, episode_stream_name(self.mode), episode)
        state = E.reset_episode(env_cfg, seed)
        rec = EpisodeRecord(episode, self.kind.value)
        for t in range(env_cfg.steps_per_episode):
            new_jobs = E.generate_jobs(state)
            E.step_mobility(state)
            E.update_channel(state)
            obs = E.observe(state)
            alloc, stored = self.decide(obs, episode)
            E.apply_allocation(state, alloc.blocks, alloc.skip_jobs)
            capacity = M.sum_capacity(
                obs, alloc.blocks, env_cfg.snr_db, env_cfg.capacity_mode, env_cfg.log_base
            )
            failed = E.advance_time(state)
            step = M.step_metrics(capacity, failed, state.users, self.cfg.weights)
            rec.add(step)
            if stored is not None:
                self.agent.record(obs.state_vector(), stored, step.reward)
            if trace is not None:
                _trace_rows(trace, episode, t, obs, new_jobs, alloc.blocks, failed)
        return rec


def _trace_rows(out, episode, t, obs, new_jobs, blocks, failed):
    new = np.zeros(obs.num_users, dtype=np.int64)
    for j in new_jobs:
        new[j.user] += j.initial_size
    lost = np.zeros(obs.num_users, dtype=np.int64)
    for j in failed:
        lost[j.user] += j.remaining
    for u in range(obs.num_users):
        out.append(
            [episode, t, u, int(obs.is_ev[u]), repr(float(obs.power_fading[u])),
             int(new[u]), int(blocks[u]), int(lost[u])]
        )


def _prepare_out(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise HarnessError(f"output directory {out} is not writable: {exc.strerror}") from exc
    return out


def run(cfg: RunConfig, mode: Mode, model_path=None, trace: bool = False) -> list[EpisodeRecord]:
    """Execute ``cfg.episodes`` episodes and write ``<mode>_<scheduler>.csv``.

    Training additionally writes ``model.json``; ``trace`` writes a per-user,
    per-step event log next to the metrics CSV.
    """
    mode = Mode(mode)
    cfg.validate()
    agent = None
    if mode is Mode.EVALUATE:
        if model_path is None or not Path(model_path).is_file():
            raise HarnessError(f"model file not found: {model_path}")
        agent = DdpgAgent.load(model_path)
        if agent.num_users != cfg.env.num_users:
            raise HarnessError(
                f"model is for {agent.num_users} users, config has {cfg.env.num_users}"
            )
    elif mode is Mode.TRAIN:
        agent = DdpgAgent(cfg.env.num_users, cfg.ddpg, cfg.seed, total_episodes=cfg.episodes)
    runner = Runner(cfg, mode, agent)

    out = _prepare_out(cfg.output_dir)
    (out / "config.json").write_text(config_mod.dumps(cfg))
    name = csv_name(mode, runner.kind)
    trace_rows: list | None = [] if trace else None
    records = []
    with open(out / name, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        tw = None
        if trace:
            tfh = open(out / name.replace(".csv", "_trace.csv"), "w", newline="")
            tw = csv.writer(tfh, lineterminator="\n")
            tw.writerow(TRACE_FIELDS)
        try:
            for ep in range(cfg.episodes):
                rec = runner.run_episode(ep, trace_rows)
                records.append(rec)
                writer.writerow(rec.row())
                fh.flush()
                if tw is not None:
                    tw.writerows(trace_rows)
                    trace_rows.clear()
                if (ep + 1) % 100 == 0:
                    log.info("%s %s episode %d/%d reward %.3f",
                             mode.value, runner.kind.value, ep + 1, cfg.episodes, rec.sum_reward)
        finally:
            if tw is not None:
                tfh.close()

    if mode is Mode.TRAIN:
        agent.save(out / "model.json",
                   {"config_hash": config_mod.config_hash(cfg), "train_steps": agent.train_steps})
    return records


def _run_one(args):
    cfg, mode, model_path, trace = args
    run(cfg, mode, model_path, trace)
    return cfg.output_dir


def run_parallel_seeds(cfg: RunConfig, mode: Mode, n_seeds: int, model_path=None,
                       trace: bool = False) -> list[str]:
    """Independent runs for seeds ``seed .. seed+n-1``, each in ``seed_<k>/``."""
    jobs = []
    for k in range(n_seeds):
        seed = cfg.seed + k
        sub = dataclasses.replace(cfg, seed=seed, output_dir=str(Path(cfg.output_dir) / f"seed_{seed}"))
        jobs.append((sub, mode, model_path, trace))
    with ProcessPoolExecutor() as pool:
        return list(pool.map(_run_one, jobs))


# ---------------------------------------------------------------------------
# histogram export


def read_records(path) -> list[EpisodeRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_FIELDS:
            raise HarnessError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            EpisodeRecord(
                int(r["episode"]), r["scheduler"], float(r["sum_reward"]),
                float(r["sum_capacity"]), int(r["sum_timeouts"]),
                int(r["sum_ev_timeouts"]), float(r["sum_packet_rate"]),
            )
            for r in reader
        ]


def cumulative_histogram(groups: dict[str, list[float]], bins: int):
    """Shared-axis cumulative histograms.

    All values are divided by the largest value over every group (by its
    magnitude when that maximum is not positive).  Returns the bin upper
    edges and, per group, the fraction of values at or below each edge.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    allv = np.concatenate([np.asarray(v, dtype=np.float64) for v in groups.values()]) if groups else np.array([])
    if allv.size == 0:
        raise ValueError("no values to histogram")
    top = allv.max()
    if top > 0:
        scale = top
    elif top < 0:
        scale = -top
    else:
        scale = np.abs(allv).max() or 1.0
    lo = min(0.0, allv.min() / scale)
    hi = top / scale
    edges = lo + (hi - lo) * np.arange(1, bins + 1) / bins
    edges[-1] = hi
    out = {}
    for name, values in groups.items():
        v = np.sort(np.asarray(values, dtype=np.float64) / scale)
        out[name] = np.searchsorted(v, edges, side="right") / v.size
    return edges, out


def export_cumulative_histogram(records: list[EpisodeRecord], metric: str, bins: int = 40):
    """Rows ``(scheduler, metric, bin_upper_edge, cumulative_fraction)``."""
    if not records:
        raise HarnessError("no episode records to export")
    if metric not in METRICS:
        raise HarnessError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    groups: dict[str, list[float]] = {}
    for r in records:
        groups.setdefault(r.scheduler, []).append(float(getattr(r, metric)))
    edges, fracs = cumulative_histogram(groups, bins)
    rows = []
    for name, f in fracs.items():
        rows += [(name, metric, float(e), float(c)) for e, c in zip(edges, f)]
    return rows


def write_histogram_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scheduler", "metric", "bin_upper_edge", "cumulative_fraction"])
        for s, m, e, c in rows:
            w.writerow([s, m, repr(e), repr(c)])
