"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.  The learning-trend
criterion trains for several minutes and is marked ``slow``.
"""

import itertools
import time

import numpy as np
import pytest
from scipy.stats import mannwhitneyu

from rbsched import config as C
from rbsched import env as E
from rbsched import harness as H
from rbsched import nn
from rbsched import schedulers as S
from rbsched.agent import actor_act, actor_loss_grads, critic_loss_grads
from rbsched.allocation import postprocess
from rbsched.cli import cli_main
from rbsched.metrics import sum_capacity
from rbsched.replay import ReplayBuffer

from conftest import ACCEPTANCE


def report(num, ok, detail):
    ACCEPTANCE[num] = (bool(ok), detail)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


# -- 1 -------------------------------------------------------------------------------------------


def _randomised(dims, head, rng):
    net = nn.init_mlp(dims, head, rng)
    for b in net.biases:
        b[:] = rng.normal(scale=0.1, size=b.shape)
    return net


def test_c1_gradient_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        # raw backward, both output heads, including the input gradient
        for head in (nn.SOFTMAX, nn.IDENTITY):
            net = _randomised([6, 8, 4], head, rng)
            x = rng.normal(size=(3, 6))
            c = rng.normal(size=(3, 4))
            _, cache = nn.forward(net, x)
            grads, dx = nn.backward(net, cache, c)
            num = nn.finite_difference(lambda: float((nn.forward(net, x)[0] * c).sum()),
                                       net.params() + [x])
            worst = max(worst, nn.max_relative_error(grads + [dx], num))
        # composed losses: actor [6, 8, 4], critic over (state, action) -> [10, 8, 1]
        actor = _randomised([6, 8, 4], nn.SOFTMAX, rng)
        critic = _randomised([10, 8, 1], nn.IDENTITY, rng)
        s = rng.normal(size=(5, 6))
        a = rng.dirichlet(np.ones(4), size=5)
        r = rng.normal(size=5)
        _, g, _ = critic_loss_grads(critic, s, a, r)
        num = nn.finite_difference(lambda: critic_loss_grads(critic, s, a, r)[0], critic.params())
        worst = max(worst, nn.max_relative_error(g, num))
        frozen = [p.copy() for p in critic.params()]
        _, g = actor_loss_grads(actor, critic, s)
        num = nn.finite_difference(lambda: actor_loss_grads(actor, critic, s)[0], actor.params())
        worst = max(worst, nn.max_relative_error(g, num))
        assert all((p == q).all() for p, q in zip(frozen, critic.params()))
    dt = time.perf_counter() - t0
    report(1, worst < 1e-4 and dt < 10, f"max rel err {worst:.2e} (< 1e-4), {dt:.1f}s (< 10s)")


# -- 2 -------------------------------------------------------------------------------------------


def test_c2_allocation_validity_fuzz():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    bad = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 13))
        S_ = int(rng.integers(1, 41))
        demand = rng.integers(0, 3 * S_, n) * (rng.random(n) < 0.7)
        action = rng.dirichlet(np.full(n, rng.choice([0.1, 1.0, 10.0])))
        for eval_mode in (False, True):
            b = postprocess(action, demand, S_, eval_mode).blocks
            ok = b.sum() <= S_ and (b >= 0).all() and (b <= demand).all()
            if eval_mode:
                ok = ok and b.sum() == min(S_, demand.sum())
            bad += not ok
    dt = time.perf_counter() - t0
    report(2, bad == 0 and dt < 5, f"{bad} invalid of 20000 allocations, {dt:.1f}s (< 5s)")


# -- 3 -------------------------------------------------------------------------------------------


def _obs(g, demand, S_, rng):
    n = len(g)
    demand = np.asarray(demand, dtype=np.int64)
    ttl = np.where(demand > 0, rng.integers(1, 5, n), 0)
    jobs = tuple(((u, int(demand[u]), int(ttl[u])),) if demand[u] else () for u in range(n))
    return E.Observation(
        power_fading=np.asarray(g, dtype=np.float64), demand=demand, min_ttl=ttl,
        inv_min_ttl=np.where(ttl > 0, 1.0 / np.maximum(ttl, 1), 0.0), packet_rate=rng.random(n),
        timeout_blocks=rng.integers(0, 10, n), is_ev=np.zeros(n, dtype=bool), num_resources=S_,
        jobs=jobs,
    )


def test_c3_baseline_correctness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    mt_bad = mt_total = 0
    for S_ in range(1, 7):
        for n in range(1, 4):
            for demand in itertools.product(range(5), repeat=n):
                obs = _obs(rng.rayleigh(1.0, n) * rng.random(n), demand, S_, rng)
                best = max(
                    sum_capacity(obs, np.array(x), 13.0)
                    for x in itertools.product(*[range(d + 1) for d in demand]) if sum(x) <= S_
                )
                got = sum_capacity(obs, S.schedule_mt(obs).blocks, 13.0)
                mt_total += 1
                mt_bad += not np.isclose(got, best, rtol=1e-12, atol=1e-12)

    mmf_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        S_ = int(rng.integers(1, 41))
        demand = rng.integers(0, 25, n) * (rng.random(n) < 0.8)
        b = S.schedule_mmf(_obs(np.ones(n), demand, S_, rng)).blocks
        # integer max-min: nobody short of demand trails another user by more than one block
        fair = all(not (b[i] < demand[i] and b[j] > b[i] + 1) for i in range(n) for j in range(n))
        mmf_bad += not (fair and b.sum() == min(S_, demand.sum()) and (b <= demand).all())

    # DS in the live environment with few blocks so hopeless jobs are common
    ds_bad = ds_hopeless = 0
    cfg = E.EnvConfig(num_resources=2, num_users=4, p_job=0.5,
                      profiles=[E.PROFILE_TABLE[E.ProfileLabel.LOW_LATENCY]] * 4)
    for ep in range(100):
        state = E.reset_episode(cfg, ep)
        for _ in range(cfg.steps_per_episode):
            E.generate_jobs(state)
            E.step_mobility(state)
            E.update_channel(state)
            obs = E.observe(state)
            hopeless = {j.id: j.remaining for j in state.queue if j.remaining > j.ttl * cfg.num_resources}
            ds_hopeless += len(hopeless)
            alloc = S.schedule_ds(obs)
            E.apply_allocation(state, alloc.blocks, alloc.skip_jobs)
            ds_bad += sum(j.remaining != hopeless[j.id] for j in state.queue if j.id in hopeless)
            ds_bad += sum(1 for jid in hopeless if all(j.id != jid for j in state.queue))
            E.advance_time(state)
    dt = time.perf_counter() - t0
    ok = mt_bad == 0 and mmf_bad == 0 and ds_bad == 0 and ds_hopeless > 0 and dt < 30
    report(3, ok, f"MT {mt_total - mt_bad}/{mt_total} optimal, MMF {1000 - mmf_bad}/1000 max-min, "
                  f"DS {ds_bad} grants to {ds_hopeless} hopeless jobs, {dt:.1f}s (< 30s)")


# -- 4 -------------------------------------------------------------------------------------------


def test_c4_statistical_models():
    cfg = E.EnvConfig()
    state = E.reset_episode(cfg, 4)
    amps = np.empty((100_000, cfg.num_users))
    for k in range(100_000):
        E.update_channel(state)
        amps[k] = [us.fading_amp for us in state.users]
    mean = amps.mean()
    ray_err = abs(mean / np.sqrt(np.pi / 2) - 1)

    codes = np.concatenate([E.step_mobility(state) for _ in range(10_000)])
    persist = float((codes == E.PERSIST).mean())

    buf = ReplayBuffer(64, 1, 1, alpha=0.6)
    rng = np.random.default_rng(4)
    for i in range(64):
        buf.push([i], [0], 0.0)
    buf.update_priorities(np.arange(64), rng.exponential(1.0, 64))
    p = buf.priorities ** 0.6
    expected = p / p.sum()
    idx, *_ = buf.sample(100_000, rng, min_size=1)
    freq = np.bincount(idx, minlength=64) / 100_000
    prio_err = float(np.abs(freq - expected).max())

    ok = ray_err < 0.01 and abs(persist - 0.98) <= 0.005 and prio_err <= 0.01
    report(4, ok, f"Rayleigh mean {mean:.4f} (rel err {ray_err:.1e} < 1%), persistence "
                  f"{persist:.4f} (0.98 +- 0.005), priority freq max abs err {prio_err:.4f} (<= 0.01)")


# -- 5 -------------------------------------------------------------------------------------------


def test_c5_conservation_ledger():
    rng = np.random.default_rng(5)
    cfg = E.EnvConfig()
    violations = checks = 0

    def check(state):
        nonlocal violations, checks
        live = np.zeros(cfg.num_users, dtype=np.int64)
        for j in state.queue:
            live[j.user] += j.remaining
        for u, us in enumerate(state.users):
            checks += 1
            violations += us.lifetime_requested != (
                us.lifetime_scheduled + live[u] + us.lifetime_timeout_blocks)

    deciders = [
        lambda o: postprocess(S.schedule_random(o, rng), o.demand, o.num_resources, False),
        lambda o: postprocess(S.schedule_random(o, rng), o.demand, o.num_resources, True),
        S.schedule_ds, S.schedule_mt, S.schedule_mmf,
    ]
    for ep in range(100):
        state = E.reset_episode(cfg, int(rng.integers(2**32)))
        decide = deciders[ep % len(deciders)]
        for _ in range(cfg.steps_per_episode):
            E.generate_jobs(state)
            check(state)
            E.step_mobility(state)
            E.update_channel(state)
            alloc = decide(E.observe(state))
            E.apply_allocation(state, alloc.blocks, alloc.skip_jobs)
            check(state)
            E.advance_time(state)
            check(state)
    report(5, violations == 0, f"{violations} violations in {checks} per-user checks over 100 episodes")


# -- 6 -------------------------------------------------------------------------------------------


def test_c6_determinism(tmp_path):
    csvs = []
    for k in range(2):
        out = tmp_path / f"mmf{k}"
        assert cli_main(["baseline", "--scheduler", "mmf", "--seed", "7", "--episodes", "50",
                         "--out", str(out)]) == 0
        csvs.append((out / "baseline_mmf.csv").read_bytes())
    cfg = tmp_path / "train.json"
    cfg.write_text('{"ddpg": {"actor_hidden": [16, 16], "critic_hidden": [16, 16], "batch_size": 32},'
                   ' "episodes": 10}')
    models = []
    for k in range(2):
        out = tmp_path / f"train{k}"
        assert cli_main(["train", "--config", str(cfg), "--seed", "7", "--out", str(out)]) == 0
        models.append((out / "model.json").read_bytes())
    same_csv, same_model = csvs[0] == csvs[1], models[0] == models[1]
    report(6, same_csv and same_model,
           f"baseline CSVs identical: {same_csv}, model files identical: {same_model}")


# -- 7 + 9 ----------------------------------------------------------------------------------------

TREND_CONFIG = {"ddpg": {"actor_hidden": [64, 64], "critic_hidden": [64, 64]}, "episodes": 3000}
EVAL_EPISODES = 500


def trend_attempt(seed, out):
    cfg = C.from_dict(dict(TREND_CONFIG, seed=seed, output_dir=str(out)))
    t0 = time.perf_counter()
    H.run(cfg, H.Mode.TRAIN)
    cfg.episodes = EVAL_EPISODES
    runs = {"ddpg": H.run(cfg, H.Mode.EVALUATE, model_path=out / "model.json")}
    for kind in ("random", "mmf", "mt", "ds"):
        cfg.scheduler = kind
        runs[kind] = H.run(cfg, H.Mode.BASELINE)
    ddpg = [r.sum_reward for r in runs["ddpg"]]
    rand = [r.sum_reward for r in runs["random"]]
    p = mannwhitneyu(ddpg, rand, alternative="greater").pvalue
    ev_ddpg = np.median([r.sum_ev_timeouts for r in runs["ddpg"]])
    ev_mmf = np.median([r.sum_ev_timeouts for r in runs["mmf"]])
    ok = np.mean(ddpg) > np.mean(rand) and p < 0.01 and ev_ddpg <= ev_mmf
    detail = (f"seed {seed}: mean reward DDPG {np.mean(ddpg):.1f} vs Random {np.mean(rand):.1f} "
              f"(p = {p:.1e} < 0.01), median EV timeouts DDPG {ev_ddpg:g} <= MMF {ev_mmf:g}, "
              f"{time.perf_counter() - t0:.0f}s")
    return ok, detail, runs


@pytest.fixture(scope="module")
def trend(tmp_path_factory):
    details = []
    for seed in range(3):
        ok, detail, runs = trend_attempt(seed, tmp_path_factory.mktemp(f"trend{seed}"))
        details.append(detail)
        if ok:
            break
    return ok, "; ".join(details), runs


@pytest.mark.slow
def test_c7_learning_trend(trend):
    ok, detail, _ = trend
    report(7, ok, detail)


@pytest.mark.slow
def test_c9_histogram_export(trend):
    edges, fr = H.cumulative_histogram({"x": [1, 2, 4]}, 4)
    exact = edges.tolist() == [0.25, 0.5, 0.75, 1.0] and fr["x"].tolist() == [1 / 3, 2 / 3, 2 / 3, 1.0]
    _, _, runs = trend
    records = [r for rs in runs.values() for r in rs]
    bad = []
    for metric in H.METRICS:
        rows = H.export_cumulative_histogram(records, metric, bins=40)
        for kind in runs:
            f = [c for s, m, _, c in rows if s == kind]
            if not (np.all(np.diff(f) >= 0) and f[-1] == 1.0):
                bad.append(f"{kind}/{metric}")
    report(9, exact and not bad,
           f"hand example exact: {exact}, CDFs monotone and ending at 1 for "
           f"{len(H.METRICS) * len(runs) - len(bad)}/{len(H.METRICS) * len(runs)} (scheduler, metric) pairs")


# -- 8 -------------------------------------------------------------------------------------------

PROBE_LR = 1e-4


def test_c8_critic_probe():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    n_users = 4
    critic = nn.init_mlp([4 * n_users, 64, 64, 1], nn.IDENTITY, rng)
    s = rng.normal(size=(256, 3 * n_users))
    a = rng.dirichlet(np.ones(n_users), size=256)
    r = np.sin(s[:, 0]) + 2 * a[:, 0] - s[:, 1] * a[:, 1]
    opt = nn.AdamState.zeros_like(critic.params(), PROBE_LR)
    initial = critic_loss_grads(critic, s, a, r)[0]
    steps = None
    for k in range(1, 5001):
        idx = rng.integers(0, 256, 128)
        _, g, _ = critic_loss_grads(critic, s[idx], a[idx], r[idx])
        params, opt = nn.adam_step(critic.params(), g, opt)
        critic.set_params(params)
        if k % 100 == 0 and critic_loss_grads(critic, s, a, r)[0] < 0.01 * initial:
            steps = k
            break
    dt = time.perf_counter() - t0
    report(8, steps is not None and dt < 60,
           f"critic probe: L_Q < 1% of initial after {steps} steps (<= 5000), {dt:.1f}s (< 60s)")


def test_c8_actor_probe():
    t0 = time.perf_counter()
    rng = np.random.default_rng(80)
    n_users = 4
    actor = nn.init_mlp([3 * n_users, 64, 64, n_users], nn.SOFTMAX, rng)
    actor.weights[-1][:] = 0  # uniform policy at the start
    # hand-built critic: Q(s, a) = a[0]
    w = np.zeros((4 * n_users, 1))
    w[3 * n_users] = 1.0
    critic = nn.Mlp([4 * n_users, 1], [w], [np.zeros(1)])
    opt = nn.AdamState.zeros_like(actor.params(), PROBE_LR)
    probe_states = rng.normal(size=(200, 3 * n_users))
    start = float(actor_act(actor, probe_states)[:, 0].min())
    steps = None
    for k in range(1, 2001):
        _, g = actor_loss_grads(actor, critic, rng.normal(size=(128, 3 * n_users)))
        params, opt = nn.adam_step(actor.params(), g, opt)
        actor.set_params(params)
        if k % 50 == 0 and actor_act(actor, probe_states)[:, 0].min() > 0.95:
            steps = k
            break
    dt = time.perf_counter() - t0
    ok = steps is not None and dt < 60 and start == pytest.approx(1 / n_users)
    prev = ACCEPTANCE.get(8, (True, ""))
    detail = f"actor probe: min mu(s)[0] from {start:.2f} to > 0.95 after {steps} steps (<= 2000), {dt:.1f}s"
    report(8, ok and prev[0], (prev[1] + "; " if prev[1] else "") + detail)
