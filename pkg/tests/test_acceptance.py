"""Acceptance criteria, one PASS/FAIL line per criterion.

Criteria 5 and 6 train the desk scenario (K=4, J=3, P=2, five seeds) and
take roughly half an hour on one CPU; the runs are cached per module so the
eRACH runs with interference serve both.
"""
import csv
import itertools
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from leorach import cli
from leorach.config import RunConfig, dump_config, from_dict, with_overrides
from leorach.gradcheck import max_relative_error
from leorach.mac_env import BACKOFF_PILOT, LeoRachEnv, detect_collisions, interferer_sets
from leorach.metrics import (
    COLLISION,
    SignalingCostModel,
    episode_throughputs,
    signaling_cost,
    sweep_users,
    traffic_bits,
    utilization_grid,
    write_grid_csv,
)
from leorach.orbit_channel import LinkBudget, link_rate
from leorach.protocols import CE2RACH, DE2RACH, ERACH, VARIANTS, ProtocolAgent, ProtocolConfig
from leorach.selfcheck import check_gradients
from leorach.training import (
    TrainConfig,
    compute_returns,
    collect_episode,
    evaluate,
    loss_gradients,
    make_critic,
    total_loss,
    train,
)

SEEDS = (0, 1, 2, 3, 4)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


# -- 1. collision / interference oracle -------------------------------------

def pairwise_oracle(targets, pilots):
    J = len(targets)
    flags = [0] * J
    for j, k in itertools.permutations(range(J), 2):
        if targets[j] and (targets[j], pilots[j]) == (targets[k], pilots[k]):
            flags[j] = 1
    served = [j for j in range(J) if targets[j] and not flags[j]]
    sets = [frozenset(targets[k] for k in served
                      if k != j and pilots[k] == pilots[j] and targets[k] != targets[j])
            if j in served else frozenset() for j in range(J)]
    return flags, sets


def test_criterion_1_oracle_equivalence(capsys):
    start = time.perf_counter()
    cases, mismatches = 0, []
    for J, K, P in itertools.product((1, 2, 3), (1, 2), (1, 2)):
        for targets in itertools.product(range(K + 1), repeat=J):
            for drawn in itertools.product(range(1, P + 1), repeat=J):
                pilots = [p if a else BACKOFF_PILOT for a, p in zip(targets, drawn)]
                flags = list(detect_collisions(targets, pilots))
                sets = [frozenset(s) for s in interferer_sets(targets, pilots, flags)]
                if (flags, sets) != pairwise_oracle(targets, pilots):
                    mismatches.append((targets, pilots))
                cases += 1
    elapsed = time.perf_counter() - start
    ok = not mismatches and elapsed < 1.0
    report(capsys, 1, ok, f"{cases} joint actions, {len(mismatches)} mismatches, {elapsed:.2f} s")


# -- 2. rate formula -----------------------------------------------------------

def test_criterion_2_rate_formula(capsys):
    hand = [
        (LinkBudget(1.0, 1, 2.0, 1.0), 1.0, [], 1.0),
        (LinkBudget(2.0, 2, 2.0, 0.0), 1.0, [1.0], 1.0),
        (LinkBudget(1.0, 1, 2.0, 3.0), 1.0, [], math.log2(4.0 / 3.0)),
    ]
    exact = all(link_rate(d, i, b) == want for b, d, i, want in hand)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        W, P = rng.uniform(1e3, 1e8), int(rng.integers(1, 9))
        alpha, noise = rng.uniform(2.0, 5.0), rng.uniform(1e-12, 1.0)
        d = rng.uniform(0.5, 50.0)
        others = [float(x) for x in rng.uniform(0.5, 50.0, size=int(rng.integers(0, 5)))]
        interference = math.fsum(x ** -alpha for x in others)
        want = W / P * math.log2(1.0 + d ** -alpha / (interference + noise))
        got = link_rate(d, others, LinkBudget(W, P, alpha, noise))
        worst = max(worst, abs(got - want) / want)
    ok = exact and worst < 1e-12
    report(capsys, 2, ok, f"hand examples exact={exact}, max rel err {worst:.1e} over 1000 inputs")


# -- 3. gradients ------------------------------------------------------------

def test_criterion_3_gradients(capsys):
    start = time.perf_counter()
    segments = check_gradients()
    rc = RunConfig()
    small = dict(lower_hidden=(6,), upper_hidden=(5,), relay_hidden=(7,), ae_hidden=5, recon_weight=1.0)
    worst = 0.0
    for variant in VARIANTS:
        env = LeoRachEnv(replace(rc.env_config(seed=3), slots_per_episode=3))
        agent = ProtocolAgent(ProtocolConfig(variant=variant, **small), env.num_users,
                              env.obs_dim, env.num_satellites + 1, seed=2)
        critic = make_critic(env.num_users, env.obs_dim, 6, seed=4)
        buf = collect_episode(env, agent, critic, np.random.default_rng(5))
        cfg = TrainConfig(gamma=0.5, entropy_coef=0.2)
        returns, adv = compute_returns(buf, cfg.gamma)
        grads, critic_grad, _ = loss_gradients(agent, critic, buf, returns, adv, cfg)
        segs = agent.segments()
        pairs = [(a, g) for k in segs for a, g in zip(segs[k].arrays(), grads[k].arrays())]
        pairs += list(zip(critic.arrays(), critic_grad.arrays()))
        worst = max(worst, max_relative_error(
            lambda: total_loss(agent, critic, buf, returns, adv, cfg), pairs))
    elapsed = time.perf_counter() - start
    ok = segments.passed and worst < 1e-5 and elapsed < 30.0
    report(capsys, 3, ok, f"segments {segments.detail}; full loss incl. critic max rel err "
                          f"{worst:.1e}; {elapsed:.1f} s")


# -- 4. signaling topology -----------------------------------------------------

def test_criterion_4_signaling_topology(capsys):
    expected = {ERACH: lambda J: 0, DE2RACH: lambda J: J * (J - 1), CE2RACH: lambda J: 2 * J}
    model = SignalingCostModel()
    rng = np.random.default_rng(0)
    small = dict(lower_hidden=(6,), upper_hidden=(5,), relay_hidden=(7,), ae_hidden=5)
    bad = []
    for variant, J in itertools.product(VARIANTS, range(1, 11)):
        agent = ProtocolAgent(ProtocolConfig(variant=variant, **small), J, 16, 5, seed=J)
        traffic = agent.joint_act(rng.uniform(-1, 1, (J, 16)), rng).traffic
        if (len(traffic) != expected[variant](J)
                or traffic_bits(traffic, model) != signaling_cost(variant, J, model)):
            bad.append((variant, J))
    rows = sweep_users(range(2, 11), model)
    cost = {(v, J): b for J, v, b in rows}
    B, dm, dc, dd = model.bits_per_element, model.peer_msg_dim, model.uplink_code_dim, model.downlink_dim
    linear = all(cost[CE2RACH, J] == J * (dc + dd) * B for J in range(2, 11))
    pairs = all(cost[DE2RACH, J] == J * (J - 1) * dm * B for J in range(2, 11))
    zero = all(cost[ERACH, J] == 0 for J in range(2, 11))
    ok = not bad and linear and pairs and zero
    report(capsys, 4, ok, f"message counts/bits mismatches {bad}; Ce2RACH linear={linear}, "
                          f"De2RACH J(J-1)={pairs}, eRACH zero={zero}")


# -- 5, 6. trained desk-scale comparisons ------------------------------------

_RUNS: dict = {}


def desk_run(variant, interference, seed):
    """Train with the default run config, evaluate its best checkpoint on the eval seed."""
    key = (variant, interference, seed)
    if key not in _RUNS:
        start = time.perf_counter()
        cfg = with_overrides(RunConfig(), variant=variant, interference=interference)
        env_cfg = cfg.env_config()
        result = train(env_cfg, cfg.protocol, cfg.train, seed, cfg.cost_model())
        result.agent.load_segments(result.best_segments)
        _, _, outcomes = evaluate(result.agent, env_cfg, cfg.run.eval_episodes, cfg.run.eval_seed)
        per_episode = episode_throughputs(outcomes, env_cfg.slots_per_episode)
        _RUNS[key] = (float(np.median(per_episode)), time.perf_counter() - start)
    return _RUNS[key]


@pytest.mark.slow
def test_criterion_5_interference_lowers_throughput(capsys):
    on = [desk_run(ERACH, True, s) for s in SEEDS]
    off = [desk_run(ERACH, False, s) for s in SEEDS]
    gaps = [1.0 - a / b for (a, _), (b, _) in zip(on, off)]
    median_gap = float(np.median(gaps))
    elapsed = sum(t for _, t in on + off)
    ok = median_gap > 0.10 and elapsed <= 600.0
    report(capsys, 5, ok, f"eRACH median gap {100 * median_gap:.1f} % "
                          f"(per seed {[round(100 * g, 1) for g in gaps]}); {elapsed:.0f} s")


@pytest.mark.slow
def test_criterion_6_signaling_beats_erach(capsys):
    thr = {v: [desk_run(v, True, s) for s in SEEDS] for v in VARIANTS}
    elapsed = sum(t for runs in thr.values() for _, t in runs)
    mbps = {v: [round(x / 1e6, 2) for x, _ in runs] for v, runs in thr.items()}
    wins = {v: sum(a > b for (a, _), (b, _) in zip(thr[v], thr[ERACH])) for v in (DE2RACH, CE2RACH)}
    ok = wins[DE2RACH] >= 4 and wins[CE2RACH] >= 4 and elapsed <= 1800.0
    report(capsys, 6, ok, f"seeds won vs eRACH {wins}; median Mbit/s {mbps}; {elapsed:.0f} s")


# -- 7. reward normalization -------------------------------------------------

def test_criterion_7_reward_normalization(capsys):
    rewards = []
    exact = True
    for rho in (None, 0.0, 1e7, 2e8):
        cfg = replace(RunConfig().env_config(seed=1), rho=rho)
        g = cfg.normalizer()
        exact &= g(-cfg.rho_value) == -1.0 and g(cfg.r_max) == 1.0 and g(g.midpoint) == 0.0
        env = LeoRachEnv(cfg)
        rng = np.random.default_rng(2)
        for _ in range(50):
            env.reset()
            while not env.done:
                rewards.extend(env.step(rng.integers(0, env.num_satellites + 1, env.num_users)).rewards)
    rewards = np.asarray(rewards)
    bounded = bool(np.all((rewards >= -1.0) & (rewards <= 1.0)))
    ok = exact and bounded
    report(capsys, 7, ok, f"endpoints/midpoint exact={exact}; {rewards.size} rewards in "
                          f"[{rewards.min():.3f}, {rewards.max():.3f}]")


# -- 8. determinism ------------------------------------------------------------

def test_criterion_8_cli_determinism(capsys, tmp_path):
    small = {"train": {"episodes": 6, "eval_every": 3, "eval_episodes": 2},
             "run": {"seeds": [3], "eval_episodes": 3}}
    differing = []
    for variant in VARIANTS:
        config = tmp_path / f"{variant}.yaml"
        config.write_text(dump_config(from_dict({**small, "protocol": {"variant": variant}})))
        outputs = []
        for attempt in ("a", "b"):
            out = tmp_path / variant / attempt
            for command in ("train", "eval"):
                assert cli.main([command, "--config", str(config), "--out", str(out)]) == 0
            outputs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if outputs[0] != outputs[1] or len(outputs[0]) < 5:
            differing.append(variant)
    ok = not differing
    report(capsys, 8, ok, f"train+eval CSVs byte-identical across two runs; differing {differing}")


# -- 9. utilization grid -------------------------------------------------------

def test_criterion_9_grid_reconciles(capsys, tmp_path):
    env_cfg = RunConfig().env_config()
    _, _, outcomes = evaluate(None, env_cfg, 10_000 // env_cfg.slots_per_episode, seed=9)
    K, P = env_cfg.constellation.num_satellites, env_cfg.budget.num_pilots
    path = tmp_path / "grid.csv"
    write_grid_csv(path, utilization_grid(outcomes, K, P))
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    from_grid = set()
    for r in rows:
        if r["status"] == COLLISION:
            from_grid.update((int(r["step"]), int(u)) for u in r["users"].split())
    from_flags = {(n, j) for n, o in enumerate(outcomes) for j, c in enumerate(o.collisions) if c}
    shape = len(rows) == len(outcomes) * K * P
    ok = from_grid == from_flags and shape and len(outcomes) == 10_000
    report(capsys, 9, ok, f"{len(outcomes)} slots, {len(from_flags)} collision flags, "
                          f"{len(from_grid)} users in collision cells, rows={len(rows)}")
