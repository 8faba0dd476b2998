"""Oracle and gradient self-checks run by ``leorach validate``.

Each check returns a ``CheckResult``; none of them raise on failure so the
driver can report every problem in one pass.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gradcheck import max_relative_error
from .mac_env import BACKOFF_PILOT, RewardNormalizer, detect_collisions, interferer_sets
from .metrics import SignalingCostModel, signaling_cost, sweep_users
from .orbit_channel import LinkBudget, link_rate
from .protocols import CE2RACH, DE2RACH, ERACH, VARIANTS, ProtocolAgent, ProtocolConfig


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _brute_force(targets, pilots):
    J = len(targets)
    col = [0] * J
    for j in range(J):
        for k in range(J):
            if k != j and targets[j] != 0 and targets[j] == targets[k] and pilots[j] == pilots[k]:
                col[j] = 1
    sets = []
    for j in range(J):
        s = set()
        if targets[j] != 0 and not col[j]:
            for k in range(J):
                if (k != j and targets[k] != 0 and not col[k] and targets[k] != targets[j]
                        and pilots[k] == pilots[j]):
                    s.add(targets[k])
        sets.append(frozenset(s))
    return col, sets


def check_oracle() -> CheckResult:
    cases = 0
    for J in (1, 2, 3):
        for K in (1, 2):
            for P in (1, 2):
                for targets in itertools.product(range(K + 1), repeat=J):
                    for raw in itertools.product(range(1, P + 1), repeat=J):
                        pilots = [p if a else BACKOFF_PILOT for a, p in zip(targets, raw)]
                        col, sets = _brute_force(targets, pilots)
                        got_col = list(detect_collisions(targets, pilots))
                        got_sets = [frozenset(s) for s in interferer_sets(targets, pilots, got_col)]
                        if got_col != col or got_sets != sets:
                            return CheckResult("oracle", False, f"mismatch at {targets} {pilots}")
                        cases += 1
    return CheckResult("oracle", True, f"{cases} joint actions")


def check_rate() -> CheckResult:
    examples = [
        (LinkBudget(1.0, 1, 2.0, 1.0), 1.0, [], 1.0),
        (LinkBudget(2.0, 2, 2.0, 0.0), 1.0, [1.0], 1.0),
        (LinkBudget(1.0, 1, 2.0, 3.0), 1.0, [], math.log2(4.0 / 3.0)),
    ]
    for budget, d, intf, want in examples:
        got = link_rate(d, intf, budget)
        if got != want:
            return CheckResult("rate", False, f"expected {want}, got {got}")
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        budget = LinkBudget(float(rng.uniform(1e3, 1e8)), int(rng.integers(1, 5)),
                            float(rng.uniform(2.0, 4.0)), float(rng.uniform(1e-9, 1.0)))
        d = float(rng.uniform(1.0, 10.0))
        intf = list(rng.uniform(1.0, 10.0, size=int(rng.integers(0, 4))))
        denom = sum(x ** -budget.pathloss_exponent for x in intf) + budget.noise_over_power
        want = budget.bandwidth / budget.num_pilots * math.log2(
            1.0 + d ** -budget.pathloss_exponent / denom)
        worst = max(worst, abs(link_rate(d, intf, budget) - want) / abs(want))
    return CheckResult("rate", worst < 1e-12, f"max rel err {worst:.2e}")


def check_reward() -> CheckResult:
    g = RewardNormalizer(-0.5, 1.0)
    ok = g(-0.5) == -1.0 and g(1.0) == 1.0 and g(0.25) == 0.0
    ok = ok and g(-10.0) == -1.0 and g(10.0) == 1.0
    return CheckResult("reward", ok, "endpoints and midpoint")


def check_topology() -> CheckResult:
    expected = {ERACH: lambda J: 0, DE2RACH: lambda J: J * (J - 1), CE2RACH: lambda J: 2 * J}
    rng = np.random.default_rng(0)
    small = dict(lower_hidden=(6,), upper_hidden=(5,), relay_hidden=(7,), ae_hidden=5)
    for variant in VARIANTS:
        for J in (1, 2, 4):
            ag = ProtocolAgent(ProtocolConfig(variant=variant, **small), J, 6, 3, seed=0)
            n = len(ag.joint_act(rng.uniform(-1, 1, (J, 6)), rng).traffic)
            if n != expected[variant](J):
                return CheckResult("topology", False, f"{variant} J={J}: {n} messages")
    model = SignalingCostModel()
    try:
        rows = sweep_users(range(2, 11), model)
    except AssertionError as exc:
        return CheckResult("topology", False, str(exc))
    ce = [b for _, v, b in rows if v == CE2RACH]
    de = [b for _, v, b in rows if v == DE2RACH]
    lin = len({b - a for a, b in zip(ce, ce[1:])}) == 1
    d1 = [b - a for a, b in zip(de, de[1:])]
    quad = len({b - a for a, b in zip(d1, d1[1:])}) == 1 and d1[1] > d1[0]
    exact = signaling_cost(DE2RACH, 5, model) == 2560 and signaling_cost(CE2RACH, 5, model) == 1280
    return CheckResult("topology", lin and quad and exact, "message counts and cost laws")


def check_gradients() -> CheckResult:
    worst = 0.0
    small = dict(lower_hidden=(6,), upper_hidden=(5,), relay_hidden=(7,), ae_hidden=5, recon_weight=1.0)
    configs = [ProtocolConfig(variant=v, **small) for v in VARIANTS]
    configs.append(ProtocolConfig(variant=CE2RACH, relay_mixing=False, **small))
    for pc in configs:
        for J in (1, 3):
            ag = ProtocolAgent(pc, J, 6, 4, seed=1)
            rng = np.random.default_rng(J)
            for p in ag.segments().values():
                for b in p.biases:
                    b[...] = rng.normal(scale=0.3, size=b.shape)
            obs = rng.uniform(-1, 1, size=(3, J, 6))
            C = rng.normal(size=(3, J, 4))

            def loss():
                logits, cache = ag.forward_batch(obs)
                return float(np.sum(C * logits)) + ag.reconstruction_loss(cache)

            _, cache = ag.forward_batch(obs)
            grads = ag.backward_batch(cache, C)
            segs = ag.segments()
            pairs = [(a, g) for k in segs for a, g in zip(segs[k].arrays(), grads[k].arrays())]
            worst = max(worst, max_relative_error(loss, pairs))
    return CheckResult("gradients", worst < 1e-5, f"max rel err {worst:.2e}")


CHECKS: tuple[Callable[[], CheckResult], ...] = (
    check_oracle, check_rate, check_reward, check_topology, check_gradients,
)


def run_all() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            results.append(check())
        except Exception as exc:  # report, don't abort the suite
            results.append(CheckResult(check.__name__.removeprefix("check_"), False,
                                       f"{type(exc).__name__}: {exc}"))
    return results
