# %% [markdown]
# # Training the three protocols on the desk scenario
#
# Four satellites share the ring with three users and two pilots. User
# positions are redrawn every episode, so a good policy has to read its own
# geometry and, with signaling, its peers' geometry too.
#
# A full run uses 3000 episodes per seed (about a minute for eRACH on one
# CPU). This script uses 600 episodes per run so it finishes in a few
# minutes; the ordering it shows is noisier than the full comparison.

# %%
import time
from dataclasses import replace

import numpy as np

from leorach.config import RunConfig, with_overrides
from leorach.metrics import episode_throughputs
from leorach.protocols import VARIANTS
from leorach.training import evaluate, train

base = RunConfig()
base = replace(base, train=replace(base.train, episodes=600, eval_every=200))
env_cfg = base.env_config()
print("R_max (Mbit/s):", env_cfg.r_max / 1e6, " rho (Mbit/s):", env_cfg.rho_value / 1e6)

random_thr, random_col, _ = evaluate(None, env_cfg, 100, base.run.eval_seed)
print(f"uniform random access: {random_thr / 1e6:.1f} Mbit/s, {random_col:.1f} % collisions")

# %% [markdown]
# ## One seed per protocol
#
# Evaluation uses the same 100 episodes for every policy (same layouts and
# orbital phases), so differences are paired.

# %%
results = {}
for variant in VARIANTS:
    cfg = with_overrides(base, variant=variant)
    t0 = time.perf_counter()
    res = train(cfg.env_config(), cfg.protocol, cfg.train, seed=0, cost_model=cfg.cost_model())
    res.agent.load_segments(res.best_segments)
    thr, col, outcomes = evaluate(res.agent, cfg.env_config(), 100, cfg.run.eval_seed)
    results[variant] = outcomes
    curve = [round(e.avg_network_throughput / 1e6, 1) for e in res.evaluations]
    print(f"{variant:8s} {time.perf_counter() - t0:5.0f} s  checkpoints {curve}  "
          f"eval {thr / 1e6:.1f} Mbit/s, {col:.1f} % collisions")

# %% [markdown]
# Episode-level throughput spreads widely because some layouts put two
# users under one satellite. The median is less sensitive to those.

# %%
for variant, outcomes in results.items():
    per = episode_throughputs(outcomes, env_cfg.slots_per_episode) / 1e6
    q = np.percentile(per, [10, 50, 90])
    print(f"{variant:8s} p10 {q[0]:.1f}  median {q[1]:.1f}  p90 {q[2]:.1f}")

# %% [markdown]
# ## Switching inter-satellite interference off
#
# The same eRACH training without interference reaches a higher rate,
# since a served user never shares its pilot's spectrum with another
# satellite's downlink.

# %%
quiet = with_overrides(base, variant="eRACH", interference=False)
res = train(quiet.env_config(), quiet.protocol, quiet.train, seed=0)
res.agent.load_segments(res.best_segments)
thr, col, _ = evaluate(res.agent, quiet.env_config(), 100, quiet.run.eval_seed)
print(f"eRACH without interference: {thr / 1e6:.1f} Mbit/s, {col:.1f} % collisions")
