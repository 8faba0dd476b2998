# %% [markdown]
# # The slotted random-access environment
#
# Each slot every user picks a satellite or backs off. Transmitting users
# draw a pilot at random. Two users on the same satellite and pilot collide;
# successful users are interfered by other served satellites on their pilot.

# %%
import numpy as np

from leorach.mac_env import EnvConfig, LeoRachEnv, detect_collisions, interferer_sets
from leorach.metrics import COLLISION, throughput_and_collision, utilization_grid
from leorach.orbit_channel import ConstellationConfig, GroundUser, LinkBudget

targets, pilots = [1, 1, 2], [1, 1, 1]
col = detect_collisions(targets, pilots)
print("collisions:", col)
print("interferers:", interferer_sets(targets, pilots, col))

targets, pilots = [1, 2, 2], [1, 1, 2]
col = detect_collisions(targets, pilots)
print("collisions:", col, "interferers:", interferer_sets(targets, pilots, col))

# %% [markdown]
# ## Rewards
#
# The reward maps `R - rho * c` affinely onto [-1, 1]: a collision scores -1,
# a full-rate success +1, and backing off sits in between.

# %%
cc = ConstellationConfig(num_satellites=4)
budget = LinkBudget(pathloss_exponent=4.0, noise_over_power=500.0 ** -4 / 100)
users = tuple(GroundUser(j, 300.0 * j) for j in range(3))
cfg = EnvConfig(cc, budget, users, slots_per_episode=40, user_layout="uniform")
g = cfg.normalizer()
print("rho (Mbit/s):", cfg.rho_value / 1e6)
print("g(-rho), g(0), g(R_max):", g(-cfg.rho_value), g(0.0), g(cfg.r_max))

# %% [markdown]
# ## A uniform-random policy
#
# The per-attempt collision probability and the utilization grid come from
# the same outcome stream. Collision cells, weighted by their occupants,
# account for every collision flag.

# %%
env = LeoRachEnv(cfg)
rng = np.random.default_rng(0)
outcomes = []
for _ in range(25):
    env.reset()
    while not env.done:
        outcomes.append(env.step(rng.integers(0, cc.num_satellites + 1, size=3)))
thr, pct = throughput_and_collision(outcomes)
print(f"random policy: {thr / 1e6:.2f} Mbit/s, {pct:.1f} % of attempts collide")

grid = utilization_grid(outcomes, cc.num_satellites, budget.num_pilots)
weighted = sum(len(users) for *_, status, users in grid if status == COLLISION)
print("grid rows:", len(grid), "weighted collision cells:", weighted,
      "flags:", sum(sum(o.collisions) for o in outcomes))

# %% [markdown]
# Turning interference off leaves collisions unchanged and raises rates.

# %%
from dataclasses import replace

env = LeoRachEnv(replace(cfg, interference=False))
rng = np.random.default_rng(0)
quiet = []
for _ in range(25):
    env.reset()
    while not env.done:
        quiet.append(env.step(rng.integers(0, cc.num_satellites + 1, size=3)))
print("without interference:", throughput_and_collision(quiet)[0] / 1e6, "Mbit/s")
