# %% [markdown]
# # Three access protocols and their signaling traffic
#
# * eRACH: each user maps its own observation to a target.
# * De2RACH: each user's lower network also emits one message per peer; the
#   upper network reads its latent plus the incoming messages.
# * Ce2RACH: each user sends one compressed uplink to a relay, which mixes
#   all uplinks and returns one compressed downlink per user.

# %%
import numpy as np

from leorach.metrics import SignalingCostModel, signaling_cost, sweep_users, traffic_bits
from leorach.protocols import CE2RACH, DE2RACH, ERACH, ProtocolAgent, ProtocolConfig

J, OBS, ACTIONS = 3, 16, 5
rng = np.random.default_rng(0)
obs = rng.uniform(-1, 1, size=(J, OBS))

for variant in (ERACH, DE2RACH, CE2RACH):
    agent = ProtocolAgent(ProtocolConfig(variant=variant), J, OBS, ACTIONS, seed=0)
    act = agent.joint_act(obs, rng)
    print(f"{variant:8s} targets={act.targets.tolist()} messages/slot={len(act.traffic)}")
    for entry in act.traffic[:4]:
        print("   ", entry)

# %% [markdown]
# ## Message contents
#
# De2RACH messages are addressed peer to peer. Ce2RACH uplinks are the
# encoder's bottleneck code; the relay returns one downlink per user.

# %%
agent = ProtocolAgent(ProtocolConfig(variant=DE2RACH), J, OBS, ACTIONS, seed=0)
z, outgoing = agent.de2rach_emit(0, obs[0])
print("latent width:", z.shape[0], "messages from user 0:", [m.shape[0] for m in outgoing])

agent = ProtocolAgent(ProtocolConfig(variant=CE2RACH), J, OBS, ACTIONS, seed=0)
uplinks = [agent.ce2rach_uplink(j, obs[j])[1] for j in range(J)]
print("uplink widths:", [u.shape[0] for u in uplinks])
print("downlink widths:", [d.shape[0] for d in agent.relay_all(uplinks)])

# %% [markdown]
# ## Signaling cost versus number of users
#
# With 32-bit elements, De2RACH grows with J(J-1) peer links while Ce2RACH
# grows linearly with 2J relay links.

# %%
model = SignalingCostModel()
rows = sweep_users(range(2, 11), model)
print(f"{'J':>3} {'eRACH':>8} {'De2RACH':>9} {'Ce2RACH':>9}")
for J_ in range(2, 11):
    cost = {v: b for j, v, b in rows if j == J_}
    print(f"{J_:>3} {cost[ERACH]:>8} {cost[DE2RACH]:>9} {cost[CE2RACH]:>9}")

# %% [markdown]
# The cost model agrees with the bits actually recorded for a slot.

# %%
for variant in (ERACH, DE2RACH, CE2RACH):
    agent = ProtocolAgent(ProtocolConfig(variant=variant), 5, OBS, ACTIONS, seed=1)
    act = agent.joint_act(rng.uniform(-1, 1, size=(5, OBS)), rng)
    print(variant, traffic_bits(act.traffic, model), signaling_cost(variant, 5, model))
