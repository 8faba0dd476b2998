# %% [markdown]
# # Ring geometry and link rates
#
# Satellites move along a ring of circumference `lane_length` at a fixed
# altitude. Ground users sit on the ring's ground projection. The distance
# to a satellite uses the shorter way around the ring.

# %%
import numpy as np

from leorach.orbit_channel import (
    ConstellationConfig,
    GroundUser,
    LinkBudget,
    distance_matrix,
    link_rate,
    max_link_rate,
    satellite_positions,
)

cc = ConstellationConfig(num_satellites=4)
print("step per slot (km):", cc.step_length)
print("slots per revolution:", cc.revolution_slots)
for n in (0, 1, 50, 200):
    print(n, satellite_positions(cc, n))

# %% [markdown]
# ## Distances over one pass
#
# A user at 250 km sees each satellite approach and recede. The closest
# approach equals the altitude.

# %%
user = GroundUser(0, 250.0)
d = np.array([distance_matrix([user], cc, n)[0] for n in range(cc.revolution_slots)])
print("min distance per satellite:", d.min(axis=0))
print("slot of closest approach:", d.argmin(axis=0))

# %% [markdown]
# ## Rates with and without interference
#
# The default budget puts 20 dB of SNR directly overhead. With path-loss
# exponent 4 the rate falls off quickly with lateral offset, and a second
# satellite on the same pilot costs a large share of the rate.

# %%
budget = LinkBudget(pathloss_exponent=4.0, noise_over_power=500.0 ** -4 / 100)
print("R_max (Mbit/s):", max_link_rate(cc, budget) / 1e6)
for offset in (0.0, 100.0, 250.0, 500.0):
    serving = float(np.hypot(cc.altitude, offset))
    clean = link_rate(serving, [], budget)
    interfered = link_rate(serving, [float(np.hypot(cc.altitude, 500.0 - offset))], budget)
    print(f"offset {offset:5.0f} km: {clean / 1e6:6.2f} Mbit/s alone, "
          f"{interfered / 1e6:6.2f} Mbit/s with the neighbour on the same pilot")

# %% [markdown]
# Doubling the bandwidth doubles the rate; doubling the pilot count halves it.

# %%
b2 = LinkBudget(bandwidth=2 * budget.bandwidth, num_pilots=budget.num_pilots,
                pathloss_exponent=4.0, noise_over_power=budget.noise_over_power)
print(link_rate(600.0, [], b2) / link_rate(600.0, [], budget))
