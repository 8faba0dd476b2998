"""Ring-lane constellation geometry and SINR link rates.

Satellites move along a closed lane of length ``lane_length`` (a ring) at a
constant speed; ground users sit on the lane's ground projection. Distances
combine the altitude with the shortest wrapped lateral offset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConstellationConfig:
    """Geometry of a single orbital lane."""
    num_satellites: int
    lane_length: float = 2000.0
    altitude: float = 500.0
    orbit_velocity: float = 7.5
    slot_duration: float = 10.0 / 7.5
    initial_offsets: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.num_satellites < 1:
            raise ValueError("num_satellites must be >= 1")
        for name in ("lane_length", "altitude", "orbit_velocity", "slot_duration"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.initial_offsets:
            spacing = self.lane_length / self.num_satellites
            offsets = tuple(k * spacing for k in range(self.num_satellites))
            object.__setattr__(self, "initial_offsets", offsets)
        else:
            object.__setattr__(self, "initial_offsets",
                               tuple(float(x) for x in self.initial_offsets))
        if len(self.initial_offsets) != self.num_satellites:
            raise ValueError("need one initial offset per satellite")
        if any(not 0.0 <= x < self.lane_length for x in self.initial_offsets):
            raise ValueError("initial offsets must lie in [0, lane_length)")
        if len(set(self.initial_offsets)) != self.num_satellites:
            raise ValueError("initial offsets must be pairwise distinct")

    @property
    def step_length(self) -> float:
        """Along-lane distance a satellite covers in one slot (km)."""
        return self.orbit_velocity * self.slot_duration

    @property
    def revolution_slots(self) -> int:
        """Slots per full revolution, rounded to the nearest integer."""
        return max(1, int(round(self.lane_length / self.step_length)))


@dataclass(frozen=True)
class GroundUser:
    user_id: int
    ground_position: float


@dataclass(frozen=True)
class LinkBudget:
    """Radio parameters.

    Only the ratio noise power / transmit power is kept, expressed at the
    same distance scale (km) as the path-loss terms.
    """
    bandwidth: float = 20e6
    num_pilots: int = 2
    pathloss_exponent: float = 2.0
    noise_over_power: float = 4e-8

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.num_pilots < 1:
            raise ValueError("num_pilots must be >= 1")
        if self.pathloss_exponent < 2:
            raise ValueError("pathloss_exponent must be >= 2")
        if self.noise_over_power < 0:
            raise ValueError("noise_over_power must be non-negative")


def validate_users(users: Sequence[GroundUser], config: ConstellationConfig) -> None:
    for u in users:
        if not 0.0 <= u.ground_position < config.lane_length:
            raise ValueError(f"user {u.user_id} position outside [0, lane_length)")


def satellite_positions(config: ConstellationConfig, slot: int) -> np.ndarray:
    """Along-lane satellite positions (km) at ``slot``."""
    if slot < 0:
        raise ValueError("slot index must be non-negative")
    offsets = np.asarray(config.initial_offsets, dtype=float)
    return np.mod(offsets + config.step_length * slot, config.lane_length)


def wrapped_offset(x_from, x_to, lane_length: float):
    """Signed shortest displacement from ``x_from`` to ``x_to`` on the ring.

    Result lies in [-lane_length/2, lane_length/2).
    """
    half = 0.5 * lane_length
    return np.mod(np.asarray(x_to) - np.asarray(x_from) + half, lane_length) - half


def user_satellite_distance(user: GroundUser | float, sat_position,
                            config: ConstellationConfig):
    """Slant distance: sqrt(altitude**2 + wrapped lateral offset**2).

    ``sat_position`` may be a scalar or an array of positions.
    """
    x_user = user.ground_position if isinstance(user, GroundUser) else user
    delta = np.abs(np.asarray(sat_position, dtype=float) - x_user)
    delta = np.minimum(delta, config.lane_length - delta)
    d = np.sqrt(config.altitude ** 2 + delta ** 2)
    return float(d) if d.ndim == 0 else d


def distance_matrix(users: Sequence[GroundUser], config: ConstellationConfig,
                    slot: int) -> np.ndarray:
    """(J, K) user-to-satellite distances at ``slot``."""
    xs = np.array([u.ground_position for u in users], dtype=float)
    return position_distances(xs, config, slot)


def position_distances(xs: np.ndarray, config: ConstellationConfig, slot: int) -> np.ndarray:
    """``distance_matrix`` for user positions given as a float array."""
    sats = satellite_positions(config, slot)
    delta = np.abs(sats[None, :] - xs[:, None])
    delta = np.minimum(delta, config.lane_length - delta)
    return np.sqrt(config.altitude ** 2 + delta ** 2)


def link_rate(d_serving: float, interferer_distances: Sequence[float],
              budget: LinkBudget) -> float:
    """Downlink rate (bit/s) of a user served at distance ``d_serving``.

    R = (W / P) * log2(1 + d^-a / (sum_i d_i^-a + noise/power))
    """
    if not d_serving > 0:
        raise ValueError(f"serving distance must be positive, got {d_serving}")
    alpha = budget.pathloss_exponent
    interference = 0.0
    for d in interferer_distances:
        if not d > 0:
            raise ValueError(f"interferer distance must be positive, got {d}")
        interference += d ** -alpha
    denom = interference + budget.noise_over_power
    if denom == 0.0:
        raise ValueError("SINR is unbounded with zero noise and no interference")
    sinr = d_serving ** -alpha / denom
    return budget.bandwidth / budget.num_pilots * math.log2(1.0 + sinr)


def max_link_rate(config: ConstellationConfig, budget: LinkBudget) -> float:
    """Interference-free rate directly overhead; the reward normalizer's top end."""
    return link_rate(config.altitude, (), budget)
