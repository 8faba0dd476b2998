"""Slotted random-access environment for the downlink LEO lane.

Per slot every user picks a target in {0, ..., K} (0 = back off). Users that
transmit draw a pilot uniformly from {1, ..., P}. Two users on the same
satellite with the same pilot collide. A successful user is interfered by
every other satellite that serves a successful user on the same pilot.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .orbit_channel import (
    ConstellationConfig,
    GroundUser,
    LinkBudget,
    link_rate,
    max_link_rate,
    position_distances,
    satellite_positions,
    validate_users,
    wrapped_offset,
)

BACKOFF_PILOT = 0


@dataclass(frozen=True)
class AccessAction:
    target: int
    pilot: int = BACKOFF_PILOT


@dataclass(frozen=True)
class SlotOutcome:
    """Result of one slot, one entry per user."""
    slot: int
    targets: tuple[int, ...]
    pilots: tuple[int, ...]
    collisions: tuple[int, ...]
    interferers: tuple[frozenset, ...]
    rates: tuple[float, ...]
    rewards: tuple[float, ...]

    @property
    def num_users(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class RewardNormalizer:
    """Fixed affine map of [x_min, x_max] onto [-1, 1], clipped outside."""
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.x_max + self.x_min)

    def __call__(self, x: float) -> float:
        if x <= self.x_min:
            return -1.0
        if x >= self.x_max:
            return 1.0
        return (x - self.midpoint) / (0.5 * (self.x_max - self.x_min))


@dataclass(frozen=True)
class EnvConfig:
    constellation: ConstellationConfig
    budget: LinkBudget
    users: tuple[GroundUser, ...]
    rho: float | None = None  # None -> half the overhead rate
    slots_per_episode: int = 50
    rng_seed: int = 0
    interference: bool = True
    # "fixed": users stay at their configured positions; "uniform": every
    # reset redraws all positions uniformly on the lane
    user_layout: str = "fixed"

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if self.user_layout not in ("fixed", "uniform"):
            raise ValueError(f"unknown user_layout {self.user_layout!r}")
        if not self.users:
            raise ValueError("need at least one ground user")
        if self.slots_per_episode < 1:
            raise ValueError("slots_per_episode must be >= 1")
        if self.rho is not None and self.rho < 0:
            raise ValueError("rho must be non-negative")
        validate_users(self.users, self.constellation)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_satellites(self) -> int:
        return self.constellation.num_satellites

    @property
    def r_max(self) -> float:
        return max_link_rate(self.constellation, self.budget)

    @property
    def rho_value(self) -> float:
        return 0.5 * self.r_max if self.rho is None else float(self.rho)

    def normalizer(self) -> RewardNormalizer:
        return RewardNormalizer(-self.rho_value, self.r_max)


def sample_pilots(targets: Sequence[int], num_pilots: int,
                  rng: np.random.Generator) -> list[int]:
    """Uniform pilot per transmitting user; backoff users get the sentinel.

    Draws are taken in user-index order and only for transmitting users.
    """
    if num_pilots < 1:
        raise ValueError("num_pilots must be >= 1")
    active = [j for j, a in enumerate(targets) if a != 0]
    pilots = [BACKOFF_PILOT] * len(targets)
    if active:
        draws = rng.integers(1, num_pilots + 1, size=len(active))
        for j, p in zip(active, draws):
            pilots[j] = int(p)
    return pilots


def detect_collisions(targets: Sequence[int], pilots: Sequence[int]) -> list[int]:
    counts: dict[tuple[int, int], int] = {}
    for a, p in zip(targets, pilots):
        if a != 0:
            counts[(a, p)] = counts.get((a, p), 0) + 1
    return [int(a != 0 and counts[(a, p)] > 1) for a, p in zip(targets, pilots)]


def interferer_sets(targets: Sequence[int], pilots: Sequence[int],
                    collisions: Sequence[int]) -> list[frozenset]:
    """Satellites interfering with each successful user.

    A collided user's satellite does not transmit to it, so collided users
    contribute no interference.
    """
    # pilot -> satellites that actually transmit on it
    serving: dict[int, set[int]] = {}
    for a, p, c in zip(targets, pilots, collisions):
        if a != 0 and not c:
            serving.setdefault(p, set()).add(a)
    out = []
    for a, p, c in zip(targets, pilots, collisions):
        if a == 0 or c:
            out.append(frozenset())
        else:
            out.append(frozenset(serving[p] - {a}))
    return out


def reward(rate: float, collided: int, rho: float, g: RewardNormalizer) -> float:
    if rate < 0:
        raise ValueError("rate must be non-negative")
    return g(rate - rho * collided)


def observation_dim(num_satellites: int) -> int:
    # offsets, link quality, previous-action one-hot, collision, reward, phase
    return 2 * num_satellites + (num_satellites + 1) + 3


class LeoRachEnv:
    """Mutable single-episode environment; one instance per worker."""

    def __init__(self, config: EnvConfig):
        self.config = config
        self.rng = np.random.default_rng(config.rng_seed)  # pilots
        # episode geometry (layout, orbital phase) on its own stream, so two
        # policies evaluated with one seed face identical episodes
        self.geometry_rng = np.random.default_rng(
            np.random.SeedSequence(config.rng_seed, spawn_key=(1,)))
        self.g = config.normalizer()
        self.rho = config.rho_value
        self.users = config.users
        self._positions = np.array([u.ground_position for u in config.users])
        cc, budget = config.constellation, config.budget
        self._quality_scale = np.log2(1.0 + cc.altitude ** -budget.pathloss_exponent
                                      / budget.noise_over_power)
        self.start_slot = 0
        self.slot = 0
        self.t = 0
        self._reset_memory()

    @property
    def num_users(self) -> int:
        return self.config.num_users

    @property
    def num_satellites(self) -> int:
        return self.config.num_satellites

    @property
    def obs_dim(self) -> int:
        return observation_dim(self.num_satellites)

    @property
    def done(self) -> bool:
        return self.t >= self.config.slots_per_episode

    def _reset_memory(self):
        J = self.num_users
        self.prev_targets = np.zeros(J, dtype=int)
        self.prev_collisions = np.zeros(J)
        self.prev_rewards = np.zeros(J)

    def reset(self, start_slot: int | None = None) -> np.ndarray:
        """Start an episode. A random orbital phase is drawn when not given."""
        cc = self.config.constellation
        if self.config.user_layout == "uniform":
            xs = self.geometry_rng.uniform(0.0, cc.lane_length, size=self.num_users)
            self.users = tuple(GroundUser(u.user_id, float(x) % cc.lane_length)
                               for u, x in zip(self.config.users, xs))
            self._positions = np.array([u.ground_position for u in self.users])
        if start_slot is None:
            start_slot = int(self.geometry_rng.integers(0, cc.revolution_slots))
        if start_slot < 0:
            raise ValueError("start_slot must be non-negative")
        self.start_slot = start_slot
        self.slot = start_slot
        self.t = 0
        self._reset_memory()
        return self.observe()

    def observe(self) -> np.ndarray:
        """(J, obs_dim) observation matrix, entries in [-1, 1]."""
        cc = self.config.constellation
        K, J = self.num_satellites, self.num_users
        sats = satellite_positions(cc, self.slot)
        out = np.zeros((J, observation_dim(K)))
        offsets = out[:, :K]
        offsets[:] = wrapped_offset(self._positions[:, None], sats[None, :],
                                    cc.lane_length) / (0.5 * cc.lane_length)
        # interference-free rate per satellite, as measured from downlink pilots
        budget = self.config.budget
        dist = np.sqrt(cc.altitude ** 2 + (0.5 * cc.lane_length * offsets) ** 2)
        snr = dist ** -budget.pathloss_exponent / budget.noise_over_power
        out[:, K:2 * K] = np.log2(1.0 + snr) / self._quality_scale
        out[np.arange(J), 2 * K + self.prev_targets] = 1.0
        out[:, -3] = self.prev_collisions
        out[:, -2] = self.prev_rewards
        period = cc.revolution_slots
        out[:, -1] = (self.slot % period) / period
        return out

    def step(self, targets: Sequence[int]) -> SlotOutcome:
        J, K = self.num_users, self.num_satellites
        if len(targets) != J:
            raise ValueError(f"expected {J} targets, got {len(targets)}")
        targets = [int(a) for a in targets]
        if any(not 0 <= a <= K for a in targets):
            raise ValueError(f"targets must lie in [0, {K}]")
        if self.done:
            raise RuntimeError("episode finished; call reset()")

        budget = self.config.budget
        pilots = sample_pilots(targets, budget.num_pilots, self.rng)
        collisions = detect_collisions(targets, pilots)
        if self.config.interference:
            interferers = interferer_sets(targets, pilots, collisions)
        else:
            interferers = [frozenset()] * J
        dist = position_distances(self._positions, self.config.constellation, self.slot)
        rates = []
        for j in range(J):
            a = targets[j]
            if a == 0 or collisions[j]:
                rates.append(0.0)
            else:
                rates.append(link_rate(dist[j, a - 1],
                                       [dist[j, i - 1] for i in sorted(interferers[j])],
                                       budget))
        rewards = [reward(r, c, self.rho, self.g) for r, c in zip(rates, collisions)]

        outcome = SlotOutcome(self.slot, tuple(targets), tuple(pilots),
                              tuple(collisions), tuple(interferers),
                              tuple(rates), tuple(rewards))
        self.prev_targets = np.array(targets)
        self.prev_collisions = np.array(collisions, dtype=float)
        self.prev_rewards = np.array(rewards)
        self.slot += 1
        self.t += 1
        return outcome
