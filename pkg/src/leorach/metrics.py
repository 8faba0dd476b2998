"""Throughput, collision and signaling-cost accounting; CSV exports."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mac_env import SlotOutcome

METRICS_COLUMNS = ("run_id", "variant", "seed", "episode", "avg_throughput_bps",
                   "collision_pct", "signaling_bits_per_slot")
METRICS_CSV_VERSION = 1
SLOT_COLUMNS = ("step", "slot", "user", "target", "pilot", "collision", "rate_bps", "reward")
GRID_COLUMNS = ("step", "slot", "satellite", "pilot", "status", "users")
COST_COLUMNS = ("num_users", "variant", "signaling_bits_per_slot")

IDLE, SUCCESS, COLLISION = "idle", "success", "collision"


@dataclass(frozen=True)
class MetricsRecord:
    avg_network_throughput: float
    collision_probability: float
    signaling_bits_per_slot: float
    episode: int
    variant: str
    seed: int

    def __post_init__(self):
        if self.avg_network_throughput < 0:
            raise ValueError("throughput must be non-negative")
        if not 0.0 <= self.collision_probability <= 100.0:
            raise ValueError("collision probability must lie in [0, 100]")
        if self.signaling_bits_per_slot < 0:
            raise ValueError("signaling bits must be non-negative")


@dataclass(frozen=True)
class SignalingCostModel:
    bits_per_element: int = 32
    peer_msg_dim: int = 4
    uplink_code_dim: int = 4
    downlink_dim: int = 4

    def __post_init__(self):
        if self.bits_per_element < 1:
            raise ValueError("bits_per_element must be >= 1")

    @classmethod
    def from_protocol(cls, protocol, bits_per_element: int = 32) -> "SignalingCostModel":
        return cls(bits_per_element, protocol.peer_msg_dim, protocol.uplink_code_dim,
                   protocol.downlink_dim)


def throughput_and_collision(outcomes: Sequence[SlotOutcome]) -> tuple[float, float]:
    """(mean network throughput per slot in bit/s, collision % per access attempt).

    With no access attempts at all the collision probability is reported as 0.
    """
    if not outcomes:
        raise ValueError("need at least one slot")
    total_rate = 0.0
    attempts = collided = 0
    for o in outcomes:
        total_rate += sum(o.rates)
        attempts += sum(1 for a in o.targets if a != 0)
        collided += sum(o.collisions)
    pct = 100.0 * collided / attempts if attempts else 0.0
    return total_rate / len(outcomes), pct


def episode_throughputs(outcomes: Sequence[SlotOutcome], slots_per_episode: int) -> np.ndarray:
    """Mean network throughput of each consecutive block of ``slots_per_episode`` slots."""
    if slots_per_episode < 1 or len(outcomes) % slots_per_episode:
        raise ValueError("outcome stream is not a whole number of episodes")
    totals = np.array([sum(o.rates) for o in outcomes])
    return totals.reshape(-1, slots_per_episode).mean(axis=1)


def signaling_cost(variant: str, num_users: int, model: SignalingCostModel) -> int:
    """Signaling bits per slot for ``num_users`` users."""
    if num_users < 1:
        raise ValueError("num_users must be >= 1")
    J, B = num_users, model.bits_per_element
    if variant == "eRACH":
        return 0
    if variant == "De2RACH":
        return J * (J - 1) * model.peer_msg_dim * B
    if variant == "Ce2RACH":
        return J * (model.uplink_code_dim + model.downlink_dim) * B
    raise ValueError(f"unknown variant {variant!r}")


def traffic_bits(traffic: Iterable, model: SignalingCostModel) -> int:
    return sum(entry.width for entry in traffic) * model.bits_per_element


def utilization_grid(outcomes: Sequence[SlotOutcome], num_satellites: int,
                     num_pilots: int) -> list[tuple[int, int, int, int, str, tuple[int, ...]]]:
    """One (step, slot, satellite, pilot, status, users) row per resource per slot.

    ``step`` is the position in the stream; ``slot`` the orbital slot index.
    """
    rows = []
    for n, o in enumerate(outcomes):
        occupants: dict[tuple[int, int], list[int]] = {}
        for j, (a, p) in enumerate(zip(o.targets, o.pilots)):
            if a != 0:
                occupants.setdefault((a, p), []).append(j)
        for i in range(1, num_satellites + 1):
            for p in range(1, num_pilots + 1):
                users = tuple(occupants.get((i, p), ()))
                status = IDLE if not users else SUCCESS if len(users) == 1 else COLLISION
                rows.append((n, o.slot, i, p, status, users))
    return rows


def sweep_users(user_counts: Sequence[int], model: SignalingCostModel,
                variants: Sequence[str] = ("eRACH", "De2RACH", "Ce2RACH")
                ) -> list[tuple[int, str, int]]:
    """Cost table rows (J, variant, bits/slot); checks the closed-form growth laws."""
    if not user_counts:
        raise ValueError("need at least one user count")
    rows = [(J, v, signaling_cost(v, J, model)) for J in user_counts for v in variants]
    per_user = {"Ce2RACH": (model.uplink_code_dim + model.downlink_dim) * model.bits_per_element,
                "De2RACH": model.peer_msg_dim * model.bits_per_element}
    for J, v, bits in rows:
        if v == "eRACH":
            assert bits == 0
        elif v == "Ce2RACH":
            assert bits == J * per_user[v], "Ce2RACH cost must be linear in J"
        elif v == "De2RACH":
            assert bits == J * (J - 1) * per_user[v], "De2RACH cost must follow J(J-1)"
    return rows


# -- CSV ----------------------------------------------------------------

def _open_writer(path, header):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def write_metrics_csv(path, records: Iterable[MetricsRecord], run_id: str) -> None:
    write_metrics_stream(path, ((run_id, r) for r in records))


def write_metrics_stream(path, rows: Iterable[tuple[str, MetricsRecord]]) -> None:
    """Merged stream of (run_id, record) pairs; floats written with repr."""
    fh, w = _open_writer(path, METRICS_COLUMNS)
    with fh:
        for run_id, r in rows:
            w.writerow((run_id, r.variant, r.seed, r.episode, repr(r.avg_network_throughput),
                        repr(r.collision_probability), repr(r.signaling_bits_per_slot)))


def read_metrics_csv(path) -> list[MetricsRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRICS_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        return [MetricsRecord(float(row["avg_throughput_bps"]), float(row["collision_pct"]),
                              float(row["signaling_bits_per_slot"]), int(row["episode"]),
                              row["variant"], int(row["seed"]))
                for row in reader]


def write_slots_csv(path, outcomes: Iterable[SlotOutcome]) -> None:
    """Per-(slot, user) outcomes; floats written with repr so they round-trip."""
    fh, w = _open_writer(path, SLOT_COLUMNS)
    with fh:
        for n, o in enumerate(outcomes):
            for j in range(o.num_users):
                w.writerow((n, o.slot, j, o.targets[j], o.pilots[j], o.collisions[j],
                            repr(o.rates[j]), repr(o.rewards[j])))


def read_slots_csv(path) -> list[SlotOutcome]:
    """Rebuild outcomes (without interferer sets) from ``write_slots_csv`` output."""
    by_step: dict[int, list[dict]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            by_step.setdefault(int(row["step"]), []).append(row)
    out = []
    for n in sorted(by_step):
        rows = sorted(by_step[n], key=lambda r: int(r["user"]))
        out.append(SlotOutcome(
            int(rows[0]["slot"]),
            tuple(int(r["target"]) for r in rows),
            tuple(int(r["pilot"]) for r in rows),
            tuple(int(r["collision"]) for r in rows),
            tuple(frozenset() for _ in rows),
            tuple(float(r["rate_bps"]) for r in rows),
            tuple(float(r["reward"]) for r in rows)))
    return out


def write_grid_csv(path, rows) -> None:
    fh, w = _open_writer(path, GRID_COLUMNS)
    with fh:
        for step, slot, sat, pilot, status, users in rows:
            w.writerow((step, slot, sat, pilot, status, " ".join(map(str, users))))


def write_cost_csv(path, rows) -> None:
    fh, w = _open_writer(path, COST_COLUMNS)
    with fh:
        for row in rows:
            w.writerow(row)
