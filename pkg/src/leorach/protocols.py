"""Actor architectures for the three learned access protocols.

eRACH
    logits_j = upper_j(lower_j(s_j)); no signaling.
De2RACH
    lower_j(s_j) = (z_j, m_j->k for every k != j); user j's upper segment
    reads z_j and the J-1 messages addressed to it, ordered by sender index.
Ce2RACH
    lower_j(s_j) = (z_j, raw uplink); the user-side encoder compresses the
    uplink, a relay shared by all users mixes all uplink codes and emits one
    compressed downlink per user, which the user decodes before its upper
    segment. With ``recon_weight`` > 0 an auxiliary decoder also learns to
    reconstruct the raw uplink from its code.

``forward_batch`` / ``backward_batch`` run the full wiring on a batch of
slots so gradients flow through every message boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .neural import (
    AutoencoderParams,
    DenseNetworkParams,
    backward,
    forward,
    forward_stacked,
    init_params,
    log_softmax,
    softmax_sample_rows,
    stack_params,
)

ERACH = "eRACH"
DE2RACH = "De2RACH"
CE2RACH = "Ce2RACH"
VARIANTS = (ERACH, DE2RACH, CE2RACH)

RELAY = -1  # endpoint id of the central relay in traffic records


@dataclass(frozen=True)
class ProtocolConfig:
    variant: str = ERACH
    latent_dim: int = 16
    lower_hidden: tuple[int, ...] = (64, 64)
    upper_hidden: tuple[int, ...] = (64,)
    relay_hidden: tuple[int, ...] = (64,)
    ae_hidden: int = 16
    peer_msg_dim: int = 4
    uplink_raw_dim: int = 8
    uplink_code_dim: int = 4
    downlink_dim: int = 4
    downlink_decoded_dim: int = 8
    relay_mixing: bool = True
    share_params: bool = False
    recon_weight: float = 0.0  # > 0 adds the uplink reconstruction loss
    policy_init_scale: float = 0.1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        widths = (self.latent_dim, self.peer_msg_dim, self.uplink_raw_dim,
                  self.uplink_code_dim, self.downlink_dim, self.downlink_decoded_dim,
                  self.ae_hidden)
        if any(w < 1 for w in widths):
            raise ValueError("all widths must be positive")
        if not self.uplink_code_dim < self.uplink_raw_dim:
            raise ValueError("uplink code must be narrower than the raw uplink")
        object.__setattr__(self, "lower_hidden", tuple(self.lower_hidden))
        object.__setattr__(self, "upper_hidden", tuple(self.upper_hidden))
        object.__setattr__(self, "relay_hidden", tuple(self.relay_hidden))


@dataclass(frozen=True)
class SignalingMessage:
    values: np.ndarray
    direction: str  # "peer" | "uplink" | "downlink"
    sender: int
    recipient: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("message values must be finite")

    @property
    def dim(self) -> int:
        return int(np.size(self.values))


@dataclass(frozen=True)
class TrafficEntry:
    """One transmitted message: who sent what width to whom."""
    direction: str
    sender: int
    recipient: int
    width: int


@dataclass
class JointAction:
    targets: np.ndarray
    log_probs: np.ndarray
    entropies: np.ndarray
    traffic: list[TrafficEntry]
    logits: np.ndarray


def _recipient_slot(sender: int, recipient: int) -> int:
    """Position of ``recipient`` among the sender's J-1 outgoing messages."""
    return recipient if recipient < sender else recipient - 1


class ProtocolAgent:
    """Per-user actor segments for one protocol variant."""

    def __init__(self, config: ProtocolConfig, num_users: int, obs_dim: int,
                 num_actions: int, seed=None):
        if num_users < 1 or obs_dim < 1 or num_actions < 1:
            raise ValueError("num_users, obs_dim and num_actions must be positive")
        self.config = config
        self.variant = config.variant
        self.num_users = J = num_users
        self.obs_dim = obs_dim
        self.num_actions = num_actions
        rng = np.random.default_rng(seed)
        c = config
        dz = c.latent_dim

        if self.variant == ERACH:
            lower_out, upper_in = dz, dz
        elif self.variant == DE2RACH:
            lower_out = dz + (J - 1) * c.peer_msg_dim
            upper_in = dz + (J - 1) * c.peer_msg_dim
        else:
            lower_out = dz + c.uplink_raw_dim
            upper_in = dz + c.downlink_decoded_dim

        def build(dims, scale=1.0):
            if c.share_params:
                shared = init_params(dims, rng, scale)
                return [shared] * J
            return [init_params(dims, rng, scale) for _ in range(J)]

        self.lower = build([obs_dim, *c.lower_hidden, lower_out])
        self.upper = build([upper_in, *c.upper_hidden, num_actions], c.policy_init_scale)
        self.uplink_ae: list[AutoencoderParams] = []
        self.downlink_decoder: list[DenseNetworkParams] = []
        self.relay: DenseNetworkParams | None = None
        if self.variant == CE2RACH:
            encs = build([c.uplink_raw_dim, c.ae_hidden, c.uplink_code_dim])
            decs = build([c.uplink_code_dim, c.ae_hidden, c.uplink_raw_dim])
            self.uplink_ae = [AutoencoderParams(e, d) for e, d in zip(encs, decs)]
            self.downlink_decoder = build([c.downlink_dim, c.ae_hidden,
                                           c.downlink_decoded_dim])
            self.relay = init_params([J * c.uplink_code_dim, *c.relay_hidden,
                                      J * c.downlink_dim], rng)
        # distinct per-user networks share stacked arrays: one matmul per layer
        self._stacks = {}
        if not c.share_params:
            self._stacks = {name: stack_params(group) for name, group in self._per_user_groups()}

    # -- parameter bookkeeping ------------------------------------------

    def _per_user_groups(self) -> list[tuple[str, list[DenseNetworkParams]]]:
        groups = [("lower", self.lower), ("upper", self.upper)]
        if self.variant == CE2RACH:
            groups += [("uplink_encoder", [ae.encoder for ae in self.uplink_ae]),
                       ("uplink_decoder", [ae.decoder for ae in self.uplink_ae]),
                       ("downlink_decoder", self.downlink_decoder)]
        return groups

    def segments(self) -> dict[str, DenseNetworkParams]:
        """Unique parameter sets by name (shared sets appear once)."""
        out: dict[str, DenseNetworkParams] = {}
        for name, group in self._per_user_groups():
            if self.config.share_params:
                out[name] = group[0]
            else:
                for j, p in enumerate(group):
                    out[f"{name}/{j}"] = p
        if self.relay is not None:
            out["relay"] = self.relay
        return out

    def _group_forward(self, name: str, group, xs, keep_cache: bool = True):
        """Network j of ``group`` on xs[j] for every user: (outputs, caches)."""
        if name in self._stacks:
            return forward_stacked(group, self._stacks[name], xs, keep_cache)
        pairs = [forward(p, x) for p, x in zip(group, xs)]
        return [o for o, _ in pairs], [ch for _, ch in pairs]

    def _name(self, group: str, j: int) -> str:
        return group if self.config.share_params else f"{group}/{j}"

    def load_segments(self, segments: dict[str, DenseNetworkParams]) -> None:
        current = self.segments()
        if set(current) != set(segments):
            raise ValueError("checkpoint segments do not match this agent")
        for name, params in segments.items():
            if current[name].layer_dims != params.layer_dims:
                raise ValueError(f"segment {name}: layer dims differ")
            for dst, src in zip(current[name].arrays(), params.arrays()):
                dst[...] = src

    # -- per-operation API ----------------------------------------------

    def _check_obs(self, s):
        s = np.asarray(s, dtype=float)
        if s.shape[-1] != self.obs_dim:
            raise ValueError(f"observation width {s.shape[-1]} != {self.obs_dim}")
        return s

    def erach_logits(self, j: int, s_j) -> np.ndarray:
        z = forward(self.lower[j], self._check_obs(s_j))[0]
        return forward(self.upper[j], z)[0]

    def de2rach_emit(self, j: int, s_j) -> tuple[np.ndarray, list[np.ndarray]]:
        out = forward(self.lower[j], self._check_obs(s_j))[0]
        dz, dm = self.config.latent_dim, self.config.peer_msg_dim
        expected = dz + (self.num_users - 1) * dm
        if out.shape[-1] != expected:
            raise ValueError(f"lower output width {out.shape[-1]} != {expected}")
        msgs = [out[..., dz + i * dm: dz + (i + 1) * dm]
                for i in range(self.num_users - 1)]
        return out[..., :dz], msgs

    def de2rach_logits(self, j: int, z_j, incoming: Sequence) -> np.ndarray:
        """``incoming`` holds the J-1 messages m_k->j in ascending sender order."""
        if len(incoming) != self.num_users - 1:
            raise ValueError(f"expected {self.num_users - 1} incoming messages")
        if any(np.shape(m)[-1] != self.config.peer_msg_dim for m in incoming):
            raise ValueError("incoming message width mismatch")
        x = np.concatenate([np.asarray(z_j, dtype=float), *incoming], axis=-1)
        return forward(self.upper[j], x)[0]

    def ce2rach_uplink(self, j: int, s_j) -> tuple[np.ndarray, np.ndarray]:
        out = forward(self.lower[j], self._check_obs(s_j))[0]
        dz = self.config.latent_dim
        code = forward(self.uplink_ae[j].encoder, out[..., dz:])[0]
        return out[..., :dz], code

    def relay_downlink(self, uplinks: Sequence, j: int) -> np.ndarray:
        """Transmitted (compressed) downlink for user ``j`` from all J uplinks."""
        return self.relay_all(uplinks)[j]

    def relay_all(self, uplinks: Sequence) -> list[np.ndarray]:
        c = self.config
        if len(uplinks) != self.num_users:
            raise ValueError(f"relay needs {self.num_users} uplinks, got {len(uplinks)}")
        if any(np.shape(u)[-1] != c.uplink_code_dim for u in uplinks):
            raise ValueError("uplink width mismatch")
        x = np.concatenate([np.asarray(u, dtype=float) for u in uplinks], axis=-1)
        D = c.downlink_dim
        if c.relay_mixing:
            y = forward(self.relay, x)[0]
            return [y[..., j * D:(j + 1) * D] for j in range(self.num_users)]
        out = []
        for j in range(self.num_users):
            masked = np.zeros_like(x)
            sl = slice(j * c.uplink_code_dim, (j + 1) * c.uplink_code_dim)
            masked[..., sl] = x[..., sl]
            out.append(forward(self.relay, masked)[0][..., j * D:(j + 1) * D])
        return out

    def ce2rach_logits(self, j: int, z_j, downlink) -> np.ndarray:
        if np.shape(downlink)[-1] != self.config.downlink_dim:
            raise ValueError("downlink width mismatch")
        decoded = forward(self.downlink_decoder[j], downlink)[0]
        x = np.concatenate([np.asarray(z_j, dtype=float), decoded], axis=-1)
        return forward(self.upper[j], x)[0]

    # -- traffic --------------------------------------------------------

    def slot_traffic(self) -> list[TrafficEntry]:
        J, c = self.num_users, self.config
        if self.variant == DE2RACH:
            return [TrafficEntry("peer", j, k, c.peer_msg_dim)
                    for j in range(J) for k in range(J) if k != j]
        if self.variant == CE2RACH:
            return ([TrafficEntry("uplink", j, RELAY, c.uplink_code_dim) for j in range(J)]
                    + [TrafficEntry("downlink", RELAY, j, c.downlink_dim) for j in range(J)])
        return []

    def messages(self, observations) -> list[SignalingMessage]:
        """Every message transmitted in one slot, with values."""
        obs = self._check_obs(observations)
        J = self.num_users
        if self.variant == DE2RACH:
            out = []
            for j in range(J):
                _, msgs = self.de2rach_emit(j, obs[j])
                for k in range(J):
                    if k != j:
                        out.append(SignalingMessage(msgs[_recipient_slot(j, k)], "peer", j, k))
            return out
        if self.variant == CE2RACH:
            ups = [self.ce2rach_uplink(j, obs[j])[1] for j in range(J)]
            downs = self.relay_all(ups)
            return ([SignalingMessage(u, "uplink", j, RELAY) for j, u in enumerate(ups)]
                    + [SignalingMessage(d, "downlink", RELAY, j) for j, d in enumerate(downs)])
        return []

    # -- batched wiring -------------------------------------------------

    def forward_batch(self, obs, keep_cache: bool = True) -> tuple[np.ndarray, dict]:
        """Logits (N, J, A) for observations (N, J, obs_dim).

        ``keep_cache=False`` skips the per-user backward caches when only acting.
        """
        keep = keep_cache
        obs = self._check_obs(obs)
        if obs.ndim != 3 or obs.shape[1] != self.num_users:
            raise ValueError(f"expected (N, {self.num_users}, {self.obs_dim}) observations")
        J, c = self.num_users, self.config
        dz = c.latent_dim
        lower_out, lower_cache = self._group_forward("lower", self.lower, obs.transpose(1, 0, 2), keep)
        cache: dict = {"lower": lower_cache, "n": obs.shape[0]}

        if self.variant == ERACH:
            upper_in = lower_out
        elif self.variant == DE2RACH:
            dm = c.peer_msg_dim
            upper_in = []
            for j in range(J):
                parts = [lower_out[j][:, :dz]]
                for k in range(J):
                    if k != j:
                        s = dz + _recipient_slot(k, j) * dm
                        parts.append(lower_out[k][:, s:s + dm])
                upper_in.append(np.concatenate(parts, axis=1))
        else:
            groups = dict(self._per_user_groups())
            codes, enc_cache = self._group_forward(
                "uplink_encoder", groups["uplink_encoder"], np.asarray([o[:, dz:] for o in lower_out]),
                keep)
            rec, rec_cache = self._group_forward("uplink_decoder", groups["uplink_decoder"],
                                                 np.asarray(codes), keep)
            x = np.concatenate(codes, axis=1)
            D, Dc = c.downlink_dim, c.uplink_code_dim
            if c.relay_mixing:
                y, relay_cache = forward(self.relay, x)
                downs = [y[:, j * D:(j + 1) * D] for j in range(J)]
            else:
                n = x.shape[0]
                masked = np.zeros((J, n, x.shape[1]))
                for j in range(J):
                    masked[j, :, j * Dc:(j + 1) * Dc] = x[:, j * Dc:(j + 1) * Dc]
                y, relay_cache = forward(self.relay, masked.reshape(J * n, -1))
                y = y.reshape(J, n, -1)
                downs = [y[j, :, j * D:(j + 1) * D] for j in range(J)]
            dec, dec_cache = self._group_forward("downlink_decoder", self.downlink_decoder,
                                                 np.asarray(downs), keep)
            upper_in = [np.concatenate([lower_out[j][:, :dz], dec[j]], axis=1)
                        for j in range(J)]
            raw = [lower_out[j][:, dz:] for j in range(J)]
            cache.update(enc=enc_cache, rec=rec, rec_cache=rec_cache, raw=raw,
                         relay=relay_cache, dec=dec_cache, codes=codes, downs=downs)

        logits, upper_cache = self._group_forward("upper", self.upper, np.asarray(upper_in), keep)
        cache["upper"] = upper_cache
        return np.stack(logits, axis=1), cache

    def reconstruction_loss(self, cache: dict) -> float:
        """Weighted uplink autoencoder loss (zero for variants without one)."""
        if self.variant != CE2RACH:
            return 0.0
        w = self.config.recon_weight / self.config.uplink_raw_dim
        return float(w * sum(np.sum((r - x) ** 2) for r, x in zip(cache["rec"], cache["raw"])))

    def backward_batch(self, cache: dict, dlogits: np.ndarray,
                       include_reconstruction: bool = True) -> dict[str, DenseNetworkParams]:
        """Gradients of sum(dlogits * logits) [+ reconstruction loss] by segment name."""
        J, c = self.num_users, self.config
        dz = c.latent_dim
        grads: dict[str, DenseNetworkParams] = {}

        def acc(name, g):
            if name in grads:
                grads[name].add_(g)
            else:
                grads[name] = g

        d_upper_in = []
        for j in range(J):
            g, dx = backward(self.upper[j], cache["upper"][j], dlogits[:, j, :])
            acc(self._name("upper", j), g)
            d_upper_in.append(dx)

        n = cache["n"]
        if self.variant == ERACH:
            d_lower = d_upper_in
        elif self.variant == DE2RACH:
            dm = c.peer_msg_dim
            width = dz + (J - 1) * dm
            d_lower = [np.zeros((n, width)) for _ in range(J)]
            for j in range(J):
                d_lower[j][:, :dz] += d_upper_in[j][:, :dz]
                pos = dz
                for k in range(J):
                    if k != j:
                        s = dz + _recipient_slot(k, j) * dm
                        d_lower[k][:, s:s + dm] += d_upper_in[j][:, pos:pos + dm]
                        pos += dm
        else:
            D, Dc = c.downlink_dim, c.uplink_code_dim
            d_downs = []
            for j in range(J):
                g, dx = backward(self.downlink_decoder[j], cache["dec"][j],
                                 d_upper_in[j][:, dz:])
                acc(self._name("downlink_decoder", j), g)
                d_downs.append(dx)
            if c.relay_mixing:
                g, dx = backward(self.relay, cache["relay"], np.concatenate(d_downs, axis=1))
            else:
                dy = np.zeros((J, n, J * D))
                for j in range(J):
                    dy[j, :, j * D:(j + 1) * D] = d_downs[j]
                g, dmasked = backward(self.relay, cache["relay"], dy.reshape(J * n, -1))
                dmasked = dmasked.reshape(J, n, -1)
                dx = np.zeros((n, J * Dc))
                for j in range(J):
                    dx[:, j * Dc:(j + 1) * Dc] = dmasked[j, :, j * Dc:(j + 1) * Dc]
            acc("relay", g)
            d_lower = []
            w = c.recon_weight / c.uplink_raw_dim
            for j in range(J):
                d_code = dx[:, j * Dc:(j + 1) * Dc]
                d_raw = np.zeros_like(cache["raw"][j])
                if include_reconstruction and c.recon_weight:
                    diff = 2.0 * w * (cache["rec"][j] - cache["raw"][j])
                    g, dcr = backward(self.uplink_ae[j].decoder, cache["rec_cache"][j], diff)
                    acc(self._name("uplink_decoder", j), g)
                    d_code = d_code + dcr
                    d_raw -= diff
                else:
                    acc(self._name("uplink_decoder", j), self.uplink_ae[j].decoder.zeros_like())
                g, dr = backward(self.uplink_ae[j].encoder, cache["enc"][j], d_code)
                acc(self._name("uplink_encoder", j), g)
                d_lower.append(np.concatenate([d_upper_in[j][:, :dz], d_raw + dr], axis=1))

        for j in range(J):
            g, _ = backward(self.lower[j], cache["lower"][j], d_lower[j])
            acc(self._name("lower", j), g)
        return grads

    # -- acting ---------------------------------------------------------

    def joint_act(self, observations, rng: np.random.Generator,
                  greedy: bool = False) -> JointAction:
        """One slot of the variant's pipeline for all J users."""
        obs = self._check_obs(observations)
        if obs.shape != (self.num_users, self.obs_dim):
            raise ValueError(f"expected ({self.num_users}, {self.obs_dim}) observations")
        logits = self.forward_batch(obs[None], keep_cache=False)[0][0]
        if greedy:
            targets = np.argmax(logits, axis=1)
            logp = log_softmax(logits)
            rows = np.arange(self.num_users)
            logps = logp[rows, targets]
            ents = -np.sum(np.exp(logp) * logp, axis=1)
        else:
            targets, logps, ents = softmax_sample_rows(logits, rng)
        return JointAction(targets, logps, ents, self.slot_traffic(), logits)
