"""Monte-Carlo stand-in for one quantum key-generation link.

Weak coherent pulses at two intensities cross a lossy channel to a
two-detector receiver.  The per-pulse click and error probabilities are
closed-form in the channel parameters; the simulator samples them pulse
by pulse, sifts matched-basis clicks, and returns the per-intensity
detection tallies together with the correlated Z-basis bit strings that
become the raw signing keys.

Pulses are processed in fixed-size shards, each drawing from an
independent substream spawned from the master seed, so results are
byte-identical no matter how the shards are batched or distributed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .finitekey import DetectionTally, IntensityConfig

SHARD_PULSES = 1 << 20


@dataclass(frozen=True)
class ChannelModel:
    """Physical parameters of one link, receiver included."""

    loss_db: float
    detector_efficiency: float = 0.7
    dark_count_prob: float = 1e-7
    misalignment: float = 0.01
    pulse_rate_hz: float = 5e7
    receiver_loss_db: float = 0.0

    def __post_init__(self):
        if self.loss_db < 0 or self.receiver_loss_db < 0:
            raise ValueError("losses must be nonnegative")
        for name in ("detector_efficiency", "dark_count_prob", "misalignment"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.pulse_rate_hz <= 0:
            raise ValueError("pulse_rate_hz must be positive")

    @property
    def eta(self) -> float:
        """End-to-end transmittance including detector efficiency."""
        total_db = self.loss_db + self.receiver_loss_db
        return self.detector_efficiency * 10.0 ** (-total_db / 10.0)


def click_probability(intensity: float, model: ChannelModel) -> float:
    """Probability that a pulse of the given mean photon number clicks.

    The factor 2 on the dark term models the two detectors of the
    measured basis.
    """
    if intensity < 0:
        raise ValueError("intensity must be nonnegative")
    return 1.0 - (1.0 - 2.0 * model.dark_count_prob) * math.exp(
        -intensity * model.eta)


def error_probability(intensity: float, model: ChannelModel) -> float:
    """Probability that a click carries the wrong bit.

    Dark-driven clicks are random (error rate 1/2); photon-driven clicks
    err at the misalignment rate.  A zero click probability degenerates
    to pure noise, 1/2.
    """
    p_click = click_probability(intensity, model)
    if p_click <= 0:
        return 0.5
    p_signal = 1.0 - math.exp(-intensity * model.eta)
    p_dark_part = p_click - p_signal
    e = (0.5 * p_dark_part + model.misalignment * p_signal) / p_click
    return min(max(e, 0.0), 0.5)


@dataclass(frozen=True)
class SiftedBatch:
    """One link's sifted output: tallies plus the correlated Z strings.

    alice_bits is the measurement-side string (to be corrected),
    sender_bits the preparation-side authoritative string; both are
    uint8 0/1 arrays of length tally.n_z_total in chronological order.
    """

    tally: DetectionTally
    alice_bits: np.ndarray
    sender_bits: np.ndarray
    rng_seed: int

    def __post_init__(self):
        if len(self.alice_bits) != self.tally.n_z_total:
            raise ValueError("alice_bits length must equal n_z_total")
        if len(self.sender_bits) != self.tally.n_z_total:
            raise ValueError("sender_bits length must equal n_z_total")


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(shard,)))


def simulate_kgp(n_pulses: int, cfg: IntensityConfig, model: ChannelModel,
                 seed: int) -> SiftedBatch:
    """Simulate one sender-to-Alice key generation session.

    Per pulse: intensity choice, sender basis, receiver basis (passive,
    same priors), click, and conditional bit error are sampled in a fixed
    order from the shard's substream.  Only matched-basis clicks survive
    sifting; Z-basis survivors contribute key bits, X-basis survivors
    only tallies.  Deterministic for a fixed (seed, cfg, model).
    """
    if n_pulses < 0:
        raise ValueError("n_pulses must be nonnegative")
    p_click = {
        "mu": click_probability(cfg.mu, model),
        "nu": click_probability(cfg.nu, model),
    }
    p_err = {
        "mu": error_probability(cfg.mu, model),
        "nu": error_probability(cfg.nu, model),
    }

    counts = {k: 0 for k in ("n_z_mu", "n_z_nu", "m_z_mu", "m_z_nu",
                             "n_x_mu", "n_x_nu", "m_x_mu", "m_x_nu")}
    sender_chunks: list[np.ndarray] = []
    alice_chunks: list[np.ndarray] = []

    n_shards = (n_pulses + SHARD_PULSES - 1) // SHARD_PULSES
    for shard in range(n_shards):
        n = min(SHARD_PULSES, n_pulses - shard * SHARD_PULSES)
        rng = _shard_rng(seed, shard)
        # fixed draw order is part of the determinism contract
        is_mu = rng.random(n) < cfg.p_mu
        sender_z = rng.random(n) < cfg.p_z
        receiver_z = rng.random(n) < cfg.p_z
        sender_bit = rng.integers(0, 2, size=n, dtype=np.uint8)
        u_click = rng.random(n)
        u_err = rng.random(n)

        clicked = np.where(is_mu, u_click < p_click["mu"], u_click < p_click["nu"])
        erred = np.where(is_mu, u_err < p_err["mu"], u_err < p_err["nu"])
        matched = sender_z == receiver_z

        kept_z = clicked & matched & sender_z
        kept_x = clicked & matched & ~sender_z

        for inten, sel in (("mu", is_mu), ("nu", ~is_mu)):
            counts[f"n_z_{inten}"] += int(np.count_nonzero(kept_z & sel))
            counts[f"m_z_{inten}"] += int(np.count_nonzero(kept_z & sel & erred))
            counts[f"n_x_{inten}"] += int(np.count_nonzero(kept_x & sel))
            counts[f"m_x_{inten}"] += int(np.count_nonzero(kept_x & sel & erred))

        sender_chunks.append(sender_bit[kept_z])
        alice_chunks.append(sender_bit[kept_z] ^ erred[kept_z])

    sender_bits = (np.concatenate(sender_chunks) if sender_chunks
                   else np.zeros(0, dtype=np.uint8))
    alice_bits = (np.concatenate(alice_chunks) if alice_chunks
                  else np.zeros(0, dtype=np.uint8))
    tally = DetectionTally(
        n_z_total=counts["n_z_mu"] + counts["n_z_nu"],
        accumulation_time_s=n_pulses / model.pulse_rate_hz,
        **counts,
    )
    # exact bookkeeping: tally errors are the Hamming distance by construction
    assert int(np.count_nonzero(sender_bits != alice_bits)) == \
        counts["m_z_mu"] + counts["m_z_nu"]
    return SiftedBatch(tally=tally, alice_bits=alice_bits,
                       sender_bits=sender_bits, rng_seed=seed)


def expected_rates(cfg: IntensityConfig, model: ChannelModel) -> dict[str, float]:
    """Per-pulse expected rates for each tally field (exact, unrounded)."""
    out: dict[str, float] = {}
    for inten, p_i in (("mu", cfg.p_mu), ("nu", cfg.p_nu)):
        i_val = cfg.mu if inten == "mu" else cfg.nu
        pc = click_probability(i_val, model)
        pe = error_probability(i_val, model)
        for basis, p_b in (("z", cfg.p_z), ("x", cfg.p_x)):
            keep = p_i * p_b * p_b * pc
            out[f"n_{basis}_{inten}"] = keep
            out[f"m_{basis}_{inten}"] = keep * pe
    return out


def expected_tally(n_pulses: int, cfg: IntensityConfig,
                   model: ChannelModel) -> DetectionTally:
    """Expectation of simulate_kgp's tally, rounded to integer counts."""
    if n_pulses < 0:
        raise ValueError("n_pulses must be nonnegative")
    rates = expected_rates(cfg, model)
    counts = {k: round(n_pulses * v) for k, v in rates.items()}
    return DetectionTally(
        n_z_total=counts["n_z_mu"] + counts["n_z_nu"],
        accumulation_time_s=n_pulses / model.pulse_rate_hz,
        **counts,
    )
