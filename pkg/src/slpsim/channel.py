"""Rayleigh block-fading channel generation, receiver noise, seeded substreams."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class ChannelRealization:
    """Flat-fading channel matrix, constant over one transmission block.

    Row k of ``H`` is the (transposed) channel vector of user k.
    """

    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2:
            raise ConfigurationError("channel matrix must be 2-D (users x antennas)")
        if H.shape[0] > H.shape[1]:
            raise ConfigurationError(
                f"need K <= N_T for symbol-level precoding, got K={H.shape[0]}, N_T={H.shape[1]}"
            )
        if not np.all(np.isfinite(H)):
            raise ConfigurationError("channel matrix has non-finite entries")
        object.__setattr__(self, "H", H)

    @property
    def n_users(self) -> int:
        return self.H.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True)
class NoiseModel:
    """Complex receiver noise, CN(0, sigma2) per sample."""

    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ConfigurationError(f"noise variance must be >= 0, got {self.sigma2}")


def generate_channel(n_users: int, n_antennas: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw an i.i.d. CN(0, 1) flat-fading channel, deterministic under the rng seed."""
    if n_users < 1:
        raise ConfigurationError(f"need at least one user, got {n_users}")
    if n_users > n_antennas:
        raise ConfigurationError(
            f"need K <= N_T for symbol-level precoding, got K={n_users}, N_T={n_antennas}"
        )
    H = (
        rng.standard_normal((n_users, n_antennas))
        + 1j * rng.standard_normal((n_users, n_antennas))
    ) / np.sqrt(2.0)
    return ChannelRealization(H)


def sample_noise(model: NoiseModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. CN(0, sigma2) samples (real/imag variance sigma2/2 each)."""
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if model.sigma2 == 0.0:
        return np.zeros(count, dtype=complex)
    scale = np.sqrt(model.sigma2 / 2.0)
    return scale * (rng.standard_normal(count) + 1j * rng.standard_normal(count))


def sigma2_from_snr(snr_db: float, block_len: int, total_power: float = 1.0) -> float:
    """Noise variance from the per-symbol transmit SNR rho = P_T / (M * sigma2).

    With the default block power budget P_T = 1 this is 1 / (M * 10^(snr/10)).
    ``snr_db = inf`` yields exactly zero noise.
    """
    if block_len < 1:
        raise ConfigurationError(f"block length must be >= 1, got {block_len}")
    return total_power / (block_len * 10.0 ** (snr_db / 10.0))


def trial_rng(seed: int, *subkey: int) -> np.random.Generator:
    """Independent, order-insensitive random substream for one Monte Carlo trial.

    The (seed, subkey) pair fully determines the stream, so trials can be run
    serially or fanned out to workers with identical results.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(subkey)))
