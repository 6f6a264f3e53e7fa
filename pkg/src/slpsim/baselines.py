"""Block-level linear precoding baselines: zero forcing and regularized ZF.

Both precoders are normalized to unit Frobenius norm, i.e. an average (not
per-symbol) transmit power of one under unit-energy i.i.d. symbols. That
makes the receiver rescaling factor constant over the block, so like any
block-level scheme they only broadcast it once per block.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import ChannelRealization
from .errors import ConfigurationError


class PrecoderKind(Enum):
    ZF = "zf"
    RZF = "rzf"


@dataclass(frozen=True)
class LinearPrecoder:
    """Block-constant precoding matrix with its noiseless receive gain.

    ``beta`` is the common diagonal gain: for ZF, H @ W = beta * I exactly,
    so a noiseless receive sample is sqrt(p) * beta * s_k. RZF keeps the same
    convention; its residual off-diagonal interference is left for the
    demodulator.
    """

    W: np.ndarray
    beta: float
    kind: PrecoderKind
    ridge: float = 0.0


def _as_matrix(channel) -> np.ndarray:
    if isinstance(channel, ChannelRealization):
        return channel.H
    return np.asarray(channel, dtype=complex)


def _normalized(W0: np.ndarray, kind: PrecoderKind, ridge: float) -> LinearPrecoder:
    fro = float(np.linalg.norm(W0))
    if not np.isfinite(fro) or fro == 0:
        raise np.linalg.LinAlgError("precoder normalization failed (singular channel)")
    return LinearPrecoder(W=W0 / fro, beta=1.0 / fro, kind=kind, ridge=ridge)


def zf_precoder(channel) -> LinearPrecoder:
    """Channel-inverting precoder W = H^H (H H^H)^-1, Frobenius-normalized.

    Raises numpy.linalg.LinAlgError on rank-deficient channels; the Monte
    Carlo engine logs and discards such trials.
    """
    H = _as_matrix(channel)
    gram = H @ H.conj().T
    W0 = H.conj().T @ np.linalg.inv(gram)
    return _normalized(W0, PrecoderKind.ZF, ridge=0.0)


def rzf_precoder(channel, sigma2: float, block_len: int, total_power: float) -> LinearPrecoder:
    """Regularized ZF with MMSE-style loading at the per-symbol SNR.

    The ridge K * sigma2 * M / P_T equals K over the per-symbol transmit SNR;
    it is the classic choice and is configurable through this signature.
    """
    H = _as_matrix(channel)
    if total_power <= 0 or block_len < 1:
        raise ConfigurationError("need total_power > 0 and block_len >= 1")
    n_users = H.shape[0]
    ridge = n_users * sigma2 * block_len / total_power
    gram = H @ H.conj().T + ridge * np.eye(n_users)
    W0 = H.conj().T @ np.linalg.inv(gram)
    return _normalized(W0, PrecoderKind.RZF, ridge=ridge)


def baseline_rescaling(precoder: LinearPrecoder, power: float) -> float:
    """Block-constant receiver rescaling factor 1 / (beta * sqrt(p))."""
    if power <= 0:
        raise ValueError(f"power must be > 0, got {power}")
    return 1.0 / (precoder.beta * np.sqrt(power))
