"""Transmit frame generation and receive-side preparation.

Every function here has a single-frame form returning a small record
(:func:`generate_frame`, :func:`prepare_receive`) and a batched form operating
on ``(frames, ...)`` arrays (:func:`transmit`, :func:`receive`), which is what
the Monte-Carlo engine uses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GeneratorSet, SystemConfig
from .errors import DimensionMismatch, OddBitCount


@dataclass(frozen=True)
class BitMapping:
    """Gray-labeled QPSK: first bit on the real axis, second on the imaginary."""

    sigma_d_sq: float = 1.0
    bits_per_symbol: int = 2

    @property
    def constellation(self) -> np.ndarray:
        """Points for labels 00, 01, 10, 11 (label read as ``b0 b1``)."""
        return qpsk_map(np.array([0, 0, 0, 1, 1, 0, 1, 1]), self.sigma_d_sq)


def qpsk_map(bits: np.ndarray, sigma_d_sq: float = 1.0) -> np.ndarray:
    """Map bit pairs to QPSK symbols of energy ``sigma_d_sq``.

    ``00 -> (+a,+a)``, ``01 -> (+a,-a)``, ``11 -> (-a,-a)``, ``10 -> (-a,+a)``
    with ``a = sqrt(sigma_d_sq / 2)``.  The trailing axis holds the bits; leading
    axes are preserved.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] % 2:
        raise OddBitCount(f"QPSK needs an even number of bits, got {bits.shape[-1]}")
    a = np.sqrt(sigma_d_sq / 2)
    b = bits.reshape(*bits.shape[:-1], -1, 2).astype(np.int8)
    return a * ((1 - 2 * b[..., 0]) + 1j * (1 - 2 * b[..., 1]))


def qpsk_demap(symbols: np.ndarray) -> np.ndarray:
    """Hard decisions, inverse of :func:`qpsk_map`."""
    s = np.asarray(symbols)
    bits = np.empty(s.shape + (2,), dtype=np.int8)
    bits[..., 0] = s.real < 0
    bits[..., 1] = s.imag < 0
    return bits.reshape(*s.shape[:-1], -1)


@dataclass(frozen=True, eq=False)
class TxFrame:
    d: np.ndarray
    r: np.ndarray
    c_s: np.ndarray
    x_freq: np.ndarray
    x_time: np.ndarray
    x_prime: np.ndarray


@dataclass(frozen=True, eq=False)
class RxPrepared:
    y_d: np.ndarray
    y_c: np.ndarray
    y: np.ndarray


def uw_spectrum(config: SystemConfig) -> np.ndarray:
    """``F_N [0; x_u]``."""
    tail = np.zeros(config.N, complex)
    tail[config.N - config.N_u :] = config.uw
    return np.fft.fft(tail)


def generate_frame(d: np.ndarray, gen: GeneratorSet, config: SystemConfig | None = None) -> TxFrame:
    config = gen.config if config is None else config
    d = np.asarray(d, complex)
    if d.shape != (config.N_d,):
        raise DimensionMismatch(f"expected {config.N_d} data symbols, got shape {d.shape}")
    r = gen.T @ d
    c_s = np.concatenate([d, r])
    x_freq = np.zeros(config.N, complex)
    x_freq[config.sorted_carriers] = c_s
    x_time = np.fft.ifft(x_freq)
    x_prime = x_time.copy()
    x_prime[config.N - config.N_u :] += config.uw
    return TxFrame(d, r, c_s, x_freq, x_time, x_prime)


def transmit(D: np.ndarray, gen: GeneratorSet) -> np.ndarray:
    """Time-domain transmit symbols ``x'`` for a ``(frames, N_d)`` data block."""
    cfg = gen.config
    D = np.atleast_2d(np.asarray(D, complex))
    if D.shape[-1] != cfg.N_d:
        raise DimensionMismatch(f"expected {cfg.N_d} data symbols per frame")
    X = np.zeros((D.shape[0], cfg.N), complex)
    X[:, cfg.sorted_carriers] = np.concatenate([D, D @ gen.T.T], axis=1)
    x = np.fft.ifft(X, axis=1)
    x[:, cfg.N - cfg.N_u :] += cfg.uw
    return x


def prepare_receive(y_r_time: np.ndarray, channel, gen: GeneratorSet, config: SystemConfig | None = None) -> RxPrepared:
    """DFT, drop zero carriers, subtract the UW influence and re-sort."""
    config = gen.config if config is None else config
    y_r_time = np.asarray(y_r_time, complex)
    if y_r_time.shape != (config.N,):
        raise DimensionMismatch(f"expected {config.N} receive samples, got {y_r_time.shape}")
    used = list(config.used_indices)
    y_d = np.fft.fft(y_r_time)[used]
    y_c = y_d - channel.H_d * uw_spectrum(config)[used]
    y = y_c[config.sort_order]
    return RxPrepared(y_d, y_c, y)


def receive(Y: np.ndarray, channel, gen: GeneratorSet) -> np.ndarray:
    """Batched :func:`prepare_receive` returning only the re-sorted vectors."""
    cfg = gen.config
    Y = np.atleast_2d(Y)
    if Y.shape[-1] != cfg.N:
        raise DimensionMismatch(f"expected {cfg.N} receive samples per frame")
    carriers = cfg.sorted_carriers
    return np.fft.fft(Y, axis=1)[:, carriers] - channel.H_s * uw_spectrum(cfg)[carriers]
