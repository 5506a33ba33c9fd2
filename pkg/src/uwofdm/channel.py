"""Channel realizations, cyclic channel application and snapshot files."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import SystemConfig
from .errors import DimensionMismatch, InvalidDelaySpread, LengthExceedsN, ParseError

#: channel gains below this magnitude count as perfect nulls
NULL_GAIN = 1e-14


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Impulse response and the diagonals of the frequency-domain channel matrices.

    ``H_d`` follows the ascending used-carrier order, ``H_s`` the sorted
    (data first, redundant last) order.
    """

    h_c: np.ndarray
    H_freq: np.ndarray
    H_d: np.ndarray
    H_s: np.ndarray
    H_s1: np.ndarray
    H_s2: np.ndarray

    @classmethod
    def from_taps(cls, taps, config: SystemConfig) -> "ChannelRealization":
        taps = np.asarray(taps, complex).ravel()
        if taps.size > config.N:
            raise LengthExceedsN(f"{taps.size} taps exceed N = {config.N}")
        h_c = np.zeros(config.N, complex)
        h_c[: taps.size] = taps
        H_freq = np.fft.fft(h_c)
        H_d = H_freq[list(config.used_indices)]
        H_s = H_freq[config.sorted_carriers]
        return cls(h_c, H_freq, H_d, H_s, H_s[: config.N_d], H_s[config.N_d :])

    @property
    def has_null(self) -> bool:
        return bool(np.any(np.abs(self.H_s) < NULL_GAIN))


@dataclass(frozen=True)
class NoiseModel:
    """White complex Gaussian noise of variance ``sigma_n_sq`` per time sample.

    After the length-``N`` DFT every subcarrier sees variance ``N * sigma_n_sq``.
    """

    sigma_n_sq: float
    N: int

    def __post_init__(self) -> None:
        if self.sigma_n_sq < 0:
            raise ValueError("noise variance must be nonnegative")

    @property
    def sigma_v_sq(self) -> float:
        return self.N * self.sigma_n_sq


def impulse_channel(config: SystemConfig) -> ChannelRealization:
    return ChannelRealization.from_taps([1.0], config)


def exponential_profile(tau_rms_s: float, config: SystemConfig) -> np.ndarray:
    """Mean tap powers over the guard interval, normalized to sum one."""
    if not tau_rms_s > 0:
        raise InvalidDelaySpread(f"delay spread must be positive, got {tau_rms_s}")
    if config.N_u < 1:
        raise DimensionMismatch("multipath taps need a guard interval of at least one sample")
    k = np.arange(config.N_u)
    p = np.exp(-k / (config.sample_rate_hz * tau_rms_s))
    return p / p.sum()


def draw_taps(
    tau_rms_s: float,
    config: SystemConfig,
    rng: np.random.Generator,
    size: int | None = None,
    normalize: bool = True,
) -> np.ndarray:
    """Rayleigh taps with exponential power decay.

    With ``normalize`` (the default) every draw is scaled to unit energy, which
    skews the per-tap mean powers of the leading taps slightly away from the
    profile; ``normalize=False`` returns the raw profile-weighted draws.
    """
    p = exponential_profile(tau_rms_s, config)
    shape = (config.N_u,) if size is None else (size, config.N_u)
    g = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * np.sqrt(p / 2)
    if not normalize:
        return g
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def draw_multipath(
    tau_rms_s: float,
    config: SystemConfig,
    seed: int | np.random.SeedSequence | None = None,
    *,
    impulse_limit: bool = False,
) -> ChannelRealization:
    """Draw one indoor multipath realization spanning at most ``N_u`` taps.

    ``impulse_limit`` selects the vanishing-delay-spread limit, a single unit
    tap, without consuming randomness.
    """
    if impulse_limit:
        return impulse_channel(config)
    rng = np.random.default_rng(seed)
    return ChannelRealization.from_taps(draw_taps(tau_rms_s, config, rng), config)


def cyclic_convolve(x: np.ndarray, h_c: np.ndarray) -> np.ndarray:
    """Cyclic convolution along the last axis, computed in frequency domain."""
    return np.fft.ifft(np.fft.fft(x, axis=-1) * np.fft.fft(h_c), axis=-1)


def complex_noise(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_channel(
    x_prime: np.ndarray,
    channel: ChannelRealization,
    noise: NoiseModel,
    seed: int | np.random.SeedSequence | None = None,
    *,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """``H_c x' + n`` for one symbol or a ``(frames, N)`` block."""
    x_prime = np.asarray(x_prime, complex)
    N = channel.h_c.size
    if x_prime.shape[-1] != N:
        raise DimensionMismatch(f"expected {N} samples per symbol, got {x_prime.shape[-1]}")
    y = np.fft.ifft(np.fft.fft(x_prime, axis=-1) * channel.H_freq, axis=-1)
    if noise.sigma_n_sq > 0:
        rng = np.random.default_rng(seed) if rng is None else rng
        y = y + complex_noise(rng, y.shape, noise.sigma_n_sq)
    return y


# --------------------------------------------------------------------------
# snapshots


def save_snapshot(channel: ChannelRealization | np.ndarray, path: str | Path, comment: str = "") -> None:
    """Write taps as ``real imag`` lines; trailing zero taps are dropped."""
    h = channel.h_c if isinstance(channel, ChannelRealization) else np.asarray(channel, complex)
    nz = np.flatnonzero(h)
    h = h[: nz[-1] + 1] if nz.size else h[:1]
    lines = [f"# {line}" for line in comment.splitlines()]
    lines += [f"{z.real:.17e} {z.imag:.17e}" for z in h]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_snapshot(text: str, config: SystemConfig) -> ChannelRealization:
    taps = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'real imag', got {raw!r}")
        try:
            taps.append(complex(float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
    if not taps:
        raise ParseError("snapshot contains no taps")
    return ChannelRealization.from_taps(taps, config)


def load_snapshot(path: str | Path, config: SystemConfig) -> ChannelRealization:
    """Load a snapshot file; ``builtin:A`` / ``builtin:B`` name the bundled ones."""
    path = str(path)
    if path.startswith("builtin:"):
        name = {"A": "snapshot_a.txt", "B": "snapshot_b.txt"}[path.split(":", 1)[1].upper()]
        text = resources.files("uwofdm.data").joinpath(name).read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read snapshot {path}: {exc}") from exc
    return parse_snapshot(text, config)


# --------------------------------------------------------------------------
# snapshot search


def power_db(channel: ChannelRealization) -> np.ndarray:
    """``|H|^2`` in dB on the sorted carriers."""
    return 10 * np.log10(np.maximum(np.abs(channel.H_s) ** 2, 1e-300))


def is_mild(channel: ChannelRealization, floor_db: float = -10.0) -> bool:
    """No in-band carrier below ``floor_db``."""
    return bool(power_db(channel).min() > floor_db)


def notch_carriers(channel: ChannelRealization, config: SystemConfig, depth_db: float = -25.0):
    """``(data_pos, redundant_pos)`` of the deepest notches, or ``None``.

    Qualifies when a data carrier and a redundant carrier both fall below
    ``depth_db``, they are at least three carriers apart, and no other carrier
    reaches that depth.
    """
    p = power_db(channel)
    d_pos = int(np.argmin(p[: config.N_d]))
    r_pos = config.N_d + int(np.argmin(p[config.N_d :]))
    if p[d_pos] > depth_db or p[r_pos] > depth_db:
        return None
    carriers = config.sorted_carriers
    kd, kr = carriers[d_pos], carriers[r_pos]
    if abs(kd - kr) < 3:
        return None
    if np.count_nonzero(p <= depth_db) != 2:
        return None
    return d_pos, r_pos


def search_snapshot(
    kind: str,
    config: SystemConfig,
    tau_rms_s: float = 100e-9,
    seed: int = 0,
    batch: int = 4096,
    max_draws: int = 10**7,
) -> tuple[ChannelRealization, int]:
    """Rejection-sample a ``mild`` or ``notch`` snapshot.

    Returns the first accepted realization and its draw index.
    """
    rng = np.random.default_rng(seed)
    drawn = 0
    while drawn < max_draws:
        taps = draw_taps(tau_rms_s, config, rng, size=batch)
        H = np.fft.fft(taps, n=config.N, axis=1)[:, config.sorted_carriers]
        p = 10 * np.log10(np.abs(H) ** 2)
        if kind == "mild":
            hits = np.flatnonzero(p.min(axis=1) > -10.0)
        elif kind == "notch":
            hits = np.flatnonzero(
                (p[:, : config.N_d].min(axis=1) <= -25.0) & (p[:, config.N_d :].min(axis=1) <= -25.0)
            )
        else:
            raise ValueError(f"unknown snapshot kind {kind!r}")
        for i in hits:
            ch = ChannelRealization.from_taps(taps[i], config)
            if kind == "mild" or notch_carriers(ch, config) is not None:
                return ch, drawn + int(i)
        drawn += batch
    raise RuntimeError(f"no {kind} snapshot within {max_draws} draws")
