"""Code structure of a unique-word OFDM symbol.

A UW-OFDM symbol carries ``N_d`` QAM data symbols and ``N_r = N_u`` redundant
subcarrier symbols.  The redundant symbols are a linear function of the data,
``r = T d``, chosen such that the last ``N_u`` time-domain samples vanish.  The
desired unique word is then added in time domain.

DFT convention used throughout the package::

    [F_N]_{kl} = exp(-j 2 pi k l / N),   F_N^{-1} = F_N^H / N

which is what :func:`numpy.fft.fft` / :func:`numpy.fft.ifft` implement.
"""

from __future__ import annotations

import configparser
import itertools
import math
import re
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DimensionMismatch,
    ParseError,
    SearchSpaceTooLarge,
    SingularM22,
)

#: reciprocal condition number below which M22 counts as singular
M22_RCOND_MIN = 1e-12

#: cap on the number of placements visited by the exhaustive search
EXHAUSTIVE_CAP = 10**6

DEFAULT_ZERO_INDICES = (0, *range(27, 38))
DEFAULT_REDUNDANT_INDICES = (2, 6, 10, 14, 17, 21, 24, 26, 38, 40, 43, 47, 50, 54, 58, 62)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Dimensions, subcarrier index sets and powers of a UW-OFDM system.

    Index sets are stored sorted.  Data carriers are everything that is
    neither a zero nor a redundant carrier.
    """

    N: int
    N_u: int
    N_d: int
    N_r: int
    N_z: int
    zero_indices: tuple[int, ...]
    redundant_indices: tuple[int, ...]
    uw: np.ndarray = field(default=None)  # type: ignore[assignment]
    sigma_d_sq: float = 1.0
    sample_rate_hz: float = 20e6

    def __post_init__(self) -> None:
        object.__setattr__(self, "zero_indices", tuple(sorted(int(i) for i in self.zero_indices)))
        object.__setattr__(
            self, "redundant_indices", tuple(sorted(int(i) for i in self.redundant_indices))
        )
        uw = np.zeros(self.N_u, complex) if self.uw is None else np.asarray(self.uw, complex)
        uw = uw.copy()
        uw.flags.writeable = False
        object.__setattr__(self, "uw", uw)
        self._validate()

    def _validate(self) -> None:
        if self.N <= 0 or self.N_d <= 0 or self.N_r <= 0 or self.N_u < 0 or self.N_z < 0:
            raise DimensionMismatch("dimensions must be positive (N_u, N_z nonnegative)")
        if self.N_r != self.N_u:
            raise DimensionMismatch(f"N_r={self.N_r} must equal N_u={self.N_u}")
        if self.N_d + self.N_r + self.N_z != self.N:
            raise DimensionMismatch(
                f"N_d + N_r + N_z = {self.N_d + self.N_r + self.N_z} != N = {self.N}"
            )
        zero, red = set(self.zero_indices), set(self.redundant_indices)
        if len(zero) != len(self.zero_indices) or len(red) != len(self.redundant_indices):
            raise DimensionMismatch("index sets contain duplicates")
        if len(zero) != self.N_z or len(red) != self.N_r:
            raise DimensionMismatch("index set sizes do not match N_z / N_r")
        if zero & red:
            raise DimensionMismatch(f"zero and redundant sets overlap at {sorted(zero & red)}")
        if any(i < 0 or i >= self.N for i in zero | red):
            raise DimensionMismatch(f"subcarrier indices must lie in [0, {self.N})")
        if self.uw.shape != (self.N_u,):
            raise DimensionMismatch(f"unique word has length {self.uw.size}, expected {self.N_u}")
        if not self.sigma_d_sq > 0:
            raise ConfigError("sigma_d_sq must be positive")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")

    @property
    def data_indices(self) -> tuple[int, ...]:
        excluded = set(self.zero_indices) | set(self.redundant_indices)
        return tuple(k for k in range(self.N) if k not in excluded)

    @property
    def used_indices(self) -> tuple[int, ...]:
        """Non-zero carriers in ascending order (the row order of ``B``)."""
        zero = set(self.zero_indices)
        return tuple(k for k in range(self.N) if k not in zero)

    @property
    def sorted_carriers(self) -> np.ndarray:
        """Carrier index of every entry of the sorted code word ``[d; r]``."""
        return np.array(self.data_indices + self.redundant_indices, dtype=int)

    @property
    def sort_order(self) -> np.ndarray:
        """Positions in the used-carrier vector that ``P^T`` gathers, in order."""
        pos = {k: i for i, k in enumerate(self.used_indices)}
        return np.array([pos[k] for k in self.sorted_carriers], dtype=int)

    def with_redundant(self, redundant_indices: Sequence[int]) -> "SystemConfig":
        return replace(self, redundant_indices=tuple(redundant_indices))


def default_config(uw: np.ndarray | None = None, sigma_d_sq: float = 1.0) -> SystemConfig:
    """The 64-carrier, 802.11a-like setup (zero UW unless ``uw`` given)."""
    return SystemConfig(
        N=64,
        N_u=16,
        N_d=36,
        N_r=16,
        N_z=12,
        zero_indices=DEFAULT_ZERO_INDICES,
        redundant_indices=DEFAULT_REDUNDANT_INDICES,
        uw=uw,
        sigma_d_sq=sigma_d_sq,
        sample_rate_hz=20e6,
    )


# --------------------------------------------------------------------------
# configuration files

_PAIR = re.compile(r"\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)")


def _parse_indices(text: str, key: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(int(tok) for tok in text.replace("\n", ",").split(",") if tok.strip())
    except ValueError as exc:
        raise ParseError(f"{key}: expected comma-separated integers") from exc


def _parse_uw(text: str) -> np.ndarray | None:
    text = text.strip()
    if not text:
        return None
    pairs = _PAIR.findall(text)
    if _PAIR.sub("", text).replace(",", "").strip():
        raise ParseError("uw: expected a list of (real, imag) pairs")
    try:
        return np.array([complex(float(re_), float(im)) for re_, im in pairs])
    except ValueError as exc:
        raise ParseError("uw: pair entries must be decimal numbers") from exc


def parse_config(text: str) -> SystemConfig:
    """Parse an INI-style ``[system]`` section into a :class:`SystemConfig`.

    An empty or missing ``uw`` key means the zero unique word.
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep N_d vs n_d distinct
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    if "system" not in parser:
        raise ParseError("missing [system] section")
    sec = parser["system"]
    try:
        ints = {k: int(sec[k]) for k in ("N", "N_u", "N_d", "N_r", "N_z")}
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]}") from exc
    except ValueError as exc:
        raise ParseError(f"dimension keys must be integers: {exc}") from exc
    try:
        sigma_d_sq = float(sec.get("sigma_d_sq", "1.0"))
        fs = float(sec.get("sample_rate_hz", "20e6"))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc
    return SystemConfig(
        **ints,
        zero_indices=_parse_indices(sec.get("zero_indices", ""), "zero_indices"),
        redundant_indices=_parse_indices(sec.get("redundant_indices", ""), "redundant_indices"),
        uw=_parse_uw(sec.get("uw", "")),
        sigma_d_sq=sigma_d_sq,
        sample_rate_hz=fs,
    )


def load_config(path: str | Path | None = None) -> SystemConfig:
    """Load a config file; ``None`` loads the bundled 64-carrier setup."""
    if path is None:
        text = resources.files("uwofdm.data").joinpath("default64.ini").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def format_config(config: SystemConfig) -> str:
    uw = "" if not config.uw.any() else ", ".join(f"({float(z.real)!r}, {float(z.imag)!r})" for z in config.uw)
    return (
        "[system]\n"
        f"N = {config.N}\nN_u = {config.N_u}\nN_d = {config.N_d}\n"
        f"N_r = {config.N_r}\nN_z = {config.N_z}\n"
        f"zero_indices = {', '.join(map(str, config.zero_indices))}\n"
        f"redundant_indices = {', '.join(map(str, config.redundant_indices))}\n"
        f"uw = {uw}\n"
        f"sigma_d_sq = {config.sigma_d_sq!r}\n"
        f"sample_rate_hz = {config.sample_rate_hz!r}\n"
    )


# --------------------------------------------------------------------------
# generator matrices


def dft_matrix(N: int) -> np.ndarray:
    n = np.arange(N)
    return np.exp(-2j * np.pi * np.outer(n, n) / N)


def idft_matrix(N: int) -> np.ndarray:
    n = np.arange(N)
    return np.exp(2j * np.pi * np.outer(n, n) / N) / N


@dataclass(frozen=True, eq=False)
class GeneratorSet:
    """Matrices ``B``, ``P``, blocks of ``M = F^{-1} B P``, ``T`` and ``G_s``."""

    config: SystemConfig
    B: np.ndarray
    P: np.ndarray
    M11: np.ndarray
    M12: np.ndarray
    M21: np.ndarray
    M22: np.ndarray
    T: np.ndarray
    G_s: np.ndarray

    @property
    def M(self) -> np.ndarray:
        return np.block([[self.M11, self.M12], [self.M21, self.M22]])

    @property
    def trace_TTH(self) -> float:
        return float(np.sum(np.abs(self.T) ** 2))


def insertion_matrix(config: SystemConfig) -> np.ndarray:
    B = np.zeros((config.N, config.N_d + config.N_r))
    B[list(config.used_indices), np.arange(config.N_d + config.N_r)] = 1.0
    return B


def permutation_matrix(config: SystemConfig) -> np.ndarray:
    n = config.N_d + config.N_r
    P = np.zeros((n, n))
    P[config.sort_order, np.arange(n)] = 1.0
    return P


def _solve_T(M21: np.ndarray, M22: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        # exact singularity is reported below through the condition estimate
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M22, check_finite=False)
    # 1-norm condition estimate from the LU factors (LAPACK gecon)
    anorm = np.linalg.norm(M22, 1)
    gecon = scipy.linalg.get_lapack_funcs("gecon", (lu,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not rcond >= M22_RCOND_MIN:
        raise SingularM22(f"M22 reciprocal condition {rcond:.3e} < {M22_RCOND_MIN:g}")
    return -scipy.linalg.lu_solve((lu, piv), M21, check_finite=False)


def build_generator_set(config: SystemConfig) -> GeneratorSet:
    """Construct ``B``, ``P``, ``M`` blocks and solve ``M22 T = -M21``."""
    B = insertion_matrix(config)
    P = permutation_matrix(config)
    M = idft_matrix(config.N) @ B @ P
    k, d = config.N - config.N_u, config.N_d
    M11, M12, M21, M22 = M[:k, :d], M[:k, d:], M[k:, :d], M[k:, d:]
    T = _solve_T(M21, M22)
    G_s = np.vstack([np.eye(d), T])
    return GeneratorSet(config, B, P, M11, M12, M21, M22, T, G_s)


@dataclass(frozen=True)
class EnergyReport:
    E_data: float
    E_redundant: float
    E_uw: float
    E_total: float
    trace_TTH: float


def energy_report(gen: GeneratorSet, config: SystemConfig | None = None) -> EnergyReport:
    """Mean transmit-symbol energy split into data, redundant and UW parts."""
    config = gen.config if config is None else config
    tr = gen.trace_TTH
    e_d = config.N_d * config.sigma_d_sq / config.N
    e_r = config.sigma_d_sq * tr / config.N
    e_u = float(np.vdot(config.uw, config.uw).real)
    return EnergyReport(e_d, e_r, e_u, e_d + e_r + e_u, tr)


# --------------------------------------------------------------------------
# redundant placement search


def redundant_energy(config: SystemConfig, redundant: Sequence[int]) -> float:
    """``tr(T T^H)`` for a candidate redundant set; ``inf`` if M22 is singular."""
    zero = set(config.zero_indices)
    red = sorted(redundant)
    rset = set(red)
    data = [k for k in range(config.N) if k not in zero and k not in rset]
    tail = np.arange(config.N - config.N_u, config.N)
    M21 = np.exp(2j * np.pi * np.outer(tail, data) / config.N) / config.N
    M22 = np.exp(2j * np.pi * np.outer(tail, red) / config.N) / config.N
    try:
        T = _solve_T(M21, M22)
    except SingularM22:
        return math.inf
    return float(np.sum(np.abs(T) ** 2))


def optimize_redundant_placement(
    config_template: SystemConfig,
    strategy: str = "pairwise_swap_descent",
    seed: int = 0,
    trace: list[float] | None = None,
) -> SystemConfig:
    """Choose redundant carriers minimizing ``tr(T T^H)``.

    ``exhaustive`` visits every subset of the non-zero carriers;
    ``pairwise_swap_descent`` starts from the template's set and applies the best
    redundant/data swap until none lowers the objective.  Both searches are
    deterministic; ``seed`` is accepted for interface stability only.  If given,
    ``trace`` receives the objective of every accepted point.
    """
    del seed
    cfg = config_template
    candidates = [k for k in cfg.used_indices]
    if strategy == "exhaustive":
        count = math.comb(len(candidates), cfg.N_r)
        if count > EXHAUSTIVE_CAP:
            raise SearchSpaceTooLarge(f"{count} placements exceed the cap of {EXHAUSTIVE_CAP}")
        best, best_set = math.inf, None
        for subset in itertools.combinations(candidates, cfg.N_r):
            e = redundant_energy(cfg, subset)
            if e < best:  # combinations() is lexicographic, so ties keep the smallest
                best, best_set = e, subset
        if best_set is None:
            raise SingularM22("every candidate placement is degenerate")
        if trace is not None:
            trace.append(best)
        return cfg.with_redundant(best_set)

    if strategy != "pairwise_swap_descent":
        raise ConfigError(f"unknown strategy {strategy!r}")

    current = tuple(cfg.redundant_indices)
    value = redundant_energy(cfg, current)
    if trace is not None:
        trace.append(value)
    while True:
        red = set(current)
        data = [k for k in candidates if k not in red]
        best, best_set = math.inf, None
        for r in current:
            for d in data:
                cand = tuple(sorted((red - {r}) | {d}))
                e = redundant_energy(cfg, cand)
                if e < best * (1 - 1e-12) or (
                    e <= best * (1 + 1e-12) and best_set is not None and cand < best_set
                ):
                    best, best_set = e, cand
        if best_set is None:
            raise SingularM22("every swap in the neighborhood is degenerate")
        if not best < value * (1 - 1e-12):
            return cfg.with_redundant(current)
        current, value = best_set, best
        if trace is not None:
            trace.append(value)
