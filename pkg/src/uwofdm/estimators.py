"""Linear data estimators for the re-sorted UW-OFDM model ``y = H_s G_s d + v``.

Zero-forcing family (unbiased, ``E H_s G_s = I``):

* CI   - per-carrier channel inversion, redundant carriers ignored
* TDW  - channel inversion followed by zeroing the guard samples in time domain
* BLUE - pseudoinverse of ``H_s G_s``; direct and matrix-inversion-lemma forms
* arbitrary members ``V [Sigma^-1 A] U^H`` of the SVD parameterization

Bayesian (``C_dd = sigma_d^2 I``):

* LMMSE in Wiener-smoother, direct regularized and reduced forms
* sequential LMMSE, which needs no matrix inversion at all

Hermitian "inverses" are Cholesky solves; only diagonal matrices are inverted
explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import NULL_GAIN, ChannelRealization, NoiseModel
from .core import GeneratorSet, SystemConfig, dft_matrix, idft_matrix
from .errors import (
    DimensionMismatch,
    RankDeficient,
    SingularInnerMatrix,
    UnknownKind,
    ZeroChannelGain,
    ZeroNoise,
)

#: singular values below this fraction of the largest count as zero
SVD_RTOL = 1e-12

ZF_KINDS = ("CI", "TDW", "BLUE_direct", "BLUE_reduced", "ZF")
LMMSE_KINDS = ("LMMSE_wiener", "LMMSE_direct", "LMMSE_reduced")
KINDS = ZF_KINDS + LMMSE_KINDS


@dataclass(frozen=True, eq=False)
class Equalizer:
    """Equalizer matrix ``E`` plus the error covariance of ``d_hat = E y``."""

    kind: str
    E: np.ndarray
    C_ee: np.ndarray
    system: np.ndarray  # H_s G_s
    noise: NoiseModel
    sigma_d_sq: float

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Estimate data for one receive vector or a ``(frames, N_d+N_r)`` block."""
        return np.asarray(y) @ self.E.T

    @property
    def variances(self) -> np.ndarray:
        return np.real(np.diag(self.C_ee)).copy()


@dataclass(frozen=True, eq=False)
class ZfFamilyMember:
    A: np.ndarray
    U: np.ndarray
    Sigma: np.ndarray
    V: np.ndarray


def system_matrix(channel: ChannelRealization, gen: GeneratorSet) -> np.ndarray:
    """``H_s G_s = [H_s1; H_s2 T]``."""
    return np.vstack([np.diag(channel.H_s1), channel.H_s2[:, None] * gen.T])


def _check_gains(H: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(np.abs(H) < NULL_GAIN)
    if bad.size:
        raise ZeroChannelGain(f"{what} has a null at sorted position(s) {bad.tolist()}")


def _cho(A: np.ndarray, exc: type[Exception], what: str):
    try:
        return scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise exc(f"{what} is not positive definite") from err


def _hermitize(C: np.ndarray) -> np.ndarray:
    return (C + C.conj().T) / 2


# --------------------------------------------------------------------------
# zero-forcing family


def build_ci(channel: ChannelRealization, gen: GeneratorSet, noise: NoiseModel) -> Equalizer:
    """``E = H_s1^{-1} [I 0]``."""
    _check_gains(channel.H_s1, "H_s1")
    cfg = gen.config
    inv = 1.0 / channel.H_s1
    E = np.zeros((cfg.N_d, cfg.N_d + cfg.N_r), complex)
    E[np.arange(cfg.N_d), np.arange(cfg.N_d)] = inv
    C = np.diag(noise.sigma_v_sq * np.abs(inv) ** 2).astype(complex)
    return Equalizer("CI", E, C, system_matrix(channel, gen), noise, cfg.sigma_d_sq)


def tdw_core(config: SystemConfig) -> np.ndarray:
    """``[I 0] P^T B^T F_N W F_N^{-1} B P`` with ``W`` zeroing the guard samples."""
    sel = config.sorted_carriers
    window = np.ones(config.N)
    window[config.N - config.N_u :] = 0.0
    smoother = dft_matrix(config.N) @ (window[:, None] * idft_matrix(config.N))
    return smoother[np.ix_(sel[: config.N_d], sel)]


def build_tdw(
    channel: ChannelRealization,
    gen: GeneratorSet,
    noise: NoiseModel,
    config: SystemConfig | None = None,
) -> Equalizer:
    """Time-domain windowing equalizer in explicit matrix form."""
    config = gen.config if config is None else config
    _check_gains(channel.H_s, "H_s")
    E = tdw_core(config) / channel.H_s[None, :]
    C = _hermitize(noise.sigma_v_sq * E @ E.conj().T)
    return Equalizer("TDW", E, C, system_matrix(channel, gen), noise, config.sigma_d_sq)


def apply_tdw_fast(
    y: np.ndarray,
    channel: ChannelRealization,
    gen: GeneratorSet,
    config: SystemConfig | None = None,
) -> np.ndarray:
    """TDW as a pipeline of diagonal scalings, FFTs and index shuffles.

    Works on one receive vector or a ``(frames, N_d+N_r)`` block.
    """
    cfg = gen.config if config is None else config
    _check_gains(channel.H_s, "H_s")
    y = np.asarray(y)
    single = y.ndim == 1
    Y = np.atleast_2d(y)
    X = np.zeros((Y.shape[0], cfg.N), complex)
    X[:, cfg.sorted_carriers] = Y / channel.H_s
    x = np.fft.ifft(X, axis=1)
    x[:, cfg.N - cfg.N_u :] = 0.0
    d_hat = np.fft.fft(x, axis=1)[:, cfg.sorted_carriers[: cfg.N_d]]
    return d_hat[0] if single else d_hat


def _gram(channel: ChannelRealization, gen: GeneratorSet) -> tuple[np.ndarray, np.ndarray]:
    X1 = system_matrix(channel, gen)
    return X1, _hermitize(X1.conj().T @ X1)


def build_blue_direct(channel: ChannelRealization, gen: GeneratorSet, noise: NoiseModel) -> Equalizer:
    """``E = (G^H H^H H G)^{-1} G^H H^H`` via a Cholesky solve."""
    X1, X2 = _gram(channel, gen)
    c = _cho(X2, RankDeficient, "G_s^H H_s^H H_s G_s")
    E = scipy.linalg.cho_solve(c, X1.conj().T)
    C = _hermitize(noise.sigma_v_sq * scipy.linalg.cho_solve(c, np.eye(X2.shape[0])))
    return Equalizer("BLUE_direct", E, C, X1, noise, gen.config.sigma_d_sq)


def _lemma_inverse(D1: np.ndarray, D2: np.ndarray, T: np.ndarray) -> np.ndarray:
    """``(D1 + T^H D2 T)^{-1}`` for diagonal ``D1``, ``D2`` using an ``N_r x N_r`` solve."""
    D1inv = 1.0 / D1
    TD1 = T * D1inv[None, :]  # T D1^{-1}
    inner = _hermitize(TD1 @ T.conj().T + np.diag(1.0 / D2))
    c = _cho(inner, SingularInnerMatrix, "T D1^-1 T^H + D2^-1")
    return _hermitize(np.diag(D1inv) - TD1.conj().T @ scipy.linalg.cho_solve(c, TD1))


def build_blue_reduced(channel: ChannelRealization, gen: GeneratorSet, noise: NoiseModel) -> Equalizer:
    """BLUE with the ``N_d x N_d`` inverse replaced by the inversion lemma."""
    _check_gains(channel.H_s, "H_s")
    D1 = np.abs(channel.H_s1) ** 2
    D2 = np.abs(channel.H_s2) ** 2
    Q = _lemma_inverse(D1, D2, gen.T)
    X1 = system_matrix(channel, gen)
    E = Q @ X1.conj().T
    return Equalizer("BLUE_reduced", E, noise.sigma_v_sq * Q, X1, noise, gen.config.sigma_d_sq)


def zf_family_member(
    channel: ChannelRealization,
    gen: GeneratorSet,
    A: np.ndarray,
    noise: NoiseModel | None = None,
) -> tuple[Equalizer, ZfFamilyMember]:
    """``E = V [Sigma^{-1} A] U^H`` for an arbitrary ``N_d x N_r`` matrix ``A``."""
    cfg = gen.config
    A = np.asarray(A, complex)
    if A.shape != (cfg.N_d, cfg.N_r):
        raise DimensionMismatch(f"A must be {cfg.N_d} x {cfg.N_r}, got {A.shape}")
    X1 = system_matrix(channel, gen)
    U, s, Vh = np.linalg.svd(X1)
    if s[-1] < SVD_RTOL * s[0]:
        raise RankDeficient(f"H_s G_s has numerical rank below {cfg.N_d}")
    V = Vh.conj().T
    E = V @ np.hstack([np.diag(1.0 / s), A]) @ U.conj().T
    noise = NoiseModel(1.0 / cfg.N, cfg.N) if noise is None else noise
    C = _hermitize(noise.sigma_v_sq * E @ E.conj().T)
    eq = Equalizer("ZF", E, C, X1, noise, cfg.sigma_d_sq)
    return eq, ZfFamilyMember(A, U, np.diag(s), V)


# --------------------------------------------------------------------------
# LMMSE batch


def build_lmmse(
    channel: ChannelRealization,
    gen: GeneratorSet,
    noise: NoiseModel,
    form: str = "direct",
) -> Equalizer:
    """Batch LMMSE equalizer in one of three algebraically equivalent forms.

    ``direct`` tolerates channel nulls and is the default; ``wiener`` and
    ``reduced`` divide by channel gains.
    """
    cfg = gen.config
    rho = noise.sigma_v_sq / cfg.sigma_d_sq
    X1 = system_matrix(channel, gen)
    if form == "direct":
        X2 = X1.conj().T @ X1 + rho * np.eye(cfg.N_d)
        c = _cho(_hermitize(X2), RankDeficient, "G^H H^H H G + rho I")
        E = scipy.linalg.cho_solve(c, X1.conj().T)
        C = _hermitize(noise.sigma_v_sq * scipy.linalg.cho_solve(c, np.eye(cfg.N_d)))
    elif form == "wiener":
        _check_gains(channel.H_s, "H_s")
        G = gen.G_s
        inner = G @ G.conj().T + np.diag(rho / np.abs(channel.H_s) ** 2)
        c = _cho(_hermitize(inner), RankDeficient, "G G^H + rho (H^H H)^-1")
        W = scipy.linalg.cho_solve(c, G).conj().T
        E = W / channel.H_s[None, :]
        # Bayesian error covariance C_dd - E C_yd, independent of the batch closed form
        C = _hermitize(cfg.sigma_d_sq * (np.eye(cfg.N_d) - E @ X1))
    elif form == "reduced":
        D1 = np.abs(channel.H_s1) ** 2 + rho
        _check_gains(D1, "H_s1^H H_s1 + rho I")
        _check_gains(channel.H_s2, "H_s2")
        Q = _lemma_inverse(D1, np.abs(channel.H_s2) ** 2, gen.T)
        E = Q @ X1.conj().T
        C = noise.sigma_v_sq * Q
    else:
        raise UnknownKind(f"unknown LMMSE form {form!r}")
    return Equalizer(f"LMMSE_{form}", E, C, X1, noise, cfg.sigma_d_sq)


def error_covariance(eq: Equalizer, noise: NoiseModel | None = None) -> np.ndarray:
    """Closed-form error covariance of ``eq`` under ``noise`` (default: design noise)."""
    noise = eq.noise if noise is None else noise
    s2 = noise.sigma_v_sq
    if eq.kind == "CI":
        return np.diag(s2 * np.abs(np.diag(eq.E[:, : eq.E.shape[0]])) ** 2).astype(complex)
    if eq.kind in ("TDW", "ZF"):
        return _hermitize(s2 * eq.E @ eq.E.conj().T)
    gram = eq.system.conj().T @ eq.system
    if eq.kind in ("BLUE_direct", "BLUE_reduced"):
        return _hermitize(s2 * np.linalg.inv(gram))
    if eq.kind in LMMSE_KINDS:
        rho = s2 / eq.sigma_d_sq
        return _hermitize(s2 * np.linalg.inv(gram + rho * np.eye(gram.shape[0])))
    raise UnknownKind(f"unknown equalizer kind {eq.kind!r}")


def build(kind: str, channel: ChannelRealization, gen: GeneratorSet, noise: NoiseModel) -> Equalizer:
    """Dispatch on the canonical kind names used by the CLI."""
    if kind == "CI":
        return build_ci(channel, gen, noise)
    if kind == "TDW":
        return build_tdw(channel, gen, noise)
    if kind == "BLUE_direct":
        return build_blue_direct(channel, gen, noise)
    if kind == "BLUE_reduced":
        return build_blue_reduced(channel, gen, noise)
    if kind in LMMSE_KINDS:
        return build_lmmse(channel, gen, noise, kind.split("_", 1)[1])
    raise UnknownKind(f"unknown equalizer kind {kind!r}")


# --------------------------------------------------------------------------
# sequential LMMSE


@dataclass(frozen=True, eq=False)
class SequentialEqualizer:
    """Stored gains of the sequential LMMSE estimator.

    ``scalar_gains[n]`` and ``gain_vectors[:, n]`` are the data and redundant
    parts of the gain for the first ``N_d`` steps (the data part of those gains
    is nonzero only at entry ``n``); ``tail_gains[:, m]`` is the full gain of step
    ``N_d + m``.
    """

    level: str
    scalar_gains: np.ndarray
    gain_vectors: np.ndarray
    tail_gains: np.ndarray
    M_final: np.ndarray
    H_s: np.ndarray
    sigma_v_sq: float
    sigma_d_sq: float

    @property
    def N_d(self) -> int:
        return self.scalar_gains.size

    @property
    def C_ee(self) -> np.ndarray:
        return self.M_final[: self.N_d, : self.N_d]

    def gain_matrix(self) -> np.ndarray:
        """All gain vectors ``k[n]`` as columns of a square matrix."""
        nd = self.N_d
        K = np.zeros((self.H_s.size, self.H_s.size), complex)
        K[np.arange(nd), np.arange(nd)] = self.scalar_gains
        K[nd:, :nd] = self.gain_vectors
        K[:, nd:] = self.tail_gains
        return K


def _prior(gen: GeneratorSet) -> np.ndarray:
    return gen.config.sigma_d_sq * (gen.G_s @ gen.G_s.conj().T)


def sequential_lmmse_determine(
    channel: ChannelRealization,
    gen: GeneratorSet,
    noise: NoiseModel,
    level: str = "partitioned",
) -> SequentialEqualizer:
    """Run the gain and MSE-matrix recursions over all ``N_d + N_r`` observations.

    ``generic`` evaluates the textbook recursion with full matrix products,
    ``diagonal`` exploits the diagonal channel matrix, and ``partitioned``
    additionally exploits the white data prior for the first ``N_d`` steps.
    """
    cfg = gen.config
    s_v, s_d = noise.sigma_v_sq, cfg.sigma_d_sq
    if not s_v > 0:
        raise ZeroNoise("the sequential form needs sigma_n^2 > 0")
    H = channel.H_s
    nd, n_all = cfg.N_d, cfg.N_d + cfg.N_r
    M = _prior(gen)
    K = np.zeros((n_all, n_all), complex)

    if level == "generic":
        eye = np.eye(n_all)
        for n in range(n_all):
            h = np.zeros(n_all, complex)
            h[n] = np.conj(H[n])
            Mh = M @ h
            k = Mh / (s_v + np.vdot(h, Mh).real)
            M = (eye - np.outer(k, h.conj())) @ M
            K[:, n] = k
        M = _hermitize(M)
        return _pack("generic", K, M, channel, s_v, s_d, nd)

    if level not in ("diagonal", "partitioned"):
        raise UnknownKind(f"unknown sequential level {level!r}")

    start = 0
    if level == "partitioned":
        for n in range(nd):
            h = H[n]
            mdr = M[nd:, n].copy()  # n-th column of M_dr (data prior still sigma_d^2)
            denom = s_v + s_d * abs(h) ** 2
            K[n, n] = np.conj(h) / (s_v / s_d + abs(h) ** 2)
            kr = np.conj(h) * mdr / denom
            K[nd:, n] = kr
            M[n, n] = s_v / (s_v / s_d + abs(h) ** 2)
            M[nd:, n] = mdr - s_d * h * kr
            M[n, nd:] = M[nd:, n].conj()
            M[nd:, nd:] -= h * np.outer(kr, mdr.conj())
        start = nd

    for n in range(start, n_all):
        h = H[n]
        m = M[:, n].copy()
        k = np.conj(h) * m / (s_v + abs(h) ** 2 * M[n, n].real)
        M -= h * np.outer(k, m.conj())
        K[:, n] = k
    return _pack(level, K, _hermitize(M), channel, s_v, s_d, nd)


def _pack(level, K, M, channel, s_v, s_d, nd) -> SequentialEqualizer:
    return SequentialEqualizer(
        level=level,
        scalar_gains=np.diag(K)[:nd].copy(),
        gain_vectors=K[nd:, :nd].copy(),
        tail_gains=K[:, nd:].copy(),
        M_final=M,
        H_s=channel.H_s.copy(),
        sigma_v_sq=s_v,
        sigma_d_sq=s_d,
    )


def sequential_lmmse_state(seq: SequentialEqualizer, y: np.ndarray, steps: int | None = None) -> np.ndarray:
    """Estimate of the full code word ``c_s`` after ``steps`` observations.

    ``y`` may be one receive vector or a ``(frames, N_d+N_r)`` block.
    """
    y = np.asarray(y)
    n_all = seq.H_s.size
    if y.shape[-1] != n_all:
        raise DimensionMismatch(f"expected {n_all} entries per receive vector")
    steps = n_all if steps is None else steps
    nd = seq.N_d
    Y = np.atleast_2d(y)
    c = np.zeros(Y.shape, complex)
    first = min(steps, nd)
    c[:, :first] = Y[:, :first] * seq.scalar_gains[:first]
    c[:, nd:] = Y[:, :first] @ seq.gain_vectors[:, :first].T
    for n in range(nd, steps):
        innov = Y[:, n] - seq.H_s[n] * c[:, n]
        c += innov[:, None] * seq.tail_gains[:, n - nd][None, :]
    return c[0] if y.ndim == 1 else c


def sequential_lmmse_estimate(seq: SequentialEqualizer, y: np.ndarray, channel: ChannelRealization | None = None) -> np.ndarray:
    """Data estimate: the first ``N_d`` entries of the final code word estimate."""
    if channel is not None and not np.array_equal(channel.H_s, seq.H_s):
        raise DimensionMismatch("sequential equalizer was determined for a different channel")
    return sequential_lmmse_state(seq, y)[..., : seq.N_d]
