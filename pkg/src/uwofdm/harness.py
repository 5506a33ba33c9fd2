"""Monte-Carlo BER engine.

Work is cut into *frames*: one OFDM symbol when uncoded, one code block of
:data:`CODE_BLOCK_SYMBOLS` OFDM symbols when the outer code is on.  Frames are
simulated in fixed batches of :data:`BATCH_SYMBOLS` OFDM symbols; batch ``b`` of
grid point ``p`` draws all of its randomness from
``SeedSequence([master_seed, p + 1, b])``, and every estimator sees the same
bits, noise and channels (common random numbers).  The stop rule is evaluated
frame by frame in frame order, so results do not depend on how many batches are
in flight or on the number of worker processes.

Eb/N0 bookkeeping: ``Eb = E_x' / (N_d * 2 * code_rate)`` where ``E_x'`` is the
mean energy of one transmit symbol including redundant carriers and the UW,
and ``sigma_n^2 = Eb / 10^(EbN0/10)`` per complex time-domain sample.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import NormalDist

import numpy as np
from scipy import stats

from . import coding
from .channel import (
    ChannelRealization,
    NoiseModel,
    complex_noise,
    draw_multipath,
    impulse_channel,
    load_snapshot,
)
from .core import GeneratorSet, SystemConfig, build_generator_set, energy_report, load_config
from .errors import ChannelResampleLimitExceeded, ConfigError, IoError, UnknownKind
from .estimators import build, sequential_lmmse_determine, sequential_lmmse_estimate
from .txrx import qpsk_demap, qpsk_map, receive, transmit

BATCH_SYMBOLS = 256
CODE_BLOCK_SYMBOLS = 8
INTERLEAVER_COLUMNS = 16
RESAMPLE_LIMIT = 1000
BITS_PER_SYMBOL = 2

HARNESS_KINDS = (
    "CI",
    "TDW",
    "BLUE_direct",
    "BLUE_reduced",
    "LMMSE_wiener",
    "LMMSE_direct",
    "LMMSE_reduced",
    "LMMSE_sequential",
)
ALIASES = {"BLUE": "BLUE_direct", "LMMSE": "LMMSE_direct"}
CODES = ("none", "r12")
WEIGHTINGS = ("variance", "uniform")
CSV_COLUMNS = ("estimator", "code", "channel", "ebn0_db", "bits", "errors", "ber", "ci_low", "ci_high")


def canonical_kind(name: str) -> str:
    kind = ALIASES.get(name, name)
    if kind not in HARNESS_KINDS:
        raise UnknownKind(f"unknown estimator {name!r}; choose from {', '.join(HARNESS_KINDS)}")
    return kind


# --------------------------------------------------------------------------
# specs and results


@dataclass(frozen=True)
class ChannelMode:
    kind: str  # awgn | snapshot | ensemble
    path: str | None = None
    count: int = 1
    tau_rms_s: float = 100e-9

    @property
    def label(self) -> str:
        if self.kind == "snapshot":
            return f"snapshot:{self.path}"
        if self.kind == "ensemble":
            return f"ensemble:{self.count}:{self.tau_rms_s:g}"
        return "awgn"


def parse_channel_mode(text: str) -> ChannelMode:
    """``awgn``, ``snapshot:PATH`` or ``ensemble:COUNT[:TAU_RMS_SECONDS]``."""
    text = text.strip()
    if text == "awgn":
        return ChannelMode("awgn")
    head, _, rest = text.partition(":")
    if head == "snapshot" and rest:
        return ChannelMode("snapshot", path=rest)
    if head == "ensemble" and rest:
        parts = rest.split(":")
        try:
            count = int(parts[0])
            tau = float(parts[1]) if len(parts) > 1 else 100e-9
        except ValueError:
            raise ConfigError(f"bad ensemble spec {text!r}") from None
        if count < 1 or len(parts) > 2:
            raise ConfigError(f"bad ensemble spec {text!r}")
        return ChannelMode("ensemble", count=count, tau_rms_s=tau)
    raise ConfigError(f"unknown channel mode {text!r}")


@dataclass(frozen=True)
class RunSpec:
    estimators: tuple[str, ...]
    ebn0_db: tuple[float, ...]
    channel: str = "awgn"
    code: str = "none"
    min_errors: int = 100
    max_bits: int = 10**6
    seed: int = 0
    config: str | None = None
    out: str | None = None
    workers: int = 1
    soft_weighting: str = "variance"  # or "uniform": ignore per-carrier variances in the decoder

    def __post_init__(self) -> None:
        if not self.estimators:
            raise ConfigError("estimator list is empty")
        if not self.ebn0_db:
            raise ConfigError("Eb/N0 grid is empty")
        object.__setattr__(self, "estimators", tuple(canonical_kind(k) for k in self.estimators))
        object.__setattr__(self, "ebn0_db", tuple(float(x) for x in self.ebn0_db))
        if self.code not in CODES:
            raise ConfigError(f"code must be one of {CODES}, got {self.code!r}")
        if self.min_errors < 1 or self.max_bits < 1:
            raise ConfigError("stop rule needs min_errors >= 1 and max_bits >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.soft_weighting not in WEIGHTINGS:
            raise ConfigError(f"soft_weighting must be one of {WEIGHTINGS}")
        parse_channel_mode(self.channel)

    @property
    def channel_mode(self) -> ChannelMode:
        return parse_channel_mode(self.channel)


def _split_list(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.replace(";", ",").split(",")) if t]


def parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in _split_list(text))
    except ValueError:
        raise ConfigError(f"bad number list {text!r}") from None


def parse_runspec(text: str, **overrides) -> RunSpec:
    """Read a ``[run]`` INI section; keyword overrides win over file values."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse run spec: {exc}") from exc
    if not cp.has_section("run"):
        raise ConfigError("run spec needs a [run] section")
    sec = cp["run"]
    known = {
        "estimators", "ebn0_db", "channel", "code", "min_errors", "max_bits", "seed", "config", "out", "workers",
        "soft_weighting",
    }
    extra = set(sec) - known
    if extra:
        raise ConfigError(f"unknown run spec keys: {', '.join(sorted(extra))}")
    kw: dict = {}
    try:
        if "estimators" in sec:
            kw["estimators"] = tuple(_split_list(sec["estimators"]))
        if "ebn0_db" in sec:
            kw["ebn0_db"] = parse_float_list(sec["ebn0_db"])
        for key in ("channel", "code", "config", "out", "soft_weighting"):
            if key in sec:
                kw[key] = sec[key].strip() or None
        for key in ("min_errors", "max_bits", "seed", "workers"):
            if key in sec:
                kw[key] = int(float(sec[key]))
    except ValueError as exc:
        raise ConfigError(f"bad run spec value: {exc}") from exc
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunSpec(**kw)
    except TypeError as exc:
        raise ConfigError(f"incomplete run spec: {exc}") from exc


def load_runspec(path: str | Path, **overrides) -> RunSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read run spec {path}: {exc}") from exc
    return parse_runspec(text, **overrides)


_Z95 = NormalDist().inv_cdf(0.975)


def wilson_interval(errors: int, n: int, z: float = _Z95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    p = errors / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # clamp so rounding never puts the estimate outside its own interval
    return max(0.0, min(p, center - half)), min(1.0, max(p, center + half))


@dataclass(frozen=True)
class BerResult:
    estimator: str
    ebn0_db: float
    bits_sent: int
    bit_errors: int
    code: str = "none"
    channel: str = "awgn"
    capped: bool = False  # stopped by max_bits before min_errors was reached
    resampled: int = 0  # null channel draws replaced in ensemble mode

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0

    @property
    def wilson_ci_95(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.bits_sent)


def ebn0_to_sigma_n(ebn0_db: float, config: SystemConfig, gen: GeneratorSet, code_rate: float = 1.0) -> float:
    """Per-sample noise variance for a target Eb/N0 (see module docstring)."""
    e_x = energy_report(gen, config).E_total
    eb = e_x / (config.N_d * BITS_PER_SYMBOL * code_rate)
    return eb / 10 ** (ebn0_db / 10)


# --------------------------------------------------------------------------
# simulation context


@dataclass(eq=False)
class _Context:
    config: SystemConfig
    gen: GeneratorSet
    channels: list[ChannelRealization]
    kinds: tuple[str, ...]
    coded: bool
    seed: int
    ebn0_db: tuple[float, ...]
    soft_weighting: str = "variance"
    _cache: dict = field(default_factory=dict)

    @property
    def symbols_per_frame(self) -> int:
        return CODE_BLOCK_SYMBOLS if self.coded else 1

    @property
    def frames_per_batch(self) -> int:
        return BATCH_SYMBOLS // self.symbols_per_frame

    @property
    def info_bits_per_frame(self) -> int:
        coded_bits = BITS_PER_SYMBOL * self.config.N_d * self.symbols_per_frame
        return coded_bits // 2 - coding.MEMORY if self.coded else coded_bits

    def sigma_n_sq(self, point: int) -> float:
        rate = 0.5 if self.coded else 1.0
        return ebn0_to_sigma_n(self.ebn0_db[point], self.config, self.gen, rate)

    def equalizers(self, point: int) -> list[dict]:
        """Per-channel ``{kind: (estimate_fn, variances)}``, built once per point."""
        if point not in self._cache:
            self._cache.clear()
            noise = NoiseModel(self.sigma_n_sq(point), self.config.N)
            self._cache[point] = [
                {kind: _make_estimator(kind, ch, self.gen, noise) for kind in self.kinds} for ch in self.channels
            ]
        return self._cache[point]


def _make_estimator(kind: str, channel: ChannelRealization, gen: GeneratorSet, noise: NoiseModel):
    if kind == "LMMSE_sequential":
        seq = sequential_lmmse_determine(channel, gen, noise)
        return (lambda y: sequential_lmmse_estimate(seq, y)), np.real(np.diag(seq.C_ee)).copy()
    eq = build(kind, channel, gen, noise)
    return eq.apply, eq.variances


def _draw_ensemble(mode: ChannelMode, config: SystemConfig, seed: int) -> tuple[list[ChannelRealization], int]:
    children = np.random.SeedSequence([seed]).spawn(mode.count + RESAMPLE_LIMIT)
    pool, resampled, nxt = [], 0, 0
    while len(pool) < mode.count:
        if nxt >= len(children):
            raise ChannelResampleLimitExceeded(f"more than {RESAMPLE_LIMIT} null channel draws")
        ch = draw_multipath(mode.tau_rms_s, config, children[nxt])
        nxt += 1
        if ch.has_null:
            resampled += 1
            continue
        pool.append(ch)
    return pool, resampled


def _channels_for(mode: ChannelMode, config: SystemConfig, seed: int) -> tuple[list[ChannelRealization], int]:
    if mode.kind == "awgn":
        return [impulse_channel(config)], 0
    if mode.kind == "snapshot":
        return [load_snapshot(mode.path, config)], 0
    return _draw_ensemble(mode, config, seed)


# --------------------------------------------------------------------------
# one batch


def _simulate_batch(ctx: _Context, point: int, batch: int, kinds, per_carrier: bool = False) -> dict:
    """Error counts per frame (and optionally per data carrier) for ``kinds``."""
    cfg = ctx.config
    rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, point + 1, batch]))
    n_frames = ctx.frames_per_batch
    spf = ctx.symbols_per_frame
    n_sym = n_frames * spf
    bits_per_sym = BITS_PER_SYMBOL * cfg.N_d

    info = rng.integers(0, 2, size=(n_frames, ctx.info_bits_per_frame), dtype=np.int8)
    if ctx.coded:
        coded = coding.interleave(coding.conv_encode(info), INTERLEAVER_COLUMNS)
        sym_bits = coded.reshape(n_sym, bits_per_sym)
    else:
        sym_bits = info
    D = qpsk_map(sym_bits, cfg.sigma_d_sq)
    x = transmit(D, ctx.gen)
    s_n = ctx.sigma_n_sq(point)
    noise = complex_noise(rng, x.shape, s_n)

    n_ch = len(ctx.channels)
    sym_index = batch * n_sym + np.arange(n_sym)
    ch_index = sym_index % n_ch
    eqs = ctx.equalizers(point)
    X = np.fft.fft(x, axis=1)
    Y = np.empty((n_sym, cfg.N_d + cfg.N_r), complex)
    groups = [(c, np.flatnonzero(ch_index == c)) for c in range(n_ch)] if n_ch > 1 else [(0, slice(None))]
    for c, rows in groups:
        ch = ctx.channels[c]
        y_time = np.fft.ifft(X[rows] * ch.H_freq, axis=1) + noise[rows]
        Y[rows] = receive(y_time, ch, ctx.gen)

    out = {}
    for kind in kinds:
        d_hat = np.empty((n_sym, cfg.N_d), complex)
        var = np.empty((n_sym, cfg.N_d))
        for c, rows in groups:
            fn, v = eqs[c][kind]
            d_hat[rows] = fn(Y[rows])
            var[rows] = v if ctx.soft_weighting == "variance" else 1.0
        if ctx.coded:
            llr = coding.soft_demap_qpsk(d_hat, var, cfg.sigma_d_sq).llr.reshape(n_frames, -1)
            decided = coding.viterbi_decode(coding.deinterleave(llr, INTERLEAVER_COLUMNS))
            err = decided != info
        else:
            err = qpsk_demap(d_hat) != info
        entry = {"frame_errors": err.sum(axis=1)}
        if per_carrier and not ctx.coded:
            entry["carrier_errors"] = err.reshape(n_sym, cfg.N_d, BITS_PER_SYMBOL).sum(axis=(0, 2))
        out[kind] = entry
    return out


# worker-process state, installed once per pool
_WORKER_CTX: _Context | None = None


def _worker_init(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_batch(point: int, batch: int, kinds) -> dict:
    return _simulate_batch(_WORKER_CTX, point, batch, kinds)


# --------------------------------------------------------------------------
# public entry points


def _prepare(spec: RunSpec) -> tuple[_Context, ChannelMode, int]:
    config = load_config(spec.config)
    gen = build_generator_set(config)
    mode = spec.channel_mode
    channels, resampled = _channels_for(mode, config, spec.seed)
    ctx = _Context(
        config, gen, channels, spec.estimators, spec.code == "r12", spec.seed, spec.ebn0_db, spec.soft_weighting
    )
    return ctx, mode, resampled


def run_ber(spec: RunSpec) -> list[BerResult]:
    """Sweep every (estimator, Eb/N0) pair until the stop rule fires.

    Results are ordered by grid point, then by estimator as listed in ``spec``.
    """
    ctx, mode, resampled = _prepare(spec)
    fb = ctx.info_bits_per_frame
    pool = None
    if spec.workers > 1:
        pool = ProcessPoolExecutor(
            spec.workers,
            mp_context=multiprocessing.get_context("spawn"),
            initializer=_worker_init,
            initargs=(replace(ctx, _cache={}),),
        )
    results: list[BerResult] = []
    try:
        for point, ebn0 in enumerate(ctx.ebn0_db):
            ctx.equalizers(point)  # surface build errors before any work
            state = {k: [0, 0] for k in ctx.kinds}
            done: dict[str, bool] = {}
            batch = 0
            while len(done) < len(ctx.kinds):
                active = tuple(k for k in ctx.kinds if k not in done)
                window = range(batch, batch + spec.workers)
                if pool is None:
                    outs = [_simulate_batch(ctx, point, b, active) for b in window]
                else:
                    outs = list(pool.map(_worker_batch, [point] * len(window), window, [active] * len(window)))
                for out in outs:
                    for kind in active:
                        if kind in done:
                            continue
                        st = state[kind]
                        for e in out[kind]["frame_errors"]:
                            st[0] += fb
                            st[1] += int(e)
                            if st[1] >= spec.min_errors:
                                done[kind] = False
                                break
                            if st[0] >= spec.max_bits:
                                done[kind] = True
                                break
                batch += spec.workers
            for kind in ctx.kinds:
                bits, errs = state[kind]
                results.append(BerResult(kind, ebn0, bits, errs, spec.code, mode.label, done[kind], resampled))
    finally:
        if pool is not None:
            pool.shutdown()
    return results


@dataclass(frozen=True, eq=False)
class SubcarrierDiagnostics:
    """Per data carrier (sorted order) diagnostics for an estimator pair.

    Variances are ``diag(C_ee)`` divided by the per-carrier noise variance
    ``N sigma_n^2``, so a flat unit channel gives 1 for channel inversion.
    """

    estimators: tuple[str, str]
    ebn0_db: float
    carriers: np.ndarray
    variance: np.ndarray  # (2, N_d)
    ber: np.ndarray  # (2, N_d)
    bits_per_carrier: int

    @property
    def ber_difference(self) -> np.ndarray:
        """Second estimator minus first."""
        return self.ber[1] - self.ber[0]

    @property
    def spearman(self) -> tuple[float, float]:
        """Rank correlation of analytic variance and empirical BER per estimator."""
        return tuple(float(stats.spearmanr(v, b)[0]) for v, b in zip(self.variance, self.ber))

    def to_text(self) -> str:
        a, b = self.estimators
        lines = [f"carrier,var_{a},var_{b},ber_{a},ber_{b},ber_diff"]
        for i, k in enumerate(self.carriers):
            lines.append(
                f"{k},{self.variance[0, i]!r},{self.variance[1, i]!r},"
                f"{self.ber[0, i]!r},{self.ber[1, i]!r},{self.ber_difference[i]!r}"
            )
        return "\n".join(lines) + "\n"


def subcarrier_diagnostics(
    estimators: tuple[str, str],
    channel: ChannelRealization,
    ebn0_db: float,
    bits: int,
    config: SystemConfig | None = None,
    seed: int = 0,
) -> SubcarrierDiagnostics:
    """Analytic variances and uncoded per-carrier BER on a fixed channel.

    ``bits`` is the total number of data bits per estimator, rounded up to
    whole batches.
    """
    config = load_config() if config is None else config
    kinds = tuple(canonical_kind(k) for k in estimators)
    if len(kinds) != 2:
        raise ConfigError("diagnostics compare exactly two estimators")
    gen = build_generator_set(config)
    ctx = _Context(config, gen, [channel], tuple(dict.fromkeys(kinds)), False, seed, (float(ebn0_db),))
    eqs = ctx.equalizers(0)[0]
    s_v = config.N * ctx.sigma_n_sq(0)
    variance = np.stack([eqs[k][1] / s_v for k in kinds])
    bits_per_batch = BATCH_SYMBOLS * BITS_PER_SYMBOL * config.N_d
    n_batches = max(1, -(-bits // bits_per_batch))
    errs = {k: np.zeros(config.N_d, np.int64) for k in ctx.kinds}
    for b in range(n_batches):
        out = _simulate_batch(ctx, 0, b, ctx.kinds, per_carrier=True)
        for k in ctx.kinds:
            errs[k] += out[k]["carrier_errors"]
    per_carrier_bits = n_batches * BATCH_SYMBOLS * BITS_PER_SYMBOL
    ber = np.stack([errs[k] / per_carrier_bits for k in kinds])
    carriers = config.sorted_carriers[: config.N_d].copy()
    return SubcarrierDiagnostics(kinds, float(ebn0_db), carriers, variance, ber, per_carrier_bits)


# --------------------------------------------------------------------------
# output


def format_csv(results: list[BerResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        lo, hi = r.wilson_ci_95
        w.writerow([r.estimator, r.code, r.channel, repr(r.ebn0_db), r.bits_sent, r.bit_errors, repr(r.ber), repr(lo), repr(hi)])
    return buf.getvalue()


def _write(text: str, path: str | Path | None) -> str:
    if path is not None:
        try:
            Path(path).write_text(text)
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from exc
    return text


def emit_csv(results: list[BerResult], path: str | Path | None = None) -> str:
    """CSV text with the fixed column set; written to ``path`` when given."""
    return _write(format_csv(results), path)


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for row in rows:
        for key in ("ebn0_db", "ber", "ci_low", "ci_high"):
            row[key] = float(row[key])
        for key in ("bits", "errors"):
            row[key] = int(row[key])
    return rows


def emit_plotdata(results: list[BerResult], path: str | Path | None = None) -> str:
    """JSON with one series per (estimator, code, channel), points in grid order."""
    series: dict[tuple, dict] = {}
    for r in results:
        key = (r.estimator, r.code, r.channel)
        s = series.setdefault(
            key,
            {"estimator": r.estimator, "code": r.code, "channel": r.channel,
             "ebn0_db": [], "ber": [], "ci_low": [], "ci_high": [], "capped": []},
        )
        lo, hi = r.wilson_ci_95
        s["ebn0_db"].append(r.ebn0_db)
        s["ber"].append(r.ber)
        s["ci_low"].append(lo)
        s["ci_high"].append(hi)
        s["capped"].append(r.capped)
    return _write(json.dumps({"series": list(series.values())}, indent=1) + "\n", path)
