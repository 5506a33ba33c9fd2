import itertools
import math

import numpy as np
import pytest

from uwofdm.core import (
    DEFAULT_REDUNDANT_INDICES,
    SystemConfig,
    build_generator_set,
    dft_matrix,
    energy_report,
    format_config,
    idft_matrix,
    insertion_matrix,
    load_config,
    optimize_redundant_placement,
    default_config,
    parse_config,
    permutation_matrix,
    redundant_energy,
)
from uwofdm.errors import ConfigError, DimensionMismatch, ParseError, SearchSpaceTooLarge, SingularM22

from conftest import random_qpsk


def _brute_T(cfg):
    """Solve the zero-tail condition column by column from explicit sums."""
    N, k0 = cfg.N, cfg.N - cfg.N_u
    tail = range(k0, N)

    def row(n, carriers):
        return [np.exp(2j * np.pi * n * k / N) / N for k in carriers]

    A = np.array([row(n, cfg.redundant_indices) for n in tail])
    Bm = np.array([row(n, cfg.data_indices) for n in tail])
    return np.linalg.solve(A, -Bm)


def test_bundled_config_matches_reference_setup():
    a, b = load_config(), default_config()
    for f in ("N", "N_u", "N_d", "N_r", "N_z", "zero_indices", "redundant_indices", "sigma_d_sq"):
        assert getattr(a, f) == getattr(b, f)
    assert np.array_equal(a.uw, b.uw)


def test_index_bookkeeping(cfg):
    assert len(cfg.data_indices) == 36
    assert cfg.redundant_indices == DEFAULT_REDUNDANT_INDICES
    assert sorted(cfg.sorted_carriers) == list(cfg.used_indices)
    used = np.array(cfg.used_indices)
    assert np.array_equal(used[cfg.sort_order], cfg.sorted_carriers)


@pytest.mark.parametrize(
    "kw",
    [
        dict(N_r=15),
        dict(redundant_indices=(0,) + DEFAULT_REDUNDANT_INDICES[1:]),
        dict(redundant_indices=(2, 2) + DEFAULT_REDUNDANT_INDICES[2:]),
        dict(uw=np.ones(3)),
        dict(N=65),
    ],
)
def test_invalid_configs_raise(kw):
    base = dict(
        N=64, N_u=16, N_d=36, N_r=16, N_z=12,
        zero_indices=default_config().zero_indices, redundant_indices=DEFAULT_REDUNDANT_INDICES,
    )
    base.update(kw)
    with pytest.raises(DimensionMismatch):
        SystemConfig(**base)


def test_config_round_trip_with_uw(rng):
    uw = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    cfg = default_config(uw=uw, sigma_d_sq=2.0)
    back = parse_config(format_config(cfg))
    assert back.redundant_indices == cfg.redundant_indices
    assert back.sigma_d_sq == 2.0
    np.testing.assert_array_equal(back.uw, cfg.uw)


@pytest.mark.parametrize("text", ["", "[system]\nN = 64\n", "[system]\nN = x\n"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_dft_matrices_are_inverse():
    F, Fi = dft_matrix(16), idft_matrix(16)
    np.testing.assert_allclose(F @ Fi, np.eye(16), atol=1e-12)
    x = np.arange(16) + 1j
    np.testing.assert_allclose(F @ x, np.fft.fft(x), atol=1e-10)


def test_insertion_and_permutation(cfg):
    B, P = insertion_matrix(cfg), permutation_matrix(cfg)
    assert B.shape == (64, 52) and P.shape == (52, 52)
    assert np.array_equal(B.sum(axis=0), np.ones(52))
    assert not B[list(cfg.zero_indices)].any()
    c = np.arange(52.0)
    placed = B @ P @ c
    assert np.array_equal(placed[cfg.sorted_carriers], c)


def test_T_matches_brute_force_small(small_cfg, small_gen):
    np.testing.assert_allclose(small_gen.T, _brute_T(small_cfg), atol=1e-12)


def test_T_matches_brute_force_default(cfg, gen):
    np.testing.assert_allclose(gen.T, _brute_T(cfg), atol=1e-9)


def test_zero_tail_and_constraint(cfg, gen, rng):
    assert np.abs(gen.M21 + gen.M22 @ gen.T).max() <= 1e-10
    d = random_qpsk(rng, 36)
    x = gen.M @ gen.G_s @ d
    assert np.abs(x[-16:]).max() <= 1e-10
    np.testing.assert_allclose(gen.G_s[:36], np.eye(36))


def test_energy_report_split(cfg, gen):
    rep = energy_report(gen)
    assert rep.E_data == pytest.approx(36 / 64)
    assert rep.trace_TTH == pytest.approx(np.sum(np.abs(gen.T) ** 2))
    assert rep.E_redundant == pytest.approx(rep.trace_TTH / 64)
    assert rep.E_uw == 0
    # frozen value for the bundled placement
    assert rep.trace_TTH == pytest.approx(36.565575, abs=5e-6)


def test_energy_report_matches_monte_carlo(cfg, gen, rng):
    d = random_qpsk(rng, (20000, 36))
    X = np.zeros((20000, 64), complex)
    X[:, cfg.sorted_carriers] = np.hstack([d, d @ gen.T.T])
    e = np.mean(np.sum(np.abs(np.fft.ifft(X, axis=1)) ** 2, axis=1))
    assert e == pytest.approx(energy_report(gen).E_total, rel=0.01)


def test_uw_energy_counted(rng):
    uw = 0.1 * np.ones(16)
    rep = energy_report(build_generator_set(default_config(uw=uw)))
    assert rep.E_uw == pytest.approx(0.16)
    assert rep.E_total == pytest.approx(rep.E_data + rep.E_redundant + 0.16)


def test_contiguous_tail_never_singular(small_cfg):
    # the tail block is a Vandermonde matrix in distinct roots of unity
    for subset in itertools.combinations(small_cfg.used_indices, small_cfg.N_r):
        assert np.isfinite(redundant_energy(small_cfg, subset))


def test_singular_m22_raises():
    from uwofdm.core import _solve_T

    M22 = np.array([[1.0, 2.0], [2.0, 4.0]], complex)
    with pytest.raises(SingularM22):
        _solve_T(np.ones((2, 3), complex), M22)


def test_default_set_is_swap_descent_fixed_point(cfg):
    trace = []
    out = optimize_redundant_placement(cfg, trace=trace)
    assert out.redundant_indices == cfg.redundant_indices
    assert len(trace) == 1


def _exhaustive_oracle(cfg):
    best, best_set = math.inf, None
    for subset in itertools.combinations(cfg.used_indices, cfg.N_r):
        e = redundant_energy(cfg, subset)
        if e < best - 1e-12:
            best, best_set = e, subset
    return best, best_set


def test_exhaustive_small_matches_oracle(small_cfg):
    best, best_set = _exhaustive_oracle(small_cfg)
    out = optimize_redundant_placement(small_cfg, "exhaustive")
    assert redundant_energy(small_cfg, out.redundant_indices) == pytest.approx(best)


def test_swap_descent_never_increases(small_cfg):
    trace = []
    out = optimize_redundant_placement(small_cfg.with_redundant((1, 2)), trace=trace)
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    best, _ = _exhaustive_oracle(small_cfg)
    assert trace[-1] >= best - 1e-12
    assert redundant_energy(small_cfg, out.redundant_indices) == pytest.approx(trace[-1])


def test_exhaustive_cap(cfg):
    with pytest.raises(SearchSpaceTooLarge):
        optimize_redundant_placement(cfg, "exhaustive")


def test_unknown_strategy(cfg):
    with pytest.raises(ConfigError):
        optimize_redundant_placement(cfg, "annealing")
