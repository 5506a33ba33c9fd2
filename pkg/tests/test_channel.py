import numpy as np
import pytest

from uwofdm.channel import (
    ChannelRealization,
    NoiseModel,
    apply_channel,
    cyclic_convolve,
    draw_multipath,
    draw_taps,
    exponential_profile,
    impulse_channel,
    is_mild,
    load_snapshot,
    notch_carriers,
    parse_snapshot,
    power_db,
    save_snapshot,
)
from uwofdm.core import dft_matrix, idft_matrix
from uwofdm.errors import InvalidDelaySpread, LengthExceedsN, ParseError


def _conv_oracle(x, h):
    N = x.size
    return np.array([sum(h[m] * x[(n - m) % N] for m in range(N)) for n in range(N)])


def test_realization_fields(cfg, rng):
    ch = draw_multipath(100e-9, cfg, 3)
    np.testing.assert_allclose(ch.H_freq, dft_matrix(64) @ ch.h_c, atol=1e-10)
    np.testing.assert_array_equal(ch.H_s, np.concatenate([ch.H_s1, ch.H_s2]))
    np.testing.assert_array_equal(ch.H_s, ch.H_d[cfg.sort_order])
    assert not ch.h_c[cfg.N_u :].any()
    assert np.sum(np.abs(ch.h_c) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_unit_energy_all_draws(cfg):
    rng = np.random.default_rng(0)
    g = draw_taps(100e-9, cfg, rng, size=500)
    np.testing.assert_allclose(np.sum(np.abs(g) ** 2, axis=1), 1.0, atol=1e-12)


def test_impulse_limit(cfg):
    ch = draw_multipath(100e-9, cfg, 0, impulse_limit=True)
    np.testing.assert_allclose(ch.H_freq, np.ones(64))


def test_seed_determinism(cfg):
    a, b = draw_multipath(100e-9, cfg, 42), draw_multipath(100e-9, cfg, 42)
    assert np.array_equal(a.h_c, b.h_c)
    assert not np.array_equal(a.h_c, draw_multipath(100e-9, cfg, 43).h_c)


def test_profile_decay(cfg):
    p = exponential_profile(100e-9, cfg)
    assert p.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(p[1:] / p[:-1], np.exp(-0.5))


def test_raw_tap_power_ratio(cfg):
    rng = np.random.default_rng(7)
    g = draw_taps(100e-9, cfg, rng, size=10000, normalize=False)
    p = np.mean(np.abs(g) ** 2, axis=0)
    np.testing.assert_allclose(p[1:] / p[:-1], np.exp(-0.5), rtol=0.05)


def test_normalized_draws_follow_decay_law(cfg):
    # per-draw normalization skews the leading taps; the fitted slope stays close
    rng = np.random.default_rng(7)
    g = draw_taps(100e-9, cfg, rng, size=10000)
    p = np.mean(np.abs(g) ** 2, axis=0)
    slope = np.polyfit(np.arange(16), np.log(p), 1)[0]
    assert np.exp(slope) == pytest.approx(np.exp(-0.5), rel=0.05)


@pytest.mark.parametrize("tau", [0.0, -1e-9])
def test_invalid_delay_spread(cfg, tau):
    with pytest.raises(InvalidDelaySpread):
        draw_multipath(tau, cfg, 0)


def test_apply_channel_identity(cfg, rng):
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    np.testing.assert_allclose(apply_channel(x, impulse_channel(cfg), NoiseModel(0.0, 64)), x, atol=1e-12)


def test_apply_channel_matches_time_domain(cfg, rng):
    x = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    ch = draw_multipath(100e-9, cfg, 11)
    out = apply_channel(x, ch, NoiseModel(0.0, 64))
    np.testing.assert_allclose(out, _conv_oracle(x, ch.h_c), atol=1e-10)
    np.testing.assert_allclose(cyclic_convolve(x, ch.h_c), out, atol=1e-12)


def test_noise_only_variance(cfg):
    y = apply_channel(np.zeros((1000, 64)), impulse_channel(cfg), NoiseModel(0.3, 64), seed=1)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(0.3, rel=0.03)
    assert abs(np.mean(y**2)) < 0.01  # circular symmetry


def test_noise_model():
    assert NoiseModel(0.25, 64).sigma_v_sq == 16.0
    with pytest.raises(ValueError):
        NoiseModel(-1.0, 64)


def test_diagonalization_small(small_cfg, rng):
    h = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    Hc = np.array([[h[(n - m) % 8] for m in range(8)] for n in range(8)])
    D = dft_matrix(8) @ Hc @ idft_matrix(8)
    assert np.abs(D - np.diag(np.diag(D))).max() <= 1e-10
    np.testing.assert_allclose(np.diag(D), dft_matrix(8) @ h, atol=1e-10)


def test_snapshot_round_trip(cfg, tmp_path):
    ch = draw_multipath(100e-9, cfg, 5)
    save_snapshot(ch, tmp_path / "s.txt", comment="draw 5")
    back = load_snapshot(tmp_path / "s.txt", cfg)
    assert np.array_equal(back.h_c, ch.h_c)
    assert (tmp_path / "s.txt").read_text().startswith("# draw 5")


def test_snapshot_errors(cfg, tmp_path):
    with pytest.raises(LengthExceedsN):
        parse_snapshot("\n".join(["1 0"] * 65), cfg)
    with pytest.raises(ParseError):
        parse_snapshot("1 0 0\n", cfg)
    with pytest.raises(ParseError):
        parse_snapshot("# only a comment\n", cfg)
    with pytest.raises(ParseError):
        parse_snapshot("1 x\n", cfg)
    with pytest.raises(ParseError):
        load_snapshot(tmp_path / "missing.txt", cfg)


def test_impulse_file(cfg):
    ch = parse_snapshot("1.0 0.0\n", cfg)
    np.testing.assert_allclose(ch.H_freq, np.ones(64))


def test_builtin_snapshot_signatures(cfg, snap_a, snap_b):
    assert is_mild(snap_a)
    assert power_db(snap_a).min() > -10
    pos = notch_carriers(snap_b, cfg)
    assert pos is not None
    d_pos, r_pos = pos
    p = power_db(snap_b)
    assert d_pos < cfg.N_d <= r_pos
    assert p[d_pos] <= -25 and p[r_pos] <= -25
    assert np.count_nonzero(p <= -25) == 2
    for ch in (snap_a, snap_b):
        assert not ch.h_c[cfg.N_u :].any()
        assert np.sum(np.abs(ch.h_c) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_has_null(cfg):
    # H[k] = 1 + t1 exp(-j 2 pi k / N) vanishes at k = 1
    taps = np.array([1.0, -np.exp(2j * np.pi / 64)])
    ch = ChannelRealization.from_taps(taps, cfg)
    assert abs(ch.H_freq[1]) < 1e-14
    assert ch.has_null
    assert not impulse_channel(cfg).has_null
