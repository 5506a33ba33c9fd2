import itertools

import numpy as np
import pytest

from uwofdm.channel import ChannelRealization, NoiseModel, apply_channel, impulse_channel
from uwofdm.core import build_generator_set, default_config
from uwofdm.errors import DimensionMismatch, OddBitCount
from uwofdm.txrx import (
    BitMapping,
    generate_frame,
    prepare_receive,
    qpsk_demap,
    qpsk_map,
    receive,
    transmit,
)

from conftest import random_qpsk


def test_qpsk_examples():
    np.testing.assert_allclose(qpsk_map([0, 0]), [np.sqrt(0.5) * (1 + 1j)])
    np.testing.assert_allclose(qpsk_map([0, 0, 1, 1], 2.0), [1 + 1j, -1 - 1j])
    np.testing.assert_allclose(qpsk_map([0, 1, 1, 0], 2.0), [1 - 1j, -1 + 1j])


def test_qpsk_round_trip_all_patterns():
    for pattern in itertools.product((0, 1), repeat=4):
        bits = np.array(pattern)
        assert np.array_equal(qpsk_demap(qpsk_map(bits)), bits)


def test_qpsk_batched_shape():
    bits = np.zeros((3, 72), dtype=np.int8)
    assert qpsk_map(bits).shape == (3, 36)


def test_odd_bits():
    with pytest.raises(OddBitCount):
        qpsk_map([1, 0, 1])


@pytest.mark.parametrize("s2", [0.5, 1.0, 3.0])
def test_constellation_energy(s2):
    pts = BitMapping(s2).constellation
    assert pts.size == 4
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(s2, abs=1e-12)
    # Gray: horizontal and vertical neighbours differ in one bit
    labels = qpsk_demap(pts).reshape(4, 2)
    for i, j in itertools.combinations(range(4), 2):
        if np.isclose(abs(pts[i] - pts[j]), 2 * np.sqrt(s2 / 2)):
            assert np.sum(labels[i] != labels[j]) == 1


def test_zero_data_zero_uw(gen):
    assert not generate_frame(np.zeros(36), gen).x_prime.any()


def test_zero_tail(gen, rng):
    f = generate_frame(random_qpsk(rng, 36), gen)
    assert np.abs(f.x_prime[-16:]).max() <= 1e-10


def test_uw_forms_the_tail(rng):
    uw = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    g = build_generator_set(default_config(uw=uw))
    f = generate_frame(random_qpsk(rng, 36), g)
    np.testing.assert_allclose(f.x_prime[-16:], uw, atol=1e-10)


def _direct_frame(cfg, gen, d):
    """Assemble the spectrum carrier by carrier and apply an O(N^2) inverse DFT."""
    N = cfg.N
    r = gen.T @ d
    spectrum = np.zeros(N, complex)
    for i, k in enumerate(cfg.data_indices):
        spectrum[k] = d[i]
    for i, k in enumerate(cfg.redundant_indices):
        spectrum[k] = r[i]
    x = np.array([sum(spectrum[k] * np.exp(2j * np.pi * k * n / N) for k in range(N)) / N for n in range(N)])
    x[N - cfg.N_u :] += cfg.uw
    return x


def test_small_frame_matches_direct_oracle(small_cfg, small_gen, rng):
    d = random_qpsk(rng, small_cfg.N_d)
    np.testing.assert_allclose(generate_frame(d, small_gen).x_prime, _direct_frame(small_cfg, small_gen, d), atol=1e-12)


def test_batched_transmit_matches_single(gen, rng):
    D = random_qpsk(rng, (4, 36))
    X = transmit(D, gen)
    for row, d in zip(X, D):
        np.testing.assert_allclose(row, generate_frame(d, gen).x_prime, atol=1e-13)


def test_frame_dimension_checks(gen):
    with pytest.raises(DimensionMismatch):
        generate_frame(np.zeros(35), gen)
    with pytest.raises(DimensionMismatch):
        prepare_receive(np.zeros(63), impulse_channel(gen.config), gen)


def test_identity_channel_gives_codeword(cfg, gen, rng):
    d = random_qpsk(rng, 36)
    rx = prepare_receive(generate_frame(d, gen).x_prime, impulse_channel(cfg), gen)
    np.testing.assert_allclose(rx.y, gen.G_s @ d, atol=1e-9)
    np.testing.assert_array_equal(rx.y, rx.y_c[cfg.sort_order])


def _time_conv(x, h):
    N = x.size
    return np.array([sum(h[m] * x[(n - m) % N] for m in range(N)) for n in range(N)])


def test_multipath_noiseless_model(cfg, gen, rng):
    uw = rng.standard_normal(16) + 0j
    cfg_u = default_config(uw=uw)
    gen_u = build_generator_set(cfg_u)
    taps = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / 6
    ch = ChannelRealization.from_taps(taps, cfg_u)
    d = random_qpsk(rng, 36)
    y_r = _time_conv(generate_frame(d, gen_u).x_prime, ch.h_c)
    rx = prepare_receive(y_r, ch, gen_u)
    np.testing.assert_allclose(rx.y, ch.H_s * (gen_u.G_s @ d), atol=1e-8 * np.linalg.norm(d))


def test_uw_influence_cancels(rng):
    d = random_qpsk(rng, 36)
    taps = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / 6
    ys = []
    for u in (np.zeros(16), rng.standard_normal(16) + 1j * rng.standard_normal(16)):
        cfg_u = default_config(uw=u)
        gen_u = build_generator_set(cfg_u)
        ch = ChannelRealization.from_taps(taps, cfg_u)
        y_r = apply_channel(generate_frame(d, gen_u).x_prime, ch, NoiseModel(0.01, 64), seed=5)
        ys.append(prepare_receive(y_r, ch, gen_u).y)
    np.testing.assert_allclose(ys[0], ys[1], atol=1e-10)


def test_linear_model_decomposition(cfg, gen, rng):
    d = random_qpsk(rng, 36)
    taps = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / 6
    ch = ChannelRealization.from_taps(taps, cfg)
    n = 0.1 * (rng.standard_normal(64) + 1j * rng.standard_normal(64))
    y_r = _time_conv(generate_frame(d, gen).x_prime, ch.h_c) + n
    y = prepare_receive(y_r, ch, gen).y
    np.testing.assert_allclose(y - ch.H_s * (gen.G_s @ d), np.fft.fft(n)[cfg.sorted_carriers], atol=1e-9)


def test_receive_noise_covariance(cfg, gen):
    s2 = 0.02
    Y = apply_channel(np.zeros((100000, 64), complex), impulse_channel(cfg), NoiseModel(s2, 64), seed=9)
    v = receive(Y, impulse_channel(cfg), gen)
    assert np.mean(np.abs(v) ** 2, axis=0) == pytest.approx(np.full(52, 64 * s2), rel=0.03)
    C = v.T @ v.conj() / v.shape[0]
    off = C - np.diag(np.diag(C))
    assert np.abs(off).max() < 0.03 * 64 * s2


@pytest.mark.parametrize("N", [8, 64])
def test_dft_round_trip(N, rng):
    x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    np.testing.assert_allclose(np.fft.ifft(np.fft.fft(x)), x, atol=1e-10)


def test_batched_receive_matches_single(cfg, gen, rng):
    taps = (rng.standard_normal(16) + 1j * rng.standard_normal(16)) / 6
    ch = ChannelRealization.from_taps(taps, cfg)
    Yr = rng.standard_normal((3, 64)) + 1j * rng.standard_normal((3, 64))
    batched = receive(Yr, ch, gen)
    for row, yr in zip(batched, Yr):
        np.testing.assert_allclose(row, prepare_receive(yr, ch, gen).y, atol=1e-12)
