import numpy as np
import pytest

from sgeq.errors import ArgumentError
from sgeq.framing import WindowSpec, make_kbd_window, overlap_add, segment
from sgeq.metrics import si_sdr
from sgeq.shapegain import (
    GainEnvelope,
    deequalize,
    equalize,
    frame_gains,
    normalize_frames,
    silence_mask,
    silence_threshold,
)

SPEC = WindowSpec()


def test_frame_gains_are_l2_norms(rng):
    x = rng.standard_normal(5000)
    grid = segment(x, SPEC)
    env = frame_gains(grid)
    np.testing.assert_allclose(env.gains, np.sqrt((grid.frames ** 2).sum(axis=1)))


def test_normalized_frames_have_unit_norm(rng):
    grid = segment(rng.standard_normal(5000), SPEC)
    out = normalize_frames(grid, frame_gains(grid))
    np.testing.assert_allclose(np.linalg.norm(out.frames, axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("alpha_db", [-12, -6, 6, 12])
def test_equalized_waveform_is_gain_invariant(alpha_db, rng):
    x = rng.standard_normal(8000) * np.linspace(0.1, 1.0, 8000)
    c = 10 ** (alpha_db / 20)
    ref, scaled = equalize(x, SPEC), equalize(c * x, SPEC)
    assert np.max(np.abs(scaled.samples - ref.samples)) <= 1e-9
    np.testing.assert_allclose(scaled.envelope.gains, c * ref.envelope.gains, rtol=1e-12)


def test_equalize_removes_mean(rng):
    x = rng.standard_normal(4000) + 0.3
    eq = equalize(x, SPEC)
    assert eq.mean_removed == pytest.approx(np.mean(x))
    np.testing.assert_allclose(equalize(x - np.mean(x), SPEC).samples, eq.samples, atol=1e-12)


def test_round_trip_exact_for_hop_periodic_signal(rng):
    # every interior frame is identical, so all interior gains coincide
    period = rng.standard_normal(SPEC.hop)
    x = np.tile(period, 20)
    x -= x.mean()
    eq = equalize(x, SPEC)
    y = deequalize(eq.samples, eq.envelope)
    interior = slice(SPEC.length, x.size - SPEC.length)
    assert np.max(np.abs(y[interior] - x[interior])) <= 1e-9


def test_two_frame_reconstruction_factor():
    # one hop with gains g1, g2 reconstructs to (a g1 + b g2)(a/g1 + b/g2) times the input,
    # with a, b the squared window halves
    w = make_kbd_window(SPEC)
    a, b = w[320:] ** 2, w[:320] ** 2
    x = np.zeros(1280)
    x[320:640] = 1.0
    x[640:960] = 4.0  # gain ratio across the boundary
    x[960:] = 4.0
    grid = segment(x, SPEC)
    env = frame_gains(grid)
    eq = normalize_frames(grid, env)
    y = deequalize(overlap_add(eq), env)
    g1, g2 = env.gains[1], env.gains[2]
    seg = slice(320, 640)  # covered by frames 1 and 2 (after the one-hop pad)
    factor = (a * g1 + b * g2) * (a / g1 + b / g2)
    np.testing.assert_allclose(y[seg], x[seg] * factor, rtol=1e-9)
    assert np.all(factor >= 1 - 1e-12)
    assert np.all(factor <= (g1 + g2) ** 2 / (4 * g1 * g2) + 1e-12)


def test_silence_passes_through():
    x = np.zeros(4000)
    eq = equalize(x, SPEC)
    assert np.all(eq.envelope.silent())
    np.testing.assert_array_equal(eq.samples, 0.0)
    np.testing.assert_array_equal(deequalize(eq.samples, eq.envelope), 0.0)


def test_silence_threshold_value():
    assert silence_threshold(SPEC) == pytest.approx(1e-8 * np.sqrt(320))
    mask = silence_mask([0.0, 1e-8 * np.sqrt(320), 1e-6], SPEC)
    assert mask.tolist() == [True, True, False]


def test_partial_silence_keeps_digital_zero(rng):
    x = np.concatenate([np.zeros(3200), rng.standard_normal(3200), np.zeros(3200)])
    eq = equalize(x, SPEC)
    y = deequalize(eq.samples, eq.envelope)
    assert np.all(np.isfinite(y))
    assert si_sdr(x - x.mean(), y) > 10


def test_deequalize_length_mismatch():
    env = GainEnvelope(np.ones(3), SPEC)
    with pytest.raises(ArgumentError):
        deequalize(np.zeros(5000), env)


def test_equalize_rejects_empty():
    with pytest.raises(ArgumentError):
        equalize(np.zeros(0), SPEC)
