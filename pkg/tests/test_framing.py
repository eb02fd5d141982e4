import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgeq.errors import ArgumentError, ConfigError
from sgeq.framing import (
    FrameGrid,
    WindowSpec,
    cola_profile,
    make_kbd_window,
    num_frames_for,
    overlap_add,
    segment,
)

# KBD, N=8, beta=4: direct Bessel-I0 evaluation at 30 digits
KBD8 = [0.19027811085318355, 0.54350958236900572, 0.83940296274975644, 0.98173022798024488]


def test_kbd_small_matches_bessel_oracle():
    w = make_kbd_window(WindowSpec(8, 4, 4.0))
    np.testing.assert_allclose(w, KBD8 + KBD8[::-1], rtol=0, atol=1e-15)


@pytest.mark.parametrize("beta", [0.0, 1.0, 4.0, 8.0])
def test_kbd_symmetric_and_power_complementary(beta):
    spec = WindowSpec(640, 320, beta)
    w = make_kbd_window(spec)
    assert w.shape == (640,)
    np.testing.assert_array_equal(w, w[::-1])
    np.testing.assert_allclose(w[:320] ** 2 + w[320:] ** 2, 1.0, atol=1e-12)
    assert np.all(w > 0) and np.all(w <= 1)


def test_kbd_beta_zero_is_sqrt_ramp():
    # flat kernel: cumulative sum is linear
    w = make_kbd_window(WindowSpec(16, 8, 0.0))
    np.testing.assert_allclose(w[:8], np.sqrt(np.arange(1, 9) / 9), atol=1e-15)


def test_window_energy_is_half_length():
    w = make_kbd_window(WindowSpec())
    assert np.linalg.norm(w) == pytest.approx(np.sqrt(320), abs=1e-10)


def test_window_is_read_only():
    w = make_kbd_window(WindowSpec())
    with pytest.raises(ValueError):
        w[0] = 2.0


@pytest.mark.parametrize("kw", [dict(length=641), dict(length=0), dict(hop=0), dict(hop=700),
                                dict(beta=-1.0), dict(beta=float("nan")), dict(kind="hann")])
def test_window_spec_rejects(kw):
    with pytest.raises(ConfigError):
        WindowSpec(**kw)


def test_cola_interior_is_one():
    spec = WindowSpec()
    prof = cola_profile(spec, 640 * 10)
    interior = prof[320:-320]
    assert np.max(np.abs(interior - 1.0)) <= 1e-12


def test_cola_profile_too_short():
    with pytest.raises(ArgumentError):
        cola_profile(WindowSpec(), 100)


@pytest.mark.parametrize("length,expected", [(1, 2), (320, 2), (321, 3), (640, 3), (16000, 51), (500, 3)])
def test_num_frames(length, expected):
    assert num_frames_for(length, WindowSpec()) == expected


def test_impulse_touches_two_frames():
    x = np.zeros(3200)
    x[1000] = 1.0
    grid = segment(x, WindowSpec())
    touched = np.flatnonzero(np.any(grid.frames != 0, axis=1))
    assert touched.tolist() == [3, 4]


@pytest.mark.parametrize("length", [1, 319, 500, 640, 1000, 16000, 16001])
def test_perfect_reconstruction(length, rng):
    spec = WindowSpec()
    x = rng.standard_normal(length)
    grid = segment(x, spec)
    assert grid.num_frames == num_frames_for(length, spec)
    y = overlap_add(grid)
    assert y.shape == x.shape
    assert np.max(np.abs(y - x)) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 64).map(lambda k: 2 * k), hop_div=st.sampled_from([1, 2, 4]),
       length=st.integers(1, 600), beta=st.floats(0, 10), seed=st.integers(0, 2**31))
def test_reconstruction_any_tiling(n, hop_div, length, beta, seed):
    hop = max(1, n // hop_div)
    spec = WindowSpec(n, hop, beta)
    x = np.random.default_rng(seed).standard_normal(length)
    np.testing.assert_allclose(overlap_add(segment(x, spec)), x, atol=1e-9)


def test_segment_linear(rng):
    spec = WindowSpec()
    a, b = rng.standard_normal(4000), rng.standard_normal(4000)
    lhs = segment(2.0 * a - 3.0 * b, spec).frames
    rhs = 2.0 * segment(a, spec).frames - 3.0 * segment(b, spec).frames
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_segment_rejects_bad_input():
    with pytest.raises(ArgumentError):
        segment(np.zeros(0), WindowSpec())
    with pytest.raises(ArgumentError):
        segment(np.zeros((2, 100)), WindowSpec())


def test_with_frames_shape_check():
    grid = segment(np.ones(1000), WindowSpec())
    with pytest.raises(ArgumentError):
        grid.with_frames(np.zeros((1, 640)))


def test_overlap_add_rejects_short_grid():
    spec = WindowSpec()
    grid = FrameGrid(np.zeros((2, 640)), spec, original_length=5000, pad_leading=320)
    with pytest.raises(ArgumentError):
        overlap_add(grid)
