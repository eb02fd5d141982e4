import io

import numpy as np
import pytest

from sgeq.codec import CodecConfig, train_model
from sgeq.errors import ArgumentError
from sgeq.metrics import dcs, gain_scale, sensitivity_profile, si_sdr, write_csv


def test_si_sdr_orthogonal_error(rng):
    x = rng.standard_normal(1000)
    e = rng.standard_normal(1000)
    e -= (e @ x) / (x @ x) * x
    e *= 0.1 * np.linalg.norm(x) / np.linalg.norm(e)
    assert si_sdr(x, x + e) == pytest.approx(20.0, abs=1e-9)


def test_si_sdr_scale_invariant(rng):
    x = rng.standard_normal(800)
    y = x + 0.3 * rng.standard_normal(800)
    assert si_sdr(x, 3.0 * y) == pytest.approx(si_sdr(x, y), abs=1e-9)
    assert si_sdr(5.0 * x, y) == pytest.approx(si_sdr(x, y), abs=1e-9)


def test_si_sdr_caps(rng):
    x = rng.standard_normal(100)
    assert si_sdr(x, x) == 150.0
    assert si_sdr(x, np.zeros(100)) == -150.0


def test_si_sdr_errors():
    with pytest.raises(ArgumentError):
        si_sdr(np.zeros(10), np.ones(10))
    with pytest.raises(ArgumentError):
        si_sdr(np.ones(10), np.ones(11))


def test_gain_scale():
    np.testing.assert_allclose(gain_scale(np.ones(3), 20.0), 10.0)
    np.testing.assert_allclose(gain_scale(np.ones(3), -6.0), 10 ** (-0.3))


def test_dcs():
    a = np.array([[1, 2], [3, 4], [5, 6], [7, 8]])
    b = np.array([[1, 2], [3, 0], [5, 6], [0, 8]])
    assert dcs(a, b) == 0.5
    assert dcs(a, b, mask=[True, False, True, False]) == 1.0
    assert dcs(a[:, 0], b[:, 0]) == 0.75
    assert dcs(a, b, mask=[False] * 4) == 1.0
    with pytest.raises(ArgumentError):
        dcs(a, b[:2])


@pytest.fixture(scope="module")
def profiles(train_signals, test_signals):
    out = {}
    alphas = [-12, -6, 0, 6, 12]
    for mode in ("baseline", "equalizer"):
        cfg = CodecConfig(mode=mode, codebook_size=32, num_stages=2)
        model = train_model(train_signals[:12], cfg, seed=0, max_iters=10)
        out[mode] = sensitivity_profile(test_signals[:3], alphas, cfg, model)
    return out


def test_profile_baseline_norm_tracks_gain(profiles):
    p = profiles["baseline"]
    np.testing.assert_allclose(p.norm_ratio, 10 ** (p.alphas / 20), rtol=1e-9)
    np.testing.assert_allclose(p.cosine, 1.0, atol=1e-9)
    assert p.dcs[2] == 1.0
    assert p.dcs[0] < 1.0 and p.dcs[-1] < 1.0


def test_profile_equalizer_is_flat(profiles):
    p = profiles["equalizer"]
    np.testing.assert_allclose(p.norm_ratio, 1.0, atol=1e-9)
    np.testing.assert_allclose(p.cosine, 1.0, atol=1e-9)
    assert np.all(p.dcs >= 0.99)
    assert p.dcs_per_stage.shape == (5, 2)


def test_profile_rows(profiles):
    rows = list(profiles["equalizer"].rows())
    assert [r["alpha_db"] for r in rows] == [-12.0, -6.0, 0.0, 6.0, 12.0]
    assert len(rows[0]["dcs_stage"]) == 2


def test_profile_needs_reference(test_signals):
    with pytest.raises(ArgumentError):
        sensitivity_profile(test_signals[:1], [-6, 6], CodecConfig(), None)


def test_write_csv_format():
    fh = io.StringIO()
    text = write_csv([{"a": "x", "b": 1, "c": 0.5}], ["c", "a", "b"], fh)
    assert text == "c,a,b\n0.500000,x,1\n"
    assert fh.getvalue() == text
