import warnings
from dataclasses import replace

import numpy as np
import pytest

from sgeq.bitstream import deserialize, serialize
from sgeq.codec import (
    CodecConfig,
    analyze,
    bitrate,
    decode_frames,
    decode_signal,
    encode_frames,
    encode_signal,
    rates_table,
    train_model,
    training_vectors,
)
from sgeq.corpus import synth_signal
from sgeq.errors import ArgumentError, ConfigError, CorruptStreamError
from sgeq.framing import WindowSpec
from sgeq.metrics import dcs, si_sdr


def test_bitrate_anchors():
    assert bitrate(CodecConfig(mode="baseline", codebook_size=1024, num_stages=8)) == 4000
    assert bitrate(CodecConfig(mode="equalizer", codebook_size=128, num_stages=8, gain_bits=8)) == 3200


@pytest.mark.parametrize("mode,c,nq,expected", [
    ("baseline", 128, 8, 2800), ("baseline", 256, 8, 3200), ("baseline", 512, 8, 3600),
    ("equalizer", 256, 8, 3600), ("equalizer", 512, 8, 4000), ("equalizer", 1024, 8, 4400),
    ("equalizer", 1024, 1, 900), ("equalizer", 1024, 16, 8400), ("baseline", 1024, 16, 8000),
])
def test_bitrate_table(mode, c, nq, expected):
    assert bitrate(CodecConfig(mode=mode, codebook_size=c, num_stages=nq)) == expected


def test_bitrate_rejects():
    with pytest.raises(ConfigError):
        bitrate(CodecConfig(codebook_size=1000))
    with pytest.raises(ConfigError):
        bitrate(CodecConfig(window=WindowSpec(640, 300)))


def test_rates_table_split():
    t = rates_table(CodecConfig(codebook_size=128))
    assert t == {"total": 3200, "shape": 2800, "gain": 400, "bits_per_frame": 64.0, "log2C": 7.0}


def test_constant_frame_is_all_dc():
    z = encode_frames(np.full((1, 640), 0.5), CodecConfig())
    assert z[0, 0] == pytest.approx(0.5 * np.sqrt(640))
    assert np.max(np.abs(z[0, 1:])) < 1e-12


def test_dct_matches_cosine_matrix(rng):
    n = 16
    cfg = CodecConfig(window=WindowSpec(n, n // 2))
    k, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    basis = np.sqrt(2 / n) * np.cos(np.pi * (i + 0.5) * k / n)
    basis[0] /= np.sqrt(2)
    x = rng.standard_normal((5, n))
    np.testing.assert_allclose(encode_frames(x, cfg), x @ basis.T, atol=1e-12)


def test_transform_is_orthonormal(rng):
    for transform in ("dct", "identity"):
        cfg = CodecConfig(transform=transform)
        x = rng.standard_normal((20, 640))
        z = encode_frames(x, cfg)
        np.testing.assert_allclose(np.linalg.norm(z, axis=1), np.linalg.norm(x, axis=1))
        np.testing.assert_allclose(decode_frames(z, cfg), x, atol=1e-12)


def test_transform_shape_checks():
    with pytest.raises(ArgumentError):
        encode_frames(np.zeros((3, 10)), CodecConfig())
    with pytest.raises(ArgumentError):
        decode_frames(np.zeros(640), CodecConfig())


@pytest.mark.parametrize("kw", [dict(mode="shape"), dict(transform="mdct"), dict(codebook_size=0),
                                dict(num_stages=0), dict(sample_rate=0), dict(gain_bits=0)])
def test_config_rejects(kw):
    with pytest.raises(ConfigError):
        CodecConfig(**kw)


@pytest.fixture(scope="module")
def models(train_signals):
    base = CodecConfig(codebook_size=16, num_stages=3)
    return {m: train_model(train_signals[:8], replace(base, mode=m), seed=0, max_iters=10)
            for m in ("baseline", "equalizer")}


def cfg_for(mode):
    return CodecConfig(mode=mode, codebook_size=16, num_stages=3)


def test_training_vectors_skip_silence():
    x = np.concatenate([np.zeros(6400), synth_signal("voiced", 0.4, seed=1).samples])
    cfg = CodecConfig()
    ana = analyze(x, cfg)
    assert ana.silent.sum() > 5
    assert training_vectors([x], cfg).shape[0] == (~ana.silent).sum()


def test_model_provenance(models):
    assert models["baseline"].trained_on == "baseline:C=16:NQ=3:seed=0"


@pytest.mark.parametrize("mode", ["baseline", "equalizer"])
@pytest.mark.parametrize("length", [1, 100, 640, 7001])
def test_encode_decode_any_length(models, mode, length):
    x = synth_signal("voiced", 1.0, seed=5).samples[:length]
    cfg = cfg_for(mode)
    s = encode_signal(x, cfg, models[mode])
    back = deserialize(serialize(s))
    assert back == s
    y = decode_signal(back, cfg, models[mode])
    assert y.shape == x.shape and np.all(np.isfinite(y))


@pytest.mark.parametrize("mode", ["baseline", "equalizer"])
def test_silence_encodes_to_zero(models, mode):
    cfg = cfg_for(mode)
    s = encode_signal(np.zeros(3000), cfg, models[mode])
    y = decode_signal(s, cfg, models[mode])
    if mode == "equalizer":
        assert np.all(s.gain_codes == 0)
        np.testing.assert_array_equal(y, 0.0)
    assert np.all(np.isfinite(y))


def test_equalizer_beats_baseline_on_quiet_input(models, test_signals):
    x = 10 ** (-12 / 20) * test_signals[0]
    scores = {}
    for mode in models:
        cfg = cfg_for(mode)
        y = decode_signal(encode_signal(x, cfg, models[mode]), cfg, models[mode])
        scores[mode] = si_sdr(x - x.mean(), y)
    assert scores["equalizer"] > scores["baseline"]


@pytest.mark.parametrize("alpha_db", [-12, -4, 4, 12])
def test_equalizer_tokens_are_gain_stable(models, alpha_db):
    x = synth_signal("voiced", 2.0, seed=3).samples
    cfg = cfg_for("equalizer")
    ref = encode_signal(x, cfg, models["equalizer"])
    s = encode_signal(10 ** (alpha_db / 20) * x, cfg, models["equalizer"])
    mask = ~analyze(x, cfg).silent
    assert dcs(ref.tokens, s.tokens, mask) >= 0.99


def test_depth_below_model(models):
    cfg = replace(cfg_for("equalizer"), num_stages=2)
    s = encode_signal(np.ones(1000) * np.arange(1000) / 1000, cfg, models["equalizer"])
    assert s.tokens.shape[1] == 2
    decode_signal(s, cfg, models["equalizer"])


def test_mismatched_model_and_config(models):
    with pytest.raises(ConfigError):
        encode_signal(np.ones(1000), CodecConfig(codebook_size=32, num_stages=3), models["baseline"])
    with pytest.raises(ConfigError):
        encode_signal(np.ones(1000), cfg_for("baseline"), models["baseline"], sample_rate=8000)
    with pytest.warns(UserWarning):
        encode_signal(np.ones(1000), cfg_for("equalizer"), models["baseline"])


def test_decode_validates_header(models):
    cfg = cfg_for("baseline")
    s = encode_signal(np.sin(np.arange(4000)), cfg, models["baseline"])
    s.original_length = 100
    with pytest.raises(CorruptStreamError):
        decode_signal(s, cfg, models["baseline"])
    s = encode_signal(np.sin(np.arange(4000)), cfg, models["baseline"])
    with pytest.raises(CorruptStreamError):
        decode_signal(s, replace(cfg, window=WindowSpec(512, 256)), models["baseline"])


def test_analyze_rejects_bad_signal():
    with pytest.raises(ArgumentError):
        analyze(np.array([1.0, np.inf]), CodecConfig())


def test_clipping_is_logged(models, caplog):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with caplog.at_level("WARNING", logger="sgeq.codec"):
            encode_signal(np.full(3000, 100.0) * np.sign(np.sin(np.arange(3000))), cfg_for("equalizer"),
                          models["equalizer"])
    assert "clipped" in caplog.text
