"""Baseline and equalizer coding paths around a linear frame transform.

The encoder stand-in maps each windowed frame through an orthonormal
type-II DCT (or the identity); RVQ then quantizes the coefficients.
In equalizer mode the waveform is gain-equalized first, and the gain
envelope travels separately as mu-law codes.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as spfft

from . import rvq
from .bitstream import EncodedStream
from .errors import ArgumentError, ConfigError, CorruptStreamError
from .framing import FrameGrid, WindowSpec, make_kbd_window, num_frames_for, overlap_add, segment
from .gainquant import GainQuantConfig, count_clipped, dequantize_gain, quantize_gain
from .shapegain import GainEnvelope, deequalize, equalize, frame_gains, silence_mask

log = logging.getLogger(__name__)

MODES = ("baseline", "equalizer")
TRANSFORMS = ("dct", "identity")


@dataclass(frozen=True)
class CodecConfig:
    window: WindowSpec = field(default_factory=WindowSpec)
    mode: str = "equalizer"
    transform: str = "dct"
    codebook_size: int = 1024
    num_stages: int = 8
    gain_bits: int = 8
    mu: float = 255.0
    sample_rate: int = 16000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.transform not in TRANSFORMS:
            raise ConfigError(f"transform must be one of {TRANSFORMS}, got {self.transform!r}")
        if int(self.codebook_size) != self.codebook_size or self.codebook_size < 1:
            raise ConfigError(f"codebook size must be a positive integer, got {self.codebook_size}")
        if int(self.num_stages) != self.num_stages or self.num_stages < 1:
            raise ConfigError(f"number of stages must be >= 1, got {self.num_stages}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ConfigError(f"sample rate must be a positive integer, got {self.sample_rate}")
        self.gain_quant  # validates bits and mu

    @property
    def dim(self) -> int:
        return self.window.length

    @property
    def gain_quant(self) -> GainQuantConfig:
        full_scale = float(np.linalg.norm(make_kbd_window(self.window)))
        return GainQuantConfig(full_scale=full_scale, bits=self.gain_bits, mu=self.mu)

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.window.hop


def bitrate(cfg: CodecConfig) -> int:
    """Total bits per second: ``f * (N_Q log2 C + b_alpha)`` or ``f * N_Q log2 C``."""
    c = cfg.codebook_size
    if c < 2 or c & (c - 1):
        raise ConfigError(f"codebook size must be a power of two for bitrate reporting, got {c}")
    if cfg.sample_rate % cfg.window.hop:
        raise ConfigError(f"frame rate {cfg.sample_rate}/{cfg.window.hop} is not an integer")
    f = cfg.sample_rate // cfg.window.hop
    per_frame = cfg.num_stages * (c.bit_length() - 1)
    if cfg.mode == "equalizer":
        per_frame += cfg.gain_bits
    return f * per_frame


def encode_frames(frames, cfg: CodecConfig) -> np.ndarray:
    """Per-frame transform; accepts a FrameGrid or an ``(M, N)`` matrix."""
    x = frames.frames if isinstance(frames, FrameGrid) else np.asarray(frames, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.dim:
        raise ArgumentError(f"frames of shape {x.shape} do not match dimension {cfg.dim}")
    if cfg.transform == "identity":
        return x.copy()
    return spfft.dct(x, type=2, norm="ortho", axis=1)


def decode_frames(embeddings, cfg: CodecConfig) -> np.ndarray:
    """Inverse of :func:`encode_frames`; returns an ``(M, N)`` frame matrix."""
    z = np.asarray(embeddings, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != cfg.dim:
        raise ArgumentError(f"embeddings of shape {z.shape} do not match dimension {cfg.dim}")
    if cfg.transform == "identity":
        return z.copy()
    return spfft.idct(z, type=2, norm="ortho", axis=1)


@dataclass
class Analysis:
    """Encoder-side intermediate results for one signal."""

    embeddings: np.ndarray
    silent: np.ndarray
    envelope: GainEnvelope | None
    equalized: np.ndarray | None


def analyze(signal, cfg: CodecConfig) -> Analysis:
    """Run the encoder front end up to (but excluding) quantization."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ArgumentError("expected a non-empty 1-D signal")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("signal contains non-finite samples")
    if cfg.mode == "equalizer":
        eq = equalize(x, cfg.window)
        grid = segment(eq.samples, cfg.window)
        return Analysis(encode_frames(grid, cfg), eq.envelope.silent(), eq.envelope, eq.samples)
    grid = segment(x - x.mean(), cfg.window)
    silent = silence_mask(frame_gains(grid).gains, cfg.window)
    return Analysis(encode_frames(grid, cfg), silent, None, None)


def _check_model(cfg: CodecConfig, model: rvq.RvqModel):
    if model.dim != cfg.dim:
        raise ConfigError(f"model dimension {model.dim} != frame length {cfg.dim}")
    if model.codebook_size != cfg.codebook_size:
        raise ConfigError(f"model codebook size {model.codebook_size} != configured {cfg.codebook_size}")
    if model.num_stages < cfg.num_stages:
        raise ConfigError(f"model has {model.num_stages} stages, {cfg.num_stages} requested")


def encode_signal(signal, cfg: CodecConfig, model: rvq.RvqModel, sample_rate=None) -> EncodedStream:
    """Encode a waveform into an :class:`EncodedStream`.

    ``sample_rate``, when given, must equal ``cfg.sample_rate``. The first
    ``cfg.num_stages`` stages of ``model`` are used.
    """
    if sample_rate is not None and sample_rate != cfg.sample_rate:
        raise ConfigError(f"signal sample rate {sample_rate} Hz != codec rate {cfg.sample_rate} Hz")
    _check_model(cfg, model)
    if model.trained_on and not model.trained_on.startswith(cfg.mode):
        warnings.warn(f"model trained on {model.trained_on!r} used in {cfg.mode} mode", stacklevel=2)
    ana = analyze(signal, cfg)
    tokens = rvq.encode_batch(ana.embeddings, model, cfg.num_stages)
    gain_codes = None
    if cfg.mode == "equalizer":
        gq = cfg.gain_quant
        clipped = count_clipped(ana.envelope.gains, gq)
        if clipped:
            log.warning("%d frame gains exceed full scale %.4g and were clipped", clipped, gq.full_scale)
        gain_codes = quantize_gain(ana.envelope.gains, gq)
    return EncodedStream(
        mode=cfg.mode, sample_rate=cfg.sample_rate, frame_length=cfg.window.length,
        hop=cfg.window.hop, codebook_size=cfg.codebook_size, num_stages=cfg.num_stages,
        gain_bits=cfg.gain_bits, mu=int(round(cfg.mu)), original_length=int(np.size(signal)),
        tokens=tokens, gain_codes=gain_codes,
    )


def decode_signal(stream: EncodedStream, cfg: CodecConfig, model: rvq.RvqModel) -> np.ndarray:
    """Reconstruct a waveform from ``stream``.

    The stream header decides mode and depth; framing, codebook size and
    sample rate must agree with ``cfg`` and ``model``.
    """
    s = stream
    if s.frame_length != cfg.window.length or s.hop != cfg.window.hop:
        raise CorruptStreamError("frame_length", f"stream framing {s.frame_length}/{s.hop} != "
                                 f"configured {cfg.window.length}/{cfg.window.hop}")
    if s.sample_rate != cfg.sample_rate:
        raise CorruptStreamError("sample_rate", f"{s.sample_rate} != configured {cfg.sample_rate}")
    if s.codebook_size != model.codebook_size or model.dim != s.frame_length:
        raise CorruptStreamError("codebook_size", "stream does not match the model")
    if s.num_stages > model.num_stages:
        raise CorruptStreamError("num_stages", f"{s.num_stages} > model depth {model.num_stages}")
    if s.original_length == 0 or s.num_frames != num_frames_for(s.original_length, cfg.window):
        raise CorruptStreamError("num_frames", f"{s.num_frames} frames inconsistent with "
                                 f"original length {s.original_length}")
    dcfg = CodecConfig(window=cfg.window, mode=s.mode, transform=cfg.transform,
                       codebook_size=s.codebook_size, num_stages=s.num_stages,
                       gain_bits=s.gain_bits, mu=s.mu, sample_rate=s.sample_rate)
    frames = decode_frames(rvq.decode_batch(s.tokens, model), dcfg)
    grid = FrameGrid(frames=frames, window_spec=cfg.window, original_length=s.original_length,
                     pad_leading=cfg.window.hop)
    shape = overlap_add(grid)
    if s.mode == "baseline":
        return shape
    gains = dequantize_gain(s.gain_codes, dcfg.gain_quant)
    return deequalize(shape, GainEnvelope(np.atleast_1d(gains), cfg.window))


def frame_distortion(frames, model: rvq.RvqModel, depth=None) -> float:
    """Mean squared quantization error per vector at the given depth."""
    tok = rvq.encode_batch(frames, model, depth)
    err = np.asarray(frames) - rvq.decode_batch(tok, model)
    return float(np.mean(np.einsum("ij,ij->i", err, err)))


def training_vectors(signals, cfg: CodecConfig) -> np.ndarray:
    """Stack the transform-domain frames of ``signals`` for codebook training.

    Frames classified as digital silence are left out.
    """
    blocks = []
    for x in signals:
        ana = analyze(x, cfg)
        blocks.append(ana.embeddings[~ana.silent])
    if not blocks:
        raise ArgumentError("no training signals")
    return np.concatenate(blocks, axis=0)


def train_model(signals, cfg: CodecConfig, seed=0, max_iters=100, rel_tol=1e-5, label="") -> rvq.RvqModel:
    """Train an RVQ model on raw (baseline) or equalized (equalizer) frames."""
    data = training_vectors(signals, cfg)
    prov = f"{cfg.mode}:C={cfg.codebook_size}:NQ={cfg.num_stages}:seed={seed}"
    if label:
        prov += f":{label}"
    return rvq.rvq_train(data, cfg.codebook_size, cfg.num_stages, seed=seed, max_iters=max_iters,
                         rel_tol=rel_tol, trained_on=prov)


def rates_table(cfg: CodecConfig) -> dict:
    """Bitrate split into shape and gain parts, bits per second."""
    total = bitrate(cfg)
    gain = cfg.gain_bits * int(cfg.frame_rate) if cfg.mode == "equalizer" else 0
    return {"total": total, "shape": total - gain, "gain": gain,
            "bits_per_frame": total / cfg.frame_rate, "log2C": math.log2(cfg.codebook_size)}
