"""WAV ingestion and synthetic test signals."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal as sps
from scipy.interpolate import PchipInterpolator

from .errors import ArgumentError, IngestionError

SAMPLE_RATE = 16000
SYNTH_KINDS = ("sine", "chirp", "noise-burst", "speech-like-AM-noise", "voiced")


@dataclass(frozen=True)
class Utterance:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE
    id: str = ""

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


def read_wav(path, expected_rate=SAMPLE_RATE) -> Utterance:
    """Read a mono PCM16 WAV file into floats in ``[-1, 1)``.

    Files with another sample width, more than one channel or a sample
    rate other than ``expected_rate`` are rejected; nothing is resampled.
    Pass ``expected_rate=None`` to accept any rate.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            channels, width, rate = wf.getnchannels(), wf.getsampwidth(), wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except (wave.Error, EOFError) as exc:
        raise IngestionError(f"{path}: not a PCM WAV file ({exc})") from exc
    if width != 2:
        raise IngestionError(f"{path}: expected 16-bit PCM, got {8 * width}-bit samples")
    if channels != 1:
        raise IngestionError(f"{path}: expected mono audio, got {channels} channels")
    if expected_rate is not None and rate != expected_rate:
        raise IngestionError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    pcm = np.frombuffer(raw, dtype="<i2")
    return Utterance(pcm.astype(np.float64) / 32768.0, rate, path.stem)


def to_pcm16(samples) -> np.ndarray:
    """Clamp to [-1, 1], scale by 32768 and round half away from zero."""
    x = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0) * 32768.0
    pcm = np.sign(x) * np.floor(np.abs(x) + 0.5)
    return np.clip(pcm, -32768, 32767).astype("<i2")


def write_wav(utt: Utterance, path) -> None:
    pcm = to_pcm16(utt.samples)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(utt.sample_rate))
        wf.writeframes(pcm.tobytes())


def iter_corpus(directory, expected_rate=SAMPLE_RATE):
    """Yield the utterances of every ``*.wav`` under ``directory``, sorted by path."""
    directory = Path(directory)
    if directory.is_file():
        yield read_wav(directory, expected_rate)
        return
    for path in sorted(directory.rglob("*.wav")):
        yield read_wav(path, expected_rate)


def load_corpus(directory, expected_rate=SAMPLE_RATE) -> list:
    utts = list(iter_corpus(directory, expected_rate))
    if not utts:
        raise IngestionError(f"no .wav files found under {directory}")
    return utts


def _level_contour(n, sr, rng, depth_db=30.0):
    """Slowly varying gain: PCHIP through random dB knots every 150-350 ms."""
    knots_t, t = [0.0], 0.0
    while t < n / sr:
        t += rng.uniform(0.15, 0.35)
        knots_t.append(t)
    knots_db = rng.uniform(-depth_db, 0.0, size=len(knots_t))
    curve = PchipInterpolator(knots_t, knots_db)(np.arange(n) / sr)
    return 10.0 ** (curve / 20.0)


def _crossfade_segments(n, sr, rng, render, fade_dur=0.03):
    """Concatenate independently rendered segments with linear cross-fades.

    ``render(length, rng)`` returns one segment of ``length`` samples.
    """
    fade = int(fade_dur * sr)
    out = np.zeros(n)
    start = 0
    while start < n:
        seg = int(rng.uniform(0.15, 0.4) * sr)
        lo, hi = max(0, start - fade), min(n, start + seg + fade)
        y = render(hi - lo, rng)
        idx = np.arange(lo, hi)
        ramp = np.clip((idx - (start - fade)) / (2 * fade), 0.0, 1.0)
        ramp *= np.clip((start + seg + fade - idx) / (2 * fade), 0.0, 1.0)
        if start == 0:
            ramp[idx < start + fade] = 1.0
        if start + seg >= n:
            ramp[idx >= start + seg - fade] = 1.0
        out[lo:hi] += y * ramp
        start += seg
    return out


# fixed inventory shared by every seed, so utterances reuse the same shapes
VOWELS = ((730, 1090, 2440), (270, 2290, 3010), (300, 870, 2240), (530, 1840, 2480),
          (660, 1720, 2410), (570, 840, 2410))
PITCHES = (100.0, 125.0, 160.0, 200.0)


def _resonate(x, formants, sr, q_scale=100.0):
    y = x
    for f in formants:
        b, a = sps.iirpeak(f, Q=f / q_scale, fs=sr)
        y = sps.lfilter(b, a, y)
    return y


def _vowel_segment(sr):
    def render(length, rng):
        period = sr / PITCHES[rng.integers(len(PITCHES))]
        vowel = VOWELS[rng.integers(len(VOWELS))]
        k = np.arange(length)
        src = (np.floor((k + 1) / period) - np.floor(k / period)) + 0.01 * rng.standard_normal(length)
        return _resonate(src, vowel, sr)
    return render


def _noise_segment(sr):
    def render(length, rng):
        formants = [rng.uniform(a, b) for a, b in ((250, 900), (800, 2400), (2000, 3500))]
        y = rng.standard_normal(length)
        for f in formants:
            b, a = sps.iirpeak(f, Q=f / 120.0, fs=sr)
            y = sps.lfilter(b, a, y) + 0.05 * y
        return y
    return render


def synth_signal(kind, duration, seed=0, sample_rate=SAMPLE_RATE, amplitude=0.5) -> Utterance:
    """Deterministic synthetic test signal.

    Parameters
    ----------
    kind : str
        One of ``sine`` (440 Hz), ``chirp`` (100 Hz to 4 kHz), ``noise-burst``,
        ``speech-like-AM-noise`` (formant-filtered noise under a syllabic
        amplitude envelope) or ``voiced`` (pulse train with a drifting pitch
        through the same formant/envelope model).
    duration : float
        Seconds.
    seed : int
    amplitude : float
        Peak amplitude of the result (sine/chirp: sinusoid amplitude).
    """
    if not duration > 0:
        raise ArgumentError(f"duration must be positive, got {duration}")
    n = max(1, int(round(duration * sample_rate)))
    t = np.arange(n) / sample_rate
    rng = np.random.default_rng(seed)
    if kind == "sine":
        x = amplitude * np.sin(2 * np.pi * 440.0 * t)
    elif kind == "chirp":
        x = amplitude * sps.chirp(t, f0=100.0, t1=max(duration, 1e-9), f1=4000.0)
    elif kind == "noise-burst":
        x = rng.standard_normal(n)
        gate = np.zeros(n)
        burst = max(1, n // 5)
        for start in range(0, n, 2 * burst):
            gate[start:start + burst] = 1.0
        x = x * gate
        x = amplitude * x / max(np.max(np.abs(x)), 1e-12)
    elif kind in ("speech-like-AM-noise", "voiced"):
        render = _vowel_segment(sample_rate) if kind == "voiced" else _noise_segment(sample_rate)
        x = _crossfade_segments(n, sample_rate, rng, render) * _level_contour(n, sample_rate, rng)
        x -= x.mean()
        x = amplitude * x / max(np.max(np.abs(x)), 1e-12)
    else:
        raise ArgumentError(f"unknown signal kind {kind!r}; expected one of {SYNTH_KINDS}")
    return Utterance(x, sample_rate, f"{kind}-{seed}")
