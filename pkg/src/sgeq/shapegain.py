"""Frame-wise gain equalization and its inverse.

``equalize`` factors a waveform into a per-frame L2 gain envelope and an
equalized waveform whose frames all have (roughly) unit norm.
``deequalize`` re-applies a gain envelope, typically a dequantized one, to a
decoded equalized waveform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .framing import FrameGrid, WindowSpec, make_kbd_window, overlap_add, segment

EPS = 1e-12
SILENCE_RATIO = 1e-8


@dataclass(frozen=True)
class GainEnvelope:
    """Per-frame L2 norms of the windowed frames of a signal."""

    gains: np.ndarray
    window_spec: WindowSpec

    @property
    def hop(self) -> int:
        return self.window_spec.hop

    def __len__(self):
        return self.gains.shape[0]

    def silent(self) -> np.ndarray:
        """Boolean mask of frames classified as digital silence."""
        return silence_mask(self.gains, self.window_spec)


@dataclass(frozen=True)
class EqualizedSignal:
    samples: np.ndarray
    envelope: GainEnvelope
    mean_removed: float


def silence_threshold(spec: WindowSpec) -> float:
    return SILENCE_RATIO * float(np.linalg.norm(make_kbd_window(spec)))


def silence_mask(gains, spec: WindowSpec) -> np.ndarray:
    return np.asarray(gains) <= silence_threshold(spec)


def frame_gains(grid: FrameGrid) -> GainEnvelope:
    """L2 norm of every frame of ``grid``."""
    return GainEnvelope(np.linalg.norm(grid.frames, axis=1), grid.window_spec)


def normalize_frames(grid: FrameGrid, envelope: GainEnvelope) -> FrameGrid:
    """Divide each frame by ``g_m + 1e-12``.

    Frames classified as silence are passed through untouched so that
    numerical dust in digital silence is not blown up to unit norm.
    """
    gains = np.asarray(envelope.gains, dtype=np.float64)
    if gains.shape != (grid.num_frames,):
        raise ArgumentError(f"envelope has {gains.shape[0]} gains for {grid.num_frames} frames")
    scale = np.where(envelope.silent(), 1.0, gains + EPS)
    return grid.with_frames(grid.frames / scale[:, None])


def equalize(signal, spec: WindowSpec) -> EqualizedSignal:
    """Center ``signal`` and rebuild it from gain-normalized frames.

    Returns the equalized waveform together with the unquantized gain
    envelope measured on the original (centered) frames.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ArgumentError("equalize needs a non-empty 1-D signal")
    mean = float(np.mean(x))
    grid = segment(x - mean, spec)
    env = frame_gains(grid)
    samples = overlap_add(normalize_frames(grid, env))
    return EqualizedSignal(samples=samples, envelope=env, mean_removed=mean)


def deequalize(equalized, envelope: GainEnvelope) -> np.ndarray:
    """Restore the energy profile described by ``envelope``.

    The equalized waveform is re-windowed, frame ``m`` is scaled by
    ``envelope.gains[m]`` and the result is overlap-added.
    """
    grid = segment(equalized, envelope.window_spec)
    gains = np.asarray(envelope.gains, dtype=np.float64)
    if gains.shape != (grid.num_frames,):
        raise ArgumentError(
            f"envelope has {gains.shape[0]} gains but the signal has {grid.num_frames} frames"
        )
    return overlap_add(grid.with_frames(grid.frames * gains[:, None]))
