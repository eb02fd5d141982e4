"""mu-law companded scalar quantization of frame gains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ConfigError


@dataclass(frozen=True)
class GainQuantConfig:
    full_scale: float
    bits: int = 8
    mu: float = 255.0

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if int(self.bits) != self.bits or not 1 <= self.bits <= 16:
            raise ConfigError(f"gain bits must be an integer in [1, 16], got {self.bits}")
        if not (self.full_scale > 0 and math.isfinite(self.full_scale)):
            raise ConfigError(f"full scale must be positive, got {self.full_scale}")

    @property
    def levels(self) -> int:
        """Largest code value, ``2**bits - 1``."""
        return (1 << self.bits) - 1


def _check_unit(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(np.abs(arr) <= 1.0)):
        raise ArgumentError(f"{name} must lie in [-1, 1]")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def mu_compress(x, mu=255.0):
    """``sgn(x) * ln(1 + mu|x|) / ln(1 + mu)`` for ``|x| <= 1``."""
    arr = _check_unit(x, "mu_compress input")
    return _out(np.sign(arr) * np.log1p(mu * np.abs(arr)) / np.log1p(mu))


def mu_expand(y, mu=255.0):
    """Inverse of :func:`mu_compress`."""
    arr = _check_unit(y, "mu_expand input")
    return _out(np.sign(arr) * np.expm1(np.abs(arr) * np.log1p(mu)) / mu)


def quantize_gain(g, cfg: GainQuantConfig):
    """Map nonnegative gain(s) to integer code(s) in ``[0, 2**bits - 1]``.

    Gains above ``cfg.full_scale`` are clipped to the top code.
    """
    arr = np.asarray(g, dtype=np.float64)
    if np.any(~(arr >= 0)):
        raise ArgumentError("gains must be nonnegative and finite")
    y = mu_compress(np.minimum(arr / cfg.full_scale, 1.0), cfg.mu)
    codes = np.floor(np.asarray(y) * cfg.levels + 0.5).astype(np.int64)
    return int(codes) if codes.ndim == 0 else codes


def dequantize_gain(code, cfg: GainQuantConfig):
    """Reconstruct gain(s) from code(s)."""
    arr = np.asarray(code)
    if arr.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ArgumentError("gain codes must be integers")
        arr = arr.astype(np.int64)
    if np.any((arr < 0) | (arr > cfg.levels)):
        raise ArgumentError(f"gain code out of range [0, {cfg.levels}]")
    g = cfg.full_scale * np.asarray(mu_expand(arr / cfg.levels, cfg.mu))
    return _out(g)


def count_clipped(gains, cfg: GainQuantConfig) -> int:
    """Number of gains that exceed the quantizer's full scale."""
    return int(np.count_nonzero(np.asarray(gains) > cfg.full_scale))
