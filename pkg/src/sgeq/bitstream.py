"""Bit-exact serialization of encoded streams.

Layout (all multi-byte integers little-endian)::

    offset size field
    0      4    magic "SGEQ"
    4      1    version (1)
    5      1    mode (0 baseline, 1 equalizer)
    6      4    sample_rate (u32)
    10     2    N, frame length (u16)
    12     2    H, hop (u16)
    14     2    C, codebook size (u16)
    16     1    N_Q, number of token stages (u8)
    17     1    b_alpha, gain code width (u8)
    18     2    mu (u16)
    20     4    num_frames (u32)
    24     4    original_length (u32)
    28     ...  payload

The payload holds, for every frame, the gain code (``b_alpha`` bits,
equalizer mode only) followed by ``N_Q`` token indices of
``ceil(log2 C)`` bits each. Fields are packed MSB-first with no padding
between frames; the last byte is zero-padded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CorruptStreamError, MagicError, SerializationError, TokenRangeError, TruncationError, VersionError

MAGIC = b"SGEQ"
VERSION = 1
HEADER = struct.Struct("<4sBBIHHHBBHII")
HEADER_SIZE = HEADER.size
MODES = ("baseline", "equalizer")


def token_bits(codebook_size: int) -> int:
    """Bits per token index: ``ceil(log2 C)``."""
    return max(0, int(codebook_size) - 1).bit_length()


@dataclass(eq=False)
class EncodedStream:
    mode: str
    sample_rate: int
    frame_length: int
    hop: int
    codebook_size: int
    num_stages: int
    gain_bits: int
    mu: int
    original_length: int
    tokens: np.ndarray
    gain_codes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64).reshape(-1, self.num_stages)
        if self.mode == "equalizer":
            self.gain_codes = np.asarray(self.gain_codes, dtype=np.int64).reshape(-1)
        else:
            self.gain_codes = np.zeros(0, dtype=np.int64)

    @property
    def num_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def frame_bits(self) -> int:
        gain = self.gain_bits if self.mode == "equalizer" else 0
        return gain + self.num_stages * token_bits(self.codebook_size)

    def __eq__(self, other):
        if not isinstance(other, EncodedStream):
            return NotImplemented
        return (
            self._header_tuple() == other._header_tuple()
            and np.array_equal(self.tokens, other.tokens)
            and np.array_equal(self.gain_codes, other.gain_codes)
        )

    def _header_tuple(self):
        return (self.mode, self.sample_rate, self.frame_length, self.hop, self.codebook_size,
                self.num_stages, self.gain_bits, self.mu, self.original_length, self.num_frames)


def payload_size(stream: EncodedStream) -> int:
    """Payload length in bytes."""
    return (stream.num_frames * stream.frame_bits + 7) // 8


def _check(cond, field_name, message):
    if not cond:
        raise SerializationError(f"{field_name}: {message}")


def serialize(stream: EncodedStream) -> bytes:
    """Encode ``stream`` into its byte representation."""
    s = stream
    _check(s.mode in MODES, "mode", f"unknown mode {s.mode!r}")
    _check(0 < s.sample_rate < 2**32, "sample_rate", "must fit in u32 and be positive")
    _check(0 < s.frame_length < 2**16, "frame_length", "must fit in u16 and be positive")
    _check(0 < s.hop < 2**16, "hop", "must fit in u16 and be positive")
    _check(0 < s.codebook_size < 2**16, "codebook_size", "must fit in u16 and be positive")
    _check(0 < s.num_stages < 2**8, "num_stages", "must fit in u8 and be positive")
    _check(1 <= s.gain_bits <= 16, "gain_bits", "must be in [1, 16]")
    _check(int(s.mu) == s.mu and 0 < s.mu < 2**16, "mu", "must be an integer in [1, 65535]")
    _check(0 <= s.original_length < 2**32, "original_length", "must fit in u32")
    _check(s.num_frames < 2**32, "num_frames", "must fit in u32")
    _check(bool(np.all((s.tokens >= 0) & (s.tokens < s.codebook_size))), "tokens", "index out of range")
    columns = [s.tokens]
    widths = [token_bits(s.codebook_size)] * s.num_stages
    if s.mode == "equalizer":
        _check(s.gain_codes.shape == (s.num_frames,), "gain_codes", "need one gain code per frame")
        _check(bool(np.all((s.gain_codes >= 0) & (s.gain_codes < (1 << s.gain_bits)))),
               "gain_codes", "code out of range")
        columns.insert(0, s.gain_codes[:, None])
        widths.insert(0, s.gain_bits)
    header = HEADER.pack(MAGIC, VERSION, MODES.index(s.mode), s.sample_rate, s.frame_length, s.hop,
                         s.codebook_size, s.num_stages, s.gain_bits, int(s.mu), s.num_frames,
                         s.original_length)
    payload = kernels.pack_fields(np.hstack(columns), widths) if s.num_frames else b""
    return header + payload


def deserialize(data: bytes) -> EncodedStream:
    """Parse bytes produced by :func:`serialize`.

    Raises
    ------
    MagicError, VersionError, TruncationError, TokenRangeError, CorruptStreamError
        Each names the failing field.
    """
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise MagicError("magic", f"expected {MAGIC!r}, got {data[:4]!r}")
    if len(data) < HEADER_SIZE:
        raise TruncationError("header", f"{len(data)} bytes, header needs {HEADER_SIZE}")
    (_, version, mode, rate, n, hop, c, nq, gbits, mu, frames, length) = HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionError("version", f"unsupported version {version}")
    if mode >= len(MODES):
        raise CorruptStreamError("mode", f"unknown mode byte {mode}")
    for name, value in (("sample_rate", rate), ("frame_length", n), ("hop", hop),
                        ("codebook_size", c), ("num_stages", nq), ("mu", mu)):
        if value == 0:
            raise CorruptStreamError(name, "must be nonzero")
    if not 1 <= gbits <= 16:
        raise CorruptStreamError("gain_bits", f"{gbits} outside [1, 16]")
    equalizer = mode == 1
    widths = [gbits] * equalizer + [token_bits(c)] * nq
    nbytes = (frames * sum(widths) + 7) // 8
    payload = data[HEADER_SIZE:]
    if len(payload) < nbytes:
        raise TruncationError("payload", f"{len(payload)} bytes, expected {nbytes}")
    if len(payload) > nbytes:
        raise CorruptStreamError("payload", f"{len(payload) - nbytes} trailing bytes")
    fields = kernels.unpack_fields(payload, frames, widths)
    tokens = fields[:, int(equalizer):]
    bad = tokens >= c
    if np.any(bad):
        row, stage = np.argwhere(bad)[0]
        raise TokenRangeError(f"tokens[{row}][{stage}]", f"index {tokens[row, stage]} >= C={c}")
    return EncodedStream(
        mode=MODES[mode], sample_rate=rate, frame_length=n, hop=hop, codebook_size=c,
        num_stages=nq, gain_bits=gbits, mu=mu, original_length=length,
        tokens=tokens, gain_codes=fields[:, 0] if equalizer else None,
    )
