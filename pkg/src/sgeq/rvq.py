"""Residual vector quantization: encoding, decoding and Lloyd training.

Codebooks of every stage after the first reserve index 0 for the zero
vector. A stage can therefore always leave the running residual unchanged,
which makes reconstruction error non-increasing in depth for every input.
Codewords are rounded to float32 precision at the end of training, so a
model written to disk and read back is bit-identical to the trained one.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ArgumentError, CorruptStreamError, MagicError, TokenRangeError, TrainingError, TruncationError, VersionError

log = logging.getLogger(__name__)

MODEL_MAGIC = b"SGRQ"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sBHHB")


@dataclass
class RvqModel:
    """Ordered stage codebooks, each ``C x D``."""

    codebooks: list
    trained_on: str = ""
    history: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not self.codebooks:
            raise ArgumentError("an RVQ model needs at least one stage")
        cbs = [np.ascontiguousarray(cb, dtype=np.float64) for cb in self.codebooks]
        shape = cbs[0].shape
        if len(shape) != 2 or shape[0] < 1 or shape[1] < 1:
            raise ArgumentError(f"bad codebook shape {shape}")
        for cb in cbs:
            if cb.shape != shape:
                raise ArgumentError("all stages must share codebook size and dimension")
            if not np.all(np.isfinite(cb)):
                raise ArgumentError("codebooks contain non-finite values")
        self.codebooks = cbs
        self._sqnorms = [np.einsum("ij,ij->i", cb, cb) for cb in cbs]

    @property
    def num_stages(self) -> int:
        return len(self.codebooks)

    @property
    def codebook_size(self) -> int:
        return self.codebooks[0].shape[0]

    @property
    def dim(self) -> int:
        return self.codebooks[0].shape[1]

    def truncated(self, depth: int) -> "RvqModel":
        """Model made of the first ``depth`` stages."""
        _check_depth(depth, self.num_stages)
        return RvqModel(self.codebooks[:depth], self.trained_on)

    def sqnorms(self, stage: int) -> np.ndarray:
        return self._sqnorms[stage]

    def to_bytes(self) -> bytes:
        c, d = self.codebooks[0].shape
        if c > 0xFFFF or d > 0xFFFF or self.num_stages > 0xFF:
            raise ArgumentError("model dimensions exceed the file format limits")
        parts = [_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, d, c, self.num_stages)]
        parts.extend(cb.astype("<f4").tobytes() for cb in self.codebooks)
        prov = self.trained_on.encode("utf-8")[:0xFFFF]
        parts.append(struct.pack("<H", len(prov)) + prov)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RvqModel":
        if len(data) < _MODEL_HEADER.size:
            raise TruncationError("header", "model file shorter than its header")
        magic, version, d, c, nq = _MODEL_HEADER.unpack_from(data)
        if magic != MODEL_MAGIC:
            raise MagicError("magic", f"expected {MODEL_MAGIC!r}, got {magic!r}")
        if version != MODEL_VERSION:
            raise VersionError("version", f"unsupported model version {version}")
        if c < 1 or d < 1 or nq < 1:
            raise CorruptStreamError("header", f"invalid model dimensions C={c} D={d} N_Q={nq}")
        offset = _MODEL_HEADER.size
        body = nq * c * d * 4
        if len(data) < offset + body:
            raise TruncationError("codebooks", f"need {body} bytes of codewords, have {len(data) - offset}")
        flat = np.frombuffer(data, dtype="<f4", count=nq * c * d, offset=offset).astype(np.float64)
        offset += body
        prov = ""
        if len(data) >= offset + 2:
            (n,) = struct.unpack_from("<H", data, offset)
            prov = data[offset + 2:offset + 2 + n].decode("utf-8", errors="replace")
        if not np.all(np.isfinite(flat)):
            raise CorruptStreamError("codebooks", "non-finite codeword values")
        return cls(list(flat.reshape(nq, c, d)), prov)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "RvqModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _check_depth(depth, num_stages):
    if int(depth) != depth or not 1 <= depth <= num_stages:
        raise ArgumentError(f"depth must be in [1, {num_stages}], got {depth}")


def _as_matrix(x, dim):
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ArgumentError(f"expected vectors of dimension {dim}, got shape {arr.shape}")
    return arr


def vq_nearest(x, codebook):
    """Nearest codeword to a single vector.

    Returns
    -------
    index : int
        Lowest index among the codewords at minimum squared distance.
    residual : ndarray
        ``x - codebook[index]``.
    """
    cb = np.ascontiguousarray(codebook, dtype=np.float64)
    vec = np.asarray(x, dtype=np.float64)
    if cb.ndim != 2 or vec.shape != (cb.shape[1],):
        raise ArgumentError(f"vector shape {vec.shape} incompatible with codebook {cb.shape}")
    idx, _ = kernels.nearest(vec[None, :].copy(), cb, np.einsum("ij,ij->i", cb, cb))
    i = int(idx[0])
    return i, vec - cb[i]


def encode_batch(x, model: RvqModel, depth: int | None = None) -> np.ndarray:
    """Greedy residual encoding of every row of ``x``; returns ``(M, depth)`` ints."""
    depth = model.num_stages if depth is None else depth
    _check_depth(depth, model.num_stages)
    residual = _as_matrix(x, model.dim).copy()
    tokens = np.empty((residual.shape[0], depth), dtype=np.int64)
    for q in range(depth):
        idx, _ = kernels.nearest(residual, model.codebooks[q], model.sqnorms(q))
        tokens[:, q] = idx
        residual -= model.codebooks[q][idx]
    return tokens


def decode_batch(tokens, model: RvqModel) -> np.ndarray:
    """Sum of the selected codewords for an ``(M, d)`` token matrix, ``d <= N_Q``."""
    tok = np.asarray(tokens)
    if tok.ndim != 2 or tok.shape[1] > model.num_stages:
        raise ArgumentError(f"token matrix shape {tok.shape} incompatible with {model.num_stages} stages")
    c = model.codebook_size
    bad = (tok < 0) | (tok >= c)
    if np.any(bad):
        row, stage = np.argwhere(bad)[0]
        raise TokenRangeError(f"tokens[{row}][{stage}]", f"index {tok[row, stage]} outside [0, {c})")
    out = np.zeros((tok.shape[0], model.dim))
    for q in range(tok.shape[1]):
        out += model.codebooks[q][tok[:, q]]
    return out


def rvq_encode(x, model: RvqModel, depth: int | None = None) -> tuple:
    """Token tuple for one vector."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (model.dim,):
        raise ArgumentError(f"expected a vector of dimension {model.dim}, got shape {vec.shape}")
    return tuple(int(i) for i in encode_batch(vec[None, :], model, depth)[0])


def rvq_decode(tokens, model: RvqModel) -> np.ndarray:
    """Reconstruction of one token tuple."""
    return decode_batch(np.asarray(tokens, dtype=np.int64)[None, :], model)[0]


def _kmeans_pp(x, xn, k, rng, zero_fixed):
    n = x.shape[0]
    centers = np.zeros((k, x.shape[1]))
    if zero_fixed:
        d2 = xn.copy()
        first = 1
    else:
        centers[0] = x[rng.integers(n)]
        d2 = np.maximum(xn - 2.0 * (x @ centers[0]) + centers[0] @ centers[0], 0.0)
        first = 1
    for j in range(first, k):
        total = d2.sum()
        if total > 0:
            pick = rng.choice(n, p=d2 / total)
        else:
            pick = rng.integers(n)
        c = x[pick]
        centers[j] = c
        np.minimum(d2, np.maximum(xn - 2.0 * (x @ c) + c @ c, 0.0), out=d2)
        d2[pick] = 0.0
    return centers


def kmeans(x, k, rng, max_iters=100, rel_tol=1e-5, zero_fixed=False):
    """Lloyd k-means with k-means++ seeding.

    Parameters
    ----------
    x : ndarray, shape (n, D)
    k : int
    rng : numpy.random.Generator
    zero_fixed : bool
        Pin codeword 0 to the zero vector; it is never moved.

    Returns
    -------
    centers : ndarray, shape (k, D)
    history : list of float
        Mean squared distortion after each assignment step.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n = x.shape[0]
    xn = np.einsum("ij,ij->i", x, x)
    centers = _kmeans_pp(x, xn, k, rng, zero_fixed)
    history = []
    for _ in range(max_iters):
        sq = np.einsum("ij,ij->i", centers, centers)
        labels, dist = kernels.nearest(x, centers, sq)
        cur = float(dist.mean())
        prev = history[-1] if history else None
        history.append(cur)
        if cur == 0.0 or (prev is not None and prev - cur < rel_tol * prev):
            break
        sums, counts = kernels.accumulate(x, labels, k)
        live = counts > 0
        centers[live] = sums[live] / counts[live, None]
        if zero_fixed:
            centers[0] = 0.0
            live[0] = True
        dead = np.flatnonzero(~live)
        if dead.size:
            # reseed dead codewords on the worst-quantized training vectors
            err = dist.copy()
            order = np.argsort(-err, kind="stable")[: dead.size]
            centers[dead] = x[order]
    return centers, history


def rvq_train(data, codebook_size, num_stages, seed=0, max_iters=100, rel_tol=1e-5, trained_on=""):
    """Train an RVQ model stage by stage on the running residuals.

    Stage ``q`` draws from its own generator seeded with ``(seed, q)``, so
    the first ``d`` stages of a deep model equal a ``d``-stage model trained
    with the same seed.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ArgumentError(f"training data must be a 2-D array, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ArgumentError("training data contains non-finite values")
    if int(codebook_size) != codebook_size or codebook_size < 1:
        raise ArgumentError(f"codebook size must be a positive integer, got {codebook_size}")
    if int(num_stages) != num_stages or num_stages < 1:
        raise ArgumentError(f"number of stages must be a positive integer, got {num_stages}")
    if x.shape[0] < codebook_size:
        raise TrainingError(f"{x.shape[0]} training vectors for a codebook of size {codebook_size}")
    residual = x.copy()
    codebooks, history = [], []
    for q in range(num_stages):
        rng = np.random.default_rng([seed, q])
        centers, hist = kmeans(residual, codebook_size, rng, max_iters, rel_tol, zero_fixed=q > 0)
        centers = centers.astype(np.float32).astype(np.float64)
        idx, _ = kernels.nearest(residual, centers, np.einsum("ij,ij->i", centers, centers))
        residual -= centers[idx]
        codebooks.append(centers)
        history.append(hist)
        log.info("stage %d: %d Lloyd iterations, residual energy %.6g", q, len(hist),
                 float(np.mean(np.einsum("ij,ij->i", residual, residual))))
    model = RvqModel(codebooks, trained_on)
    model.history = history
    return model


def codebook_usage(tokens, codebook_size):
    """Per-stage usage histogram and normalised perplexity ``exp(H) / C``.

    Returns
    -------
    counts : ndarray, shape (stages, C)
    perplexity : ndarray, shape (stages,)
    """
    tok = np.asarray(tokens, dtype=np.int64)
    if tok.ndim == 1:
        tok = tok[:, None]
    stages = tok.shape[1]
    counts = np.zeros((stages, codebook_size), dtype=np.int64)
    perplexity = np.zeros(stages)
    for q in range(stages):
        counts[q] = np.bincount(tok[:, q], minlength=codebook_size)[:codebook_size]
        total = counts[q].sum()
        if total == 0:
            continue
        p = counts[q][counts[q] > 0] / total
        perplexity[q] = np.exp(-np.sum(p * np.log(p))) / codebook_size
    return counts, perplexity
