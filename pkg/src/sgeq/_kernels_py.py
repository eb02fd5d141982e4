"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or disabled with
``SGEQ_PURE_PYTHON=1``. Results must match ``_kernels.pyx`` exactly for the
accumulation and bit-packing kernels; ``nearest`` may differ only on
distance ties below BLAS rounding.
"""

import numpy as np

_BLOCK_ROWS = 2048


def nearest(x, codebook, cb_sqnorm):
    """Index of, and squared distance to, the closest codeword per row.

    Distances use the expanded form ``|x|^2 - 2<x, c> + |c|^2`` clamped at
    zero; ties resolve to the lowest index.
    """
    n = x.shape[0]
    idx = np.empty(n, dtype=np.int64)
    dist = np.empty(n, dtype=np.float64)
    for start in range(0, n, _BLOCK_ROWS):
        blk = x[start:start + _BLOCK_ROWS]
        xn = np.einsum("ij,ij->i", blk, blk)
        d = (xn[:, None] - 2.0 * (blk @ codebook.T)) + cb_sqnorm[None, :]
        np.maximum(d, 0.0, out=d)
        best = np.argmin(d, axis=1)
        idx[start:start + blk.shape[0]] = best
        dist[start:start + blk.shape[0]] = d[np.arange(blk.shape[0]), best]
    return idx, dist


def accumulate(x, labels, n_clusters):
    """Per-cluster vector sums and member counts, summed in row order."""
    sums = np.zeros((n_clusters, x.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=n_clusters).astype(np.int64)
    return sums, counts


def pack_fields(values, widths):
    """Pack an ``(n, k)`` array of unsigned fields MSB-first into bytes.

    Row ``i`` contributes its ``k`` fields in column order, field ``j``
    using ``widths[j]`` bits. The tail is zero-padded to a byte boundary.
    """
    values = np.asarray(values, dtype=np.uint64)
    if values.size == 0:
        return b""
    cols = []
    for j, w in enumerate(widths):
        shifts = np.arange(w - 1, -1, -1, dtype=np.uint64)
        cols.append(((values[:, j, None] >> shifts) & np.uint64(1)).astype(np.uint8))
    bits = np.concatenate(cols, axis=1).ravel()
    return np.packbits(bits).tobytes()


def unpack_fields(data, n_rows, widths):
    """Inverse of :func:`pack_fields`; returns an ``(n_rows, k)`` int64 array."""
    total = int(sum(widths))
    out = np.zeros((n_rows, len(widths)), dtype=np.int64)
    if n_rows == 0 or total == 0:
        return out
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[: n_rows * total]
    bits = bits.reshape(n_rows, total).astype(np.int64)
    pos = 0
    for j, w in enumerate(widths):
        weights = np.int64(1) << np.arange(w - 1, -1, -1, dtype=np.int64)
        out[:, j] = bits[:, pos:pos + w] @ weights
        pos += w
    return out
