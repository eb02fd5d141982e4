"""SI-SDR and gain-sensitivity metrics (norm ratio, cosine, code stability)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import rvq
from .codec import CodecConfig, analyze
from .errors import ArgumentError

SI_SDR_CAP = 150.0


def si_sdr(reference, estimate) -> float:
    """Scale-invariant SDR in dB, clamped to ``[-150, 150]``.

    The reference is scaled by ``<estimate, reference> / |reference|^2``
    before measuring the error.
    """
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise ArgumentError(f"length mismatch: {ref.shape} vs {est.shape}")
    ref_energy = float(ref @ ref)
    if ref_energy == 0.0:
        raise ArgumentError("reference signal is identically zero")
    target = (float(est @ ref) / ref_energy) * ref
    t = float(target @ target)
    e = est - target
    err = float(e @ e)
    if t == 0.0:
        return -SI_SDR_CAP
    if err <= t * 10 ** (-SI_SDR_CAP / 10):
        return SI_SDR_CAP
    return float(np.clip(10.0 * np.log10(t / err), -SI_SDR_CAP, SI_SDR_CAP))


def gain_scale(signal, alpha_db):
    """``10**(alpha/20) * signal``."""
    return (10.0 ** (alpha_db / 20.0)) * np.asarray(signal, dtype=np.float64)


@dataclass
class SensitivityProfile:
    alphas: np.ndarray
    norm_ratio: np.ndarray
    cosine: np.ndarray
    dcs: np.ndarray
    dcs_per_stage: np.ndarray
    num_frames: int

    def rows(self):
        for i, a in enumerate(self.alphas):
            yield {
                "alpha_db": float(a),
                "norm_ratio": float(self.norm_ratio[i]),
                "cosine": float(self.cosine[i]),
                "dcs": float(self.dcs[i]),
                "dcs_stage": [float(v) for v in self.dcs_per_stage[i]],
            }


def dcs(tokens_ref, tokens, mask=None) -> float:
    """Fraction of frames whose full token tuple matches the reference.

    ``mask`` selects the frames that count (e.g. non-silent frames).
    """
    a, b = np.asarray(tokens_ref), np.asarray(tokens)
    if a.shape != b.shape:
        raise ArgumentError(f"token shapes differ: {a.shape} vs {b.shape}")
    same = np.all(a == b, axis=1) if a.ndim == 2 else a == b
    if mask is not None:
        same = same[np.asarray(mask, dtype=bool)]
    return float(same.mean()) if same.size else 1.0


def sensitivity_profile(signals, alphas, cfg: CodecConfig, model: rvq.RvqModel) -> SensitivityProfile:
    """Embedding norm ratio, cosine similarity and code stability versus input gain.

    Frames are pooled over all ``signals``; frames that are silent at the
    0 dB reference are excluded. Norm ratio is the mean embedding norm at
    ``alpha`` over the mean norm at 0 dB; cosine is the mean per-frame cosine
    similarity with the 0 dB embedding; DCS is the fraction of frames whose
    full token tuple is unchanged.
    """
    alphas = np.asarray(alphas, dtype=np.float64)
    if not np.any(alphas == 0.0):
        raise ArgumentError("the alpha grid must contain the 0 dB reference")
    if isinstance(signals, np.ndarray) and signals.ndim == 1:
        signals = [signals]
    depth = cfg.num_stages
    refs = []
    for x in signals:
        ana = analyze(x, cfg)
        keep = ~ana.silent
        z = ana.embeddings[keep]
        refs.append((x, keep, z, rvq.encode_batch(z, model, depth)))
    n_frames = sum(r[2].shape[0] for r in refs)
    if n_frames == 0:
        raise ArgumentError("no non-silent frames to evaluate")
    ref_norm = np.concatenate([np.linalg.norm(r[2], axis=1) for r in refs])
    k = len(alphas)
    norm_ratio, cosine, dcs_full = np.zeros(k), np.zeros(k), np.zeros(k)
    per_stage = np.zeros((k, depth))
    for i, a in enumerate(alphas):
        norms, cos, same, same_stage = [], [], [], []
        for x, keep, z0, t0 in refs:
            if a == 0.0:
                za, ta = z0, t0
            else:
                za = analyze(gain_scale(x, a), cfg).embeddings[keep]
                ta = rvq.encode_batch(za, model, depth)
            na = np.linalg.norm(za, axis=1)
            n0 = np.linalg.norm(z0, axis=1)
            denom = np.where(na * n0 > 0, na * n0, 1.0)
            c = np.einsum("ij,ij->i", za, z0) / denom
            c[na * n0 == 0] = 1.0
            if a == 0.0:
                c = np.ones_like(c)
            norms.append(na)
            cos.append(c)
            same.append(np.all(ta == t0, axis=1))
            same_stage.append(ta == t0)
        norm_ratio[i] = np.concatenate(norms).mean() / ref_norm.mean()
        cosine[i] = np.clip(np.concatenate(cos).mean(), -1.0, 1.0)
        dcs_full[i] = np.concatenate(same).mean()
        per_stage[i] = np.concatenate(same_stage, axis=0).mean(axis=0)
    return SensitivityProfile(alphas, norm_ratio, cosine, dcs_full, per_stage, n_frames)


def write_csv(rows, fieldnames, fh=None) -> str:
    """Write dict rows as CSV with a fixed column order; returns the text."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in fieldnames})
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v
