"""Gain-sweep, rate-distortion and RVQ-depth experiment harnesses.

Both harnesses return plain row dictionaries in a deterministic order so
the CLI can write them straight to CSV.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import rvq
from .codec import CodecConfig, analyze, bitrate, decode_signal, encode_signal, train_model
from .metrics import gain_scale, sensitivity_profile, si_sdr

log = logging.getLogger(__name__)

ALPHA_GRID = tuple(range(-12, 13, 2))
RD_COLUMNS = ["mode", "codebook_size", "num_stages", "bitrate_bps", "si_sdr_db", "si_sdr_0db", "dcs"]
SENSITIVITY_COLUMNS = ["mode", "alpha_db", "norm_ratio", "cosine", "dcs"]


def model_filename(mode, codebook_size, num_stages, seed) -> str:
    return f"{mode}_C{codebook_size}_NQ{num_stages}_seed{seed}.sgrq"


def get_model(train_signals, cfg: CodecConfig, seed, max_iters, rel_tol, model_dir=None) -> rvq.RvqModel:
    """Train a model for ``cfg``, or load it from ``model_dir`` when cached there."""
    path = None
    if model_dir is not None:
        path = Path(model_dir) / model_filename(cfg.mode, cfg.codebook_size, cfg.num_stages, seed)
        if path.exists():
            log.info("loading cached model %s", path)
            return rvq.RvqModel.load(path)
    log.info("training %s model C=%d N_Q=%d", cfg.mode, cfg.codebook_size, cfg.num_stages)
    model = train_model(train_signals, cfg, seed=seed, max_iters=max_iters, rel_tol=rel_tol)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        model.save(path)
    return model


def evaluate_depths(test_signals, cfg: CodecConfig, model: rvq.RvqModel, depths, alphas=ALPHA_GRID):
    """Score every depth in ``depths`` on every test signal and gain.

    Signals are encoded once at the largest depth; shallower depths reuse
    the token prefix, which is exactly what a shallower greedy encoder
    would emit.

    Returns
    -------
    dict
        ``depth -> {"si_sdr": (len(alphas), len(signals)) array, "dcs": same shape}``
    """
    depths = sorted(set(int(d) for d in depths))
    deep = replace(cfg, num_stages=max(depths))
    alphas = list(alphas)
    scores = {d: np.zeros((len(alphas), len(test_signals))) for d in depths}
    stab = {d: np.zeros((len(alphas), len(test_signals))) for d in depths}
    for j, x in enumerate(test_signals):
        x = np.asarray(x, dtype=np.float64)
        keep = ~analyze(x, deep).silent
        ref_tokens = encode_signal(x, deep, model).tokens[keep]
        for i, a in enumerate(alphas):
            xa = gain_scale(x, a)
            stream = encode_signal(xa, deep, model)
            reference = xa - xa.mean()
            for d in depths:
                sub = replace(stream, tokens=stream.tokens[:, :d], num_stages=d)
                scores[d][i, j] = si_sdr(reference, decode_signal(sub, replace(deep, num_stages=d), model))
                same = np.all(stream.tokens[keep, :d] == ref_tokens[:, :d], axis=1)
                stab[d][i, j] = same.mean() if same.size else 1.0
    return {d: {"si_sdr": scores[d], "dcs": stab[d]} for d in depths}


def _rd_rows(mode, size, stages_list, base, train_signals, test_signals, alphas, seed, max_iters,
             rel_tol, model_dir):
    cfg = replace(base, mode=mode, codebook_size=size, num_stages=max(stages_list))
    model = get_model(train_signals, cfg, seed, max_iters, rel_tol, model_dir)
    results = evaluate_depths(test_signals, cfg, model, stages_list, alphas)
    alphas = list(alphas)
    nonzero = [i for i, a in enumerate(alphas) if a != 0]
    zero = [i for i, a in enumerate(alphas) if a == 0]
    rows = []
    for d in sorted(results):
        res = results[d]
        rows.append({
            "mode": mode,
            "codebook_size": size,
            "num_stages": d,
            "bitrate_bps": bitrate(replace(cfg, num_stages=d)),
            "si_sdr_db": float(res["si_sdr"].mean()),
            "si_sdr_0db": float(res["si_sdr"][zero].mean()) if zero else float("nan"),
            "dcs": float(res["dcs"][nonzero].mean()) if nonzero else 1.0,
        })
    return rows


def rd_sweep(train_signals, test_signals, base: CodecConfig, modes=("baseline", "equalizer"),
             sizes=(128, 256, 512, 1024), stages_list=(8,), alphas=ALPHA_GRID, seed=0,
             max_iters=100, rel_tol=1e-5, model_dir=None, jobs=1):
    """Rate-distortion sweep over modes, codebook sizes and RVQ depths.

    One model per ``(mode, C)`` is trained with ``max(stages_list)`` stages;
    shallower depths use its leading stages. Rows are sorted by
    ``(mode, codebook_size, num_stages)`` whatever the completion order.
    """
    tasks = [(m, c) for m in modes for c in sizes]
    args = (base, train_signals, test_signals, tuple(alphas), seed, max_iters, rel_tol, model_dir)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_rd_rows, m, c, list(stages_list), *args) for m, c in tasks]
            chunks = [f.result() for f in futures]
    else:
        chunks = [_rd_rows(m, c, list(stages_list), *args) for m, c in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r["mode"], r["codebook_size"], r["num_stages"]))
    return rows


def sensitivity_rows(test_signals, models: dict, base: CodecConfig, alphas=ALPHA_GRID):
    """One row per ``(mode, alpha)`` with norm ratio, cosine and DCS columns.

    ``models`` maps mode name to a trained model. Per-stage DCS columns
    ``dcs_stage1 ... dcs_stageN`` follow the full-tuple DCS.
    """
    rows = []
    for mode in sorted(models):
        cfg = replace(base, mode=mode)
        prof = sensitivity_profile(test_signals, alphas, cfg, models[mode])
        for row in prof.rows():
            out = {"mode": mode}
            out.update({k: row[k] for k in ("alpha_db", "norm_ratio", "cosine", "dcs")})
            for q, v in enumerate(row["dcs_stage"], start=1):
                out[f"dcs_stage{q}"] = v
            rows.append(out)
    return rows
