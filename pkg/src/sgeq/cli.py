"""Command-line front end.

Subcommands: synth, train, encode, decode, eval, sensitivity, rdsweep.
Settings come from flags, optionally preloaded from a TOML file given with
``--config``; flags win over the file. Exit codes: 0 success, 2
configuration error, 3 data error, 4 corrupt stream.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bitstream, experiments
from .codec import CodecConfig, bitrate, decode_signal, encode_signal, train_model
from .corpus import SYNTH_KINDS, Utterance, load_corpus, read_wav, synth_signal, write_wav
from .errors import ConfigError, SgeqError
from .framing import WindowSpec
from .metrics import write_csv
from .rvq import RvqModel

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("sgeq")

# reference settings; overridable by --config then by flags
DEFAULTS = {
    "mode": "equalizer",
    "frame_len": 640,
    "hop": 320,
    "beta": 4.0,
    "codebook_size": 1024,
    "stages": 8,
    "gain_bits": 8,
    "mu": 255.0,
    "transform": "dct",
    "sample_rate": 16000,
    "seed": 0,
    "alpha_grid": "-12:12:2",
    "max_iters": 100,
    "rel_tol": 1e-5,
    "codebook_sizes": "128,256,512,1024",
    "stages_list": "8",
    "modes": "baseline,equalizer",
    "jobs": 1,
}


def parse_grid(text) -> list:
    """Parse ``start:stop:step`` (inclusive) or a comma list of numbers."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from exc


def parse_int_list(text) -> list:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse integer list {text!r}") from exc


def _codec_args(p):
    g = p.add_argument_group("codec")
    g.add_argument("--mode", choices=["baseline", "equalizer"])
    g.add_argument("--frame-len", type=int, help="window length N in samples")
    g.add_argument("--hop", type=int, help="hop H in samples")
    g.add_argument("--beta", type=float, help="KBD Kaiser shape parameter")
    g.add_argument("--codebook-size", type=int, help="codewords per RVQ stage (C)")
    g.add_argument("--stages", type=int, help="RVQ depth (N_Q)")
    g.add_argument("--gain-bits", type=int, help="bits per gain code")
    g.add_argument("--mu", type=float, help="mu-law constant")
    g.add_argument("--transform", choices=["dct", "identity"])
    g.add_argument("--sample-rate", type=int)


def _train_args(p):
    p.add_argument("--max-iters", type=int, help="Lloyd iterations per stage")
    p.add_argument("--rel-tol", type=float, help="relative distortion decrease to stop Lloyd")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgeq", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML file with default settings")
    common.add_argument("--seed", type=int)
    common.add_argument("--log-level", default="WARNING")
    _codec_args(common)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic WAV corpus")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--kinds", default="voiced", help=f"comma list from {', '.join(SYNTH_KINDS)}")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--prefix", default="utt")

    p = sub.add_parser("train", parents=[common], help="train an RVQ model on a corpus")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True, help="output model file")
    _train_args(p)

    for name, desc in (("encode", "WAV to encoded stream"), ("decode", "encoded stream to WAV")):
        p = sub.add_parser(name, parents=[common], help=desc)
        p.add_argument("--model", type=Path, required=True)
        p.add_argument("input", type=Path)
        p.add_argument("output", type=Path)

    p = sub.add_parser("eval", parents=[common], help="per-utterance SI-SDR and DCS over the gain grid")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--alpha-grid")
    p.add_argument("--out", default="-")

    p = sub.add_parser("sensitivity", parents=[common], help="gain-sensitivity profile for both modes")
    p.add_argument("--corpus", type=Path, required=True, help="evaluation corpus")
    p.add_argument("--train-corpus", type=Path, help="used when a model file is not given")
    p.add_argument("--baseline-model", type=Path)
    p.add_argument("--equalizer-model", type=Path)
    p.add_argument("--alpha-grid")
    p.add_argument("--out", default="-")
    _train_args(p)

    p = sub.add_parser("rdsweep", parents=[common], help="rate-distortion / depth sweep")
    p.add_argument("--corpus", type=Path, required=True, help="evaluation corpus")
    p.add_argument("--train-corpus", type=Path, required=True)
    p.add_argument("--modes")
    p.add_argument("--codebook-sizes")
    p.add_argument("--stages-list")
    p.add_argument("--alpha-grid")
    p.add_argument("--model-dir", type=Path, help="cache for trained models")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", default="-")
    _train_args(p)
    return parser


def resolve(args) -> dict:
    """Merge defaults, the optional TOML file and explicit flags."""
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            with open(args.config, "rb") as fh:
                data = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            settings[key] = value
    for key, value in vars(args).items():
        if value is not None and key in DEFAULTS:
            settings[key] = value
    return settings


def codec_config(settings) -> CodecConfig:
    window = WindowSpec(length=settings["frame_len"], hop=settings["hop"], beta=settings["beta"])
    return CodecConfig(window=window, mode=settings["mode"], transform=settings["transform"],
                       codebook_size=settings["codebook_size"], num_stages=settings["stages"],
                       gain_bits=settings["gain_bits"], mu=settings["mu"],
                       sample_rate=settings["sample_rate"])


def _open_out(target):
    if str(target) == "-":
        return sys.stdout, False
    path = Path(target)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline=""), True


def _emit_csv(rows, columns, target):
    fh, close = _open_out(target)
    try:
        write_csv(rows, columns, fh)
    finally:
        if close:
            fh.close()


def _signals(corpus, cfg):
    return [u.samples for u in load_corpus(corpus, cfg.sample_rate)]


def cmd_synth(args, settings, cfg):
    args.out.mkdir(parents=True, exist_ok=True)
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    for i in range(args.count):
        kind = kinds[i % len(kinds)]
        utt = synth_signal(kind, args.duration, seed=settings["seed"] + i, sample_rate=cfg.sample_rate)
        write_wav(utt, args.out / f"{args.prefix}{i:03d}_{kind}.wav")
    return 0


def cmd_train(args, settings, cfg):
    signals = _signals(args.corpus, cfg)
    model = train_model(signals, cfg, seed=settings["seed"], max_iters=settings["max_iters"],
                        rel_tol=settings["rel_tol"], label=f"corpus={args.corpus.name}")
    args.model.parent.mkdir(parents=True, exist_ok=True)
    model.save(args.model)
    print(f"model={args.model} stages={model.num_stages} C={model.codebook_size} D={model.dim}")
    return 0


def cmd_encode(args, settings, cfg):
    model = RvqModel.load(args.model)
    utt = read_wav(args.input, cfg.sample_rate)
    stream = encode_signal(utt.samples, cfg, model, sample_rate=utt.sample_rate)
    data = bitstream.serialize(stream)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    args.output.write_bytes(data)
    print(f"frames={stream.num_frames} bytes={len(data)} bitrate_bps={bitrate(cfg)}")
    return 0


def cmd_decode(args, settings, cfg):
    model = RvqModel.load(args.model)
    stream = bitstream.deserialize(args.input.read_bytes())
    samples = decode_signal(stream, cfg, model)
    write_wav(Utterance(samples, stream.sample_rate, args.output.stem), args.output)
    print(f"samples={samples.size} mode={stream.mode}")
    return 0


def cmd_eval(args, settings, cfg):
    model = RvqModel.load(args.model)
    alphas = parse_grid(settings["alpha_grid"])
    rows = []
    for utt in load_corpus(args.corpus, cfg.sample_rate):
        res = experiments.evaluate_depths([utt.samples], cfg, model, [cfg.num_stages], alphas)
        res = res[cfg.num_stages]
        for i, a in enumerate(alphas):
            rows.append({"utterance": utt.id, "alpha_db": float(a),
                         "si_sdr_db": float(res["si_sdr"][i, 0]), "dcs": float(res["dcs"][i, 0])})
    _emit_csv(rows, ["utterance", "alpha_db", "si_sdr_db", "dcs"], args.out)
    return 0


def cmd_sensitivity(args, settings, cfg):
    alphas = parse_grid(settings["alpha_grid"])
    if 0.0 not in alphas:
        raise ConfigError("the alpha grid must include 0")
    test = _signals(args.corpus, cfg)
    train = None
    models = {}
    for mode, path in (("baseline", args.baseline_model), ("equalizer", args.equalizer_model)):
        if path is not None:
            models[mode] = RvqModel.load(path)
            continue
        if args.train_corpus is None:
            raise ConfigError(f"no {mode} model given and no --train-corpus to train one")
        if train is None:
            train = _signals(args.train_corpus, cfg)
        models[mode] = experiments.get_model(train, replace(cfg, mode=mode), settings["seed"],
                                             settings["max_iters"], settings["rel_tol"])
    rows = experiments.sensitivity_rows(test, models, cfg, alphas)
    columns = experiments.SENSITIVITY_COLUMNS + [f"dcs_stage{q}" for q in range(1, cfg.num_stages + 1)]
    _emit_csv(rows, columns, args.out)
    return 0


def cmd_rdsweep(args, settings, cfg):
    modes = [m.strip() for m in str(settings["modes"]).split(",") if m.strip()]
    for m in modes:
        if m not in ("baseline", "equalizer"):
            raise ConfigError(f"unknown mode {m!r}")
    sizes = parse_int_list(settings["codebook_sizes"])
    stages = parse_int_list(settings["stages_list"])
    for c in sizes:
        bitrate(replace(cfg, codebook_size=c))
    if not stages or min(stages) < 1:
        raise ConfigError("stages list must contain positive integers")
    alphas = parse_grid(settings["alpha_grid"])
    test = _signals(args.corpus, cfg)
    train = _signals(args.train_corpus, cfg)
    rows = experiments.rd_sweep(train, test, cfg, modes=modes, sizes=sizes, stages_list=stages,
                                alphas=alphas, seed=settings["seed"], max_iters=settings["max_iters"],
                                rel_tol=settings["rel_tol"], model_dir=args.model_dir,
                                jobs=settings["jobs"])
    _emit_csv(rows, experiments.RD_COLUMNS, args.out)
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "eval": cmd_eval,
    "sensitivity": cmd_sensitivity,
    "rdsweep": cmd_rdsweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        try:
            cfg = codec_config(settings)
            if settings["max_iters"] < 1 or not settings["rel_tol"] >= 0:
                raise ConfigError("max-iters must be >= 1 and rel-tol >= 0")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SgeqError):
                raise
            raise ConfigError(str(exc)) from exc
        return COMMANDS[args.command](args, settings, cfg)
    except SgeqError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
