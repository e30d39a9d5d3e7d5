"""``edcnet`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error.
"""

import argparse
import difflib
import json
import logging
import sys
from dataclasses import asdict, fields
from pathlib import Path

import jsonschema
import numpy as np

from . import BANDS_HZ, __version__
from .acoustics import DEFAULT_FS, simulate_band_rirs
from .binio import read_array, write_array
from .dataset import generate_dataset, split_data
from .edc import DEFAULT_EDC_LENGTH, analyze_bands
from .errors import EdcnetError, FormatError
from .evaluation import EvalReport, evaluate, evaluate_predictions, markdown_table, validate_report, write_plot_data
from .loss import LossConfig
from .nn.model import PRESETS, ModelConfig, load_params, preset
from .recon import RssConfig, read_wav, reconstruct_bands, write_wav
from .roomgen import N_FEATURES, MinMaxScaler, RoomConfig, featurize, read_dataset, write_dataset
from .stamp import make_stamp
from .trainer import TrainConfig, train

log = logging.getLogger("edcnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so ``main`` controls the exit code."""

    argv = ()

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}{_suggest(self, message, _Parser.argv)}")


def _option_strings(parser):
    opts = set()
    for action in parser._actions:
        opts.update(action.option_strings)
        if isinstance(action, argparse._SubParsersAction):
            opts.update(action.choices)
            for sub in action.choices.values():
                opts.update(_option_strings(sub))
    return opts


def _suggest(parser, message, argv):
    known = _option_strings(parser)
    hints = []
    if "invalid choice: '" in message:
        bad = message.split("invalid choice: '", 1)[1].split("'", 1)[0]
        hints += difflib.get_close_matches(bad, sorted(k for k in known if not k.startswith("-")), n=1)
    flags = sorted(k for k in known if k.startswith("-"))
    for token in argv:
        token = token.split("=", 1)[0]
        if token.startswith("--") and token not in known:
            hints += difflib.get_close_matches(token, flags, n=1, cutoff=0.6)
    hints = list(dict.fromkeys(hints))
    return f" (did you mean {', '.join(hints)}?)" if hints else ""


# ---------------------------------------------------------------- helpers

def _sidecar(path):
    return Path(str(path) + ".json")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _write_stamped_array(path, array, stamp, **meta):
    write_array(path, array)
    _write_json(_sidecar(path), {"stamp": stamp.to_dict(), **meta})


def _read_sidecar(path):
    side = _sidecar(path)
    if not side.exists():
        return {}
    try:
        return json.loads(side.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{side}: {exc}") from exc


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _known(cls, d, what):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ValueError(f"unknown {what} keys {sorted(unknown)}; allowed: {sorted(names)}")
    return d


# ---------------------------------------------------------------- gen

def cmd_gen(args):
    config = {"command": "gen", "count": args.count, "seed": args.seed, "edc_length": args.edc_length,
              "fs": args.fs, "max_order": args.max_order}
    stamp = make_stamp(config, args.seed)
    manifest, features, edcs = generate_dataset(
        args.count, args.seed, edc_length=args.edc_length, fs=args.fs, max_order=args.max_order,
        workers=args.workers, stamp=stamp.to_dict(),
    )
    write_dataset(manifest, features, edcs, args.out)
    print(f"wrote {args.count} rooms to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate

def cmd_simulate(args):
    room = RoomConfig.from_dict(_load_json(args.room))
    config = {"command": "simulate", "room": room.to_dict(), "fs": args.fs, "max_order": args.max_order,
              "length": args.length}
    stamp = make_stamp(config, room.seed)
    rirs = simulate_band_rirs(room, fs=args.fs, max_order=args.max_order, length=args.length)
    _write_stamped_array(args.out, rirs.signals.astype(np.float32), stamp, kind="band_rirs",
                         sample_rate=rirs.sample_rate, max_order=rirs.max_order, bands=list(BANDS_HZ),
                         skipped_images=rirs.skipped_images)
    print(f"wrote {rirs.signals.shape[0]}x{rirs.length} band RIRs to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze

def _read_signals(path):
    path = Path(path)
    if path.suffix.lower() == ".wav":
        signal, fs = read_wav(path)
        return signal[None], fs
    arr = read_array(path)
    return arr.reshape(-1, arr.shape[-1]).astype(np.float64), None


def cmd_analyze(args):
    signals, wav_fs = _read_signals(args.rir)
    fs = args.fs if args.fs is not None else (wav_fs or _read_sidecar(args.rir).get("sample_rate", DEFAULT_FS))
    params = analyze_bands(signals, fs)
    stamp = make_stamp({"command": "analyze", "rir": str(args.rir), "fs": fs}, 0)
    out = {"sample_rate": fs, **params.to_dict(), "stamp": stamp.to_dict()}
    if signals.shape[0] == len(BANDS_HZ):
        out["bands_hz"] = list(BANDS_HZ)
    if args.out:
        _write_json(args.out, out)
    if args.json:
        print(json.dumps(out, indent=2))
    else:
        print(f"{'row':>5} {'EDT s':>8} {'T20 s':>8} {'T30 s':>8} {'C50 dB':>8}")
        for i in range(signals.shape[0]):
            vals = [params.edt_s[i], params.t20_s[i], params.t30_s[i], params.c50_db[i]]
            print(f"{i:>5} " + " ".join(f"{v:8.3f}" for v in vals))
    return EXIT_OK


# ---------------------------------------------------------------- train

def _train_configs(args, manifest):
    cfg = _load_json(args.config) if args.config else {}
    unknown = set(cfg) - {"preset", "model", "train", "loss"}
    if unknown:
        raise ValueError(f"unknown config sections {sorted(unknown)}")
    preset_name = args.preset or cfg.get("preset", "desk")
    model_over = dict(_known(ModelConfig, cfg.get("model", {}), "model"))
    train_over = dict(_known(TrainConfig, cfg.get("train", {}), "train"))
    loss_over = dict(_known(LossConfig, cfg.get("loss", {}), "loss"))

    for key, flag in (("epochs", "epochs"), ("learning_rate", "lr"), ("batch_size", "batch_size"),
                      ("patience", "patience"), ("lr_schedule", "lr_schedule")):
        if getattr(args, flag) is not None:
            train_over[key] = getattr(args, flag)
    for key, flag in (("alpha", "alpha"), ("k", "stride_k"), ("epsilon", "epsilon")):
        if getattr(args, flag) is not None:
            loss_over[key] = getattr(args, flag)
    if args.seed is not None:
        train_over["seed"] = args.seed
        model_over["seed"] = args.seed
    model_over["edc_length"] = manifest.edc_length
    for key in ("hidden", "channels"):
        if key in model_over:
            model_over[key] = tuple(model_over[key])
    train_over["checkpoint_dir"] = str(args.out)

    model_cfg = preset(preset_name, **model_over)
    train_cfg = TrainConfig(**train_over)
    loss_cfg = LossConfig(**loss_over)
    if loss_cfg.k >= manifest.edc_length:
        raise ValueError(f"slope stride k={loss_cfg.k} must be below the EDC length {manifest.edc_length}")
    return preset_name, model_cfg, train_cfg, loss_cfg


def cmd_train(args):
    manifest, features, edcs = read_dataset(args.data)
    preset_name, model_cfg, train_cfg, loss_cfg = _train_configs(args, manifest)
    effective = {
        "command": "train",
        "preset": preset_name,
        "model": model_cfg.to_dict(),
        "train": {k: v for k, v in asdict(train_cfg).items() if k != "checkpoint_dir"},
        "loss": asdict(loss_cfg),
        "dataset_stamp": manifest.stamp,
    }
    stamp = make_stamp(effective, train_cfg.seed)
    extra = {
        "stamp": stamp.to_dict(),
        "config": effective,
        "scaler": manifest.scaler.to_dict(),
        "frame_dt": manifest.frame_dt,
        "sample_rate": manifest.sample_rate,
        "edc_length": manifest.edc_length,
    }
    resume = None
    if args.resume:
        resume = Path(args.out) / "last.ckpt"
        if not resume.exists():
            raise FileNotFoundError(f"nothing to resume: {resume} does not exist")
    tr = split_data(manifest, features, edcs, "train")
    va = split_data(manifest, features, edcs, "val")
    _, tlog = train(tr, va, model_cfg, train_cfg, loss_cfg, resume_from=resume, extra_meta=extra)
    print(f"trained {tlog.epochs_completed} epochs; best epoch {tlog.best_epoch} "
          f"val loss {tlog.best_val_loss:.4f}; checkpoints in {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- predict

def _feature_rows(obj):
    """Raw feature vectors from a room dict, ``{"features": [...]}``, a bare vector, or a list of these."""
    if isinstance(obj, dict) and "rooms" in obj:
        obj = obj["rooms"]
    if isinstance(obj, list) and obj and not isinstance(obj[0], (int, float)):
        return np.stack([_feature_rows(o)[0] for o in obj]), False
    if isinstance(obj, dict) and "features" in obj:
        obj = obj["features"]
    if isinstance(obj, dict):
        try:
            room = RoomConfig.from_dict(obj)
        except (KeyError, TypeError) as exc:
            raise FormatError(f"room description missing field {exc}") from exc
        return featurize(room)[None], True
    vec = np.asarray(obj, dtype=np.float64)
    if vec.shape != (N_FEATURES,):
        raise FormatError(f"expected {N_FEATURES} raw features, got shape {vec.shape}")
    return vec[None], True


def _load_model(ckpt):
    model, extra, _ = load_params(ckpt, with_extras=True)
    for key in ("scaler", "frame_dt", "sample_rate"):
        if key not in extra:
            raise FormatError(f"{ckpt}: checkpoint lacks {key!r}; train it with 'edcnet train'")
    return model, extra


def cmd_predict(args):
    model, extra = _load_model(args.ckpt)
    rows, single = _feature_rows(_load_json(args.features))
    x = MinMaxScaler.from_dict(extra["scaler"]).transform(rows)
    pred = np.asarray(model.forward(x), dtype=np.float32)
    if single:
        pred = pred[0]
    out = Path(args.out) if args.out else Path(args.features).with_suffix(".edc.bin")
    stamp = make_stamp({"command": "predict", "ckpt_stamp": extra.get("stamp"),
                        "features": rows.tolist()}, extra.get("stamp", {}).get("seed", 0))
    _write_stamped_array(out, pred, stamp, kind="edc", frame_dt=extra["frame_dt"],
                         sample_rate=extra["sample_rate"], bands=list(BANDS_HZ))
    print(f"wrote EDC {'x'.join(map(str, pred.shape))} to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- reconstruct

def cmd_reconstruct(args):
    edcs = read_array(args.edc)
    edcs = edcs.reshape(-1, edcs.shape[-2], edcs.shape[-1])
    if not 0 <= args.index < edcs.shape[0]:
        raise ValueError(f"--index {args.index} out of range for {edcs.shape[0]} EDC stack(s)")
    frame_dt = args.frame_dt if args.frame_dt is not None else _read_sidecar(args.edc).get("frame_dt")
    if frame_dt is None:
        raise ValueError(f"frame duration unknown: pass --frame-dt or provide {_sidecar(args.edc)}")
    cfg = RssConfig(p=args.p, seed=args.seed)
    bands = reconstruct_bands(edcs[args.index], frame_dt, args.fs, cfg)
    rir = bands.sum(axis=0)
    peak = np.abs(rir).max()
    if peak > 0:
        scale = 0.99 / peak
        rir, bands = rir * scale, bands * scale
    stamp = make_stamp({"command": "reconstruct", "edc": str(args.edc), "fs": args.fs, "p": args.p,
                        "frame_dt": frame_dt, "index": args.index}, args.seed)
    write_wav(args.out, rir, args.fs)
    _write_json(_sidecar(args.out), {"stamp": stamp.to_dict(), "kind": "rir_wav", "sample_rate": args.fs})
    if args.bands_out:
        _write_stamped_array(args.bands_out, bands.astype(np.float32), stamp, kind="band_rirs",
                             sample_rate=args.fs, bands=list(BANDS_HZ))
    print(f"wrote {rir.size} samples to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- eval / report

def cmd_eval(args):
    manifest, features, edcs = read_dataset(args.data)
    test = split_data(manifest, features, edcs, args.split)
    if args.self_oracle:
        stamp = make_stamp({"command": "eval", "self_oracle": True, "dataset_stamp": manifest.stamp,
                            "split": args.split}, manifest.seed)
        report = evaluate_predictions(test.targets, test.targets, manifest.frame_dt, manifest.sample_rate,
                                      stamp=stamp.to_dict())
        pred = test.targets
    else:
        if not args.ckpt:
            raise UsageError("eval: error: --ckpt is required unless --self-oracle is given")
        model, extra = _load_model(args.ckpt)
        if model.config.edc_length != manifest.edc_length:
            raise ValueError(f"model predicts L={model.config.edc_length}, dataset has L={manifest.edc_length}")
        stamp = make_stamp({"command": "eval", "ckpt_stamp": extra.get("stamp"), "split": args.split,
                            "dataset_stamp": manifest.stamp}, manifest.seed)
        report, pred = evaluate(model, test.features, test.targets, manifest.frame_dt, manifest.sample_rate,
                                stamp=stamp.to_dict())
    _write_json(args.out, report.to_dict())
    if args.plots:
        write_plot_data(report, pred, test.targets, args.plots)
        _write_json(Path(args.plots) / "stamp.json", stamp.to_dict())
    t30 = report.stat("t30")
    print(f"evaluated {report.data['n_rooms']} rooms: T30 RMSE {t30['rmse']} R2 {t30['r2']}; wrote {args.out}")
    return EXIT_OK


def cmd_report(args):
    d = _load_json(args.input)
    validate_report(d)
    text = markdown_table(d) if args.format == "md" else EvalReport.from_dict(d).to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = _Parser(prog="edcnet", description="Room EDC simulation, training and evaluation.")
    p.add_argument("--version", action="version", version=f"edcnet {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="generate a seeded room dataset")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--edc-length", type=int, default=DEFAULT_EDC_LENGTH)
    g.add_argument("--fs", type=int, default=DEFAULT_FS)
    g.add_argument("--max-order", type=int, default=None, help="default: automatic, capped at 30")
    g.add_argument("--workers", type=int, default=1)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="simulate per-band RIRs for one room")
    s.add_argument("--room", required=True, help="room JSON (RoomConfig fields)")
    s.add_argument("--out", required=True)
    s.add_argument("--fs", type=int, default=DEFAULT_FS)
    s.add_argument("--max-order", type=int, default=None)
    s.add_argument("--length", type=int, default=None, help="samples (default: 1.5x slowest Eyring T60)")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analyze", help="EDT/T20/T30/C50 of an RIR file (.bin or .wav)")
    a.add_argument("--rir", required=True)
    a.add_argument("--fs", type=int, default=None, help="default: from the WAV header or sidecar, else 16000")
    a.add_argument("--json", action="store_true", help="print JSON instead of a table")
    a.add_argument("--out", default=None, help="also write the JSON here")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("train", help="train a model on a dataset directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--config", default=None, help="JSON with preset/model/train/loss sections")
    t.add_argument("--preset", choices=sorted(PRESETS), default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--patience", type=int, default=None)
    t.add_argument("--lr-schedule", choices=("constant", "cosine"), default=None)
    t.add_argument("--alpha", type=float, default=None, help="slope-term weight")
    t.add_argument("--stride-k", type=int, default=None, help="slope stride in frames")
    t.add_argument("--epsilon", type=float, default=None, help="dB floor offset")
    t.add_argument("--resume", action="store_true", help="continue from OUT/last.ckpt")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict 24-band EDCs for rooms")
    pr.add_argument("--ckpt", required=True)
    pr.add_argument("--features", required=True, help="room JSON, raw feature vector, or a list of them")
    pr.add_argument("--out", default=None, help="default: FEATURES with suffix .edc.bin")
    pr.set_defaults(func=cmd_predict)

    r = sub.add_parser("reconstruct", help="synthesize a WAV RIR from an EDC matrix")
    r.add_argument("--edc", required=True)
    r.add_argument("--out", required=True, help="output WAV")
    r.add_argument("--fs", type=int, default=DEFAULT_FS)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--p", type=float, default=0.9, help="sign stickiness")
    r.add_argument("--frame-dt", type=float, default=None, help="seconds per EDC frame (default: sidecar)")
    r.add_argument("--index", type=int, default=0, help="room index within a batched EDC file")
    r.add_argument("--bands-out", default=None, help="also write per-band waveforms (.bin)")
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    e.add_argument("--data", required=True)
    e.add_argument("--ckpt", default=None)
    e.add_argument("--out", required=True)
    e.add_argument("--plots", default=None, help="directory for CSV plot data")
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--self-oracle", action="store_true", help="score the targets against themselves")
    e.set_defaults(func=cmd_eval)

    rp = sub.add_parser("report", help="render an evaluation report")
    rp.add_argument("--in", dest="input", required=True)
    rp.add_argument("--format", choices=("md", "json"), default="md")
    rp.add_argument("--out", default=None)
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    _Parser.argv = tuple(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return exc.code or EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (EdcnetError, ValueError, KeyError, OSError, jsonschema.ValidationError) as exc:
        print(f"edcnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
