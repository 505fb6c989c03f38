"""Command-line front end.

Subcommands wire the dataset, model, and training modules into reproducible
file-based experiments: ``synth`` writes a synthetic dataset, ``train``
produces a run directory (history CSV, checkpoint, mask/metrics JSON,
manifest), ``eval``/``noise-sweep``/``export-mask`` consume checkpoints, and
``report`` renders figures from a run directory's artifacts.

Every command takes an explicit ``--seed`` and defaults to the same fixed
constant, never the clock, so repeated runs with identical flags produce
byte-identical data outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .data import FREQ_PRESETS, gen_synthetic, load_ucr, save_ucr, split_dataset, znormalize
from .model import ModelConfig, build_ssam_cnn, load_checkpoint, save_checkpoint
from .training import (
    TrainConfig,
    evaluate,
    noise_sweep,
    search_k,
    train,
    write_history_csv,
    write_ksearch_csv,
    write_noise_csv,
)

DEFAULT_SEED = 1729


def _fingerprint(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n")


def _write_manifest(run_dir: Path, command: str, config: dict, seed: int,
                    fingerprint: str, outputs: list[Path], started: str) -> Path:
    manifest_path = run_dir / "manifest.json"
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "dataset_fingerprint": fingerprint,
        "started": started,
        "ended": datetime.now(timezone.utc).isoformat(),
        "outputs": sorted(str(p.relative_to(run_dir)) for p in outputs),
    }
    tmp = manifest_path.with_name(manifest_path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2) + "\n")
    os.replace(tmp, manifest_path)
    return manifest_path


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_normalized(path: Path):
    ds = load_ucr(path)
    return znormalize(ds)


def _mask_doc(net) -> dict:
    ssam = net.ssam
    if ssam is None:
        raise ValueError("this checkpoint has no spectral mask layer")
    return {
        "K": ssam.num_segments,
        "T_seg": ssam.segment_length,
        "masks": [mask.tolist() for mask in net.masks()],
    }


def cmd_synth(args) -> int:
    ds = gen_synthetic(
        n_per_class=args.n_per_class,
        length=args.length,
        sigma=args.sigma,
        freqs=FREQ_PRESETS[args.freqs],
        seed=args.seed,
    )
    out = Path(args.out)
    save_ucr(ds, out)
    print(json.dumps({"written": str(out), "instances": ds.num_instances, "length": ds.length}))
    return 0


def cmd_train(args) -> int:
    if args.k is not None and args.search_k:
        raise ValueError("--k and --search-k are mutually exclusive")
    if args.no_ssam and (args.search_k or args.k is not None):
        raise ValueError("--no-ssam cannot be combined with --k or --search-k")
    started = _now()
    data_path = Path(args.data)
    fingerprint = _fingerprint(data_path)
    ds = _load_normalized(data_path)
    split = split_dataset(ds, seed=args.seed)
    run_dir = Path(args.out)
    run_dir.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        l1_coeff=args.l1,
        seed=args.seed,
        k_min=args.k_min,
        k_max=args.k_max,
    )
    outputs: list[Path] = []

    ksearch = None
    if args.search_k:
        ksearch = search_k(ds, split, cfg)
        segments = ksearch.best_k
    else:
        segments = args.k if args.k is not None else 1

    model_cfg = ModelConfig(
        input_length=ds.length,
        num_classes=ds.class_count,
        num_segments=segments,
        with_ssam=not args.no_ssam,
    )
    net = build_ssam_cnn(model_cfg, seed=args.seed)
    history = train(net, ds, split, cfg)
    test_loss, test_acc = evaluate(net, ds, split.test)

    history_path = run_dir / "history.csv"
    write_history_csv(history, history_path)
    outputs.append(history_path)
    checkpoint_path = run_dir / "checkpoint.npz"
    save_checkpoint(net, checkpoint_path)
    outputs.append(checkpoint_path)
    if model_cfg.with_ssam:
        mask_path = run_dir / "mask.json"
        _write_json(mask_path, _mask_doc(net))
        outputs.append(mask_path)
    if ksearch is not None:
        ksearch_path = run_dir / "ksearch.csv"
        write_ksearch_csv(ksearch, ksearch_path)
        outputs.append(ksearch_path)
    metrics = {
        "accuracy": test_acc,
        "loss": test_loss,
        "K": segments if model_cfg.with_ssam else None,
    }
    metrics_path = run_dir / "metrics.json"
    _write_json(metrics_path, metrics)
    outputs.append(metrics_path)
    resolved = {
        "data": str(data_path),
        "train": vars(cfg).copy(),
        "model": model_cfg.to_dict(),
        "searched_k": args.search_k,
    }
    outputs.append(_write_manifest(run_dir, "train", resolved, args.seed, fingerprint, outputs, started))
    print(json.dumps(metrics))
    return 0


def _checkpoint_and_data(args):
    net = load_checkpoint(Path(args.checkpoint))
    ds = _load_normalized(Path(args.data))
    if net.config.input_length != ds.length:
        raise ValueError(
            f"checkpoint expects series of length {net.config.input_length}, "
            f"dataset has length {ds.length}"
        )
    if net.config.num_classes != ds.class_count:
        raise ValueError(
            f"checkpoint has {net.config.num_classes} classes, dataset has {ds.class_count}"
        )
    return net, ds


def _partition_indices(ds, args) -> np.ndarray:
    if args.split == "all":
        return np.arange(ds.num_instances)
    return split_dataset(ds, seed=args.seed).indices(args.split)


def cmd_eval(args) -> int:
    net, ds = _checkpoint_and_data(args)
    indices = _partition_indices(ds, args)
    loss, acc = evaluate(net, ds, indices)
    k = net.config.num_segments if net.config.with_ssam else None
    print(json.dumps({"accuracy": acc, "loss": loss, "K": k}))
    return 0


def cmd_noise_sweep(args) -> int:
    net, ds = _checkpoint_and_data(args)
    indices = _partition_indices(ds, args)
    levels = [float(v) for v in args.levels.split(",") if v.strip() != ""]
    rows = noise_sweep(net, ds, indices, levels, seed=args.seed)
    write_noise_csv(rows, Path(args.out))
    print(json.dumps({"written": args.out, "levels": len(rows)}))
    return 0


def cmd_export_mask(args) -> int:
    net = load_checkpoint(Path(args.checkpoint))
    _write_json(Path(args.out), _mask_doc(net))
    print(json.dumps({"written": args.out}))
    return 0


def cmd_report(args) -> int:
    from .report import render_run

    written = render_run(Path(args.run))
    print(json.dumps({"figures": [str(p) for p in written]}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specattn",
        description="Adaptive spectral filtering for time-series classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic dataset as a delimited file")
    p.add_argument("--out", required=True, help="output path for the delimited dataset")
    p.add_argument("--freqs", choices=sorted(FREQ_PRESETS), default="paper",
                   help="frequency preset; 'well-posed' avoids the aliased third class")
    p.add_argument("--sigma", type=float, default=2.0, help="noise standard deviation")
    p.add_argument("--n-per-class", type=int, default=2000)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model and write run artifacts to a directory")
    p.add_argument("--data", required=True, help="delimited dataset file")
    p.add_argument("--out", required=True, help="run directory for outputs")
    p.add_argument("--k", type=int, default=None, help="segment count (default 1)")
    p.add_argument("--search-k", action="store_true", help="pick the segment count by short-run search")
    p.add_argument("--no-ssam", action="store_true", help="train the plain CNN without the spectral layer")
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--l1", type=float, default=0.01, help="L1 coefficient on the mask parameters")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint; prints metrics JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="test")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise-sweep", help="accuracy vs injected-noise level, written as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--levels", default="0,0.25,0.5,1,2", help="comma-separated relative noise levels")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=["train", "val", "test", "all"], default="test")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("export-mask", help="write a checkpoint's mask vectors as JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_mask)

    p = sub.add_parser("report", help="render figures from a run directory's artifacts")
    p.add_argument("--run", required=True, help="run directory produced by train / noise-sweep")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line machine-parsable failure contract
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
