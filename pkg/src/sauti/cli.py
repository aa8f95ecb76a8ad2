"""Command line entry point: one subcommand per pipeline stage.

Exit codes: 0 success, 1 validation/usage error, 2 runtime failure.
Train settings resolve with precedence CLI flag > config file > default,
and every run directory receives the fully resolved config (including the
toolkit version) so a run can be reproduced from that file alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .audio import peak_normalize, read_wav, trim_silence, write_wav
from .corpus import load_manifest, save_manifest, speaker_disjoint_split
from .data import build_dataset, feature_path, load_clip_for_record
from .embeddings import (
    export_scatter,
    extract_embeddings,
    load_embeddings_csv,
    pca_fit,
    pca_project,
    save_embeddings_csv,
)
from .errors import ArgumentError, SautiError
from .evaluation import evaluate
from .features import load_external_features, mel_spectrogram, save_features
from .model import load_checkpoint
from .synthgen import SynthSpec, generate
from .training import TrainConfig, train, write_log


def worker_count() -> int:
    """Parallelism cap from SAUTI_NUM_THREADS (unset or 0 = auto)."""
    raw = os.environ.get("SAUTI_NUM_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise ArgumentError("SAUTI_NUM_THREADS must be an integer, got %r" % raw)
    if value < 0:
        raise ArgumentError("SAUTI_NUM_THREADS must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synthgen(args) -> int:
    spec = SynthSpec(n_classes=args.classes, speakers_per_class=args.speakers,
                     utterances_per_speaker=args.utts, seed=args.seed)
    manifest = generate(spec, args.out)
    print("wrote %d utterances and %s" % (len(manifest), Path(args.out) / "manifest.jsonl"))
    return 0


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    fractions = (args.train, args.dev, args.test)
    out = args.out or args.manifest
    result = speaker_disjoint_split(manifest, fractions=fractions, seed=args.seed)
    save_manifest(result, out)
    counts = {s: sum(1 for r in result.records if r.split == s)
              for s in ("train", "dev", "test")}
    print("split %d records -> %s (%s)" % (len(result), counts, out))
    return 0


def cmd_ingest(args) -> int:
    in_dir = Path(args.in_dir)
    out_dir = Path(args.out_dir)
    if not in_dir.is_dir():
        raise ArgumentError("input directory %s does not exist" % in_dir)
    wavs = sorted(p for p in in_dir.rglob("*.wav") if p.is_file())
    if not wavs:
        raise ArgumentError("no .wav files under %s" % in_dir)

    skeleton = []
    failures = []
    for src in wavs:
        rel = src.relative_to(in_dir)
        try:
            clip = read_wav(src)
            clip = peak_normalize(clip, target_dbfs=args.target_dbfs)
            clip = trim_silence(clip, threshold_dbfs=args.silence_dbfs)
        except SautiError as exc:
            failures.append((str(rel), str(exc)))
            continue
        dst = out_dir / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        write_wav(clip, dst)
        skeleton.append(rel.as_posix())

    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest_skeleton.jsonl", "w", encoding="utf-8") as fh:
        for rel in skeleton:
            # placeholders: fill speaker/accent/gender/sentence_id by hand
            fh.write(json.dumps({"path": rel, "speaker_id": "", "accent": "",
                                 "gender": "", "sentence_id": 0},
                                separators=(",", ":")) + "\n")
    print("ingested %d files into %s (%d failed)" % (len(skeleton), out_dir, len(failures)))
    for rel, reason in failures:
        print("  failed %s: %s" % (rel, reason), file=sys.stderr)
    return 2 if failures else 0


def _featurize_one(args, manifest_dir, out_dir, rec):
    dst = feature_path(out_dir, rec.path)
    dst.parent.mkdir(parents=True, exist_ok=True)
    if args.frontend == "mel":
        clip = load_clip_for_record(rec, manifest_dir)
        save_features(mel_spectrogram(clip), dst)
    else:
        seq = load_external_features(feature_path(args.src_dir, rec.path))
        save_features(seq, dst)


def cmd_featurize(args) -> int:
    manifest = load_manifest(args.in_manifest)
    manifest_dir = Path(args.in_manifest).parent
    out_dir = Path(args.out_dir)
    if args.frontend == "external" and not args.src_dir:
        raise ArgumentError("--frontend external needs --src-dir with .sft1 files")

    failures = []
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        futures = {pool.submit(_featurize_one, args, manifest_dir, out_dir, rec): rec
                   for rec in manifest.records}
        for future, rec in futures.items():
            try:
                future.result()
            except Exception as exc:
                failures.append((rec.path, str(exc)))
    done = len(manifest) - len(failures)
    print("featurized %d/%d records into %s" % (done, len(manifest), out_dir))
    for rel, reason in failures:
        print("  failed %s: %s" % (rel, reason), file=sys.stderr)
    return 2 if failures else 0


CONFIG_KEYS = {f.name for f in dataclasses.fields(TrainConfig)}
PATH_KEYS = {"manifest", "features_dir"}


def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ArgumentError("config file %s does not exist" % path)
    if path.suffix == ".json":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    unknown = set(raw) - CONFIG_KEYS - PATH_KEYS - {"toolkit_version"}
    if unknown:
        raise ArgumentError("unknown config keys: %s" % sorted(unknown))
    return raw


def _resolve_train_config(args):
    raw = _load_config_file(args.config) if args.config else {}
    merged = {}
    for f in dataclasses.fields(TrainConfig):
        value = getattr(args, f.name, None)
        if value is None:
            value = raw.get(f.name, f.default)
        merged[f.name] = value
    config = TrainConfig(**merged)
    config.validate()
    manifest = args.manifest or raw.get("manifest")
    if not manifest:
        raise ArgumentError("no manifest given (flag --manifest or config key)")
    features_dir = args.features_dir or raw.get("features_dir")
    if config.frontend == "external" and not features_dir:
        raise ArgumentError("external frontend needs --features-dir")
    return config, str(manifest), features_dir


def cmd_train(args) -> int:
    config, manifest_path, features_dir = _resolve_train_config(args)
    manifest = load_manifest(manifest_path)
    manifest_dir = Path(manifest_path).parent
    train_set, _ = build_dataset(manifest, "train", manifest_dir, config.frontend,
                                 features_dir, strict=True)
    dev_set, _ = build_dataset(manifest, "dev", manifest_dir, config.frontend,
                               features_dir, strict=True)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dataclasses.asdict(config)
    resolved["manifest"] = manifest_path
    resolved["features_dir"] = features_dir
    resolved["toolkit_version"] = __version__
    with open(out_dir / "config.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(resolved, sort_keys=True, indent=2) + "\n")

    best, log = train(train_set, dev_set, config,
                      checkpoint_path=out_dir / "best.sckp")
    write_log(log, out_dir / "log.csv")
    best_epoch = min(log, key=lambda row: row.dev_loss)
    print("trained %d epochs; best dev loss %.6f (epoch %d, dev accuracy %.4f)"
          % (len(log), best_epoch.dev_loss, best_epoch.epoch, best_epoch.dev_accuracy))
    print("run directory: %s" % out_dir)
    return 0


def _load_eval_dataset(args, params):
    manifest = load_manifest(args.manifest)
    split = None if args.split == "all" else args.split
    dataset, failures = build_dataset(
        manifest, split, Path(args.manifest).parent, params.frontend,
        args.features_dir, strict=False)
    return dataset, failures


def cmd_eval(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset, failures = _load_eval_dataset(args, params)
    report = evaluate(params, dataset, chunked=args.chunked_eval,
                      chunk_seconds=args.chunk_seconds, failures=failures)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    print("accuracy %.4f, macro F1 %.4f over %d utterances -> %s"
          % (report.accuracy, report.f1_macro, report.n_samples, args.out))
    if failures:
        print("%d records failed to load" % len(failures), file=sys.stderr)
        return 2
    return 0


def cmd_embed(args) -> int:
    params = load_checkpoint(args.checkpoint)
    dataset, failures = _load_eval_dataset(args, params)
    if len(dataset) == 0:
        raise ArgumentError("no loadable records in split %r" % args.split)
    emb = extract_embeddings(params, dataset)
    save_embeddings_csv(emb, args.out)
    print("wrote %d embeddings of size %d -> %s" % (len(emb.paths), emb.dim, args.out))
    if failures:
        print("%d records failed to load" % len(failures), file=sys.stderr)
        return 2
    return 0


def cmd_pca(args) -> int:
    emb = load_embeddings_csv(getattr(args, "in"))
    model = pca_fit(emb, k=2)
    projected = pca_project(model, emb)
    export_scatter(emb.paths, emb.accents, projected, args.out, format="csv")
    if args.svg:
        export_scatter(emb.paths, emb.accents, projected, args.svg, format="svg")
    ev = model.explained_variance
    print("projected %d embeddings; explained variance %.4g, %.4g -> %s"
          % (len(emb.paths), ev[0], ev[1], args.out))
    if model.rank_deficient:
        print("warning: embedding data is rank-deficient below 2", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sauti",
        description="Accent classification toolkit: corpus post-processing, "
                    "speaker-disjoint splits, mel features, GRU training, "
                    "evaluation, and PCA embedding projection.")
    parser.add_argument("--version", action="version", version="sauti %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthgen", help="generate a synthetic labeled mini-corpus")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--speakers", type=int, default=10)
    p.add_argument("--utts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synthgen)

    p = sub.add_parser("split", help="assign speaker-disjoint train/dev/test splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train", type=float, default=0.8)
    p.add_argument("--dev", type=float, default=0.1)
    p.add_argument("--test", type=float, default=0.1)
    p.add_argument("--out", help="output manifest path (default: rewrite in place)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("ingest", help="peak-normalize and trim raw WAVs into a clean copy")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--target-dbfs", type=float, default=-0.1)
    p.add_argument("--silence-dbfs", type=float, default=-40.0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="write SFT1 feature files for a manifest")
    p.add_argument("--frontend", choices=("mel", "external"), default="mel")
    p.add_argument("--in-manifest", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--src-dir", help="source .sft1 directory for --frontend external")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train the GRU encoder-classifier")
    p.add_argument("--manifest")
    p.add_argument("--features-dir")
    p.add_argument("--config", help="TOML or JSON file with TrainConfig keys")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frontend", choices=("mel", "external"))
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--hidden-size", type=int, dest="hidden_size")
    p.add_argument("--chunk-seconds", type=float, dest="chunk_seconds")
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--adam-epsilon", type=float, dest="adam_epsilon")
    p.add_argument("--grad-clip", type=float, dest="grad_clip")
    bn = p.add_mutually_exclusive_group()
    bn.add_argument("--batchnorm", dest="use_batchnorm", action="store_true", default=None)
    bn.add_argument("--no-batchnorm", dest="use_batchnorm", action="store_false", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint on a manifest split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--features-dir")
    p.add_argument("--chunked-eval", action="store_true",
                   help="score deterministic 3 s chunks instead of full sequences")
    p.add_argument("--chunk-seconds", type=float, default=3.0, dest="chunk_seconds")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("embed", help="export per-utterance embeddings as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--features-dir")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("pca", help="project an embedding CSV to 2-D")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", help="also render an SVG scatter plot")
    p.set_defaults(func=cmd_pca)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; fold the
        # latter into the validation exit code
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except SautiError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print("failure: %s: %s" % (type(exc).__name__, exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
