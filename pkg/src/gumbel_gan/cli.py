"""Command line entry point: gen-data, train, sample, eval.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
Set GUMBEL_GAN_LOG=INFO (or DEBUG) for progress logging.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .grammar import VOCAB, Grammar, read_lines, recognize, sample_corpus, valid_prefix_length, write_dataset, encode
from .network import load_checkpoint
from .random import DEFAULT_SEED, AnnealSchedule, make_rng
from .training import GanConfig, TrainingDiverged, discretize, train_gan, train_mle

log = logging.getLogger("gumbel_gan")

VARIANTS = {
    "a": {},
    "b": {"gen_sample_size": 1000},
    "c": {"anneal_target": "inputs-only"},
    "d": {"noise_target": "hidden-only"},
}


def positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --- gen-data ---------------------------------------------------------------

def cmd_gen_data(args) -> int:
    lines = sample_corpus(Grammar(), args.n, args.max_len, make_rng(args.seed))
    write_dataset(lines, args.out)
    lengths = Counter(len(s.rstrip(" ")) for s in lines)
    valid = sum(recognize(s) for s in lines) / len(lines)
    print(f"n={len(lines)} max_len={args.max_len} out={args.out}")
    print("length histogram: " + " ".join(f"{k}:{lengths[k]}" for k in sorted(lengths)))
    print(f"validity={valid:.1%}")
    return 0


# --- train ------------------------------------------------------------------

def build_config(args) -> GanConfig:
    preset = dict(VARIANTS[args.variant])
    overrides = {
        "learning_rate": args.lr,
        "batch_size": args.batch_size,
        "total_iters": args.iters,
        "hidden_size": args.hidden,
        "gen_sample_size": args.gen_sample_size,
        "anneal_target": args.anneal_target,
        "noise_target": args.noise_target,
        "input_target_prob": args.input_prob,
        "eval_every": args.eval_every,
        "eval_samples": args.eval_samples,
    }
    preset.update({k: v for k, v in overrides.items() if v is not None})
    preset["seed"] = args.seed
    preset["learned_start"] = args.learned_start
    preset["log_wall_time"] = args.log_wall_time
    total = preset.get("total_iters", GanConfig.total_iters)
    default = AnnealSchedule()
    preset["schedule"] = AnnealSchedule(
        tau_start=args.tau_start if args.tau_start is not None else default.tau_start,
        tau_end=args.tau_end if args.tau_end is not None else default.tau_end,
        anneal_iters=args.anneal_iters if args.anneal_iters is not None else default.anneal_iters,
        total_iters=total,
    )
    return GanConfig(**preset)


def cmd_train(args) -> int:
    config = build_config(args)
    lines = read_lines(args.data)
    data = encode(lines)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "mode": args.mode,
        "variant": args.variant,
        "config": config.to_dict(),
        "seed": config.seed,
        "dataset": {"path": str(Path(args.data).resolve()), "sha256": _sha256(args.data)},
        "version": __version__,
        "started": _now(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    if args.mode == "gan":
        trainer = train_gan(config, data, out)
        summary = f"trained GAN for {config.total_iters} iterations; final validity " \
                  f"{trainer.validity(config.total_iters):.3f}"
    else:
        result = train_mle(config, data, out)
        summary = f"trained MLE for {config.total_iters} iterations; held-out NLL {result.heldout_nll:.4f}"
    manifest["finished"] = _now()
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    print(summary)
    return 0


# --- sample / eval ----------------------------------------------------------

def _draw(ckpt_path, n, seed):
    models, meta = load_checkpoint(ckpt_path)
    mode = meta.get("mode")
    if mode == "gan":
        return discretize(models["generator"], "gan", n, make_rng(seed), float(meta.get("tau", 1.0))), meta
    if mode == "mle":
        return discretize(models["mle"], "mle", n, make_rng(seed)), meta
    raise ValueError(f"{ckpt_path}: unknown checkpoint mode {mode!r}")


def cmd_sample(args) -> int:
    lines, _ = _draw(args.ckpt, args.n, args.seed)
    if args.format == "text":
        for s in lines:
            print(s)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["sequence", "valid"])
        for s in lines:
            w.writerow([s, int(recognize(s))])
    return 0


def char_frequencies(lines) -> np.ndarray:
    counts = Counter(c for s in lines for c in s)
    freq = np.array([counts[c] for c in VOCAB], dtype=np.float64)
    return freq / freq.sum()


def _corpus_for(args, meta):
    if args.data:
        return read_lines(args.data)
    manifest = Path(args.ckpt).parent / "manifest.json"
    if manifest.exists():
        path = json.loads(manifest.read_text())["dataset"]["path"]
        if Path(path).exists():
            return read_lines(path)
    return None


def cmd_eval(args) -> int:
    lines, meta = _draw(args.ckpt, args.n, args.seed)
    valid = sum(recognize(s) for s in lines) / len(lines)
    print(f"validity_rate {valid:.6f}")
    prefix = Counter(valid_prefix_length(s) for s in lines)
    print("valid-prefix length histogram:")
    for k in range(len(lines[0]) + 1):
        print(f"  {k:2d} {prefix[k]}")
    gen_freq = char_frequencies(lines)
    corpus = _corpus_for(args, meta)
    corpus_freq = char_frequencies(corpus) if corpus else None
    print("character frequencies:" + ("  generated  corpus" if corpus_freq is not None else "  generated"))
    for i, c in enumerate(VOCAB):
        row = f"  {c!r:5s} {gen_freq[i]:.6f}"
        if corpus_freq is not None:
            row += f"  {corpus_freq[i]:.6f}"
        print(row)
    return 0


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gumbel-gan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="sample a padded CFG corpus")
    g.add_argument("--n", type=positive_int, default=5000)
    g.add_argument("--max-len", type=positive_int, default=12)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train a GAN or the MLE baseline")
    t.add_argument("--mode", choices=("gan", "mle"), default="gan")
    t.add_argument("--variant", choices=sorted(VARIANTS), default="a")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=DEFAULT_SEED)
    t.add_argument("--iters", type=positive_int)
    t.add_argument("--batch-size", type=positive_int)
    t.add_argument("--hidden", type=positive_int)
    t.add_argument("--lr", type=float)
    t.add_argument("--gen-sample-size", type=positive_int)
    t.add_argument("--anneal-target", choices=("generator+inputs", "inputs-only"))
    t.add_argument("--noise-target", choices=("both", "hidden-only"))
    t.add_argument("--input-prob", type=float)
    t.add_argument("--tau-start", type=float)
    t.add_argument("--tau-end", type=float)
    t.add_argument("--anneal-iters", type=int)
    t.add_argument("--eval-every", type=positive_int)
    t.add_argument("--eval-samples", type=positive_int)
    t.add_argument("--learned-start", action="store_true")
    t.add_argument("--log-wall-time", action="store_true",
                   help="fill the wall_ms column (makes the CSV run-dependent)")
    t.set_defaults(func=cmd_train)

    for name, fn, helptext in (("sample", cmd_sample, "print generated sequences"),
                               ("eval", cmd_eval, "validity report for a checkpoint")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--ckpt", required=True)
        s.add_argument("--n", type=positive_int, default=200)
        s.add_argument("--seed", type=int, default=DEFAULT_SEED)
        if name == "sample":
            s.add_argument("--format", choices=("text", "csv"), default="text")
        else:
            s.add_argument("--data", help="training corpus for the frequency comparison")
        s.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("GUMBEL_GAN_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            try:
                build_config(args)
            except ValueError as e:
                parser.error(str(e))
        return args.func(args)
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
