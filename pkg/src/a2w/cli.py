"""Command-line surface: synth / train / decode / score / ablate / inspect-ckpt.

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .ablation import AblationSpec, run_ablation, standard_specs
from .alphabet import JointAlphabet, build_charset, load_alphabet
from .checkpoint import load_checkpoint
from .config import TrainConfig, config_from_items, load_config
from .decoder import decode_utterances, parse_hypothesis, read_transcripts, write_sar_file, write_transcripts
from .network import Model, ModelConfig
from .pipeline import SynthSpec, load_corpus, save_corpus, split_by_id_hash, synth_corpus
from .scoring import corpus_wer
from .trainer import prepare_corpus, run_training


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides (same names as the config file keys)")
    for f in dataclasses.fields(TrainConfig):
        group.add_argument(f"--{f.name}", dest=f"cfg_{f.name}", metavar="V", default=None)


def _resolve_config(args) -> TrainConfig:
    base = load_config(args.config) if args.config else TrainConfig()
    overrides = {
        f.name: getattr(args, f"cfg_{f.name}")
        for f in dataclasses.fields(TrainConfig)
        if getattr(args, f"cfg_{f.name}", None) is not None
    }
    return config_from_items(overrides, base)


def _load_train_heldout(args, cfg: TrainConfig):
    utts = load_corpus(args.corpus)
    if args.heldout:
        return utts, load_corpus(args.heldout)
    return split_by_id_hash(utts, cfg.heldout_fraction)


def _cmd_synth(args) -> int:
    spec = SynthSpec(
        vocab_size=args.vocab_size,
        feature_dim=args.feature_dim,
        min_frames=args.min_frames,
        max_frames=args.max_frames,
        min_words=args.min_words,
        max_words=args.max_words,
        noise=args.noise,
        oov_pool_size=args.oov_pool,
        oov_rate=args.oov_rate,
        proto_seed=args.proto_seed if args.proto_seed is not None else args.seed,
    )
    utts = synth_corpus(spec, args.count, args.seed, id_prefix=args.prefix)
    save_corpus(utts, args.out)
    print(f"wrote {len(utts)} utterances to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    train_utts, heldout = _load_train_heldout(args, cfg)
    artifacts = run_training(cfg, train_utts, heldout, args.out, resume_from=args.resume)
    last = artifacts.run.records[-1]
    print(
        f"trained {len(artifacts.run.records)} epochs: train_loss={last.train_loss:.4f} "
        f"heldout_loss={last.heldout_loss:.4f} (best epoch {artifacts.run.best_heldout_epoch()})"
    )
    print(f"checkpoints and records in {args.out}")
    return 0


def _find_checkpoint(run_dir: Path, epoch: int | None) -> Path:
    if epoch is not None:
        path = run_dir / f"epoch{epoch:03d}.ckpt"
        if not path.exists():
            raise FileNotFoundError(f"no checkpoint for epoch {epoch} in {run_dir}")
        return path
    candidates = sorted(run_dir.glob("epoch*.ckpt"))
    if not candidates:
        raise FileNotFoundError(f"no checkpoints in {run_dir}")
    return candidates[-1]


def _cmd_decode(args) -> int:
    run_dir = Path(args.run)
    cfg = load_config(run_dir / "config.txt")
    ckpt = load_checkpoint(_find_checkpoint(run_dir, args.epoch))
    vocab = load_alphabet(run_dir / "vocab.txt")
    joint = None
    if cfg.targets == "sar":
        joint = JointAlphabet(vocab=vocab, charset=load_alphabet(run_dir / "chars.txt"))
    model_config = ModelConfig(
        input_dim=int(ckpt.config["input_dim"]),
        output_dim=int(ckpt.config["output_dim"]),
        num_layers=cfg.layers,
        hidden_per_direction=cfg.hidden,
        projection_dim=cfg.projection,
        dropout_rate=cfg.dropout,
        init_scheme=cfg.init,
        dtype=cfg.dtype,
    )
    dtype = np.dtype(cfg.dtype)
    model = Model(model_config, {k: v.astype(dtype) for k, v in ckpt.model_tensors().items()})
    utts = prepare_corpus(load_corpus(args.corpus), cfg)
    rows = decode_utterances(model, utts, vocab, joint=joint, mode=args.mode, batch_size=cfg.batch_size)
    write_transcripts(args.out, [(utt_id, words) for utt_id, words, _ in rows])
    annotated = [(utt_id, hyp) for utt_id, _, hyp in rows if hyp is not None]
    if annotated:
        sar_path = Path(args.out).with_suffix(".sar")
        write_sar_file(sar_path, annotated)
        print(f"wrote {len(rows)} hypotheses to {args.out} (annotations in {sar_path})")
    else:
        print(f"wrote {len(rows)} hypotheses to {args.out}")
    return 0


def _read_hypotheses(path: str, strip_sar: bool, charset_variant: str) -> dict[str, list[str]]:
    if not strip_sar:
        return read_transcripts(path)
    charset = build_charset(charset_variant)
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        utt_id, _, text = line.partition("\t")
        out[utt_id] = parse_hypothesis(text, charset).words
    return out


def _cmd_score(args) -> int:
    refs = read_transcripts(args.ref)
    hyps = _read_hypotheses(args.hyp, args.strip_sar, args.charset)
    print(corpus_wer(refs, hyps))
    return 0


_SPEC_ALIASES = ("full", "descending", "random", "no-momentum", "no-dropout", "no-projection", "small", "no-warm")


def _specs_by_alias(base: TrainConfig, names: list[str]) -> list[AblationSpec]:
    warm = bool(base.warm_ckpt)
    full = AblationSpec(warm_start=warm)
    table = {
        "full": full,
        "descending": dataclasses.replace(full, order="descending"),
        "random": dataclasses.replace(full, order="random"),
        "no-momentum": dataclasses.replace(full, momentum=False),
        "no-dropout": dataclasses.replace(full, dropout=False),
        "no-projection": dataclasses.replace(full, projection=False),
        "small": dataclasses.replace(full, size="small"),
        "no-warm": dataclasses.replace(full, warm_start=False),
    }
    specs = []
    for name in names:
        if name not in table:
            raise _UsageError(f"unknown ablation spec {name!r}; choose from {', '.join(_SPEC_ALIASES)}")
        specs.append(table[name])
    return specs


def _cmd_ablate(args) -> int:
    cfg = _resolve_config(args)
    train_utts, heldout = _load_train_heldout(args, cfg)
    if args.specs:
        specs = _specs_by_alias(cfg, [s.strip() for s in args.specs.split(",") if s.strip()])
    else:
        specs = standard_specs(cfg)
    seeds = [cfg.seed + i for i in range(args.seeds)]
    result = run_ablation(cfg, specs, train_utts, heldout, args.out, seeds)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = result.render_text()
    (out_dir / "table.txt").write_text(text + "\n", encoding="utf-8")
    result.write_csv(out_dir / "table.csv")
    print(text)
    return 0


def _cmd_inspect(args) -> int:
    print(load_checkpoint(args.ckpt).manifest_text(), end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="a2w", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--vocab-size", type=int, default=20)
    p.add_argument("--feature-dim", type=int, default=8)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--min-frames", type=int, default=3)
    p.add_argument("--max-frames", type=int, default=8)
    p.add_argument("--min-words", type=int, default=3)
    p.add_argument("--max-words", type=int, default=8)
    p.add_argument("--oov-pool", type=int, default=0)
    p.add_argument("--oov-rate", type=float, default=0.0)
    p.add_argument("--proto-seed", type=int, default=None, help="prototype seed (defaults to --seed)")
    p.add_argument("--prefix", default="utt")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model on a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--heldout", default=None, help="heldout corpus directory (default: split by id hash)")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="greedy-decode a corpus with a trained run")
    p.add_argument("--run", required=True, help="training run directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="output transcript tsv")
    p.add_argument("--mode", choices=("word", "chars", "switched"), default="word")
    p.add_argument("--epoch", type=int, default=None, help="checkpoint epoch (default: latest)")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("score", help="word error rate between two transcript files")
    p.add_argument("ref")
    p.add_argument("hyp")
    p.add_argument("--strip-sar", action="store_true", help="parse the hypothesis file as SAR annotations")
    p.add_argument("--charset", choices=("simple", "positional"), default="positional")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("ablate", help="train and score one model per recipe variant")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--heldout", default=None)
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--specs", default=None, help=f"comma list from: {', '.join(_SPEC_ALIASES)}")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("inspect-ckpt", help="print a checkpoint manifest")
    p.add_argument("ckpt")
    p.set_defaults(func=_cmd_inspect)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        return 0
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
