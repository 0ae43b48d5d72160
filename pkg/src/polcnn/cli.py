"""Command-line entry point: ingest, train, evaluate, suite, predict.

Every command is a deterministic batch run: seeds are explicit flags, all
paths are explicit, and a run manifest (flags, seeds, input digests, tool
version) is written next to every output artifact. Exit status: 0 success,
1 internal error, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import traceback
from pathlib import Path

from . import __version__
from .cnn import load_model, predict
from .corpus import (
    ingest_briefings,
    ingest_manifesto_csv,
    read_corpus_jsonl,
    split_corpus,
    write_corpus_jsonl,
)
from .embeddings import load_provider
from .errors import InputDataError
from .report import DOMAIN_NAMES, render_table
from .training import (
    EvalReport,
    ExperimentSpec,
    TrainConfig,
    evaluate,
    run_suite,
    save_history,
    save_model,
    train,
)

USAGE_ERROR = 2
INTERNAL_ERROR = 1


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest_inputs(paths) -> dict[str, str]:
    digests = {}
    for p in paths:
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.glob("*")):
                if f.is_file():
                    digests[str(f)] = _sha256(f)
        else:
            digests[str(p)] = _sha256(p)
    return digests


def _write_manifest(artifact: Path, command: str, flags: dict, seeds: dict, inputs) -> None:
    manifest = {
        "tool": "polcnn",
        "tool_version": __version__,
        "command": command,
        "flags": {k: v for k, v in sorted(flags.items())},
        "seeds": seeds,
        "input_digests": _digest_inputs(inputs),
    }
    path = artifact.with_name(artifact.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _flags(args: argparse.Namespace) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def cmd_ingest(args: argparse.Namespace) -> int:
    if args.format == "manifesto-csv":
        corpus = ingest_manifesto_csv(args.input, name=Path(args.input).stem)
    else:
        corpus = ingest_briefings(args.input, name=Path(args.input).name)
    out = Path(args.out)
    write_corpus_jsonl(corpus, out)
    _write_manifest(out, "ingest", _flags(args), seeds={}, inputs=[args.input])
    print(f"wrote {out}: {len(corpus)} sentences ({corpus.labeled_count} labeled)")
    return 0


def _print_eval(report: EvalReport) -> None:
    print(f"n          {report.n}")
    print(f"accuracy   {100.0 * report.accuracy:.2f}%")
    print(f"macro-F1   {100.0 * report.macro_f1:.2f}")
    print()
    print(f"{'domain':<38}{'precision':>10}{'recall':>8}{'F1':>8}{'support':>9}")
    for domain, m in report.per_class.items():
        name = DOMAIN_NAMES.get(domain, "?")
        print(
            f"{f'{domain} ({name})':<38}{m.precision:>10.4f}{m.recall:>8.4f}"
            f"{m.f1:>8.4f}{m.support:>9}"
        )
    print()
    print("confusion (rows = true, cols = predicted)")
    for row in report.confusion:
        print(" ".join(f"{int(v):>6}" for v in row))


def _eval_json(report: EvalReport) -> dict:
    return {
        "n": report.n,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "per_class": {
            str(domain): {
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "support": m.support,
            }
            for domain, m in report.per_class.items()
        },
        "confusion": report.confusion.tolist(),
    }


def cmd_train(args: argparse.Namespace) -> int:
    corpus = read_corpus_jsonl(args.corpus)
    provider = load_provider(args.provider)
    split = split_corpus(corpus, seed=args.seed)
    config = TrainConfig(
        seed=args.seed,
        provider=provider,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
    )
    model, history = train(split, config)

    out = Path(args.out)
    save_model(model, out)
    history_path = out.with_name(out.stem + ".history.csv")
    save_history(history, history_path)
    _write_manifest(
        out,
        "train",
        _flags(args),
        seeds={"seed": args.seed},
        inputs=[args.corpus, _provider_path(args.provider)],
    )
    best = max(h.val_macro_f1 for h in history)
    print(f"wrote {out} and {history_path}")
    print(f"epochs {len(history)}, best validation macro-F1 {100.0 * best:.2f}")
    return 0


def _provider_path(spec: str) -> str:
    return spec.partition(":")[2]


def cmd_evaluate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    corpus = read_corpus_jsonl(args.corpus)
    provider = load_provider(args.provider)
    report = evaluate(model, corpus, provider)
    _print_eval(report)
    if args.out:
        out = Path(args.out)
        out.write_text(json.dumps(_eval_json(report), indent=2) + "\n", encoding="utf-8")
        _write_manifest(
            out,
            "evaluate",
            _flags(args),
            seeds={},
            inputs=[args.model, args.corpus, _provider_path(args.provider)],
        )
        print(f"\nwrote {out}")
    return 0


def _load_specs(path: str | Path) -> list[ExperimentSpec]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, list):
            raise ValueError("suite spec must be a JSON array")
        return [
            ExperimentSpec(
                name=entry["name"],
                provider_kind=entry["provider_kind"],
                provider_path=entry["provider_path"],
            )
            for entry in raw
        ]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise InputDataError(f"bad suite spec {path}: {e}") from None


def cmd_suite(args: argparse.Namespace) -> int:
    specs = _load_specs(args.specs)
    for spec in specs:
        if not Path(spec.provider_path).exists():
            raise InputDataError(
                f"experiment {spec.name!r}: provider file not found: {spec.provider_path}"
            )
    train_corpus = read_corpus_jsonl(args.train_corpus)
    target_corpus = read_corpus_jsonl(args.target_corpus)
    split = split_corpus(train_corpus, seed=args.seed)
    config = TrainConfig(
        seed=args.seed,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
    )
    report = run_suite(specs, split, target_corpus, config)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    text = render_table(report, "text")
    (out_dir / "comparison.txt").write_text(text, encoding="utf-8")
    (out_dir / "comparison.json").write_text(render_table(report, "structured"), encoding="utf-8")
    _write_manifest(
        out_dir / "comparison.json",
        "suite",
        _flags(args),
        seeds={"seed": args.seed},
        inputs=[args.specs, args.train_corpus, args.target_corpus]
        + [s.provider_path for s in specs],
    )
    print(text, end="")
    print(f"wrote {out_dir / 'comparison.txt'} and {out_dir / 'comparison.json'}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    corpus = read_corpus_jsonl(args.corpus)
    provider = load_provider(args.provider)
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        for sentence in corpus:
            label_idx, probs = predict(model, provider.embed(sentence))
            fh.write(
                json.dumps(
                    {"id": sentence.id, "label": label_idx + 1, "probs": [float(p) for p in probs]}
                )
                + "\n"
            )
    _write_manifest(
        out,
        "predict",
        _flags(args),
        seeds={},
        inputs=[args.model, args.corpus, _provider_path(args.provider)],
    )
    print(f"wrote {out}: {len(corpus)} predictions")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polcnn",
        description="Sentence-level political topic classification experiments.",
    )
    parser.add_argument("--version", action="version", version=f"polcnn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="convert raw inputs to the canonical corpus JSONL")
    p.add_argument("--format", choices=["manifesto-csv", "briefings"], required=True)
    p.add_argument("--in", dest="input", required=True, help="CSV file or briefings directory")
    p.add_argument("--out", required=True, help="output corpus .jsonl path")
    p.set_defaults(func=cmd_ingest)

    def add_train_flags(p):
        p.add_argument("--batch-size", type=int, default=50)
        p.add_argument("--max-epochs", type=int, default=50)
        p.add_argument("--patience", type=int, default=5)

    p = sub.add_parser("train", help="train a classifier on a labeled corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--provider", required=True, help="static:path or contextual:path")
    p.add_argument("--seed", type=int, required=True, help="seed required: runs must be reproducible")
    p.add_argument("--out", required=True, help="output model .pcnn path")
    add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a trained model on a labeled corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("suite", help="run a multi-experiment comparison suite")
    p.add_argument("--specs", required=True, help="JSON array of {name, provider_kind, provider_path}")
    p.add_argument("--train-corpus", required=True)
    p.add_argument("--target-corpus", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    add_train_flags(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("predict", help="write per-sentence predictions as JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--provider", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputDataError, FileNotFoundError, NotADirectoryError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_ERROR
    except Exception:
        traceback.print_exc()
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
