"""Command-line wrapper: semb-export --corpus c.jsonl --encoder dir --out x.semb"""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="semb-export",
        description="Export per-token contextual embeddings to a SEMB file.",
    )
    parser.add_argument("--corpus", required=True, help="canonical corpus .jsonl")
    parser.add_argument("--encoder", required=True, help="model id or local checkpoint directory")
    parser.add_argument("--out", required=True, help="output .semb path")
    parser.add_argument("--layer", default="last", help='"last" or a hidden_states index')
    parser.add_argument("--log", default=None, help="sidecar skip log (default <out>.skipped.log)")
    args = parser.parse_args(argv)

    from .export import ExportSpec, export_contextual

    layer = args.layer if args.layer == "last" else int(args.layer)
    try:
        result = export_contextual(
            ExportSpec(
                corpus_path=args.corpus,
                encoder=args.encoder,
                output_path=args.out,
                layer=layer,
                log_path=args.log,
            )
        )
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}: {result.written} records, dim {result.hidden_size}")
    if result.skipped:
        print(f"skipped {len(result.skipped)} sentences (see sidecar log)", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
