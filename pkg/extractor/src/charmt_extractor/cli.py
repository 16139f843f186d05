"""Command-line entry point: extract attribution records for a corpus."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractionConfig, extract_corpus


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="charmt-extract",
        description="Greedy-decode a translation model and dump per-step "
        "gradient attribution records.",
    )
    parser.add_argument("--model", required=True, help="model identifier or local path")
    parser.add_argument("--corpus", required=True, help="corpus file (one JSON record per line)")
    parser.add_argument("--src-lang", required=True, dest="src_lang", help="e.g. German")
    parser.add_argument("--tgt-lang", required=True, dest="tgt_lang", help="e.g. English")
    parser.add_argument("--out", required=True, help="attribution output file")
    parser.add_argument("--out-corpus", dest="out_corpus",
                        help="also write a corpus file with the generated hypotheses")
    parser.add_argument("--system-name", dest="system_name", default="model",
                        help="hypothesis key used in --out-corpus records")
    parser.add_argument("--max-length", type=int, default=64, dest="max_length")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--byte-level", choices=["auto", "yes", "no"], default="auto",
                        dest="byte_level")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    config = ExtractionConfig(
        model=args.model,
        src_lang=args.src_lang,
        tgt_lang=args.tgt_lang,
        max_length=args.max_length,
        device=args.device,
        byte_level=args.byte_level,
    )
    try:
        summary = extract_corpus(
            config, args.corpus, args.out, args.out_corpus, args.system_name
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"extracted {summary['extracted']} records, skipped {summary['skipped']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
