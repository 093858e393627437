"""Bridge command line: embed a corpus or score masked spans, file to file."""

from __future__ import annotations

import argparse
import logging
import sys

from .jobs import BridgeError, BridgeJob, export_embeddings, export_mask_probs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sevbridge",
        description="Export sentence embeddings (EMB1) or masked-span probability oracles (JSONL).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="one embedding per corpus line, EMB1 layout")
    p.add_argument("--corpus", required=True, help="input corpus, one sentence per line")
    p.add_argument("--out", required=True, help="output EMB1 path")
    p.add_argument("--model", default="hash:256", help="hash:<dim> or hf:<model-name>")
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(mode="embed")

    p = sub.add_parser("mask-prob", help="recovery probabilities for manifest insert/replace ops")
    p.add_argument("--manifest", required=True, help="fingerprint manifest JSONL from `sevsynth synthesize`")
    p.add_argument("--anchors", required=True, help="anchor corpus the manifest ops apply to")
    p.add_argument("--out", required=True, help="output oracle JSONL path")
    p.add_argument("--model", default="unigram", help="unigram or hf:<masked-lm-name>")
    p.add_argument("--batch-size", type=int, default=16)
    p.set_defaults(mode="mask-prob")

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.mode == "embed":
            job = BridgeJob(
                mode="embed",
                inputs={"corpus": args.corpus},
                output=args.out,
                model=args.model,
                batch_size=args.batch_size,
            )
            meta = export_embeddings(job)
            print(f"wrote {meta['count']} x {meta['dim']} embeddings ({meta['model']}) to {args.out}")
        else:
            job = BridgeJob(
                mode="mask-prob",
                inputs={"manifest": args.manifest, "anchors": args.anchors},
                output=args.out,
                model=args.model,
                batch_size=args.batch_size,
            )
            meta = export_mask_probs(job)
            print(
                f"wrote {meta['written']} oracle entries ({meta['model']}) to {args.out}; "
                f"skipped {meta['skipped_deletes']} deletes"
            )
    except (BridgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
