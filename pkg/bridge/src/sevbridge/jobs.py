"""Bridge jobs: file-in/file-out embedding export and mask-probability export.

The bridge touches the rest of the toolkit only through its file formats:
corpus text files in, EMB1 or oracle JSONL out, plus a JSON metadata
sidecar recording the model identifier for provenance.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from .emb1 import write_emb1
from .encoders import make_encoder
from .maskprob import make_scorer

logger = logging.getLogger(__name__)


class BridgeError(RuntimeError):
    pass


@dataclass(frozen=True)
class BridgeJob:
    mode: str  # "embed" or "mask-prob"
    inputs: dict
    output: str
    model: str
    batch_size: int = 32

    def __post_init__(self) -> None:
        if self.mode not in ("embed", "mask-prob"):
            raise ValueError(f"unknown bridge mode {self.mode!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _read_lines(path: str | Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def _write_sidecar(output: str | Path, payload: dict) -> Path:
    sidecar = Path(f"{output}.meta.json")
    sidecar.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return sidecar


def _atomic(output: str | Path):
    return Path(f"{output}.partial")


def export_embeddings(job: BridgeJob) -> dict:
    """One vector per corpus line in EMB1 layout; partial files never survive."""
    if job.mode != "embed":
        raise BridgeError(f"export_embeddings got a {job.mode} job")
    corpus_path = job.inputs["corpus"]
    lines = _read_lines(corpus_path)
    if not lines:
        raise BridgeError(f"refusing empty corpus {corpus_path}: EMB1 forbids n=0")
    encoder = make_encoder(job.model)
    partial = _atomic(job.output)
    try:
        vectors = encoder.encode(lines, batch_size=job.batch_size)
        if vectors.shape[0] != len(lines):
            raise BridgeError(
                f"encoder returned {vectors.shape[0]} rows for {len(lines)} corpus lines"
            )
        write_emb1(partial, vectors)
        os.replace(partial, job.output)
    except Exception:
        partial.unlink(missing_ok=True)
        raise
    meta = {
        "mode": "embed",
        "model": job.model,
        "corpus": str(corpus_path),
        "count": int(vectors.shape[0]),
        "dim": int(vectors.shape[1]),
    }
    _write_sidecar(job.output, meta)
    return meta


def _apply_single_op(anchor_tokens: list[str], op: dict) -> tuple[list[str], list[int]]:
    """Splice one insert/replace into the anchor; return tokens and the slots to mask."""
    position = int(op["position"])
    old_span = list(op["old_span"])
    new_span = list(op["new_span"])
    end = position + len(old_span)
    if end > len(anchor_tokens) or anchor_tokens[position:end] != old_span:
        raise BridgeError(
            f"op does not fit its anchor: expected {old_span} at [{position},{end})"
        )
    tokens = anchor_tokens[:position] + new_span + anchor_tokens[end:]
    return tokens, list(range(position, position + len(new_span)))


def export_mask_probs(job: BridgeJob) -> dict:
    """Per-token recovery probabilities for every insert/replace manifest op."""
    if job.mode != "mask-prob":
        raise BridgeError(f"export_mask_probs got a {job.mode} job")
    manifest_path = job.inputs["manifest"]
    anchors_path = job.inputs["anchors"]
    anchors = [line.split() for line in _read_lines(anchors_path)]
    scorer = make_scorer(job.model, [" ".join(tokens) for tokens in anchors])

    seen: set[str] = set()
    written = 0
    skipped_deletes = 0
    partial = _atomic(job.output)
    try:
        with open(manifest_path, encoding="utf-8") as src, open(
            partial, "w", encoding="utf-8", newline="\n"
        ) as dst:
            for line_no, line in enumerate(src, start=1):
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                fingerprint = str(entry["fingerprint"])
                op = entry["op"]
                if op["kind"] == "delete":
                    skipped_deletes += 1
                    logger.warning(
                        "skipping delete op %s at %s:%d (deletes need no probabilities)",
                        fingerprint, manifest_path, line_no,
                    )
                    continue
                if fingerprint in seen:
                    logger.warning(
                        "duplicate fingerprint %s at %s:%d; emitted once", fingerprint, manifest_path, line_no
                    )
                    continue
                anchor_id = int(entry["anchor_id"])
                if not 0 <= anchor_id < len(anchors):
                    raise BridgeError(f"manifest anchor_id {anchor_id} outside corpus")
                target_tokens, positions = _apply_single_op(list(anchors[anchor_id]), op)
                span = list(op["new_span"])
                probs = scorer.score(entry.get("source_text", ""), target_tokens, positions, span)
                if len(probs) != len(span):
                    raise BridgeError(
                        f"scorer returned {len(probs)} probabilities for a {len(span)}-token span"
                    )
                if any(not 0.0 <= p <= 1.0 for p in probs):
                    raise BridgeError(f"probability outside [0, 1] for fingerprint {fingerprint}")
                dst.write(json.dumps({"fingerprint": fingerprint, "probs": probs}, ensure_ascii=False))
                dst.write("\n")
                seen.add(fingerprint)
                written += 1
        os.replace(partial, job.output)
    except Exception:
        partial.unlink(missing_ok=True)
        raise
    meta = {
        "mode": "mask-prob",
        "model": job.model,
        "manifest": str(manifest_path),
        "anchors": str(anchors_path),
        "written": written,
        "skipped_deletes": skipped_deletes,
        "word_probability_convention": "per-word product of subword probabilities (hf) / corpus relative frequency (unigram)",
    }
    _write_sidecar(job.output, meta)
    return meta
