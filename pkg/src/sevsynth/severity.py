"""Minor/Major labels for perturbations and sample score aggregation.

Insert and replace ops are judged by the mean probability of recovering
the new tokens from a masked copy of the perturbed sentence under the
source context; deletes are judged by the maximum TF-IDF weight of the
removed tokens. Each op is estimated on the anchor alone, independent of
any other op applied to the same sample.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .corpus import IdfTable, TokenizedSentence, tfidf_weight
from .edit_script import OpKind, Perturbation, apply_ops
from .rng import fnv1a64
from .synthesis import SampleKind, SyntheticSample

logger = logging.getLogger(__name__)

MASK_TOKEN = "<mask>"


class SeverityLevel(enum.Enum):
    MINOR = "minor"
    MAJOR = "major"


@dataclass(frozen=True)
class SeverityConfig:
    """Thresholds and score constants for severity labeling."""

    minor_prob_threshold: float = 0.1  # insert/replace: minor iff p >= threshold
    delete_weight_threshold: float = 1.0  # delete: minor iff w < threshold
    minor_score: float = -1.0
    major_score: float = -5.0
    floor: float = -25.0
    in_batch_score: float = -50.0

    def __post_init__(self) -> None:
        if not 0.0 < self.minor_prob_threshold < 1.0:
            raise ValueError("minor_prob_threshold must lie in (0, 1)")
        if self.delete_weight_threshold <= 0.0:
            raise ValueError("delete_weight_threshold must be positive")
        if not self.floor < self.major_score < self.minor_score < 0.0:
            raise ValueError("scores must satisfy floor < major < minor < 0")


@dataclass(frozen=True)
class SeverityLabel:
    level: SeverityLevel
    contribution: float
    evidence: float  # probability for insert/replace, TF-IDF weight for delete


def op_fingerprint(anchor_id: int, op: Perturbation) -> str:
    """Stable 64-bit hex join key for an op on a given anchor.

    FNV-1a over the canonical JSON rendering (sorted keys, compact
    separators, raw UTF-8) of the op's identifying fields; the origin is
    deliberately excluded.
    """
    canonical = json.dumps(
        {
            "anchor_id": anchor_id,
            "kind": op.kind.value,
            "position": op.position,
            "old_span": list(op.old_span),
            "new_span": list(op.new_span),
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return f"{fnv1a64(canonical.encode('utf-8')):016x}"


@dataclass(frozen=True)
class MaskQuery:
    """One masked-recovery request for an insert/replace op."""

    source: TokenizedSentence
    masked_target: TokenizedSentence
    span: tuple[str, ...]
    fingerprint: str


class MaskProbabilityProvider(Protocol):
    def query(self, request: MaskQuery) -> list[float]:
        """Per-token recovery probabilities, one per span token, each in [0, 1]."""
        ...


class OracleLookupError(KeyError):
    """An op fingerprint is missing from the probability oracle."""


class OracleFileProvider:
    """Exact probabilities from a JSONL file keyed by op fingerprint.

    Each line is {"fingerprint": <hex>, "probs": [p1, ..., pl]}. Duplicate
    fingerprints keep the last entry and log a warning.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._probs: dict[str, list[float]] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                fp = str(record["fingerprint"])
                if fp in self._probs:
                    logger.warning("duplicate fingerprint %s at %s:%d; last entry wins", fp, self.path, line_no)
                self._probs[fp] = [float(p) for p in record["probs"]]

    def __len__(self) -> int:
        return len(self._probs)

    def query(self, request: MaskQuery) -> list[float]:
        try:
            return self._probs[request.fingerprint]
        except KeyError:
            raise OracleLookupError(f"no oracle entry for fingerprint {request.fingerprint}") from None


@dataclass(frozen=True)
class StubProvider:
    """Constant probability for every masked token; for model-free pipelines."""

    probability: float = 0.5

    def query(self, request: MaskQuery) -> list[float]:
        return [self.probability] * len(request.span)


def _mask_new_span(anchor: TokenizedSentence, op: Perturbation) -> TokenizedSentence:
    """Apply the op alone, then cover its new tokens with mask placeholders."""
    perturbed = apply_ops(anchor, [op])
    start = op.position
    end = start + len(op.new_span)
    tokens = list(perturbed.tokens)
    tokens[start:end] = [MASK_TOKEN] * len(op.new_span)
    return TokenizedSentence(tokens=tuple(tokens), sentence_id=None)


def severity_insert_replace(
    provider: MaskProbabilityProvider,
    source: TokenizedSentence,
    anchor: TokenizedSentence,
    op: Perturbation,
    config: SeverityConfig,
    anchor_id: int | None = None,
) -> SeverityLabel:
    """Label an insert or replace by mean masked-recovery probability."""
    if op.kind is OpKind.DELETE:
        raise ValueError("severity_insert_replace cannot label delete ops")
    aid = anchor.sentence_id if anchor_id is None else anchor_id
    fingerprint = op_fingerprint(aid if aid is not None else -1, op)
    request = MaskQuery(
        source=source,
        masked_target=_mask_new_span(anchor, op),
        span=op.new_span,
        fingerprint=fingerprint,
    )
    try:
        probs = provider.query(request)
    except OracleLookupError:
        raise
    except Exception as exc:
        raise OracleLookupError(f"provider failed for fingerprint {fingerprint}: {exc}") from exc
    if len(probs) != len(op.new_span):
        raise ValueError(
            f"provider returned {len(probs)} probabilities for a {len(op.new_span)}-token span "
            f"(fingerprint {fingerprint})"
        )
    if any(not 0.0 <= p <= 1.0 for p in probs):
        raise ValueError(f"probabilities outside [0, 1] for fingerprint {fingerprint}: {probs}")
    p = sum(probs) / len(probs)
    minor = p >= config.minor_prob_threshold
    return SeverityLabel(
        level=SeverityLevel.MINOR if minor else SeverityLevel.MAJOR,
        contribution=config.minor_score if minor else config.major_score,
        evidence=p,
    )


def severity_delete(
    idf: IdfTable,
    anchor: TokenizedSentence,
    op: Perturbation,
    config: SeverityConfig,
) -> SeverityLabel:
    """Label a delete (random drops included) by max TF-IDF weight of the span."""
    if op.kind is not OpKind.DELETE:
        raise ValueError("severity_delete labels delete ops only")
    w = max(tfidf_weight(token, anchor, idf) for token in op.old_span)
    minor = w < config.delete_weight_threshold
    return SeverityLabel(
        level=SeverityLevel.MINOR if minor else SeverityLevel.MAJOR,
        contribution=config.minor_score if minor else config.major_score,
        evidence=w,
    )


def score_sample(
    sample: SyntheticSample,
    labels: list[SeverityLabel] | tuple[SeverityLabel, ...],
    config: SeverityConfig,
) -> float:
    """Aggregate a sample's score from its per-op severity labels."""
    if sample.kind is SampleKind.POSITIVE:
        if labels:
            raise ValueError("positive samples take no severity labels")
        return 0.0
    if sample.kind is SampleKind.IN_BATCH_NEGATIVE:
        if labels:
            raise ValueError("in-batch negatives take no severity labels")
        return config.in_batch_score
    if len(labels) != len(sample.applied_ops):
        raise ValueError(
            f"label/op count mismatch: {len(labels)} labels for {len(sample.applied_ops)} ops"
        )
    return max(sum(label.contribution for label in labels), config.floor)
