"""End-to-end dataset construction: retrieval, perturbation, scoring, emission.

Every anchor line is processed independently with its own derived random
streams, so results are identical for any worker count; records are
written in ascending anchor id order. The emitted JSONL dataset and the
JSON stats report are byte-reproducible for a fixed configuration.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import IdfTable, TokenizedSentence, build_idf, load_corpus
from .edit_script import OpKind, Perturbation, Proposal, add_random_drops, extract_edit_ops
from .embed_index import EmbeddingIndex, load_embeddings, select_neighbor
from .rng import derive_rng
from .severity import (
    MaskProbabilityProvider,
    OracleFileProvider,
    SeverityConfig,
    SeverityLabel,
    SeverityLevel,
    StubProvider,
    op_fingerprint,
    score_sample,
    severity_delete,
    severity_insert_replace,
)
from .synthesis import (
    MAX_OPS_PER_SAMPLE,
    SampleKind,
    draw_partner,
    make_in_batch_negative,
    make_positive,
    synthesize_negative,
)


class ValidationError(ValueError):
    """Inconsistent or unusable pipeline inputs; maps to exit code 2."""


class PipelineError(RuntimeError):
    """A failure while the pipeline is running; maps to exit code 3."""


@dataclass(frozen=True)
class PipelineConfig:
    anchor_corpus: str
    source_corpus: str
    embeddings: str
    idf_cache: str | None = None
    oracle_file: str | None = None
    stub_probability: float | None = None
    k_neighbors: int = 128
    margin_threshold: float = 1.06
    max_ops: int = 5
    drop_count_max: int = 1
    negatives_per_anchor: int = 3
    in_batch_ratio: float = 0.1
    severity: SeverityConfig = field(default_factory=SeverityConfig)
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValidationError("k_neighbors must be >= 1")
        if self.margin_threshold <= 0:
            raise ValidationError("margin_threshold must be positive")
        if self.max_ops != MAX_OPS_PER_SAMPLE:
            raise ValidationError(f"max_ops is fixed at {MAX_OPS_PER_SAMPLE} by the sampling contract")
        if self.drop_count_max < 0:
            raise ValidationError("drop_count_max must be >= 0")
        if self.negatives_per_anchor < 0:
            raise ValidationError("negatives_per_anchor must be >= 0")
        if self.in_batch_ratio < 0:
            raise ValidationError("in_batch_ratio must be >= 0")
        if self.master_seed < 0:
            raise ValidationError("master_seed must be a non-negative 64-bit integer")

    def to_json_dict(self) -> dict:
        payload = dataclasses.asdict(self)
        payload["severity"] = dataclasses.asdict(self.severity)
        return payload

    @classmethod
    def from_json_dict(cls, payload: dict) -> "PipelineConfig":
        data = dict(payload)
        severity = data.pop("severity", None)
        try:
            config = cls(
                severity=SeverityConfig(**severity) if severity else SeverityConfig(),
                **data,
            )
        except TypeError as exc:
            raise ValidationError(f"bad config: {exc}") from exc
        except ValueError as exc:
            raise ValidationError(f"bad config: {exc}") from exc
        return config

    @classmethod
    def from_json_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json_dict(payload)


@dataclass(frozen=True)
class TrainingTriple:
    anchor_id: int
    anchor_text: str
    output_text: str
    score: float
    kind: SampleKind
    ops: tuple[tuple[Perturbation, SeverityLabel], ...]

    def to_json_dict(self) -> dict:
        return {
            "anchor_id": self.anchor_id,
            "anchor_text": self.anchor_text,
            "output_text": self.output_text,
            "score": self.score,
            "kind": self.kind.value,
            "ops": [
                {
                    **op.to_json_dict(),
                    "severity": {"level": label.level.value, "evidence": label.evidence},
                }
                for op, label in self.ops
            ],
        }


@dataclass
class PipelineInputs:
    anchors: list[TokenizedSentence]
    sources: list[TokenizedSentence]
    index: EmbeddingIndex
    idf: IdfTable
    provider: MaskProbabilityProvider


# Stream labels; one stream per (label, anchor or record index).
STREAM_NEIGHBOR = "neighbor"
STREAM_DROPS = "drops"
STREAM_SUBSET = "subset"
STREAM_IN_BATCH = "inbatch"


def load_pipeline_inputs(config: PipelineConfig) -> PipelineInputs:
    """Load and cross-validate all pipeline inputs; fail before any output."""
    try:
        anchors = load_corpus(config.anchor_corpus)
        sources = load_corpus(config.source_corpus)
    except OSError as exc:
        raise ValidationError(f"cannot read corpus: {exc}") from exc
    if not anchors:
        raise ValidationError(f"anchor corpus {config.anchor_corpus} is empty")
    if len(sources) != len(anchors):
        raise ValidationError(
            f"line count mismatch: {len(anchors)} anchors vs {len(sources)} source lines"
        )
    for sentence, name in ((anchors, "anchor"), (sources, "source")):
        for s in sentence:
            if not s.tokens:
                raise ValidationError(f"empty {name} line at index {s.sentence_id}")
    try:
        index = load_embeddings(config.embeddings)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot load embeddings: {exc}") from exc
    if index.count != len(anchors):
        raise ValidationError(
            f"embedding count {index.count} does not match corpus line count {len(anchors)}"
        )
    if config.k_neighbors > index.count - 1:
        raise ValidationError(
            f"k_neighbors={config.k_neighbors} exceeds count-1={index.count - 1}"
        )

    if config.idf_cache and Path(config.idf_cache).exists():
        idf = IdfTable.load(config.idf_cache)
    else:
        idf = build_idf(anchors)
        if config.idf_cache:
            idf.save(config.idf_cache)

    if config.stub_probability is not None:
        if not 0.0 <= config.stub_probability <= 1.0:
            raise ValidationError("stub_probability must lie in [0, 1]")
        provider: MaskProbabilityProvider = StubProvider(config.stub_probability)
    elif config.oracle_file:
        try:
            provider = OracleFileProvider(config.oracle_file)
        except (OSError, ValueError, KeyError) as exc:
            raise ValidationError(f"cannot load oracle file: {exc}") from exc
    else:
        raise ValidationError(
            "no mask-probability provider configured: set oracle_file or stub_probability"
        )
    return PipelineInputs(anchors=anchors, sources=sources, index=index, idf=idf, provider=provider)


def derive_proposal(inputs: PipelineInputs, config: PipelineConfig, anchor_id: int) -> Proposal:
    """Retrieve a qualified neighbor, extract its edit script, add random drops.

    Shared by `synthesize` (manifest emission) and `emit-dataset` so both
    passes see identical proposals under one master seed.
    """
    anchor = inputs.anchors[anchor_id]
    neighbor_rng = derive_rng(config.master_seed, STREAM_NEIGHBOR, anchor_id)
    neighbor_id = select_neighbor(
        inputs.index, anchor_id, config.k_neighbors, config.margin_threshold, neighbor_rng
    )
    if neighbor_id is None:
        proposal = Proposal(anchor_id=anchor_id, neighbor_id=None, ops=())
    else:
        proposal = extract_edit_ops(anchor, inputs.anchors[neighbor_id])
    drops_rng = derive_rng(config.master_seed, STREAM_DROPS, anchor_id)
    return add_random_drops(proposal, anchor, drops_rng, config.drop_count_max)


def label_op(
    inputs: PipelineInputs,
    config: PipelineConfig,
    anchor_id: int,
    op: Perturbation,
) -> SeverityLabel:
    anchor = inputs.anchors[anchor_id]
    if op.kind is OpKind.DELETE:
        return severity_delete(inputs.idf, anchor, op, config.severity)
    return severity_insert_replace(
        inputs.provider, inputs.sources[anchor_id], anchor, op, config.severity, anchor_id=anchor_id
    )


@dataclass
class AnchorResult:
    anchor_id: int
    neighbor_id: int | None
    proposal_size: int
    hard_negatives: list[TrainingTriple]


def _process_anchor(inputs: PipelineInputs, config: PipelineConfig, anchor_id: int) -> AnchorResult:
    anchor = inputs.anchors[anchor_id]
    proposal = derive_proposal(inputs, config, anchor_id)
    result = AnchorResult(
        anchor_id=anchor_id,
        neighbor_id=proposal.neighbor_id,
        proposal_size=len(proposal.ops),
        hard_negatives=[],
    )
    if not proposal.ops or config.negatives_per_anchor == 0:
        return result

    try:
        label_by_op = {op: label_op(inputs, config, anchor_id, op) for op in proposal.ops}
    except (KeyError, ValueError) as exc:
        raise PipelineError(f"severity labeling failed for anchor {anchor_id}: {exc}") from exc

    subset_rng = derive_rng(config.master_seed, STREAM_SUBSET, anchor_id)
    for _ in range(config.negatives_per_anchor):
        sample = synthesize_negative(anchor, proposal, subset_rng)
        labels = [label_by_op[op] for op in sample.applied_ops]
        score = score_sample(sample, labels, config.severity)
        result.hard_negatives.append(
            TrainingTriple(
                anchor_id=anchor_id,
                anchor_text=anchor.text,
                output_text=sample.output.text,
                score=score,
                kind=SampleKind.HARD_NEGATIVE,
                ops=tuple(zip(sample.applied_ops, labels)),
            )
        )
    return result


def _rederive_score(triple: TrainingTriple, severity: SeverityConfig) -> float:
    """Recompute the score from the recorded per-op severities."""
    if triple.kind is SampleKind.POSITIVE:
        return 0.0
    if triple.kind is SampleKind.IN_BATCH_NEGATIVE:
        return severity.in_batch_score
    total = sum(
        severity.minor_score if label.level is SeverityLevel.MINOR else severity.major_score
        for _, label in triple.ops
    )
    return max(total, severity.floor)


def _sorted_hist(counter: dict) -> dict:
    return {str(k): counter[k] for k in sorted(counter)}


def run_emit_dataset(
    config: PipelineConfig,
    dataset_path: str | Path,
    stats_path: str | Path,
    workers: int = 1,
) -> dict:
    """Produce the severity-labeled JSONL dataset and its JSON stats report."""
    inputs = load_pipeline_inputs(config)
    n = len(inputs.anchors)
    anchor_ids = list(range(n))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: _process_anchor(inputs, config, i), anchor_ids))
    else:
        results = [_process_anchor(inputs, config, i) for i in anchor_ids]

    counts = {kind.value: 0 for kind in SampleKind}
    subset_hist: dict[int, int] = {}
    subset_hist_large: dict[int, int] = {}
    proposal_hist: dict[int, int] = {}
    severity_hist = {SeverityLevel.MINOR.value: 0, SeverityLevel.MAJOR.value: 0}
    score_hist: dict[float, int] = {}
    skip_no_neighbor = 0
    skip_no_ops = 0

    cumulative_hard = 0
    in_batch_emitted = 0

    def in_batch_due() -> int:
        target = int(config.in_batch_ratio * cumulative_hard + 1e-9)
        return max(0, target - in_batch_emitted)

    records: list[TrainingTriple] = []
    for result in results:
        anchor = inputs.anchors[result.anchor_id]
        proposal_hist[result.proposal_size] = proposal_hist.get(result.proposal_size, 0) + 1
        if result.neighbor_id is None:
            skip_no_neighbor += 1
        if not result.hard_negatives:
            skip_no_ops += 1

        positive = make_positive(anchor)
        records.append(
            TrainingTriple(
                anchor_id=result.anchor_id,
                anchor_text=anchor.text,
                output_text=positive.output.text,
                score=score_sample(positive, [], config.severity),
                kind=SampleKind.POSITIVE,
                ops=(),
            )
        )
        counts[SampleKind.POSITIVE.value] += 1

        for triple in result.hard_negatives:
            records.append(triple)
            counts[SampleKind.HARD_NEGATIVE.value] += 1
            size = len(triple.ops)
            subset_hist[size] = subset_hist.get(size, 0) + 1
            if result.proposal_size >= MAX_OPS_PER_SAMPLE:
                subset_hist_large[size] = subset_hist_large.get(size, 0) + 1
            for _, label in triple.ops:
                severity_hist[label.level.value] += 1
            score_hist[triple.score] = score_hist.get(triple.score, 0) + 1
        cumulative_hard += len(result.hard_negatives)

        if n >= 2:
            for _ in range(in_batch_due()):
                rng = derive_rng(config.master_seed, STREAM_IN_BATCH, in_batch_emitted)
                partner = draw_partner(rng, n, result.anchor_id)
                sample = make_in_batch_negative(anchor, inputs.anchors[partner])
                records.append(
                    TrainingTriple(
                        anchor_id=result.anchor_id,
                        anchor_text=anchor.text,
                        output_text=sample.output.text,
                        score=score_sample(sample, [], config.severity),
                        kind=SampleKind.IN_BATCH_NEGATIVE,
                        ops=(),
                    )
                )
                counts[SampleKind.IN_BATCH_NEGATIVE.value] += 1
                in_batch_emitted += 1

    for triple in records:
        rederived = _rederive_score(triple, config.severity)
        if triple.score != rederived:
            raise PipelineError(
                f"score self-consistency failure for anchor {triple.anchor_id}: "
                f"recorded {triple.score}, re-derived {rederived}"
            )

    stats = {
        "config": config.to_json_dict(),
        "anchors_total": n,
        "counts_by_kind": counts,
        "skip_reasons": {
            "no_qualified_neighbor": skip_no_neighbor,
            "no_hard_negatives": skip_no_ops,
        },
        "proposal_size_histogram": _sorted_hist(proposal_hist),
        "subset_size_histogram": _sorted_hist(subset_hist),
        "subset_size_histogram_large_proposals": _sorted_hist(subset_hist_large),
        "severity_histogram": severity_hist,
        "hard_negative_score_histogram": _sorted_hist(score_hist),
    }

    with open(dataset_path, "w", encoding="utf-8", newline="\n") as fh:
        for triple in records:
            fh.write(json.dumps(triple.to_json_dict(), ensure_ascii=False))
            fh.write("\n")
    with open(stats_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(stats, ensure_ascii=False, indent=2))
        fh.write("\n")
    return stats


def run_synthesize(config: PipelineConfig, manifest_path: str | Path) -> int:
    """Write the fingerprint manifest for all proposal ops (oracle pre-pass).

    Lines carry every op of every anchor's proposal under the configured
    master seed, so a later emit-dataset run sees exactly these ops.
    """
    inputs = load_pipeline_inputs_for_synthesis(config)
    written = 0
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        for anchor_id in range(len(inputs.anchors)):
            proposal = derive_proposal(inputs, config, anchor_id)
            for op in proposal.ops:
                line = {
                    "fingerprint": op_fingerprint(anchor_id, op),
                    "anchor_id": anchor_id,
                    "op": op.to_json_dict(),
                    "source_text": inputs.sources[anchor_id].text,
                }
                fh.write(json.dumps(line, ensure_ascii=False))
                fh.write("\n")
                written += 1
    return written


def load_pipeline_inputs_for_synthesis(config: PipelineConfig) -> PipelineInputs:
    """Like load_pipeline_inputs but without requiring a probability provider."""
    stubbed = dataclasses.replace(config, stub_probability=0.5, oracle_file=None)
    inputs = load_pipeline_inputs(stubbed)
    return inputs


def run_label(config: PipelineConfig, manifest_path: str | Path, out_path: str | Path) -> int:
    """Label every manifest op with its severity; one JSON line per op."""
    inputs = load_pipeline_inputs(config)
    written = 0
    with open(manifest_path, encoding="utf-8") as src, open(
        out_path, "w", encoding="utf-8", newline="\n"
    ) as dst:
        for line in src:
            line = line.strip()
            if not line:
                continue
            entry = json.loads(line)
            anchor_id = int(entry["anchor_id"])
            if not 0 <= anchor_id < len(inputs.anchors):
                raise ValidationError(f"manifest anchor_id {anchor_id} out of corpus range")
            op = Perturbation.from_json_dict(entry["op"])
            try:
                label = label_op(inputs, config, anchor_id, op)
            except (KeyError, ValueError) as exc:
                raise PipelineError(f"labeling failed for fingerprint {entry['fingerprint']}: {exc}") from exc
            dst.write(
                json.dumps(
                    {
                        "fingerprint": entry["fingerprint"],
                        "level": label.level.value,
                        "contribution": label.contribution,
                        "evidence": label.evidence,
                    },
                    ensure_ascii=False,
                )
            )
            dst.write("\n")
            written += 1
    return written
