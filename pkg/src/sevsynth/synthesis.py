"""Stratified sampling of perturbation subsets and sample assembly.

Hard negatives carry 1..5 perturbations; positives are the anchor paired
with itself; in-batch negatives pair the anchor with another anchor's
text. The downstream scores come from the severity module.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .corpus import TokenizedSentence
from .edit_script import OpKind, Perturbation, Proposal, apply_ops

MAX_OPS_PER_SAMPLE = 5


class SampleKind(enum.Enum):
    HARD_NEGATIVE = "hard_negative"
    POSITIVE = "positive"
    IN_BATCH_NEGATIVE = "in_batch_negative"


@dataclass(frozen=True)
class SyntheticSample:
    anchor: TokenizedSentence
    output: TokenizedSentence
    applied_ops: tuple[Perturbation, ...]
    kind: SampleKind


def sample_perturbation_subset(proposal: Proposal, rng: np.random.Generator) -> list[Perturbation]:
    """Pick a stratified random subset of the proposal's ops.

    When the proposal holds more than five ops, a uniform five-op pool is
    drawn first; the subset size is then uniform on [1, pool size] and the
    members are a uniform draw from the pool.
    """
    ops = list(proposal.ops)
    if not ops:
        raise ValueError("nothing to perturb: proposal is empty")
    if len(ops) > MAX_OPS_PER_SAMPLE:
        picked = rng.choice(len(ops), size=MAX_OPS_PER_SAMPLE, replace=False)
        ops = [ops[int(i)] for i in picked]
    size = int(rng.integers(1, len(ops) + 1))
    chosen = rng.choice(len(ops), size=size, replace=False)
    subset = [ops[int(i)] for i in chosen]
    subset.sort(key=lambda o: (o.position, o.kind is not OpKind.INSERT))
    return subset


def synthesize_negative(
    anchor: TokenizedSentence,
    proposal: Proposal,
    rng: np.random.Generator,
) -> SyntheticSample:
    """Apply a sampled op subset to the anchor, yielding a hard negative."""
    subset = sample_perturbation_subset(proposal, rng)
    output = apply_ops(anchor, subset)
    return SyntheticSample(
        anchor=anchor,
        output=output,
        applied_ops=tuple(subset),
        kind=SampleKind.HARD_NEGATIVE,
    )


def make_positive(anchor: TokenizedSentence) -> SyntheticSample:
    """The identity pair; scored 0 downstream."""
    return SyntheticSample(anchor=anchor, output=anchor, applied_ops=(), kind=SampleKind.POSITIVE)


def make_in_batch_negative(anchor: TokenizedSentence, other_anchor: TokenizedSentence) -> SyntheticSample:
    """Pair the anchor with a different anchor's text; scored -50 downstream."""
    if anchor.sentence_id == other_anchor.sentence_id:
        raise ValueError(f"in-batch negative requires distinct anchors, got id {anchor.sentence_id} twice")
    return SyntheticSample(
        anchor=anchor,
        output=other_anchor,
        applied_ops=(),
        kind=SampleKind.IN_BATCH_NEGATIVE,
    )


def draw_partner(rng: np.random.Generator, n_anchors: int, self_index: int) -> int:
    """Uniform partner id over the other members of the emission batch."""
    if n_anchors < 2:
        raise ValueError("need at least two anchors to pair in-batch negatives")
    drawn = int(rng.integers(n_anchors - 1))
    return drawn + 1 if drawn >= self_index else drawn
