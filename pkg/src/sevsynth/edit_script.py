"""Word-level edit scripts between an anchor and a retrieved neighbor.

The surface difference is decomposed into non-overlapping insert, replace,
and delete operations via token-level Levenshtein alignment with unit
costs. Backtrace ties are resolved in the fixed order keep > replace >
delete > insert so identical inputs always yield identical scripts.
Adjacent same-kind single-token edits are merged into span operations.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .corpus import TokenizedSentence


class OpKind(enum.Enum):
    INSERT = "insert"
    REPLACE = "replace"
    DELETE = "delete"


class OpOrigin(enum.Enum):
    EDIT_SCRIPT = "edit_script"
    RANDOM_DROP = "random_drop"


@dataclass(frozen=True)
class Perturbation:
    """One edit against the anchor.

    position is an anchor token index; for inserts it is a gap index in
    [0, len(anchor)] meaning "before the token at this position".
    """

    kind: OpKind
    position: int
    old_span: tuple[str, ...]
    new_span: tuple[str, ...]
    origin: OpOrigin = OpOrigin.EDIT_SCRIPT

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError("negative position")
        if self.kind is OpKind.INSERT and (self.old_span or not self.new_span):
            raise ValueError("insert must have empty old_span and non-empty new_span")
        if self.kind is OpKind.DELETE and (self.new_span or not self.old_span):
            raise ValueError("delete must have empty new_span and non-empty old_span")
        if self.kind is OpKind.REPLACE and (not self.old_span or not self.new_span):
            raise ValueError("replace must have non-empty old_span and new_span")

    @property
    def footprint(self) -> tuple[int, int]:
        """Half-open anchor index interval this op consumes (empty for inserts)."""
        return (self.position, self.position + len(self.old_span))

    @property
    def cost(self) -> int:
        """Contribution to the edit distance: max of span lengths."""
        return max(len(self.old_span), len(self.new_span))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "position": self.position,
            "old_span": list(self.old_span),
            "new_span": list(self.new_span),
            "origin": self.origin.value,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "Perturbation":
        return cls(
            kind=OpKind(payload["kind"]),
            position=int(payload["position"]),
            old_span=tuple(payload["old_span"]),
            new_span=tuple(payload["new_span"]),
            origin=OpOrigin(payload.get("origin", "edit_script")),
        )


def _storage_sort_key(op: Perturbation) -> tuple[int, int]:
    # Inserts at a gap precede a span starting at the same index.
    return (op.position, 0 if op.kind is OpKind.INSERT else 1)


def check_ops_compatible(ops: list[Perturbation] | tuple[Perturbation, ...]) -> None:
    """Validate pairwise disjointness of anchor footprints and insert gaps."""
    spans = sorted((op.footprint for op in ops if op.kind is not OpKind.INSERT))
    for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
        if s2 < e1:
            raise ValueError(f"conflicting perturbations: spans [{s1},{e1}) and [{s2},{e2}) overlap")
    gaps = [op.position for op in ops if op.kind is OpKind.INSERT]
    if len(set(gaps)) != len(gaps):
        raise ValueError("conflicting perturbations: two inserts share a gap index")
    for gap in gaps:
        for start, end in spans:
            if start < gap < end:
                raise ValueError(f"conflicting perturbations: insert gap {gap} inside span [{start},{end})")


@dataclass(frozen=True)
class Proposal:
    """A conflict-free, position-sorted set of perturbations for one anchor."""

    anchor_id: int
    neighbor_id: int | None
    ops: tuple[Perturbation, ...]

    def __post_init__(self) -> None:
        check_ops_compatible(self.ops)
        ordered = tuple(sorted(self.ops, key=_storage_sort_key))
        if ordered != self.ops:
            object.__setattr__(self, "ops", ordered)

    def to_json(self) -> str:
        payload = {
            "anchor_id": self.anchor_id,
            "neighbor_id": self.neighbor_id,
            "ops": [op.to_json_dict() for op in self.ops],
        }
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "Proposal":
        payload = json.loads(line)
        return cls(
            anchor_id=int(payload["anchor_id"]),
            neighbor_id=None if payload.get("neighbor_id") is None else int(payload["neighbor_id"]),
            ops=tuple(Perturbation.from_json_dict(op) for op in payload["ops"]),
        )


def extract_edit_ops(x0: TokenizedSentence, xj: TokenizedSentence) -> Proposal:
    """Decompose the surface difference between anchor and neighbor into ops.

    Applying all returned ops to x0 reconstructs xj exactly, and the op
    cost sum equals the token-level Levenshtein distance.
    """
    a, b = x0.tokens, xj.tokens
    n, m = len(a), len(b)

    dp = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = dp[-1]
        row = [i] + [0] * m
        ai = a[i - 1]
        for j in range(1, m + 1):
            best = prev[j - 1] + (ai != b[j - 1])
            up = prev[j] + 1
            if up < best:
                best = up
            left = row[j - 1] + 1
            if left < best:
                best = left
            row[j] = best
        dp.append(row)

    # Backtrace, preferring keep > replace > delete > insert on cost ties.
    # Steps come out in descending anchor position.
    steps: list[tuple[OpKind, int, str | None, str | None]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and a[i - 1] == b[j - 1] and dp[i][j] == dp[i - 1][j - 1]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and a[i - 1] != b[j - 1] and dp[i][j] == dp[i - 1][j - 1] + 1:
            steps.append((OpKind.REPLACE, i - 1, a[i - 1], b[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            steps.append((OpKind.DELETE, i - 1, a[i - 1], None))
            i -= 1
        else:
            steps.append((OpKind.INSERT, i, None, b[j - 1]))
            j -= 1

    ops: list[Perturbation] = []
    idx = 0
    while idx < len(steps):
        kind, pos, old_tok, new_tok = steps[idx]
        olds = [old_tok] if old_tok is not None else []
        news = [new_tok] if new_tok is not None else []
        idx += 1
        while idx < len(steps) and steps[idx][0] is kind:
            npos = steps[idx][1]
            if kind is OpKind.INSERT:
                contiguous = npos == pos
            else:
                contiguous = npos == pos - len(olds)
            if not contiguous:
                break
            if steps[idx][2] is not None:
                olds.append(steps[idx][2])
            if steps[idx][3] is not None:
                news.append(steps[idx][3])
            idx += 1
        start = pos if kind is OpKind.INSERT else pos - (len(olds) - 1)
        ops.append(
            Perturbation(
                kind=kind,
                position=start,
                old_span=tuple(reversed(olds)),
                new_span=tuple(reversed(news)),
                origin=OpOrigin.EDIT_SCRIPT,
            )
        )
    ops.reverse()
    return Proposal(anchor_id=x0.sentence_id if x0.sentence_id is not None else -1,
                    neighbor_id=xj.sentence_id,
                    ops=tuple(ops))


def add_random_drops(
    proposal: Proposal,
    x0: TokenizedSentence,
    rng: np.random.Generator,
    drop_count_max: int,
) -> Proposal:
    """Add 0..drop_count_max single-token delete ops at uncovered positions.

    The drop count is uniform on [0, drop_count_max]; sites are a uniform
    draw without replacement from positions no existing op footprint
    covers. When no site is free, the proposal is returned unchanged.
    """
    if drop_count_max < 0:
        raise ValueError("drop_count_max must be >= 0")
    if drop_count_max == 0:
        return proposal
    covered = set()
    for op in proposal.ops:
        covered.update(range(*op.footprint))
    legal = [p for p in range(len(x0.tokens)) if p not in covered]
    if not legal:
        return proposal
    count = min(int(rng.integers(drop_count_max + 1)), len(legal))
    if count == 0:
        return proposal
    sites = rng.choice(len(legal), size=count, replace=False)
    drops = [
        Perturbation(
            kind=OpKind.DELETE,
            position=legal[int(s)],
            old_span=(x0.tokens[legal[int(s)]],),
            new_span=(),
            origin=OpOrigin.RANDOM_DROP,
        )
        for s in sites
    ]
    return dc_replace(proposal, ops=tuple(list(proposal.ops) + drops))


def apply_ops(
    x0: TokenizedSentence,
    ops: list[Perturbation] | tuple[Perturbation, ...],
) -> TokenizedSentence:
    """Splice a conflict-free op subset into the anchor.

    Ops are applied in descending position order (spans before gap inserts
    at the same index) so earlier indices stay valid; any permutation of a
    valid subset yields the same output.
    """
    check_ops_compatible(ops)
    tokens = list(x0.tokens)
    for op in sorted(ops, key=lambda o: (o.position, o.kind is not OpKind.INSERT), reverse=True):
        start, end = op.footprint
        if end > len(x0.tokens):
            raise ValueError(f"op at [{start},{end}) exceeds anchor length {len(x0.tokens)}")
        if tuple(x0.tokens[start:end]) != op.old_span:
            raise ValueError(f"op old_span {op.old_span!r} does not match anchor tokens at [{start},{end})")
        tokens[start:end] = list(op.new_span)
    return TokenizedSentence(tokens=tuple(tokens), sentence_id=None)
