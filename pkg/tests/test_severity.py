import json
import math

import numpy as np
import pytest

from sevsynth.corpus import build_idf, tokenize
from sevsynth.edit_script import OpKind, OpOrigin, Perturbation
from sevsynth.severity import (
    MASK_TOKEN,
    MaskQuery,
    OracleFileProvider,
    OracleLookupError,
    SeverityConfig,
    SeverityLevel,
    StubProvider,
    op_fingerprint,
    score_sample,
    severity_delete,
    severity_insert_replace,
)
from sevsynth.synthesis import make_in_batch_negative, make_positive, synthesize_negative
from sevsynth.edit_script import Proposal
from sevsynth.rng import derive_rng

CFG = SeverityConfig()
SOURCE = tokenize("s0 s1 s2", 0)
ANCHOR = tokenize("I like dogs", 0)
REPLACE_OP = Perturbation(OpKind.REPLACE, 2, ("dogs",), ("cats",))


class RecordingProvider:
    def __init__(self, probs):
        self.probs = probs
        self.requests = []

    def query(self, request: MaskQuery):
        self.requests.append(request)
        return self.probs


def label_with(probs, op=REPLACE_OP, config=CFG):
    return severity_insert_replace(RecordingProvider(probs), SOURCE, ANCHOR, op, config)


def test_replace_minor_above_threshold():
    label = label_with([0.5])
    assert label.level is SeverityLevel.MINOR
    assert label.contribution == -1.0
    assert label.evidence == 0.5


def test_replace_major_below_threshold():
    label = label_with([0.01])
    assert label.level is SeverityLevel.MAJOR
    assert label.contribution == -5.0


def test_multi_token_span_uses_mean():
    op = Perturbation(OpKind.REPLACE, 1, ("like",), ("really", "love"))
    label = label_with([0.2, 0.4], op=op)
    assert label.evidence == pytest.approx(0.3, abs=1e-12)
    assert label.level is SeverityLevel.MINOR


def test_boundary_probability_exactly_gamma_is_minor():
    label = label_with([CFG.minor_prob_threshold])
    assert label.level is SeverityLevel.MINOR


def test_masked_target_shape():
    provider = RecordingProvider([0.9])
    severity_insert_replace(provider, SOURCE, ANCHOR, REPLACE_OP, CFG)
    (request,) = provider.requests
    assert request.masked_target.tokens == ("I", "like", MASK_TOKEN)
    assert request.span == ("cats",)
    assert request.source is SOURCE

    insert_op = Perturbation(OpKind.INSERT, 1, (), ("x", "y"))
    provider = RecordingProvider([0.9, 0.9])
    severity_insert_replace(provider, SOURCE, ANCHOR, insert_op, CFG)
    (request,) = provider.requests
    assert request.masked_target.tokens == ("I", MASK_TOKEN, MASK_TOKEN, "like", "dogs")


def test_provider_length_mismatch_rejected():
    with pytest.raises(ValueError, match="1-token span"):
        label_with([0.5, 0.5])


def test_delete_op_rejected_by_insert_replace_rule():
    op = Perturbation(OpKind.DELETE, 0, ("I",), ())
    with pytest.raises(ValueError, match="delete"):
        label_with([0.5], op=op)


IDF_CORPUS = [tokenize("a b", 0), tokenize("a c", 1)]


def test_delete_minor_low_weight():
    idf = build_idf(IDF_CORPUS)
    op = Perturbation(OpKind.DELETE, 0, ("a",), ())  # idf("a") = 0
    label = severity_delete(idf, tokenize("a b"), op, CFG)
    assert label.level is SeverityLevel.MINOR
    assert label.evidence == 0.0


def test_delete_major_uses_max_weight():
    idf = build_idf([tokenize("a b", 0), tokenize("a c", 1), tokenize("a d", 2)])
    anchor = tokenize("a b b b b b b")
    op = Perturbation(OpKind.DELETE, 0, ("a", "b"), ())
    label = severity_delete(idf, anchor, op, CFG)
    # w("a") = 0, w("b") = 6 * ln(4/2) > 1 -> max rule says major
    assert label.evidence == pytest.approx(6 * math.log(2), abs=1e-12)
    assert label.level is SeverityLevel.MAJOR


def test_delete_boundary_weight_exactly_lambda_is_major():
    idf = build_idf(IDF_CORPUS)
    weight = idf.idf("b")  # tf = 1
    config = SeverityConfig(delete_weight_threshold=weight)
    op = Perturbation(OpKind.DELETE, 1, ("b",), ())
    label = severity_delete(idf, tokenize("a b"), op, config)
    assert label.evidence == weight
    assert label.level is SeverityLevel.MAJOR


def test_random_drop_scored_like_delete():
    idf = build_idf(IDF_CORPUS)
    op = Perturbation(OpKind.DELETE, 1, ("b",), (), origin=OpOrigin.RANDOM_DROP)
    label = severity_delete(idf, tokenize("a b"), op, CFG)
    assert label.level is SeverityLevel.MINOR


def test_severity_monotonicity_fuzz():
    rng = np.random.default_rng(41)
    idf = build_idf([tokenize("a b", 0), tokenize("a c", 1), tokenize("d e", 2)])
    op = REPLACE_OP
    delete_op = Perturbation(OpKind.DELETE, 2, ("dogs",), ())
    order = {SeverityLevel.MAJOR: 0, SeverityLevel.MINOR: 1}
    for _ in range(2000):
        p_low, p_high = sorted(rng.uniform(0, 1, size=2))
        low = label_with([p_low])
        high = label_with([p_high])
        assert order[high.level] >= order[low.level]

        lam_small, lam_big = sorted(rng.uniform(0.01, 4.0, size=2))
        low_cfg = SeverityConfig(delete_weight_threshold=lam_big)
        high_cfg = SeverityConfig(delete_weight_threshold=lam_small)
        # same weight, smaller threshold can only worsen the level
        l1 = severity_delete(idf, tokenize("x dogs dogs"), delete_op, low_cfg)
        l2 = severity_delete(idf, tokenize("x dogs dogs"), delete_op, high_cfg)
        assert order[l1.level] >= order[l2.level]


def test_label_independent_of_other_ops():
    provider = RecordingProvider([0.5])
    lone = severity_insert_replace(provider, SOURCE, ANCHOR, REPLACE_OP, CFG)
    # labeling again while a sibling op exists in the same proposal changes nothing
    sibling = Perturbation(OpKind.DELETE, 0, ("I",), ())
    Proposal(anchor_id=0, neighbor_id=None, ops=(sibling, REPLACE_OP))
    again = severity_insert_replace(RecordingProvider([0.5]), SOURCE, ANCHOR, REPLACE_OP, CFG)
    assert lone == again


def make_hard_negative(n_ops):
    anchor = tokenize(" ".join(f"w{i}" for i in range(2 * n_ops)), 0)
    ops = tuple(Perturbation(OpKind.REPLACE, 2 * i, (f"w{2*i}",), ("z",)) for i in range(n_ops))
    proposal = Proposal(anchor_id=0, neighbor_id=1, ops=ops)
    rng = derive_rng(0, "subset", 0)
    while True:
        sample = synthesize_negative(anchor, proposal, rng)
        if len(sample.applied_ops) == n_ops:
            return sample


def label_of(level):
    contribution = CFG.minor_score if level is SeverityLevel.MINOR else CFG.major_score
    from sevsynth.severity import SeverityLabel

    return SeverityLabel(level=level, contribution=contribution, evidence=0.5)


def test_score_sample_sum():
    sample = make_hard_negative(3)
    labels = [label_of(SeverityLevel.MINOR), label_of(SeverityLevel.MAJOR), label_of(SeverityLevel.MAJOR)]
    assert score_sample(sample, labels, CFG) == -11.0


def test_score_sample_positive_zero():
    assert score_sample(make_positive(tokenize("a b", 0)), [], CFG) == 0.0


def test_score_sample_in_batch():
    sample = make_in_batch_negative(tokenize("a", 0), tokenize("b", 1))
    assert score_sample(sample, [], CFG) == -50.0


def test_score_sample_clamped_at_floor():
    sample = make_hard_negative(5)
    # six labels would mismatch; emulate an op set scoring below the floor via config
    tight = SeverityConfig(major_score=-6.0, floor=-25.0)
    labels = [label_of(SeverityLevel.MAJOR)] * 5
    labels = [l.__class__(level=l.level, contribution=-6.0, evidence=l.evidence) for l in labels]
    assert score_sample(sample, labels, tight) == -25.0


def test_score_sample_count_mismatch():
    sample = make_hard_negative(2)
    with pytest.raises(ValueError, match="mismatch"):
        score_sample(sample, [label_of(SeverityLevel.MINOR)], CFG)


def test_score_sample_rejects_labels_on_unlabeled_kinds():
    with pytest.raises(ValueError, match="no severity labels"):
        score_sample(make_positive(tokenize("a", 0)), [label_of(SeverityLevel.MINOR)], CFG)
    in_batch = make_in_batch_negative(tokenize("a", 0), tokenize("b", 1))
    with pytest.raises(ValueError, match="no severity labels"):
        score_sample(in_batch, [label_of(SeverityLevel.MINOR)], CFG)


def test_score_ranges_disjoint_by_kind():
    rng = np.random.default_rng(43)
    for _ in range(300):
        n_ops = int(rng.integers(1, 6))
        sample = make_hard_negative(n_ops)
        labels = [
            label_of(SeverityLevel.MINOR if rng.random() < 0.5 else SeverityLevel.MAJOR)
            for _ in range(n_ops)
        ]
        score = score_sample(sample, labels, CFG)
        assert -25.0 <= score <= -1.0


def test_fingerprint_is_stable():
    assert op_fingerprint(0, REPLACE_OP) == "ae872a6be92ceb40"
    assert op_fingerprint(1, REPLACE_OP) == "96508a2c36760a35"
    unicode_op = Perturbation(OpKind.INSERT, 0, (), ("中文",))
    assert op_fingerprint(0, unicode_op) == "e493caa15c75ea99"


def test_fingerprint_ignores_origin():
    drop = Perturbation(OpKind.DELETE, 1, ("x",), (), origin=OpOrigin.RANDOM_DROP)
    script = Perturbation(OpKind.DELETE, 1, ("x",), (), origin=OpOrigin.EDIT_SCRIPT)
    assert op_fingerprint(4, drop) == op_fingerprint(4, script)


def oracle_file(tmp_path, lines):
    path = tmp_path / "oracle.jsonl"
    path.write_text("\n".join(json.dumps(line) for line in lines) + "\n", encoding="utf-8")
    return path


def test_oracle_provider_lookup(tmp_path):
    fp = op_fingerprint(0, REPLACE_OP)
    provider = OracleFileProvider(oracle_file(tmp_path, [{"fingerprint": fp, "probs": [0.25]}]))
    label = severity_insert_replace(provider, SOURCE, ANCHOR, REPLACE_OP, CFG, anchor_id=0)
    assert label.evidence == 0.25
    assert label.level is SeverityLevel.MINOR


def test_oracle_provider_duplicate_last_wins(tmp_path, caplog):
    fp = op_fingerprint(0, REPLACE_OP)
    with caplog.at_level("WARNING"):
        provider = OracleFileProvider(
            oracle_file(
                tmp_path,
                [{"fingerprint": fp, "probs": [0.9]}, {"fingerprint": fp, "probs": [0.05]}],
            )
        )
    assert "duplicate fingerprint" in caplog.text
    label = severity_insert_replace(provider, SOURCE, ANCHOR, REPLACE_OP, CFG, anchor_id=0)
    assert label.evidence == 0.05
    assert label.level is SeverityLevel.MAJOR


def test_oracle_provider_missing_entry_names_fingerprint(tmp_path):
    provider = OracleFileProvider(oracle_file(tmp_path, [{"fingerprint": "00", "probs": [0.5]}]))
    fp = op_fingerprint(0, REPLACE_OP)
    with pytest.raises(OracleLookupError, match=fp):
        severity_insert_replace(provider, SOURCE, ANCHOR, REPLACE_OP, CFG, anchor_id=0)


def test_stub_provider_span_length():
    stub = StubProvider(0.125)
    op = Perturbation(OpKind.INSERT, 0, (), ("a", "b", "c"))
    label = severity_insert_replace(stub, SOURCE, ANCHOR, op, CFG)
    assert label.evidence == 0.125


def test_severity_config_validation():
    with pytest.raises(ValueError):
        SeverityConfig(minor_prob_threshold=0.0)
    with pytest.raises(ValueError):
        SeverityConfig(delete_weight_threshold=0.0)
    with pytest.raises(ValueError):
        SeverityConfig(floor=-3.0)
