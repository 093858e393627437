"""Shared fixtures: small engineered corpora and the 1,000-anchor desk run."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from sevsynth.cli import main as cli_main
from sevsynth.corpus import tokenize
from sevsynth.edit_script import extract_edit_ops
from sevsynth.embed_index import load_embeddings, margin_score, write_embeddings

DESK_SEED = 20240809
DESK_PAIRS = 500
DESK_SENT_LEN = 12
DESK_REPLACED_POSITIONS = (0, 2, 4, 6, 8, 10)
DESK_DIM = 32
DESK_K = 4


def write_corpus(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _desk_pair(rng: np.random.Generator, vocab: list[str]) -> tuple[list[str], list[str]]:
    """An anchor sentence and a partner differing at six non-adjacent slots."""
    while True:
        a = [vocab[int(i)] for i in rng.integers(0, len(vocab), size=DESK_SENT_LEN)]
        b = list(a)
        for pos in DESK_REPLACED_POSITIONS:
            choices = [t for t in vocab if t != a[pos]]
            b[pos] = choices[int(rng.integers(len(choices)))]
        ops = extract_edit_ops(tokenize(" ".join(a), 0), tokenize(" ".join(b), 1)).ops
        if len(ops) >= 5:
            return a, b


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory) -> dict:
    """Paired desk corpus, embeddings where each pair passes the margin, config."""
    root = tmp_path_factory.mktemp("desk")
    rng = np.random.default_rng(DESK_SEED)
    vocab = [f"w{i:03d}" for i in range(60)]

    anchors: list[str] = []
    for _ in range(DESK_PAIRS):
        a, b = _desk_pair(rng, vocab)
        anchors.append(" ".join(a))
        anchors.append(" ".join(b))
    n = len(anchors)
    sources = [f"src{i}" for i in range(n)]

    bases = rng.normal(size=(DESK_PAIRS, DESK_DIM))
    bases /= np.linalg.norm(bases, axis=1)[:, None]
    vectors = np.empty((n, DESK_DIM))
    for p in range(DESK_PAIRS):
        for member in (0, 1):
            vectors[2 * p + member] = bases[p] + 0.01 * rng.normal(size=DESK_DIM)

    anchors_path = root / "anchors.txt"
    sources_path = root / "sources.txt"
    emb_path = root / "vectors.emb1"
    write_corpus(anchors_path, anchors)
    write_corpus(sources_path, sources)
    write_embeddings(emb_path, vectors)

    index = load_embeddings(emb_path)
    pair_margins = [margin_score(index, 2 * p, 2 * p + 1, DESK_K) for p in range(DESK_PAIRS)]
    assert min(pair_margins) >= 1.06, "desk fixture must qualify every engineered pair"

    config = {
        "anchor_corpus": str(anchors_path),
        "source_corpus": str(sources_path),
        "embeddings": str(emb_path),
        "k_neighbors": DESK_K,
        "margin_threshold": 1.06,
        "drop_count_max": 1,
        "negatives_per_anchor": 5,
        "in_batch_ratio": 0.1,
        "stub_probability": 0.5,
        "master_seed": DESK_SEED,
    }
    config_path = root / "config.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return {
        "root": root,
        "config_path": config_path,
        "config": config,
        "anchors": anchors,
        "n_anchors": n,
    }


@pytest.fixture(scope="session")
def desk_run(desk_corpus) -> dict:
    """One full emit-dataset run over the desk corpus (single worker)."""
    root = desk_corpus["root"]
    dataset = root / "dataset.jsonl"
    stats = root / "stats.json"
    started = time.perf_counter()
    code = cli_main(
        [
            "emit-dataset",
            "--config", str(desk_corpus["config_path"]),
            "--dataset", str(dataset),
            "--stats", str(stats),
        ]
    )
    elapsed = time.perf_counter() - started
    assert code == 0
    records = [json.loads(line) for line in dataset.read_text(encoding="utf-8").splitlines()]
    return {
        "dataset_path": dataset,
        "stats_path": stats,
        "records": records,
        "stats": json.loads(stats.read_text(encoding="utf-8")),
        "elapsed": elapsed,
        **desk_corpus,
    }


@pytest.fixture()
def twin_pairs_setup(tmp_path) -> dict:
    """Four-sentence corpus where each anchor's only qualified neighbor is its twin."""
    anchors = ["I like dogs", "I like cats", "We hate rain", "We hate snow"]
    sources = ["src0", "src1", "src2", "src3"]
    vectors = np.array(
        [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]],
        dtype=np.float64,
    )
    anchors_path = tmp_path / "anchors.txt"
    sources_path = tmp_path / "sources.txt"
    emb_path = tmp_path / "vectors.emb1"
    write_corpus(anchors_path, anchors)
    write_corpus(sources_path, sources)
    write_embeddings(emb_path, vectors)
    config = {
        "anchor_corpus": str(anchors_path),
        "source_corpus": str(sources_path),
        "embeddings": str(emb_path),
        "k_neighbors": 2,
        "margin_threshold": 1.06,
        "drop_count_max": 0,
        "negatives_per_anchor": 1,
        "in_batch_ratio": 0.0,
        "master_seed": 7,
    }
    return {"tmp_path": tmp_path, "config": config, "anchors": anchors}
