"""Masked-span probability scorers behind the `mask-prob` job.

`unigram` estimates the recovery probability of each masked word as its
relative frequency in the anchor corpus (a context-free prior; offline
and deterministic). `hf:<name>` runs a Hugging Face masked LM on the
concatenated source and masked target; each masked word's probability is
the product of its subword probabilities.
"""

from __future__ import annotations

from collections import Counter


class UnigramScorer:
    def __init__(self, corpus_lines: list[str]):
        counts: Counter[str] = Counter()
        for line in corpus_lines:
            counts.update(line.split())
        self.counts = counts
        self.total = sum(counts.values())
        if self.total == 0:
            raise ValueError("unigram scorer needs a non-empty corpus")

    def score(self, source_text: str, target_tokens: list[str], mask_positions: list[int],
              span: list[str]) -> list[float]:
        return [self.counts.get(token, 0) / self.total for token in span]


class HfMaskScorer:
    """Fill-mask probabilities conditioned on source + masked target."""

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import AutoModelForMaskedLM, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(
                "hf:* scorers need the optional [models] dependencies (torch, transformers)"
            ) from exc
        self._torch = torch
        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForMaskedLM.from_pretrained(model_name)
        self.model.eval()
        if self.tokenizer.mask_token is None:
            raise ValueError(f"{model_name} has no mask token; not a masked LM")

    def score(self, source_text: str, target_tokens: list[str], mask_positions: list[int],
              span: list[str]) -> list[float]:
        torch = self._torch
        tokenizer = self.tokenizer
        # one model mask per subword of each masked word, words left to right
        subword_ids: list[list[int]] = [
            tokenizer(word, add_special_tokens=False)["input_ids"] or
            [tokenizer.unk_token_id] for word in span
        ]
        target_words = list(target_tokens)
        pieces: list[str] = []
        word_iter = iter(subword_ids)
        for position, word in enumerate(target_words):
            if position in mask_positions:
                pieces.append(" ".join([tokenizer.mask_token] * len(next(word_iter))))
            else:
                pieces.append(word)
        text = source_text + " " + tokenizer.sep_token + " " + " ".join(pieces) \
            if tokenizer.sep_token else source_text + " " + " ".join(pieces)
        encoded = tokenizer(text, return_tensors="pt", truncation=True, max_length=512)
        mask_id = tokenizer.mask_token_id
        positions = (encoded["input_ids"][0] == mask_id).nonzero(as_tuple=True)[0]
        flat_ids = [tid for ids in subword_ids for tid in ids]
        if len(positions) != len(flat_ids):
            raise ValueError(
                f"mask count mismatch: {len(positions)} masks for {len(flat_ids)} subwords"
            )
        with torch.no_grad():
            logits = self.model(**encoded).logits[0]
        probs = torch.softmax(logits[positions], dim=-1)
        flat = [float(probs[i, tid]) for i, tid in enumerate(flat_ids)]
        out: list[float] = []
        cursor = 0
        for ids in subword_ids:
            word_prob = 1.0
            for _ in ids:
                word_prob *= flat[cursor]
                cursor += 1
            out.append(word_prob)
        return out


def make_scorer(model: str, corpus_lines: list[str]):
    if model == "unigram":
        return UnigramScorer(corpus_lines)
    if model.startswith("hf:"):
        return HfMaskScorer(model.split(":", 1)[1])
    raise ValueError(f"unknown mask-prob model identifier {model!r}; use unigram or hf:<name>")
