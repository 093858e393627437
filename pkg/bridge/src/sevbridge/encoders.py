"""Sentence encoders behind the `embed` job.

Two families: `hash:<dim>` is a deterministic feature-hashing encoder that
needs no model weights (useful offline and in tests); `hf:<name>` runs a
Hugging Face encoder with mean pooling. Model identifiers are opaque
strings recorded in the output metadata.
"""

from __future__ import annotations

import numpy as np

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


class HashEncoder:
    """Feature-hashing sentence encoder.

    Each token and adjacent token bigram hashes to one coordinate and a
    sign; the full line hashes to one extra feature so no sentence maps to
    the zero vector. Unnormalized on purpose (consumers normalize).
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("hash encoder dimension must be >= 1")
        self.dim = dim

    def _features(self, line: str):
        tokens = line.split()
        yield "line\x00" + line
        for token in tokens:
            yield "tok\x00" + token
        for left, right in zip(tokens, tokens[1:]):
            yield "big\x00" + left + "\x00" + right

    def encode(self, lines: list[str], batch_size: int = 0) -> np.ndarray:
        out = np.zeros((len(lines), self.dim), dtype=np.float64)
        for row, line in enumerate(lines):
            for feature in self._features(line):
                h = _fnv1a64(feature.encode("utf-8"))
                coordinate = h % self.dim
                sign = 1.0 if (h >> 63) & 1 else -1.0
                out[row, coordinate] += sign
            if not out[row].any():
                out[row, _fnv1a64(line.encode("utf-8")) % self.dim] = 1.0
        return out


class HfEncoder:
    """Mean-pooled hidden states from a Hugging Face encoder."""

    def __init__(self, model_name: str):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(
                "hf:* encoders need the optional [models] dependencies (torch, transformers)"
            ) from exc
        self._torch = torch
        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval()

    def encode(self, lines: list[str], batch_size: int = 32) -> np.ndarray:
        torch = self._torch
        chunks = []
        with torch.no_grad():
            for start in range(0, len(lines), max(batch_size, 1)):
                batch = lines[start:start + max(batch_size, 1)]
                encoded = self.tokenizer(
                    batch, padding=True, truncation=True, max_length=256, return_tensors="pt"
                )
                hidden = self.model(**encoded).last_hidden_state
                mask = encoded["attention_mask"].unsqueeze(-1).to(hidden.dtype)
                pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1)
                chunks.append(pooled.cpu().numpy().astype(np.float64))
        return np.concatenate(chunks, axis=0)


def make_encoder(model: str):
    """Resolve a model identifier string to an encoder instance."""
    if model.startswith("hash:"):
        return HashEncoder(dim=int(model.split(":", 1)[1]))
    if model.startswith("hf:"):
        return HfEncoder(model.split(":", 1)[1])
    raise ValueError(f"unknown embed model identifier {model!r}; use hash:<dim> or hf:<name>")
