"""Encoder bridge: embeddings and masked-span probabilities as files."""

from .emb1 import emb1_size, write_emb1
from .encoders import HashEncoder, make_encoder
from .jobs import BridgeError, BridgeJob, export_embeddings, export_mask_probs
from .maskprob import UnigramScorer, make_scorer

__version__ = "0.1.0"
