"""Sidecar HTTP service producing 384-dim title embeddings."""

from .encoder import CharNgramEncoder, load_encoder
from .finetune import finetune, load_pairs, pairwise_loss
from .service import BackgroundServer, ServiceConfig, create_app, serve

__version__ = "0.1.0"
