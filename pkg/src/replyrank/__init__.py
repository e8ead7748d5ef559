"""Template-based reply recommendation for customer-service chat.

Pipeline: mine weakly-labeled question/answer pairs from transcripts,
train a dual LSTM encoder to score matches, cluster answer embeddings
into a curated template pool, and rank templates for incoming questions,
with ranking metrics, human relevance reports, an HTTP service and a CLI.
"""

__version__ = "0.1.0"

from .corpus import (
    DatasetSplit,
    QAPair,
    Transcript,
    Turn,
    build_dataset,
    extract_positive_pairs,
    normalize_text,
    sample_negatives,
)
from .model import DualEncoderModel, ModelConfig, Vocabulary, forward
from .synthetic import generate_synthetic_corpus
from .templates import TemplatePool, build_pool, curate
from .training import TrainConfig, dev_accuracy, train

__all__ = [
    "DatasetSplit",
    "DualEncoderModel",
    "ModelConfig",
    "QAPair",
    "TemplatePool",
    "TrainConfig",
    "Transcript",
    "Turn",
    "Vocabulary",
    "build_dataset",
    "build_pool",
    "curate",
    "dev_accuracy",
    "extract_positive_pairs",
    "forward",
    "generate_synthetic_corpus",
    "normalize_text",
    "sample_negatives",
    "train",
]
