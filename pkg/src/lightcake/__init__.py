"""Context-aware knowledge graph embedding with parameter-free attention aggregation."""

from .aggregator import (AggregationConfig, AggregationState, Aggregator, Variant, aggregate,
                         aggregate_step, attention_entity, attention_relation)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .context import ContextIndex, build_context_index, context_of_entity, context_of_relation
from .dataset import Dataset, DatasetStats, build_dataset, compute_stats, load_dataset, load_split
from .evaluator import MetricsReport, evaluate, rank_relation
from .model import (EmbeddingTables, ModelKind, encode_triple, init_embeddings, phi_ent, phi_rel,
                    psi, psi_distmult, psi_transe, reduce_score)
from .trainer import TrainConfig, adam_update, backward, batch_loss, fit, relation_logprobs

__version__ = "0.1.0"
