"""Binary checkpoint format.

Layout (all integers int64 little-endian, all floats float64 little-endian)::

    b"LCKE1"
    kind, dim, num_entities, num_relations_augmented,
    num_iterations, variant, context_cap (0 = none), cap_seed
    entity matrix (row-major), relation matrix (row-major)
    entity vocabulary:   count, then (byte length, UTF-8 bytes) per symbol
    relation vocabulary: same, original relations only
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .aggregator import AggregationConfig, Variant
from .model import EmbeddingTables, ModelKind

MAGIC = b"LCKE1"
_HEADER = struct.Struct("<8q")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: ModelKind
    tables: EmbeddingTables
    num_iterations: int
    variant: Variant
    entity_symbols: tuple
    relation_symbols: tuple
    context_cap: int | None = None
    cap_seed: int = 0

    @property
    def aggregation(self):
        return AggregationConfig(self.num_iterations, self.variant)


def _write_strings(fh, symbols):
    fh.write(struct.pack("<q", len(symbols)))
    for s in symbols:
        b = s.encode("utf-8")
        fh.write(struct.pack("<q", len(b)))
        fh.write(b)


def _read_exact(fh, n):
    b = fh.read(n)
    if len(b) != n:
        raise CheckpointError("truncated checkpoint")
    return b


def _read_strings(fh):
    (count,) = struct.unpack("<q", _read_exact(fh, 8))
    out = []
    for _ in range(count):
        (n,) = struct.unpack("<q", _read_exact(fh, 8))
        out.append(_read_exact(fh, n).decode("utf-8"))
    return tuple(out)


def dumps(ckpt):
    ent = np.ascontiguousarray(ckpt.tables.entity, dtype="<f8")
    rel = np.ascontiguousarray(ckpt.tables.relation, dtype="<f8")
    if ent.shape[1] != rel.shape[1]:
        raise CheckpointError("entity and relation tables differ in dimension")
    fh = io.BytesIO()
    fh.write(MAGIC)
    fh.write(_HEADER.pack(int(ckpt.kind), ent.shape[1], ent.shape[0], rel.shape[0],
                          ckpt.num_iterations, int(ckpt.variant), ckpt.context_cap or 0,
                          ckpt.cap_seed))
    fh.write(ent.tobytes())
    fh.write(rel.tobytes())
    _write_strings(fh, ckpt.entity_symbols)
    _write_strings(fh, ckpt.relation_symbols)
    return fh.getvalue()


def loads(data):
    fh = io.BytesIO(data)
    if fh.read(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a lightcake checkpoint (bad magic)")
    kind, dim, n_e, n_r, L, variant, cap, cap_seed = _HEADER.unpack(_read_exact(fh, _HEADER.size))
    ent = np.frombuffer(_read_exact(fh, 8 * n_e * dim), dtype="<f8").reshape(n_e, dim)
    rel = np.frombuffer(_read_exact(fh, 8 * n_r * dim), dtype="<f8").reshape(n_r, dim)
    ents = _read_strings(fh)
    rels = _read_strings(fh)
    if len(ents) != n_e or 2 * len(rels) != n_r:
        raise CheckpointError("vocabulary sizes disagree with table shapes")
    return Checkpoint(ModelKind(kind), EmbeddingTables(ent.astype(np.float64), rel.astype(np.float64)),
                      L, Variant(variant), ents, rels, cap or None, cap_seed)


def save_checkpoint(path, ckpt):
    with open(path, "wb") as fh:
        fh.write(dumps(ckpt))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def check_compatible(ckpt, dataset):
    """Raise if the checkpoint was trained on a different vocabulary."""
    problems = []
    if ckpt.tables.entity.shape[0] != dataset.num_entities:
        problems.append(f"{ckpt.tables.entity.shape[0]} entities in checkpoint vs "
                        f"{dataset.num_entities} in dataset")
    if ckpt.tables.relation.shape[0] != dataset.num_relations_augmented:
        problems.append(f"{ckpt.tables.relation.shape[0]} relations (with inverses) in checkpoint vs "
                        f"{dataset.num_relations_augmented} in dataset")
    if not problems:
        if ckpt.entity_symbols != dataset.entity_vocab.symbols:
            problems.append("entity vocabularies differ")
        if ckpt.relation_symbols != dataset.relation_vocab.symbols:
            problems.append("relation vocabularies differ")
    if problems:
        raise CheckpointError("checkpoint/dataset mismatch: " + "; ".join(problems))
