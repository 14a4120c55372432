"""Triple files, vocabularies and inverse-triple augmentation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

SPLITS = ("train", "valid", "test")


class TripleFormatError(ValueError):
    """A line in a triple file does not have exactly three TAB-separated fields."""

    def __init__(self, path, lineno, line):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}: line {lineno}: expected 3 TAB-separated fields, got {line!r}")


def load_split(path):
    """Read ``head<TAB>relation<TAB>tail`` lines into a list of string triples.

    Blank lines are skipped. Surrounding whitespace is stripped from every field.
    """
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\r\n").split("\t")
            if len(parts) != 3:
                raise TripleFormatError(path, lineno, line.rstrip("\r\n"))
            triples.append(tuple(p.strip() for p in parts))
    return triples


class Vocab:
    """Bidirectional string <-> dense index map, indices assigned in first-seen order."""

    def __init__(self, symbols=()):
        self._index = {}
        self._symbols = []
        for s in symbols:
            self.add(s)

    def add(self, symbol):
        idx = self._index.get(symbol)
        if idx is None:
            idx = len(self._symbols)
            self._index[symbol] = idx
            self._symbols.append(symbol)
        return idx

    def __len__(self):
        return len(self._symbols)

    def __getitem__(self, symbol):
        return self._index[symbol]

    def __contains__(self, symbol):
        return symbol in self._index

    def symbol(self, idx):
        return self._symbols[idx]

    @property
    def symbols(self):
        return tuple(self._symbols)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._symbols == other._symbols

    def __repr__(self):
        return f"Vocab(size={len(self)})"


def inverse_relation(rel, num_relations):
    """Map a relation id to its inverse; original ids live in ``[0, R)``, inverses in ``[R, 2R)``."""
    rel = np.asarray(rel) if not np.isscalar(rel) else rel
    return (rel + num_relations) % (2 * num_relations)


@dataclass(frozen=True)
class Dataset:
    entity_vocab: Vocab
    relation_vocab: Vocab
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    train_augmented: np.ndarray = field(repr=False)

    @property
    def num_entities(self):
        return len(self.entity_vocab)

    @property
    def num_relations(self):
        """Number of original relations (inverses excluded)."""
        return len(self.relation_vocab)

    @property
    def num_relations_augmented(self):
        return 2 * len(self.relation_vocab)

    def split(self, name):
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)

    def decode(self, triple):
        """Turn an encoded triple back into surface strings; inverse relations get a ``^-1`` suffix."""
        h, r, t = (int(x) for x in triple)
        nr = self.num_relations
        name = self.relation_vocab.symbol(r % nr)
        if r >= nr:
            name += "^-1"
        return self.entity_vocab.symbol(h), name, self.entity_vocab.symbol(t)


def _encode(raw, ents, rels):
    out = np.empty((len(raw), 3), dtype=np.int64)
    for i, (h, r, t) in enumerate(raw):
        out[i] = (ents[h], rels[r], ents[t])
    return out


def build_dataset(train, valid=(), test=()):
    """Encode raw string triples and append the inverse of every training triple.

    Vocabularies cover train, valid and test (in that order of first appearance).
    Duplicate triples are kept.
    """
    ents, rels = Vocab(), Vocab()
    for split in (train, valid, test):
        for h, r, t in split:
            ents.add(h)
            rels.add(r)
            ents.add(t)
    tr = _encode(train, ents, rels)
    inv = np.stack([tr[:, 2], tr[:, 1] + len(rels), tr[:, 0]], axis=1) if len(tr) else tr
    aug = np.concatenate([tr, inv], axis=0)
    for a in (tr, aug):
        a.setflags(write=False)
    va, te = _encode(valid, ents, rels), _encode(test, ents, rels)
    va.setflags(write=False)
    te.setflags(write=False)
    return Dataset(ents, rels, tr, va, te, aug)


def load_dataset(dataset_dir):
    """Load ``train.txt``, ``valid.txt`` and ``test.txt`` from a directory."""
    raw = {}
    for name in SPLITS:
        path = os.path.join(dataset_dir, f"{name}.txt")
        if not os.path.isfile(path):
            raise FileNotFoundError(f"missing split file: {path}")
        raw[name] = load_split(path)
    return build_dataset(raw["train"], raw["valid"], raw["test"])


@dataclass(frozen=True)
class DatasetStats:
    num_entities: int
    num_relations: int
    num_train: int
    num_valid: int
    num_test: int
    avg_entity_context: float
    avg_relation_context: float

    def as_dict(self):
        return dict(self.__dict__)

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=False)

    def format(self):
        rows = [
            ("#entity", f"{self.num_entities:,}"),
            ("#relation", f"{self.num_relations:,}"),
            ("#train", f"{self.num_train:,}"),
            ("#test", f"{self.num_test:,}"),
            ("#valid", f"{self.num_valid:,}"),
            ("avg |C_ent(h)|", f"{self.avg_entity_context:.1f}"),
            ("avg |C_rel(r)|", f"{self.avg_relation_context:.1f}"),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def compute_stats(dataset):
    n_aug = len(dataset.train_augmented)
    return DatasetStats(
        num_entities=dataset.num_entities,
        num_relations=dataset.num_relations,
        num_train=len(dataset.train),
        num_valid=len(dataset.valid),
        num_test=len(dataset.test),
        avg_entity_context=n_aug / dataset.num_entities if dataset.num_entities else 0.0,
        avg_relation_context=n_aug / dataset.num_relations_augmented if dataset.num_relations else 0.0,
    )
