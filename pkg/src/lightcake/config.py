"""Run configuration and its flat ``key = value`` file format."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .aggregator import Variant
from .model import ModelKind
from .trainer import TrainConfig


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


_PARSERS = {
    "model": ModelKind.parse,
    "variant": Variant.parse,
    "learning_rate": float,
    "l2_coeff": float,
    "batch_size": int,
    "dim": int,
    "num_iterations": int,
    "max_epochs": int,
    "patience": int,
    "seed": int,
    "mask_target_edge": _parse_bool,
    "context_cap": _parse_optional_int,
    "cap_seed": int,
    "dataset_dir": str,
    "output_dir": str,
    "threads": _parse_optional_int,
}


def _format(value):
    if isinstance(value, (ModelKind, Variant)):
        return value.label
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    dataset_dir: str = ""
    output_dir: str = "runs"
    threads: int | None = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def items(self):
        yield "dataset_dir", self.dataset_dir
        yield "output_dir", self.output_dir
        yield "threads", self.threads
        for f in fields(TrainConfig):
            yield f.name, getattr(self.train, f.name)

    def dumps(self):
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.items())

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_mapping(cls, values):
        """Build from already-parsed values; unspecified keys keep their defaults."""
        unknown = set(values) - set(_PARSERS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        train_keys = set(TrainConfig.field_names())
        train = TrainConfig(**{k: v for k, v in values.items() if k in train_keys})
        top = {k: v for k, v in values.items() if k not in train_keys}
        return cls(train=train, **top)

    @classmethod
    def loads(cls, text):
        return cls.from_mapping(parse_pairs(text))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def parse_pairs(text):
    """Parse ``key = value`` lines (``#`` comments and blank lines ignored)."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        values[key] = _PARSERS[key](value)
    return values
