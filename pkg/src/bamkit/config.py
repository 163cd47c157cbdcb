"""Pipeline configuration and the run manifest.

One flat dataclass carries every tunable so the CLI can expose each
field as a flag mechanically and a run can be replayed from its
manifest.  Seeds fan out from ``seed``: the level-1 model uses it
directly, the premise head adds 1, the claim head adds 2, balancing
adds 10, relation negative sampling adds 20, and fold assignment adds
30.  Manifests carry no timestamps, so replaying one writes
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .cascade import AcStrategy
from .errors import MalformedDocument
from .textclf import FeaturizerConfig, Hyperparams

MANIFEST_SCHEMA = "manifest/1"

STRATEGIES = tuple(s.value for s in AcStrategy)
BACKENDS = ("hashed", "embeddings")


@dataclass(frozen=True)
class PipelineConfig:
    strategy: str = "cascade"
    backend: str = "hashed"
    dim: int = 2**18
    ngram_sizes: tuple[int, ...] = (1, 2, 3)
    learning_rate: float = 0.1
    epochs: int = 30
    l2: float = 1e-4
    seed: int = 42
    batch_size: int = 32
    balance: bool = False
    context: int = 0
    threshold: float = 0.5
    k_negatives: int = 5
    region_filter: bool = False
    rerank_dim: int = 4096
    folds: int = 10

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise MalformedDocument(f"unknown strategy {self.strategy!r}")
        if self.backend not in BACKENDS:
            raise MalformedDocument(f"unknown backend {self.backend!r}")

    def hyperparams(self) -> Hyperparams:
        return Hyperparams(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2=self.l2,
            seed=self.seed,
            batch_size=self.batch_size,
        )

    def featurizer(self) -> FeaturizerConfig:
        return FeaturizerConfig(dim=self.dim, ngram_sizes=self.ngram_sizes)

    def ac_strategy(self) -> AcStrategy:
        return AcStrategy(self.strategy)

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["ngram_sizes"] = list(self.ngram_sizes)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> PipelineConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise MalformedDocument(f"unknown config keys: {sorted(unknown)}")
        if "ngram_sizes" in doc:
            doc = dict(doc, ngram_sizes=tuple(doc["ngram_sizes"]))
        return cls(**doc)


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """Expose every PipelineConfig field as ``--field-name``."""
    defaults = PipelineConfig()
    for f in dataclasses.fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        default = getattr(defaults, f.name)
        if f.type == "bool" or isinstance(default, bool):
            parser.add_argument(flag, action=argparse.BooleanOptionalAction, default=default)
        elif isinstance(default, tuple):
            parser.add_argument(flag, type=_int_tuple, default=default, metavar="N,N,...")
        elif f.name == "strategy":
            parser.add_argument(flag, choices=STRATEGIES, default=default)
        elif f.name == "backend":
            parser.add_argument(flag, choices=BACKENDS, default=default)
        else:
            parser.add_argument(flag, type=type(default), default=default)


def config_from_args(ns: argparse.Namespace) -> PipelineConfig:
    fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    picked = {k: v for k, v in vars(ns).items() if k in fields}
    if "ngram_sizes" in picked and picked["ngram_sizes"] is not None:
        picked["ngram_sizes"] = tuple(picked["ngram_sizes"])
    return PipelineConfig(**picked)


def write_manifest(path: str | Path, command: str, args: dict) -> None:
    """Record everything needed to replay one CLI run."""
    from . import __version__

    safe = {}
    for k, v in args.items():
        if isinstance(v, tuple):
            v = list(v)
        safe[k] = v
    doc = {
        "schema": MANIFEST_SCHEMA,
        "tool": "bamkit",
        "version": __version__,
        "command": command,
        "args": safe,
    }
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def load_manifest(path: str | Path) -> tuple[str, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{path}: invalid manifest JSON") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise MalformedDocument(
            f"{path}: expected schema {MANIFEST_SCHEMA!r}, got {doc.get('schema')!r}"
        )
    if "command" not in doc or "args" not in doc:
        raise MalformedDocument(f"{path}: manifest needs 'command' and 'args'")
    return doc["command"], doc["args"]
