"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error (bad input files or
labels), 3 internal error.  Failures print one JSON object to stderr:
``{"error": {"type": ..., "message": ...}}``.

File-producing subcommands write a ``<out>.manifest.json`` next to
their output; ``bamkit --from-manifest PATH`` replays the recorded run
and reproduces the output byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .cascade import classify, load_ac_model, save_ac_model, train_ac
from .config import (
    PipelineConfig,
    add_config_flags,
    config_from_args,
    load_manifest,
    write_manifest,
)
from .corpus import (
    ALL_CLASSES,
    BudgetItem,
    MonetaryExpression,
    Utterance,
    dump_interchange,
    load_budget,
    load_minutes,
    parse_class,
)
from .errors import (
    BamkitError,
    DataError,
    DuplicateId,
    MalformedDocument,
    MissingGoldLabel,
)
from .evalkit import cross_validate, evaluate_ac, task_score
from .gate import Gate, gate_stats
from .rid import (
    HashedVectorProvider,
    PairEmbeddingBackend,
    TableVectorProvider,
    detect_relation,
    load_rid_model,
    save_rid_model,
    train_rid,
)
from .segment import segment
from .synthdata import PROFILES, write_corpus
from .textclf import EmbeddingTableBackend, HashedBackend, load_embeddings


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits with code 2
        raise UsageError(message)


def _emit_error(kind: str, exc: Exception) -> None:
    doc = {"error": {"type": kind, "message": str(exc)}}
    print(json.dumps(doc, ensure_ascii=False, sort_keys=True), file=sys.stderr)


def _print(doc: dict) -> None:
    print(json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2))


Pair = tuple[MonetaryExpression, Utterance]


def _load_minutes_many(paths: list[str]) -> list[Utterance]:
    utterances: list[Utterance] = []
    seen_docs: set[str] = set()
    seen_exprs: set[str] = set()
    for path in paths:
        utts, exprs = load_minutes(path)
        for u in utts:
            if u.doc_id in seen_docs:
                raise DuplicateId(f"doc_id {u.doc_id!r} appears in more than one file")
            seen_docs.add(u.doc_id)
        for e in exprs:
            if e.expr_id in seen_exprs:
                raise DuplicateId(f"expr_id {e.expr_id!r} appears in more than one file")
            seen_exprs.add(e.expr_id)
        utterances.extend(utts)
    return utterances


def _pairs(utterances: list[Utterance]) -> list[Pair]:
    return [(e, u) for u in utterances for e in u.expressions]


def _labeled(pairs: list[Pair]) -> list[Pair]:
    labeled = [(e, u) for e, u in pairs if e.is_labeled]
    if not labeled:
        raise MissingGoldLabel("no labeled expressions in the given minutes")
    return labeled


def _load_embedding_files(paths: list[str] | None) -> dict | None:
    if not paths:
        return None
    merged: dict = {}
    for path in paths:
        table = load_embeddings(path)
        for key, vec in table.items():
            if key in merged:
                raise DuplicateId(f"embedding id {key!r} appears in more than one file")
            merged[key] = vec
    return merged


def _gate_for(ns: argparse.Namespace, cfg: PipelineConfig) -> Gate | None:
    if cfg.strategy == "flat7":
        return None
    if getattr(ns, "rules", None):
        return Gate.from_file(ns.rules)
    return Gate.default()


def _manifest_args(ns: argparse.Namespace) -> dict:
    skip = {"func", "from_manifest"}
    return {k: v for k, v in vars(ns).items() if k not in skip}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_make_data(ns: argparse.Namespace) -> int:
    if ns.profile not in PROFILES:
        raise UsageError(f"unknown profile {ns.profile!r}; choose from {sorted(PROFILES)}")
    paths = write_corpus(ns.out, ns.profile, ns.seed)
    write_manifest(Path(ns.out) / "make-data.manifest.json", "make-data", _manifest_args(ns))
    _print({"written": {k: str(p) for k, p in paths.items()}})
    return 0


def cmd_validate(ns: argparse.Namespace) -> int:
    budget = load_budget(ns.budget) if ns.budget else None
    utterances = _load_minutes_many(ns.minutes)
    pairs = _pairs(utterances)
    labeled = [(e, u) for e, u in pairs if e.is_labeled]
    histogram = {cls.value: 0 for cls in ALL_CLASSES}
    related = 0
    for e, _ in labeled:
        histogram[e.gold_class.value] += 1
        if e.gold_relation_id is not None:
            related += 1
            if budget is not None and e.gold_relation_id not in {b.id for b in budget}:
                raise MalformedDocument(
                    f"expression {e.expr_id}: gold relation {e.gold_relation_id!r} "
                    "is not a budget id"
                )
    doc = {
        "budget_items": len(budget) if budget is not None else None,
        "utterances": len(utterances),
        "expressions": len(pairs),
        "labeled": len(labeled),
        "with_gold_relation": related,
        "histogram": histogram if labeled else None,
    }
    _print(doc)
    return 0


def cmd_gate_stats(ns: argparse.Namespace) -> int:
    gate = Gate.from_file(ns.rules) if ns.rules else Gate.default()
    utterances = _load_minutes_many(ns.minutes)
    labeled = _labeled(_pairs(utterances))
    report = gate_stats(labeled, gate)
    per_class = {}
    for cls, s in report.per_class.items():
        per_class[cls.value] = {
            "tp": s.tp,
            "fp": s.fp,
            "fn": s.fn,
            "precision": s.precision,
            "recall": s.recall,
        }
    _print(
        {
            "n": len(labeled),
            "n_gated": report.n_gated,
            "n_passed": report.n_passed,
            "per_class": per_class,
        }
    )
    return 0


def cmd_train_ac(ns: argparse.Namespace) -> int:
    cfg = config_from_args(ns)
    embeddings = _load_embedding_files(ns.embeddings)
    utterances = _load_minutes_many(ns.minutes)
    labeled = _labeled(_pairs(utterances))
    if cfg.backend == "embeddings":
        if embeddings is None:
            raise UsageError("--backend embeddings needs --embeddings FILE")
        backend = EmbeddingTableBackend(embeddings)
    else:
        backend = HashedBackend(cfg.featurizer())
    model = train_ac(
        labeled,
        cfg.ac_strategy(),
        gate=_gate_for(ns, cfg),
        backend=backend,
        hyperparams=cfg.hyperparams(),
        balance=cfg.balance,
        context=cfg.context,
    )
    save_ac_model(model, ns.out)
    write_manifest(str(ns.out) + ".manifest.json", "train-ac", _manifest_args(ns))
    losses = {
        name: getattr(model, name).final_loss
        for name in ("flat", "level1", "premise", "claim")
        if getattr(model, name) is not None
    }
    _print({"model": str(ns.out), "strategy": cfg.strategy, "final_loss": losses})
    return 0


def cmd_train_rid(ns: argparse.Namespace) -> int:
    cfg = config_from_args(ns)
    embeddings = _load_embedding_files(ns.embeddings)
    budget = load_budget(ns.budget)
    utterances = _load_minutes_many(ns.minutes)
    labeled = _labeled(_pairs(utterances))
    if cfg.backend == "embeddings":
        if embeddings is None:
            raise UsageError("--backend embeddings needs --embeddings FILE")
        provider = TableVectorProvider(embeddings)
        backend = PairEmbeddingBackend(provider)
    else:
        backend = HashedBackend(cfg.featurizer())
        provider = (
            TableVectorProvider(embeddings)
            if embeddings is not None
            else HashedVectorProvider(cfg.rerank_dim)
        )
    model = train_rid(
        labeled,
        budget,
        backend=backend,
        provider=provider,
        hyperparams=cfg.hyperparams(),
        k_negatives=cfg.k_negatives,
        threshold=cfg.threshold,
        region_filter=cfg.region_filter,
        context=cfg.context,
    )
    save_rid_model(model, ns.out)
    write_manifest(str(ns.out) + ".manifest.json", "train-rid", _manifest_args(ns))
    _print(
        {
            "model": str(ns.out),
            "final_loss": model.pair_model.final_loss,
            "threshold": model.threshold,
        }
    )
    return 0


def cmd_predict(ns: argparse.Namespace) -> int:
    embeddings = _load_embedding_files(ns.embeddings)
    utterances = _load_minutes_many(ns.minutes)
    pairs = _pairs(utterances)
    if not pairs:
        raise MissingGoldLabel("no expressions to predict")
    ac_model = load_ac_model(ns.ac_model, embeddings=embeddings)
    rid_model = None
    budget: list[BudgetItem] = []
    if ns.rid_model:
        if not ns.budget:
            raise UsageError("--rid-model needs --budget")
        rid_model = load_rid_model(ns.rid_model, embeddings=embeddings)
        budget = load_budget(ns.budget)
    records = []
    for expr, host in pairs:
        rec = {
            "expr_id": expr.expr_id,
            "predicted_class": classify(ac_model, expr, host).label.value,
        }
        if rid_model is not None:
            rec["predicted_relation_id"] = detect_relation(
                rid_model, expr, host, budget, context=ns.context
            ).budget_id
        records.append(rec)
    records.sort(key=lambda r: r["expr_id"])
    with open(ns.out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
    write_manifest(str(ns.out) + ".manifest.json", "predict", _manifest_args(ns))
    _print({"predictions": str(ns.out), "n": len(records)})
    return 0


def _load_predictions(path: str) -> list[dict]:
    """Read prediction records: one JSON object per line."""
    records = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"{path}:{lineno}: invalid JSON") from exc
            if not isinstance(rec, dict) or "expr_id" not in rec or "predicted_class" not in rec:
                raise MalformedDocument(
                    f"{path}:{lineno}: record needs 'expr_id' and 'predicted_class'"
                )
            if rec["expr_id"] in seen:
                raise DuplicateId(f"{path}:{lineno}: duplicate expr_id {rec['expr_id']!r}")
            seen.add(rec["expr_id"])
            records.append(rec)
    if not records:
        raise MalformedDocument(f"{path}: no prediction records")
    return records


def _gold_maps(ns: argparse.Namespace) -> tuple[dict, dict]:
    """Gold labels from labeled minutes or from an answers file."""
    gold_ac: dict = {}
    gold_rid: dict = {}
    if ns.answers:
        try:
            doc = json.loads(Path(ns.answers).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"{ns.answers}: invalid answers JSON") from exc
        if not isinstance(doc, dict):
            raise MalformedDocument(f"{ns.answers}: answers must be an object")
        for expr_id, rec in doc.items():
            if not isinstance(rec, dict) or "gold_class" not in rec:
                raise MalformedDocument(f"{ns.answers}: bad record for {expr_id!r}")
            gold_ac[expr_id] = parse_class(rec["gold_class"])
            gold_rid[expr_id] = rec.get("gold_relation_id")
        return gold_ac, gold_rid
    utterances = _load_minutes_many(ns.minutes)
    for expr, _ in _labeled(_pairs(utterances)):
        gold_ac[expr.expr_id] = expr.gold_class
        gold_rid[expr.expr_id] = expr.gold_relation_id
    return gold_ac, gold_rid


def cmd_evaluate(ns: argparse.Namespace) -> int:
    if not ns.answers and not ns.minutes:
        raise UsageError("evaluate needs --minutes (labeled) or --answers")
    gold_ac, gold_rid = _gold_maps(ns)
    records = _load_predictions(ns.pred)
    pred_ac = {}
    pred_rid = {}
    has_rid = all("predicted_relation_id" in rec for rec in records)
    for rec in records:
        pred_ac[rec["expr_id"]] = parse_class(rec["predicted_class"])
        if has_rid:
            pred_rid[rec["expr_id"]] = rec["predicted_relation_id"]
    report = evaluate_ac(gold_ac, pred_ac)
    doc = {
        "n": report.n,
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "per_class": {
            cls.value: {
                "precision": s.precision,
                "recall": s.recall,
                "f1": s.f1,
                "support": s.support,
            }
            for cls, s in report.per_class.items()
        },
    }
    if has_rid:
        score = task_score(gold_ac, pred_ac, gold_rid, pred_rid)
        doc["task"] = {
            "ac": score.ac,
            "rid": score.rid,
            "combined": score.combined,
        }
    _print(doc)
    return 0


def cmd_cv(ns: argparse.Namespace) -> int:
    cfg = config_from_args(ns)
    if cfg.backend == "embeddings":
        embeddings = _load_embedding_files(ns.embeddings)
        if embeddings is None:
            raise UsageError("--backend embeddings needs --embeddings FILE")
        backend = EmbeddingTableBackend(embeddings)
    else:
        backend = HashedBackend(cfg.featurizer())
    utterances = _load_minutes_many(ns.minutes)
    labeled = _labeled(_pairs(utterances))
    result = cross_validate(
        labeled,
        cfg.ac_strategy(),
        n_folds=cfg.folds,
        gate=_gate_for(ns, cfg),
        backend=backend,
        hyperparams=cfg.hyperparams(),
        balance=cfg.balance,
        context=cfg.context,
    )
    _print(
        {
            "strategy": cfg.strategy,
            "n_folds": result.n_folds,
            "folds": [
                {"accuracy": r.accuracy, "macro_f1": r.macro_f1} for r in result.reports
            ],
            "mean_accuracy": result.mean_accuracy,
            "std_accuracy": result.std_accuracy,
            "mean_macro_f1": result.mean_macro_f1,
            "std_macro_f1": result.std_macro_f1,
        }
    )
    return 0


def cmd_export_corpus(ns: argparse.Namespace) -> int:
    budget = load_budget(ns.budget) if ns.budget else []
    utterances = _load_minutes_many(ns.minutes) if ns.minutes else []
    if not budget and not utterances:
        raise UsageError("export-corpus needs --budget and/or --minutes")
    propositions = [
        segment(expr, host, ns.context) for host in utterances for expr in host.expressions
    ]
    dump_interchange(ns.out, budget, utterances, propositions)
    write_manifest(str(ns.out) + ".manifest.json", "export-corpus", _manifest_args(ns))
    _print(
        {
            "out": str(ns.out),
            "budget_items": len(budget),
            "utterances": len(utterances),
            "propositions": len(propositions),
        }
    )
    return 0


_COMMANDS = {
    "make-data": cmd_make_data,
    "validate": cmd_validate,
    "gate-stats": cmd_gate_stats,
    "train-ac": cmd_train_ac,
    "train-rid": cmd_train_rid,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "cv": cmd_cv,
    "export-corpus": cmd_export_corpus,
}


def build_parser() -> _Parser:
    from . import __version__

    parser = _Parser(prog="bamkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bamkit {__version__}")
    parser.add_argument(
        "--from-manifest",
        metavar="PATH",
        help="replay a recorded run instead of giving a subcommand",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("make-data", help="write a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--profile", default="full", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("validate", help="check corpus files and print counts")
    p.add_argument("--budget")
    p.add_argument("--minutes", nargs="+", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("gate-stats", help="rule-gate precision/recall on labeled data")
    p.add_argument("--minutes", nargs="+", required=True)
    p.add_argument("--rules", help="gate rules JSON (default: built-in rules)")
    p.set_defaults(func=cmd_gate_stats)

    p = sub.add_parser("train-ac", help="train an argument-class model")
    p.add_argument("--minutes", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rules")
    p.add_argument("--embeddings", nargs="*")
    add_config_flags(p)
    p.set_defaults(func=cmd_train_ac)

    p = sub.add_parser("train-rid", help="train the relation model")
    p.add_argument("--minutes", nargs="+", required=True)
    p.add_argument("--budget", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--embeddings", nargs="*")
    add_config_flags(p)
    p.set_defaults(func=cmd_train_rid)

    p = sub.add_parser("predict", help="label expressions with saved models")
    p.add_argument("--minutes", nargs="+", required=True)
    p.add_argument("--ac-model", required=True)
    p.add_argument("--rid-model")
    p.add_argument("--budget")
    p.add_argument("--embeddings", nargs="*")
    p.add_argument("--context", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a predictions file against gold")
    p.add_argument("--minutes", nargs="*", help="labeled minutes as gold")
    p.add_argument("--answers", help="answers JSON as gold")
    p.add_argument("--pred", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cv", help="stratified cross-validation of a strategy")
    p.add_argument("--minutes", nargs="+", required=True)
    p.add_argument("--rules")
    p.add_argument("--embeddings", nargs="*")
    add_config_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("export-corpus", help="write the line-JSON interchange file")
    p.add_argument("--budget")
    p.add_argument("--minutes", nargs="*")
    p.add_argument("--out", required=True)
    p.add_argument("--context", type=int, default=0)
    p.set_defaults(func=cmd_export_corpus)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.from_manifest:
            if getattr(ns, "command", None):
                raise UsageError("--from-manifest replaces the subcommand")
            command, args = load_manifest(ns.from_manifest)
            if command not in _COMMANDS:
                raise MalformedDocument(f"manifest names unknown command {command!r}")
            return _COMMANDS[command](argparse.Namespace(**args))
        if not getattr(ns, "command", None):
            raise UsageError("a subcommand is required (or --from-manifest PATH)")
        return ns.func(ns)
    except UsageError as exc:
        _emit_error("usage", exc)
        return 1
    except DataError as exc:
        _emit_error(type(exc).__name__, exc)
        return 2
    except BamkitError as exc:
        _emit_error(type(exc).__name__, exc)
        return 3
    except Exception as exc:  # pragma: no cover - safety net
        _emit_error(type(exc).__name__, exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
