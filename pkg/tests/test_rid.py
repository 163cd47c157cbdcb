from __future__ import annotations

import numpy as np
import pytest

from bamkit.corpus import ArgumentClass, BudgetItem, MonetaryExpression, Source, Utterance
from bamkit.errors import (
    EmptyClass,
    EmptyInput,
    MalformedDocument,
    MissingEmbedding,
    MissingGoldLabel,
)
from bamkit.rid import (
    DEFAULT_NEGATIVES,
    DEFAULT_THRESHOLD,
    PAIR_CLASSES,
    RELATED,
    SEPARATOR,
    UNRELATED,
    CandidatePair,
    HashedVectorProvider,
    PairEmbeddingBackend,
    RidModel,
    TableVectorProvider,
    build_training_pairs,
    cosine,
    detect_relation,
    detect_relations,
    load_rid_model,
    make_pairs,
    save_rid_model,
    train_pair_classifier,
    train_rid,
)
from bamkit.segment import Proposition
from bamkit.textclf import (
    EmbeddingVector,
    FeaturizerConfig,
    HashedBackend,
    Hyperparams,
    LinearModel,
    hash_ngram,
)

FAST = Hyperparams(epochs=5)


def test_cosine_reference_values():
    assert cosine(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == 1.0
    assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert abs(cosine(np.array([1.0, 2.0]), np.array([2.0, 1.0])) - 0.8) <= 1e-12
    assert cosine(np.array([0.0, 0.0]), np.array([1.0, 1.0])) == 0.0
    assert cosine(np.array([1.0, 1.0]), np.array([0.0, 0.0])) == 0.0
    assert abs(cosine(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) + 1.0) <= 1e-12


def test_cosine_rejects_shape_mismatch():
    with pytest.raises(MalformedDocument):
        cosine(np.ones(2), np.ones(3))


def test_cosine_scale_invariance():
    rng = np.random.default_rng(8)
    for _ in range(50):
        u = rng.normal(size=6)
        v = rng.normal(size=6)
        a = float(rng.uniform(0.01, 100))
        b = float(rng.uniform(0.01, 100))
        assert abs(cosine(a * u, b * v) - cosine(u, v)) < 1e-9


def _budget(n=4):
    items = []
    for i in range(1, n + 1):
        items.append(
            BudgetItem(
                id=f"B{i}",
                title=f"事業{i}",
                item=f"施設整備費{i}",
                description=f"施設{i}の整備に関する事業です",
            )
        )
    return items


def test_make_pairs_one_per_item():
    prop = Proposition("e1", "施設整備費1に100円を充てます。", [(0, 16)])
    budget = _budget(4)
    cands = make_pairs(prop, budget)
    assert [c.budget_id for c in cands] == ["B1", "B2", "B3", "B4"]
    for c, b in zip(cands, budget):
        assert c.expr_id == "e1"
        assert c.proposition == prop.text
        assert c.item_text == b.item
        assert c.description == b.description
        assert c.related is None and c.related_prob is None and c.cosine is None
        assert c.pair_text == f"{prop.text}{SEPARATOR}{b.item}{SEPARATOR}{b.description}"
        assert c.budget_text == f"{b.item} {b.description}"
    with pytest.raises(EmptyInput):
        make_pairs(prop, [])


def _minutes(budget, relation="B2", gold=ArgumentClass.PREMISE_PAST):
    text = f"{budget[1].item}のため100円を支出しました。"
    start = text.index("100円")
    expr = MonetaryExpression(
        "e1",
        "100円",
        (start, start + 4),
        "d1",
        gold_class=gold,
        gold_relation_id=relation,
    )
    host = Utterance(Source.LOCAL_PROCEEDING, "諏訪市", "d1", text, [expr])
    return expr, host


def test_build_training_pairs_positive_and_negatives():
    budget = _budget(8)
    expr, host = _minutes(budget)
    cands = build_training_pairs([(expr, host)], budget, k_negatives=3, seed=62)
    assert len(cands) == 4
    positives = [c for c in cands if c.related]
    negatives = [c for c in cands if not c.related]
    assert len(positives) == 1 and positives[0].budget_id == "B2"
    assert len(negatives) == 3
    assert all(c.budget_id != "B2" for c in negatives)
    assert len({c.budget_id for c in negatives}) == 3


def test_build_training_pairs_is_seeded():
    budget = _budget(10)
    expr, host = _minutes(budget)
    a = build_training_pairs([(expr, host)], budget, k_negatives=4, seed=62)
    b = build_training_pairs([(expr, host)], budget, k_negatives=4, seed=62)
    assert [c.budget_id for c in a] == [c.budget_id for c in b]
    c = build_training_pairs([(expr, host)], budget, k_negatives=4, seed=63)
    assert len(c) == len(a)


def test_build_training_pairs_caps_negatives_at_pool():
    budget = _budget(3)
    expr, host = _minutes(budget)
    cands = build_training_pairs([(expr, host)], budget, k_negatives=99)
    assert len(cands) == 3  # 1 positive + the only 2 possible negatives


def test_build_training_pairs_skips_gated_and_unrelated():
    budget = _budget(4)
    e1, h1 = _minutes(budget)
    e2, h2 = _minutes(budget, relation="B1", gold=ArgumentClass.NON_MONETARY)
    e2.expr_id, h2.doc_id = "e2", "d2"
    e3, h3 = _minutes(budget, relation=None)
    e3.expr_id, h3.doc_id = "e3", "d3"
    cands = build_training_pairs([(e1, h1), (e2, h2), (e3, h3)], budget, k_negatives=1)
    assert {c.expr_id for c in cands} == {"e1"}
    with pytest.raises(MissingGoldLabel):
        build_training_pairs([(e3, h3)], budget)


def test_build_training_pairs_rejects_unknown_gold_id():
    budget = _budget(2)
    expr, host = _minutes(budget, relation="B999")
    with pytest.raises(MalformedDocument):
        build_training_pairs([(expr, host)], budget)


def test_zero_negatives_leaves_one_class():
    budget = _budget(4)
    expr, host = _minutes(budget)
    cands = build_training_pairs([(expr, host)], budget, k_negatives=0)
    assert all(c.related for c in cands)
    with pytest.raises(EmptyClass):
        train_pair_classifier(cands, HashedBackend(FeaturizerConfig(dim=256)), FAST)


def test_train_pair_classifier_requires_labels():
    with pytest.raises(EmptyInput):
        train_pair_classifier(
            [CandidatePair("e1", "B1", "p", "i", "d")], HashedBackend(), FAST
        )


def _pass_all_model(dim=256):
    """Pair model whose bias makes every candidate clear 0.5."""
    return LinearModel(
        classes=list(PAIR_CLASSES),
        weights=np.zeros((2, dim)),
        bias=np.array([-4.0, 4.0]),
    )


def _block_all_model(dim=256):
    return LinearModel(
        classes=list(PAIR_CLASSES),
        weights=np.zeros((2, dim)),
        bias=np.array([4.0, -4.0]),
    )


def _table_for(budget, expr_vec, item_vecs):
    table = {"e1": EmbeddingVector(id="e1", values=np.asarray(expr_vec, dtype=float))}
    for b, v in zip(budget, item_vecs):
        table[b.id] = EmbeddingVector(id=b.id, values=np.asarray(v, dtype=float))
    return table


def test_detect_relation_picks_best_cosine():
    budget = _budget(3)
    expr, host = _minutes(budget)
    table = _table_for(
        budget,
        [1.0, 0.0, 0.0],
        [[1.0, 1.0, 0.0], [1.0, 0.1, 0.0], [0.0, 1.0, 1.0]],
    )
    model = RidModel(
        pair_model=_pass_all_model(),
        backend=HashedBackend(FeaturizerConfig(dim=256)),
        provider=TableVectorProvider(table),
    )
    pred = detect_relation(model, expr, host, budget)
    assert pred.budget_id == "B2"
    assert pred.n_survivors == 3
    assert pred.cosine == pytest.approx(cosine(np.array([1.0, 0, 0]), np.array([1.0, 0.1, 0])))


def test_detect_relation_argmax_is_scale_invariant():
    budget = _budget(3)
    expr, host = _minutes(budget)
    base = [[1.0, 1.0, 0.0], [1.0, 0.1, 0.0], [0.0, 1.0, 1.0]]
    rng = np.random.default_rng(14)
    for _ in range(20):
        scales = rng.uniform(0.01, 50, size=4)
        table = _table_for(
            budget,
            scales[0] * np.array([1.0, 0.0, 0.0]),
            [s * np.array(v) for s, v in zip(scales[1:], base)],
        )
        model = RidModel(
            pair_model=_pass_all_model(),
            backend=HashedBackend(FeaturizerConfig(dim=256)),
            provider=TableVectorProvider(table),
        )
        assert detect_relation(model, expr, host, budget).budget_id == "B2"


def test_detect_relation_ties_break_to_smallest_id():
    budget = _budget(3)
    expr, host = _minutes(budget)
    same = [0.5, 0.5, 0.0]
    table = _table_for(budget, [1.0, 1.0, 0.0], [same, same, same])
    model = RidModel(
        pair_model=_pass_all_model(),
        backend=HashedBackend(FeaturizerConfig(dim=256)),
        provider=TableVectorProvider(table),
    )
    assert detect_relation(model, expr, host, budget).budget_id == "B1"


def test_detect_relation_none_when_no_survivor():
    budget = _budget(3)
    expr, host = _minutes(budget)
    # The table knows nothing; if any lookup happened this would raise.
    model = RidModel(
        pair_model=_block_all_model(),
        backend=HashedBackend(FeaturizerConfig(dim=256)),
        provider=TableVectorProvider({"unused": EmbeddingVector("unused", np.ones(2))}),
    )
    pred = detect_relation(model, expr, host, budget)
    assert pred.budget_id is None
    assert pred.related_prob is None and pred.cosine is None
    assert pred.n_survivors == 0


def test_detect_relation_looks_up_only_survivors():
    # Weights fire on a marker character unique to one item's text, so
    # exactly one candidate survives; the table holds vectors for that
    # candidate alone and must not be asked for the others.
    dim = 2**16
    budget = _budget(3)
    budget[2] = BudgetItem(
        id="B3", title="事業3", item="施設整備費3", description="特殊記号〒を含む事業です"
    )
    expr, host = _minutes(budget)
    W = np.zeros((2, dim))
    W[1, hash_ngram("〒", dim)] = 200.0
    model = RidModel(
        pair_model=LinearModel(
            classes=list(PAIR_CLASSES), weights=W, bias=np.array([0.0, -2.0])
        ),
        backend=HashedBackend(FeaturizerConfig(dim=dim)),
        provider=TableVectorProvider(
            {
                "e1": EmbeddingVector("e1", np.array([1.0, 2.0])),
                "B3": EmbeddingVector("B3", np.array([2.0, 1.0])),
            }
        ),
    )
    pred = detect_relation(model, expr, host, budget)
    assert pred.budget_id == "B3"
    assert pred.n_survivors == 1
    assert abs(pred.cosine - 0.8) <= 1e-12

    # Dropping the surviving item's vector from the table now fails.
    model.provider = TableVectorProvider(
        {"e1": EmbeddingVector("e1", np.array([1.0, 2.0]))}
    )
    with pytest.raises(MissingEmbedding):
        detect_relation(model, expr, host, budget)


def test_threshold_monotonicity_over_sweeps():
    budget = _budget(6)
    pairs = [_minutes(budget)]
    model = train_rid(
        pairs,
        budget,
        backend=HashedBackend(FeaturizerConfig(dim=2**12)),
        hyperparams=FAST,
        k_negatives=3,
    )
    expr, host = pairs[0]
    counts = []
    for t in np.linspace(0.0, 1.0, 21):
        model.threshold = float(t)
        counts.append(detect_relation(model, expr, host, budget).n_survivors)
    assert counts[0] == len(budget)  # threshold 0.0 keeps everything
    for a, b in zip(counts, counts[1:]):
        assert b <= a
    model.threshold = 1.1
    assert detect_relation(model, expr, host, budget).budget_id is None


def test_region_filter_restricts_candidates():
    budget = _budget(3)
    budget[0] = BudgetItem(
        id="B1", title="無関係な事業", item="別件費", description="別件です"
    )
    budget[1] = BudgetItem(
        id="B2", title="諏訪市の道路事業", item="道路整備費", description="市道の整備"
    )
    text = "道路整備費に100円を使います。"
    start = text.index("100円")
    expr = MonetaryExpression("e1", "100円", (start, start + 4), "d1")
    host = Utterance(Source.LOCAL_PROCEEDING, "諏訪市", "d1", text, [expr])
    # B1 would win on cosine if it stayed in the candidate list.
    table = _table_for(budget, [1.0, 0.0], [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    model = RidModel(
        pair_model=_pass_all_model(),
        backend=HashedBackend(FeaturizerConfig(dim=256)),
        provider=TableVectorProvider(table),
        region_filter=True,
    )
    assert detect_relation(model, expr, host, budget).budget_id == "B2"
    model.region_filter = False
    assert detect_relation(model, expr, host, budget).budget_id == "B1"
    # Unknown regions fall back to the full list instead of zero candidates.
    host_far = Utterance(Source.LOCAL_PROCEEDING, "未知市", "d2", text, [expr])
    model.region_filter = True
    assert detect_relation(model, expr, host_far, budget).budget_id == "B1"


def test_train_rid_end_to_end(small_bundle):
    budget = small_bundle.budget
    pairs = [
        (e, u)
        for u in small_bundle.train_utterances
        for e in u.expressions
        if e.gold_relation_id is not None
    ][:20]
    model = train_rid(
        pairs,
        budget,
        backend=HashedBackend(FeaturizerConfig(dim=2**12)),
        hyperparams=FAST,
        threshold=0.2,
    )
    assert model.pair_model.classes == list(PAIR_CLASSES)
    preds = detect_relations(model, pairs, budget)
    assert len(preds) == len(pairs)
    for p in preds:
        assert (p.budget_id is None) == (p.n_survivors == 0)


def test_rid_model_persistence_round_trip(tmp_path):
    budget = _budget(6)
    pairs = [_minutes(budget)]
    model = train_rid(
        pairs,
        budget,
        backend=HashedBackend(FeaturizerConfig(dim=2**12)),
        hyperparams=FAST,
        k_negatives=4,
        threshold=0.3,
    )
    path = tmp_path / "rid.json"
    save_rid_model(model, path)
    clone = load_rid_model(path)
    assert clone.threshold == 0.3
    assert clone.region_filter is False
    assert np.array_equal(clone.pair_model.weights, model.pair_model.weights)
    expr, host = pairs[0]
    assert (
        detect_relation(clone, expr, host, budget).budget_id
        == detect_relation(model, expr, host, budget).budget_id
    )
    path2 = tmp_path / "rid2.json"
    save_rid_model(clone, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_rid_persistence_with_table_provider(tmp_path):
    budget = _budget(3)
    expr, host = _minutes(budget)
    table = _table_for(budget, [1.0, 0.0], [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    model = RidModel(
        pair_model=_pass_all_model(),
        backend=HashedBackend(FeaturizerConfig(dim=256)),
        provider=TableVectorProvider(table),
    )
    path = tmp_path / "rid.json"
    save_rid_model(model, path)
    with pytest.raises(MalformedDocument):
        load_rid_model(path)
    clone = load_rid_model(path, embeddings=table)
    assert detect_relation(clone, expr, host, budget).budget_id == "B1"


def test_load_rid_model_rejects_wrong_schema(tmp_path):
    path = tmp_path / "rid.json"
    path.write_text('{"schema": "nope/1"}', encoding="utf-8")
    with pytest.raises(MalformedDocument):
        load_rid_model(path)


def test_pair_embedding_backend_concatenates():
    provider = TableVectorProvider(
        {
            "e1": EmbeddingVector("e1", np.array([1.0, 2.0])),
            "B1": EmbeddingVector("B1", np.array([3.0, 4.0])),
        }
    )
    backend = PairEmbeddingBackend(provider)
    cand = CandidatePair("e1", "B1", "prop", "item", "desc")
    vec = backend.pair_vector(cand)
    assert np.array_equal(vec.values, np.array([1.0, 2.0, 3.0, 4.0]))
    with pytest.raises(MissingEmbedding):
        backend.pair_vector(CandidatePair("e9", "B1", "p", "i", "d"))


def test_hashed_vector_provider_is_deterministic():
    provider = HashedVectorProvider(dim=512)
    a = provider.vector_for("k", "施設整備費の話")
    b = provider.vector_for("other-key", "施設整備費の話")
    assert np.array_equal(a, b)  # keyless: depends on text only
    assert a.shape == (512,)
    assert float(np.linalg.norm(a)) == pytest.approx(1.0)


def test_default_constants():
    assert DEFAULT_THRESHOLD == 0.5
    assert DEFAULT_NEGATIVES == 5
    assert SEPARATOR == "\t"
    assert PAIR_CLASSES == (UNRELATED, RELATED)
