"""Deterministic synthetic corpus generator.

The real meeting minutes and budget tables are not redistributable, so
this module fabricates a corpus with the same shape and the same
published statistics: 768 budget items; a training split of 29 local
proceedings (1573 utterances) plus 2 national-diet records (363
speeches) carrying exactly 1248 labeled monetary expressions with the
published class histogram (260/622/212/98/23/27/6); a test split of
760 + 123 utterances carrying 520 unlabeled expressions.

Design constraints the generator honors:

* text is NFKC-stable, so loader normalization never moves spans;
* premise/claim amount surfaces always carry a yen marker, most
  non-monetary surfaces carry none, so the default rule gate reaches
  high recall but stays imperfect (a few hard surfaces mention yen);
* all "Other"-class surfaces carry a yen marker, leaving them out of
  the default gate's reach on purpose;
* about 85% of premise/claim expressions link to a budget item whose
  name is spliced into the sentence, giving relation detection a
  lexical trail to follow.

Everything derives from one seed; the same (profile, seed) always
produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import (
    ALL_CLASSES,
    ArgumentClass,
    BudgetItem,
    MonetaryExpression,
    Source,
    Utterance,
)

DEFAULT_SEED = 7

_DOMAINS = [
    "道路整備", "子育て支援", "高齢者福祉", "観光振興", "防災対策", "学校給食",
    "図書館運営", "公園管理", "水道施設", "下水道整備", "農業振興", "漁港整備",
    "商店街活性化", "中小企業支援", "雇用対策", "健康診査", "予防接種", "ごみ処理",
    "リサイクル推進", "消防設備", "救急体制", "住宅改修支援", "空き家対策",
    "文化財保護", "スポーツ振興", "国際交流", "移住促進", "森林保全", "河川改修",
    "橋梁補修", "除雪対策", "街路灯整備", "自転車道整備", "バス路線維持",
    "地域医療確保", "障害者支援", "生活困窮者自立支援", "児童虐待防止", "学力向上",
    "教員研修", "情報システム更新", "庁舎管理", "税収確保", "広報活動", "議会運営",
    "選挙執行", "統計調査", "監査事務",
]
_SUFFIXES = [
    "事業費", "推進費", "整備費", "補助金", "交付金", "委託料", "運営費", "対策費",
    "促進費", "支援金", "改修費", "管理費", "負担金", "調査費", "研究費", "基金積立金",
]
_CATEGORIES = ["総務費", "民生費", "衛生費", "土木費", "教育費", "消防費", "農林水産業費", "商工費"]
_DEPARTMENTS = ["総務部", "福祉部", "健康部", "建設部", "教育委員会", "産業振興部", "環境部", "消防局"]

_REGIONS = [
    "小樽市", "福岡市", "水戸市", "札幌市", "仙台市", "横浜市", "川崎市", "新潟市",
    "金沢市", "長野市", "岐阜市", "静岡市", "名古屋市", "京都市", "大阪市", "神戸市",
    "奈良市", "岡山市", "広島市", "高松市", "松山市", "高知市", "北九州市", "熊本市",
    "大分市", "宮崎市", "鹿児島市", "那覇市", "盛岡市",
]
_DIET_REGION = "国会"

_GENERIC_TOPICS = ["全体の予算", "関連経費", "当該事業", "これらの施策", "一連の取組"]

_FILLERS = [
    "よろしくお願いいたします。",
    "次の議題に移ります。",
    "ただいまから質疑を行います。",
    "御答弁ありがとうございました。",
    "引き続き担当部局から説明いたします。",
    "この点は後ほど資料で補足いたします。",
    "議長、発言の許可をお願いいたします。",
]

# Count-noun surfaces with no yen marker and no digit-plus-counter hit:
# the default gate should catch all of these.
_NM_EASY_SURFACES = ["千人", "百名", "五十件", "三百戸", "七十名", "二百件", "四百世帯", "九十名"]
# Yen-marked but non-monetary usages: the gate passes these through and
# the learned models cannot label them, an accepted error source.
_NM_HARD_SURFACES = ["円安", "円高", "円相場"]
_OTHER_SURFACES = ["五百円玉", "百円均一", "一円玉", "五十円切手", "十円玉", "五円玉"]


@dataclass(frozen=True)
class Profile:
    name: str
    n_budget: int
    histogram: dict
    local_docs: int
    local_utterances: int
    diet_docs: int
    diet_utterances: int
    test_local_docs: int
    test_local_utterances: int
    test_diet_docs: int
    test_diet_utterances: int
    test_expressions: int
    relation_rate: float = 0.85


FULL = Profile(
    name="full",
    n_budget=768,
    histogram={
        ArgumentClass.PREMISE_PAST: 260,
        ArgumentClass.PREMISE_FUTURE: 622,
        ArgumentClass.PREMISE_OTHER: 212,
        ArgumentClass.CLAIM_OPINIONS: 98,
        ArgumentClass.CLAIM_OTHER: 23,
        ArgumentClass.NON_MONETARY: 27,
        ArgumentClass.OTHER: 6,
    },
    local_docs=29,
    local_utterances=1573,
    diet_docs=2,
    diet_utterances=363,
    test_local_docs=14,
    test_local_utterances=760,
    test_diet_docs=1,
    test_diet_utterances=123,
    test_expressions=520,
)

SMALL = Profile(
    name="small",
    n_budget=40,
    histogram={
        ArgumentClass.PREMISE_PAST: 24,
        ArgumentClass.PREMISE_FUTURE: 40,
        ArgumentClass.PREMISE_OTHER: 16,
        ArgumentClass.CLAIM_OPINIONS: 12,
        ArgumentClass.CLAIM_OTHER: 6,
        ArgumentClass.NON_MONETARY: 6,
        ArgumentClass.OTHER: 2,
    },
    local_docs=3,
    local_utterances=90,
    diet_docs=1,
    diet_utterances=30,
    test_local_docs=2,
    test_local_utterances=30,
    test_diet_docs=1,
    test_diet_utterances=10,
    test_expressions=40,
)

PROFILES = {"full": FULL, "small": SMALL}


@dataclass
class SynthBundle:
    budget: list[BudgetItem]
    train_utterances: list[Utterance]
    test_utterances: list[Utterance]
    # expr_id -> {"gold_class": short name, "gold_relation_id": id or None}
    test_answers: dict = field(default_factory=dict)


def _make_budget(n: int) -> list[BudgetItem]:
    items = []
    for i in range(n):
        domain = _DOMAINS[(i // len(_SUFFIXES)) % len(_DOMAINS)]
        suffix = _SUFFIXES[i % len(_SUFFIXES)]
        region = _REGIONS[i % len(_REGIONS)]
        amount = (i * 37) % 900 + 100
        items.append(
            BudgetItem(
                id=f"B{i + 1:04d}",
                title=f"令和6年度{region}一般会計予算",
                url=f"https://budget.example.jp/items/B{i + 1:04d}",
                item=f"{domain}{suffix}",
                budget_amount=f"{amount},000千円",
                categories=[region, _CATEGORIES[i % len(_CATEGORIES)]],
                types_of_account="特別会計" if i % 7 == 6 else "一般会計",
                department=_DEPARTMENTS[i % len(_DEPARTMENTS)],
                last_year_budget=f"{(amount * 9) // 10},000千円",
                description=f"{domain}を推進するため、{suffix}として関係機関と連携して実施する経費。",
                budget_difference=f"{amount // 10},000千円",
            )
        )
    return items


def _amount(rng: np.random.Generator) -> str:
    style = int(rng.integers(0, 4))
    if style == 0:
        return f"{int(rng.integers(1, 10))}億{int(rng.integers(1, 10))}千万円"
    if style == 1:
        return f"{int(rng.integers(100, 10000))}万円"
    if style == 2:
        return f"{int(rng.integers(2, 100))}億円"
    return f"{int(rng.integers(10, 1000))}万{int(rng.integers(1000, 10000))}円"


_PAST_TEMPLATES = [
    "昨年度は{topic}として{amount}を執行いたしました。",
    "前年度の{topic}には{amount}を支出し、事業を完了しております。",
    "一昨年の決算では{topic}に{amount}を充当した実績がございます。",
    "{topic}につきましては、昨年度{amount}の執行済みでございます。",
]
_FUTURE_TEMPLATES = [
    "今年度は{topic}として{amount}を計上しております。",
    "本予算案では{topic}に{amount}を盛り込んでおります。",
    "来年度の{topic}については{amount}を見込んでおります。",
    "{topic}として新たに{amount}を計上する予定でございます。",
]
_PREMISE_OTHER_TEMPLATES = [
    "{topic}の財源内訳は国庫支出金を含め{amount}でございます。",
    "資料のとおり{topic}の総額は{amount}となっております。",
    "{topic}に係る基金残高は現在{amount}でございます。",
]
_OPINION_TEMPLATES = [
    "{topic}には{amount}では不足しており、増額すべきと考えます。",
    "{topic}の{amount}について、その妥当性を伺いたいのですが、いかがでしょうか。",
    "{topic}に{amount}を投じるよりも他の施策を優先すべきではないでしょうか。",
    "{topic}の{amount}は思い切って削減すべきだと提案いたします。",
]
_CLAIM_OTHER_TEMPLATES = [
    "{topic}の{amount}については異論ございません。",
    "{topic}に{amount}を充てることは妥当であります。",
    "{topic}の{amount}は適切な水準だと受け止めております。",
]
_NM_EASY_TEMPLATES = [
    "本市の対象者は{surface}を超えた状況でございます。",
    "今回の説明会には{surface}の参加がありました。",
    "対象となる施設は{surface}に上っております。",
]
_NM_HARD_TEMPLATES = [
    "{surface}の影響で資材価格が上昇しております。",
    "{surface}が続けば調達コストへの影響は避けられません。",
]
_OTHER_TEMPLATES = [
    "記念事業として{surface}の展示を行った経緯がございます。",
    "{surface}に関する問い合わせが市民から寄せられております。",
]

_TEMPLATES = {
    ArgumentClass.PREMISE_PAST: _PAST_TEMPLATES,
    ArgumentClass.PREMISE_FUTURE: _FUTURE_TEMPLATES,
    ArgumentClass.PREMISE_OTHER: _PREMISE_OTHER_TEMPLATES,
    ArgumentClass.CLAIM_OPINIONS: _OPINION_TEMPLATES,
    ArgumentClass.CLAIM_OTHER: _CLAIM_OTHER_TEMPLATES,
}


@dataclass
class _Spec:
    cls: ArgumentClass
    sentence: str
    surface: str
    relation_id: str | None


def _hard_nm_count(n: int) -> int:
    return max(1, round(n * 0.11)) if n else 0


def _make_specs(profile: Profile, budget: list[BudgetItem], rng: np.random.Generator) -> list[_Spec]:
    specs: list[_Spec] = []
    for cls in ALL_CLASSES:
        n = profile.histogram.get(cls, 0)
        if cls in _TEMPLATES:
            templates = _TEMPLATES[cls]
            for _ in range(n):
                related = rng.random() < profile.relation_rate
                if related:
                    item = budget[int(rng.integers(0, len(budget)))]
                    topic, rel = item.item, item.id
                else:
                    topic = _GENERIC_TOPICS[int(rng.integers(0, len(_GENERIC_TOPICS)))]
                    rel = None
                amount = _amount(rng)
                tmpl = templates[int(rng.integers(0, len(templates)))]
                specs.append(
                    _Spec(cls, tmpl.format(topic=topic, amount=amount), amount, rel)
                )
        elif cls is ArgumentClass.NON_MONETARY:
            hard = _hard_nm_count(n)
            for i in range(n):
                if i < hard:
                    surface = _NM_HARD_SURFACES[i % len(_NM_HARD_SURFACES)]
                    tmpl = _NM_HARD_TEMPLATES[int(rng.integers(0, len(_NM_HARD_TEMPLATES)))]
                else:
                    surface = _NM_EASY_SURFACES[i % len(_NM_EASY_SURFACES)]
                    tmpl = _NM_EASY_TEMPLATES[int(rng.integers(0, len(_NM_EASY_TEMPLATES)))]
                specs.append(_Spec(cls, tmpl.format(surface=surface), surface, None))
        else:
            for i in range(n):
                surface = _OTHER_SURFACES[i % len(_OTHER_SURFACES)]
                tmpl = _OTHER_TEMPLATES[int(rng.integers(0, len(_OTHER_TEMPLATES)))]
                specs.append(_Spec(cls, tmpl.format(surface=surface), surface, None))
    perm = rng.permutation(len(specs))
    return [specs[int(i)] for i in perm]


def _doc_layout(profile: Profile, split: str) -> list[tuple[Source, str, str, int]]:
    """(source, region, doc prefix, n utterances) per document."""
    if split == "train":
        locals_, local_n = profile.local_docs, profile.local_utterances
        diets, diet_n = profile.diet_docs, profile.diet_utterances
    else:
        locals_, local_n = profile.test_local_docs, profile.test_local_utterances
        diets, diet_n = profile.test_diet_docs, profile.test_diet_utterances
    docs = []
    base, extra = divmod(local_n, locals_)
    for d in range(locals_):
        docs.append(
            (
                Source.LOCAL_PROCEEDING,
                _REGIONS[d % len(_REGIONS)],
                f"{split}-local-{d + 1:02d}",
                base + (1 if d < extra else 0),
            )
        )
    base, extra = divmod(diet_n, diets)
    for d in range(diets):
        docs.append(
            (
                Source.NATIONAL_DIET_SPEECH,
                _DIET_REGION,
                f"{split}-diet-{d + 1:02d}",
                base + (1 if d < extra else 0),
            )
        )
    return docs


def _build_split(
    profile: Profile,
    specs: list[_Spec],
    split: str,
    rng: np.random.Generator,
    labeled: bool,
) -> tuple[list[Utterance], dict]:
    layout = _doc_layout(profile, split)
    slots = [(prefix, u) for _, _, prefix, n in layout for u in range(n)]
    n_slots = len(slots)
    n_double = min(len(specs) // 12, n_slots)
    n_carrier = len(specs) - n_double
    if n_carrier > n_slots:
        raise ValueError(
            f"{split}: {len(specs)} expressions cannot fit {n_slots} utterances"
        )
    carrier_slots = sorted(
        int(i) for i in rng.choice(n_slots, size=n_carrier, replace=False)
    )
    doubles = set(
        carrier_slots[int(i)]
        for i in rng.choice(n_carrier, size=n_double, replace=False)
    )

    load_by_slot = {s: (2 if s in doubles else 1) for s in carrier_slots}
    utterances: list[Utterance] = []
    answers: dict = {}
    spec_pos = 0
    expr_no = 0
    slot_no = 0
    prefix_tag = "T" if split == "train" else "E"
    for source, region, prefix, n_utts in layout:
        for u in range(n_utts):
            doc_id = f"{prefix}-u{u + 1:04d}"
            parts: list[str] = []
            exprs: list[MonetaryExpression] = []
            if rng.random() < 0.5:
                parts.append(_FILLERS[int(rng.integers(0, len(_FILLERS)))])
            for _ in range(load_by_slot.get(slot_no, 0)):
                spec = specs[spec_pos]
                spec_pos += 1
                expr_no += 1
                offset = sum(len(p) for p in parts)
                start = offset + spec.sentence.index(spec.surface)
                expr_id = f"{prefix_tag}{expr_no:04d}"
                parts.append(spec.sentence)
                exprs.append(
                    MonetaryExpression(
                        expr_id=expr_id,
                        surface=spec.surface,
                        span=(start, start + len(spec.surface)),
                        doc_id=doc_id,
                        gold_class=spec.cls if labeled else None,
                        gold_relation_id=spec.relation_id if labeled else None,
                    )
                )
                if not labeled:
                    answers[expr_id] = {
                        "gold_class": spec.cls.value,
                        "gold_relation_id": spec.relation_id,
                    }
            if rng.random() < 0.5 or not parts:
                parts.append(_FILLERS[int(rng.integers(0, len(_FILLERS)))])
            utterances.append(
                Utterance(
                    source=source,
                    region=region,
                    doc_id=doc_id,
                    text="".join(parts),
                    expressions=exprs,
                )
            )
            slot_no += 1
    return utterances, answers


def _scaled_histogram(histogram: dict, total: int) -> dict:
    """Shrink a class histogram to ``total`` with largest-remainder rounding."""
    full_total = sum(histogram.values())
    classes = list(histogram)
    shares = [histogram[c] * total / full_total for c in classes]
    counts = [int(s) for s in shares]
    leftover = total - sum(counts)
    order = sorted(range(len(classes)), key=lambda i: (-(shares[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return dict(zip(classes, counts))


def generate(profile: Profile | str = FULL, seed: int = DEFAULT_SEED) -> SynthBundle:
    """Build the full in-memory corpus for one (profile, seed)."""
    if isinstance(profile, str):
        profile = PROFILES[profile]
    rng = np.random.default_rng(seed)
    budget = _make_budget(profile.n_budget)
    train_specs = _make_specs(profile, budget, rng)
    train_utts, _ = _build_split(profile, train_specs, "train", rng, labeled=True)

    test_profile_hist = _scaled_histogram(profile.histogram, profile.test_expressions)
    test_profile = Profile(
        name=profile.name,
        n_budget=profile.n_budget,
        histogram=test_profile_hist,
        local_docs=profile.local_docs,
        local_utterances=profile.local_utterances,
        diet_docs=profile.diet_docs,
        diet_utterances=profile.diet_utterances,
        test_local_docs=profile.test_local_docs,
        test_local_utterances=profile.test_local_utterances,
        test_diet_docs=profile.test_diet_docs,
        test_diet_utterances=profile.test_diet_utterances,
        test_expressions=profile.test_expressions,
        relation_rate=profile.relation_rate,
    )
    test_specs = _make_specs(test_profile, budget, rng)
    test_utts, answers = _build_split(test_profile, test_specs, "test", rng, labeled=False)
    return SynthBundle(
        budget=budget,
        train_utterances=train_utts,
        test_utterances=test_utts,
        test_answers=answers,
    )


def _budget_record(b: BudgetItem) -> dict:
    return {
        "id": b.id,
        "title": b.title,
        "url": b.url,
        "item": b.item,
        "budget_amount": b.budget_amount,
        "categories": b.categories,
        "types_of_account": b.types_of_account,
        "department": b.department,
        "last_year_budget": b.last_year_budget,
        "description": b.description,
        "budget_difference": b.budget_difference,
    }


def _utterance_record(u: Utterance, labeled: bool) -> dict:
    rec = {
        "source": u.source.value,
        "region": u.region,
        "doc_id": u.doc_id,
        "text": u.text,
        "expressions": [],
    }
    for e in u.expressions:
        erec = {"expr_id": e.expr_id, "surface": e.surface, "span": [e.span[0], e.span[1]]}
        if labeled:
            erec["gold_class"] = e.gold_class.value if e.gold_class else None
            erec["gold_relation_id"] = e.gold_relation_id
        rec["expressions"].append(erec)
    return rec


def write_corpus(
    out_dir: str | Path, profile: Profile | str = FULL, seed: int = DEFAULT_SEED
) -> dict[str, Path]:
    """Write budget.json, train.json, test.json, test_answers.json.

    Returns the path of each written file keyed by its role.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle = generate(profile, seed)
    paths = {
        "budget": out / "budget.json",
        "train": out / "train.json",
        "test": out / "test.json",
        "answers": out / "test_answers.json",
    }

    def _write(path: Path, doc) -> None:
        path.write_text(
            json.dumps(doc, ensure_ascii=False, indent=1, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    _write(paths["budget"], [_budget_record(b) for b in bundle.budget])
    _write(paths["train"], [_utterance_record(u, True) for u in bundle.train_utterances])
    _write(paths["test"], [_utterance_record(u, False) for u in bundle.test_utterances])
    _write(paths["answers"], bundle.test_answers)
    return paths
