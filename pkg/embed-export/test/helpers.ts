import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function tempDir(prefix: string): string {
  return mkdtempSync(join(tmpdir(), prefix));
}

export interface CorpusFixture {
  path: string;
  budgetIds: string[];
  exprIds: string[];
  /** Output id to the text the exporter should encode for it. */
  texts: Record<string, string>;
  /** Expected output order when both kinds are exported. */
  orderedIds: string[];
  utteranceCount: number;
}

/** Interchange fixture with budget items and propositions interleaved,
 * so input-order emission is observable. */
export function writeCorpusFixture(dir: string): CorpusFixture {
  const records = [
    {
      kind: "budget_item",
      id: "B-0001",
      title: "令和3年度一般会計予算",
      url: "https://example.jp/yosan/B-0001",
      item: "道路維持補修費",
      budget_amount: "120000000",
      categories: ["土木費"],
      types_of_account: "一般会計",
      department: "建設部",
      last_year_budget: "110000000",
      description: "市道の舗装補修を行う",
      budget_difference: "10000000",
    },
    {
      kind: "budget_item",
      id: "B-0002",
      item: "観光振興費",
      description: "",
    },
    {
      kind: "utterance",
      source: "local",
      region: "諏訪市",
      doc_id: "train-local-01-u0001",
      text: "道路の維持補修に約1億2000万円を計上しております。",
      expressions: [
        {
          expr_id: "e-0001",
          surface: "約1億2000万円",
          span: [9, 17],
          gold_class: "PremiseFuture",
        },
      ],
    },
    {
      kind: "proposition",
      expr_id: "e-0001",
      text: "道路の維持補修に約1億2000万円を計上しております。",
      sentence_spans: [[0, 26]],
    },
    {
      kind: "proposition",
      expr_id: "e-0002",
      text: "観光振興には前年度2400万円を支出しました。",
      sentence_spans: [[0, 22]],
    },
    {
      kind: "budget_item",
      id: "B-0003",
      item: "小学校耐震化事業",
    },
    {
      kind: "utterance",
      source: "diet",
      region: "",
      doc_id: "train-diet-01-u0001",
      text: "防衛費は5兆円を超えています。",
      expressions: [],
    },
    {
      kind: "proposition",
      expr_id: "e-0003",
      text: "耐震化に3億円は必要だと考えます。",
      sentence_spans: [[0, 17]],
    },
    {
      kind: "proposition",
      expr_id: "e-0004",
      text: "防衛費は5兆円を超えています。",
      sentence_spans: [[0, 15]],
    },
  ];
  const path = join(dir, "corpus.jsonl");
  writeFileSync(
    path,
    records.map((rec) => JSON.stringify(rec)).join("\n") + "\n",
    "utf-8",
  );
  return {
    path,
    budgetIds: ["B-0001", "B-0002", "B-0003"],
    exprIds: ["e-0001", "e-0002", "e-0003", "e-0004"],
    texts: {
      "B-0001": "道路維持補修費 市道の舗装補修を行う",
      "B-0002": "観光振興費",
      "B-0003": "小学校耐震化事業",
      "e-0001": "道路の維持補修に約1億2000万円を計上しております。",
      "e-0002": "観光振興には前年度2400万円を支出しました。",
      "e-0003": "耐震化に3億円は必要だと考えます。",
      "e-0004": "防衛費は5兆円を超えています。",
    },
    orderedIds: ["B-0001", "B-0002", "e-0001", "e-0002", "B-0003", "e-0003", "e-0004"],
    utteranceCount: 2,
  };
}

export function writeLines(dir: string, name: string, lines: string[]): string {
  const path = join(dir, name);
  writeFileSync(path, lines.join("\n") + "\n", "utf-8");
  return path;
}
