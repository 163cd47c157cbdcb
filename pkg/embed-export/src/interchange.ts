/**
 * Reader for the corpus interchange file: one JSON object per line,
 * each tagged with a "kind" of budget_item, utterance, or proposition.
 * Only budget items and propositions are encodable targets; utterances
 * are validated and counted but never exported.
 */

import { readFileSync } from "node:fs";

import { MalformedDocument } from "./errors.js";

export interface PropositionRecord {
  kind: "proposition";
  exprId: string;
  text: string;
}

export interface BudgetItemRecord {
  kind: "budget_item";
  id: string;
  item: string;
  description: string;
}

export type EncodableRecord = PropositionRecord | BudgetItemRecord;

export interface CorpusFile {
  /** Budget items and propositions, in file order. */
  records: EncodableRecord[];
  utteranceCount: number;
}

function requireString(
  rec: Record<string, unknown>,
  key: string,
  where: string,
): string {
  const value = rec[key];
  if (typeof value !== "string") {
    throw new MalformedDocument(`${where}: ${String(rec.kind)} needs string ${JSON.stringify(key)}`);
  }
  return value;
}

function optionalString(rec: Record<string, unknown>, key: string, where: string): string {
  if (!(key in rec)) {
    return "";
  }
  return requireString(rec, key, where);
}

export function readCorpusInterchange(path: string): CorpusFile {
  const body = readFileSync(path, "utf-8");
  const records: EncodableRecord[] = [];
  let utteranceCount = 0;
  const lines = body.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (!line) {
      continue;
    }
    const where = `${path}:${i + 1}`;
    let rec: unknown;
    try {
      rec = JSON.parse(line);
    } catch {
      throw new MalformedDocument(`${where}: invalid JSON`);
    }
    if (typeof rec !== "object" || rec === null || Array.isArray(rec)) {
      throw new MalformedDocument(`${where}: record must be a JSON object`);
    }
    const obj = rec as Record<string, unknown>;
    const kind = obj.kind;
    if (kind === "budget_item") {
      records.push({
        kind: "budget_item",
        id: requireString(obj, "id", where),
        item: optionalString(obj, "item", where),
        description: optionalString(obj, "description", where),
      });
    } else if (kind === "utterance") {
      utteranceCount += 1;
    } else if (kind === "proposition") {
      records.push({
        kind: "proposition",
        exprId: requireString(obj, "expr_id", where),
        text: requireString(obj, "text", where),
      });
    } else {
      throw new MalformedDocument(`${where}: unknown record kind ${JSON.stringify(kind)}`);
    }
  }
  return { records, utteranceCount };
}

/** Text encoded for a record: propositions as-is, budget items as the
 * item and description joined by one space, so an empty description
 * leaves the item text alone. Mirrors the pipeline's pairing rule. */
export function textFor(record: EncodableRecord): string {
  if (record.kind === "proposition") {
    return record.text;
  }
  return `${record.item} ${record.description}`.trim();
}

/** Output id for a record: expr_id for propositions, id for budget items. */
export function idFor(record: EncodableRecord): string {
  return record.kind === "proposition" ? record.exprId : record.id;
}
