/**
 * Embedding interchange file: line 1 is a JSON header {"dim": D,
 * "encoder": name}; each following line is {"id": str, "v": [D floats]}.
 * The reader applies the same checks as the pipeline's loader so a file
 * that passes here loads there.
 */

import { readFileSync, writeFileSync } from "node:fs";

import {
  DimensionMismatch,
  DuplicateId,
  EmptyInput,
  MalformedDocument,
} from "./errors.js";

export interface EmbeddingRow {
  id: string;
  values: Float64Array;
}

export interface EmbeddingFile {
  dim: number;
  encoder: string;
  table: Map<string, Float64Array>;
}

/** Serialize rows under a header; rejects anything the loader would. */
export function formatEmbeddingFile(
  rows: readonly EmbeddingRow[],
  encoder: string,
): string {
  if (rows.length === 0) {
    throw new EmptyInput("no vectors to write");
  }
  const dim = rows[0]!.values.length;
  const lines = [JSON.stringify({ dim, encoder })];
  const seen = new Set<string>();
  for (const row of rows) {
    if (row.values.length !== dim) {
      throw new DimensionMismatch(
        `vector ${JSON.stringify(row.id)} has dim ${row.values.length}, expected ${dim}`,
      );
    }
    if (seen.has(row.id)) {
      throw new DuplicateId(`duplicate embedding id ${JSON.stringify(row.id)}`);
    }
    seen.add(row.id);
    for (const x of row.values) {
      if (!Number.isFinite(x)) {
        throw new MalformedDocument(
          `vector ${JSON.stringify(row.id)} has a non-finite value`,
        );
      }
    }
    lines.push(JSON.stringify({ id: row.id, v: Array.from(row.values) }));
  }
  return lines.join("\n") + "\n";
}

export function writeEmbeddingFile(
  path: string,
  rows: readonly EmbeddingRow[],
  encoder: string,
): void {
  writeFileSync(path, formatEmbeddingFile(rows, encoder), "utf-8");
}

export function readEmbeddingFile(path: string): EmbeddingFile {
  const body = readFileSync(path, "utf-8");
  const lines = body.split("\n");
  const headerLine = lines.length > 0 ? lines[0]!.trim() : "";
  if (!headerLine) {
    throw new MalformedDocument(`${path}: missing header line`);
  }
  let header: unknown;
  try {
    header = JSON.parse(headerLine);
  } catch {
    throw new MalformedDocument(`${path}: invalid header JSON`);
  }
  if (typeof header !== "object" || header === null) {
    throw new MalformedDocument(`${path}: invalid header JSON`);
  }
  const dim = (header as Record<string, unknown>).dim;
  if (typeof dim !== "number" || !Number.isInteger(dim) || dim <= 0) {
    throw new MalformedDocument(`${path}: header dim must be a positive integer`);
  }
  const encoder = (header as Record<string, unknown>).encoder;
  const table = new Map<string, Float64Array>();
  for (let i = 1; i < lines.length; i++) {
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
    if (typeof rec !== "object" || rec === null) {
      throw new MalformedDocument(`${where}: row needs 'id' and 'v'`);
    }
    const obj = rec as Record<string, unknown>;
    if (!("id" in obj) || !("v" in obj)) {
      throw new MalformedDocument(`${where}: row needs 'id' and 'v'`);
    }
    const id = String(obj.id);
    if (table.has(id)) {
      throw new DuplicateId(`${where}: duplicate embedding id ${JSON.stringify(id)}`);
    }
    const v = obj.v;
    if (!Array.isArray(v)) {
      throw new MalformedDocument(`${where}: 'v' must be an array of numbers`);
    }
    if (v.length !== dim) {
      throw new DimensionMismatch(
        `${where}: row has ${v.length} values, header dim is ${dim}`,
      );
    }
    const values = new Float64Array(dim);
    for (let k = 0; k < v.length; k++) {
      const x = v[k];
      if (typeof x !== "number" || !Number.isFinite(x)) {
        throw new MalformedDocument(`${where}: non-finite value`);
      }
      values[k] = x;
    }
    table.set(id, values);
  }
  return { dim, encoder: typeof encoder === "string" ? encoder : "", table };
}
