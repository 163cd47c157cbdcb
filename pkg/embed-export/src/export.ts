/**
 * The export job: read a corpus interchange file, encode every record
 * of the requested kinds with a named encoder, and write one embedding
 * interchange file. Deterministic given the encoder name and inputs;
 * rows come out in input order, each id exactly once.
 */

import { resolveEncoder } from "./encoders.js";
import {
  DimensionMismatch,
  DuplicateId,
  EmptyInput,
  UsageError,
} from "./errors.js";
import { writeEmbeddingFile, type EmbeddingRow } from "./embeddings.js";
import {
  idFor,
  readCorpusInterchange,
  textFor,
  type EncodableRecord,
} from "./interchange.js";

export const EXPORT_TARGETS = ["propositions", "budget_items"] as const;

export type ExportTarget = (typeof EXPORT_TARGETS)[number];

export interface ExportJob {
  /** Corpus interchange file to read. */
  input: string;
  /** Embedding interchange file to write. */
  output: string;
  /** Which record kinds to encode; must name at least one. */
  targets: readonly string[];
  /** Encoder name; required, there is no default. */
  encoderName: string;
  /** Texts encoded per encoder call; affects speed only. */
  batchSize?: number;
}

export interface ExportSummary {
  output: string;
  encoder: string;
  dim: number;
  rows: { propositions: number; budget_items: number };
}

const KIND_FOR_TARGET: Record<ExportTarget, EncodableRecord["kind"]> = {
  propositions: "proposition",
  budget_items: "budget_item",
};

const DEFAULT_BATCH_SIZE = 32;

export async function runExport(job: ExportJob): Promise<ExportSummary> {
  if (job.targets.length === 0) {
    throw new UsageError("targets must name at least one record kind");
  }
  const wantedKinds = new Set<EncodableRecord["kind"]>();
  for (const target of job.targets) {
    if (!(EXPORT_TARGETS as readonly string[]).includes(target)) {
      throw new UsageError(
        `unknown target ${JSON.stringify(target)}; expected one of ${EXPORT_TARGETS.join(", ")}`,
      );
    }
    wantedKinds.add(KIND_FOR_TARGET[target as ExportTarget]);
  }
  const batchSize = job.batchSize ?? DEFAULT_BATCH_SIZE;
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new UsageError("batch size must be a positive integer");
  }
  const encoder = resolveEncoder(job.encoderName);
  const corpus = readCorpusInterchange(job.input);
  const selected = corpus.records.filter((rec) => wantedKinds.has(rec.kind));
  if (selected.length === 0) {
    throw new EmptyInput(
      `${job.input} has no records of the requested kinds (${job.targets.join(", ")})`,
    );
  }
  const seen = new Set<string>();
  for (const rec of selected) {
    const id = idFor(rec);
    if (seen.has(id)) {
      throw new DuplicateId(`id ${JSON.stringify(id)} would appear twice in the output`);
    }
    seen.add(id);
  }
  const rows: EmbeddingRow[] = [];
  for (let start = 0; start < selected.length; start += batchSize) {
    const batch = selected.slice(start, start + batchSize);
    const vectors = await encoder.encode(batch.map(textFor));
    if (vectors.length !== batch.length) {
      throw new DimensionMismatch(
        `encoder ${encoder.name} returned ${vectors.length} vectors for ${batch.length} texts`,
      );
    }
    for (let k = 0; k < batch.length; k++) {
      const values = vectors[k]!;
      if (values.length !== encoder.dim) {
        throw new DimensionMismatch(
          `encoder ${encoder.name} returned dim ${values.length}, declared ${encoder.dim}`,
        );
      }
      rows.push({ id: idFor(batch[k]!), values });
    }
  }
  writeEmbeddingFile(job.output, rows, encoder.name);
  const counts = { propositions: 0, budget_items: 0 };
  for (const rec of selected) {
    if (rec.kind === "proposition") {
      counts.propositions += 1;
    } else {
      counts.budget_items += 1;
    }
  }
  return {
    output: job.output,
    encoder: encoder.name,
    dim: encoder.dim,
    rows: counts,
  };
}
