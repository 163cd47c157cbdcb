#!/usr/bin/env node
/**
 * Command line front end for the export job.
 *
 *   embed-export --input corpus.jsonl --output vectors.jsonl \
 *     --encoder hashed-ngram-4096 [--targets propositions,budget_items] \
 *     [--batch-size 32]
 *
 * Exit codes: 0 ok; 1 usage or encoder problems; 2 malformed data;
 * 3 anything else. Errors go to stderr as one JSON line.
 */

import { createRequire } from "node:module";
import { pathToFileURL } from "node:url";
import { parseArgs } from "node:util";

import {
  DimensionMismatch,
  DuplicateId,
  EmptyInput,
  EncoderUnavailable,
  MalformedDocument,
  UsageError,
} from "./errors.js";
import { EXPORT_TARGETS, runExport } from "./export.js";

const USAGE = `usage: embed-export --input PATH --output PATH --encoder NAME
                    [--targets ${EXPORT_TARGETS.join(",")}] [--batch-size N]`;

function sortedKeys(_key: string, value: unknown): unknown {
  if (value && typeof value === "object" && !Array.isArray(value)) {
    return Object.fromEntries(
      Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
        a < b ? -1 : a > b ? 1 : 0,
      ),
    );
  }
  return value;
}

function emitError(type: string, err: Error): void {
  process.stderr.write(JSON.stringify({ error: { type, message: err.message } }) + "\n");
}

export async function main(argv: readonly string[]): Promise<number> {
  try {
    let parsed;
    try {
      parsed = parseArgs({
        args: [...argv],
        options: {
          input: { type: "string" },
          output: { type: "string" },
          encoder: { type: "string" },
          targets: { type: "string", default: EXPORT_TARGETS.join(",") },
          "batch-size": { type: "string" },
          help: { type: "boolean", default: false },
          version: { type: "boolean", default: false },
        },
        allowPositionals: false,
      });
    } catch (err) {
      throw new UsageError(err instanceof Error ? err.message : String(err));
    }
    const flags = parsed.values;
    if (flags.help) {
      process.stdout.write(USAGE + "\n");
      return 0;
    }
    if (flags.version) {
      const pkg = createRequire(import.meta.url)("../package.json");
      process.stdout.write(pkg.version + "\n");
      return 0;
    }
    for (const key of ["input", "output", "encoder"] as const) {
      if (!flags[key]) {
        throw new UsageError(`--${key} is required\n${USAGE}`);
      }
    }
    let batchSize;
    if (flags["batch-size"] !== undefined) {
      batchSize = Number(flags["batch-size"]);
      if (!Number.isInteger(batchSize) || batchSize < 1) {
        throw new UsageError("--batch-size must be a positive integer");
      }
    }
    const summary = await runExport({
      input: flags.input!,
      output: flags.output!,
      encoderName: flags.encoder!,
      targets: flags.targets!.split(",").map((t) => t.trim()).filter(Boolean),
      batchSize,
    });
    process.stdout.write(JSON.stringify(summary, sortedKeys, 2) + "\n");
    return 0;
  } catch (err) {
    if (err instanceof UsageError) {
      emitError("usage", err);
      return 1;
    }
    if (err instanceof EncoderUnavailable) {
      emitError("EncoderUnavailable", err);
      return 1;
    }
    if (
      err instanceof MalformedDocument ||
      err instanceof DuplicateId ||
      err instanceof DimensionMismatch ||
      err instanceof EmptyInput
    ) {
      emitError(err.name, err);
      return 2;
    }
    const fallback = err instanceof Error ? err : new Error(String(err));
    emitError(fallback.name, fallback);
    return 3;
  }
}

const entry = process.argv[1];
if (entry && import.meta.url === pathToFileURL(entry).href) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
