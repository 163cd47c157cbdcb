import { spawnSync } from "node:child_process";
import { writeFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { runExport } from "../src/export";
import { tempDir, writeCorpusFixture } from "./helpers";

// The files we write are consumed by the python pipeline; when it is
// installed next door, load them with its own validator.
const probe = spawnSync("python3", ["-c", "import bamkit.textclf"], { encoding: "utf-8" });
const pythonAvailable = probe.status === 0;

const LOADER_CHECK = `
import json, sys
from bamkit.textclf import load_embeddings

emb_path, spec_path = sys.argv[1], sys.argv[2]
with open(spec_path, encoding="utf-8") as fh:
    spec = json.load(fh)
table = load_embeddings(emb_path)
if sorted(table) != sorted(spec["ids"]):
    raise SystemExit("id sets differ")
for vec in table.values():
    if vec.dim != spec["dim"]:
        raise SystemExit("dim drifted")
print("ok")
`;

const FIDELITY_CHECK = `
import json, sys
import numpy as np
from bamkit.textclf import FeaturizerConfig, featurize, load_embeddings

emb_path, spec_path = sys.argv[1], sys.argv[2]
with open(spec_path, encoding="utf-8") as fh:
    spec = json.load(fh)
table = load_embeddings(emb_path)
config = FeaturizerConfig(dim=spec["dim"])
for rec in spec["rows"]:
    fv = featurize(rec["text"], config)
    dense = np.zeros(spec["dim"])
    dense[fv.indices] = fv.values
    if not np.array_equal(dense, table[rec["id"]].values):
        raise SystemExit("vector mismatch for " + rec["id"])
print("ok")
`;

function runPython(script: string, args: string[]): void {
  const result = spawnSync("python3", ["-c", script, ...args], { encoding: "utf-8" });
  expect(result.stderr).toBe("");
  expect(result.status).toBe(0);
  expect(result.stdout.trim()).toBe("ok");
}

describe.skipIf(!pythonAvailable)("python pipeline round trip", () => {
  const DIM = 4096;

  async function exportFixture() {
    const dir = tempDir("crosscheck-");
    const fixture = writeCorpusFixture(dir);
    const out = join(dir, "vectors.jsonl");
    await runExport({
      input: fixture.path,
      output: out,
      targets: ["propositions", "budget_items"],
      encoderName: `hashed-ngram-${DIM}`,
    });
    const spec = {
      dim: DIM,
      ids: fixture.orderedIds,
      rows: fixture.orderedIds.map((id) => ({ id, text: fixture.texts[id]! })),
    };
    const specPath = join(dir, "spec.json");
    writeFileSync(specPath, JSON.stringify(spec), "utf-8");
    return { out, specPath };
  }

  it("exported files pass the pipeline loader with exact id sets", async () => {
    const { out, specPath } = await exportFixture();
    runPython(LOADER_CHECK, [out, specPath]);
  });

  it("exported vectors match the pipeline's hashed features bit for bit", async () => {
    const { out, specPath } = await exportFixture();
    runPython(FIDELITY_CHECK, [out, specPath]);
  });
});
