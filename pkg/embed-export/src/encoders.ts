/**
 * Encoder registry. An encoder turns a batch of texts into equal-width
 * dense vectors; its name is pinned into the output header so a file
 * records exactly how it was produced.
 *
 * The only built-in family is "hashed-ngram-<dim>" (for example
 * "hashed-ngram-4096"), which needs no external data and is
 * bit-deterministic. Pretrained sentence encoders can be plugged in
 * with registerEncoder; none is bundled and there is no default, so an
 * unknown or missing name fails loudly instead of silently picking one.
 */

import { EncoderUnavailable } from "./errors.js";
import { hashedVector } from "./hash.js";

export interface Encoder {
  /** Pinned name, echoed into the embedding file header. */
  readonly name: string;
  /** Vector width; every encoded row has exactly this many values. */
  readonly dim: number;
  encode(texts: readonly string[]): Promise<Float64Array[]>;
}

class HashedNgramEncoder implements Encoder {
  readonly name: string;
  readonly dim: number;

  constructor(dim: number) {
    this.name = `hashed-ngram-${dim}`;
    this.dim = dim;
  }

  encode(texts: readonly string[]): Promise<Float64Array[]> {
    return Promise.resolve(texts.map((text) => hashedVector(text, this.dim)));
  }
}

const registry = new Map<string, () => Encoder>();

/** Make a named encoder resolvable; replaces any previous registration. */
export function registerEncoder(name: string, factory: () => Encoder): void {
  registry.set(name, factory);
}

const HASHED_NAME = /^hashed-ngram-([1-9][0-9]*)$/;

export function resolveEncoder(name: string): Encoder {
  if (!name) {
    throw new EncoderUnavailable(
      "no encoder name given; pass one explicitly, e.g. hashed-ngram-4096",
    );
  }
  const registered = registry.get(name);
  if (registered) {
    return registered();
  }
  const match = HASHED_NAME.exec(name);
  if (match) {
    return new HashedNgramEncoder(Number(match[1]));
  }
  throw new EncoderUnavailable(
    `unknown encoder ${JSON.stringify(name)}; built-in names look like ` +
      "hashed-ngram-<dim>, and pretrained encoders must be registered first",
  );
}
