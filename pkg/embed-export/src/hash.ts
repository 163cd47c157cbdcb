/**
 * Hashed character n-gram features, matching the pipeline's built-in
 * featurizer exactly so exported vectors are interchangeable with the
 * vectors it derives on the fly.
 *
 * Index of one n-gram over code points c1..cn:
 *
 *   h = n
 *   for c in (c1..cn):  h = (h * 0x100000001B3 + c)  mod 2**64
 *   h ^= h >> 30;  h = h * 0xBF58476D1CE4E5B9  mod 2**64
 *   h ^= h >> 27;  h = h * 0x94D049BB133111EB  mod 2**64
 *   h ^= h >> 31
 *   index = h mod dim
 *
 * A text's vector counts the indices of all its n-grams (sizes 1..3 by
 * default) and l2-normalizes the counts. Counts are small integers, so
 * the norm is exact and the result is bit-deterministic.
 */

const POLY = 0x100000001b3n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;
const MASK64 = (1n << 64n) - 1n;

export const DEFAULT_NGRAM_SIZES: readonly number[] = [1, 2, 3];

/** Bucket index of one n-gram; seeded by its code-point length. */
export function hashNgram(ngram: string, dim: number): number {
  const codePoints = Array.from(ngram);
  let h = BigInt(codePoints.length);
  for (const ch of codePoints) {
    h = (h * POLY + BigInt(ch.codePointAt(0)!)) & MASK64;
  }
  h ^= h >> 30n;
  h = (h * MIX1) & MASK64;
  h ^= h >> 27n;
  h = (h * MIX2) & MASK64;
  h ^= h >> 31n;
  return Number(h % BigInt(dim));
}

/** Dense l2-normalized hashed n-gram vector; empty text maps to zeros. */
export function hashedVector(
  text: string,
  dim: number,
  ngramSizes: readonly number[] = DEFAULT_NGRAM_SIZES,
): Float64Array {
  const codePoints = Array.from(text);
  const counts = new Map<number, number>();
  for (const n of ngramSizes) {
    for (let i = 0; i + n <= codePoints.length; i++) {
      const index = hashNgram(codePoints.slice(i, i + n).join(""), dim);
      counts.set(index, (counts.get(index) ?? 0) + 1);
    }
  }
  const vector = new Float64Array(dim);
  if (counts.size === 0) {
    return vector;
  }
  let sumSquares = 0;
  for (const count of counts.values()) {
    sumSquares += count * count;
  }
  const norm = Math.sqrt(sumSquares);
  for (const [index, count] of counts) {
    vector[index] = count / norm;
  }
  return vector;
}
