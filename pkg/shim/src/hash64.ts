// 64-bit content hash shared with the analyzer: FNV-1a folded over
// little-endian 64-bit words, length mix, murmur3 fmix64 finalization.
// Must produce bit-identical values to the Python implementation for
// byte-identical buffers -- the analyzer matches transfers purely by these
// values, across processes and languages. No per-process seeding.
//
// 0 is reserved to mean "no hash"; a computed 0 is remapped to 1.

const MASK64 = (1n << 64n) - 1n;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;

export function hash64(payload: Uint8Array): bigint {
  if (payload.length === 0) {
    throw new RangeError('cannot hash a zero-byte payload');
  }
  const n = payload.length;
  const words = n >>> 3;
  const view = new DataView(payload.buffer, payload.byteOffset, payload.byteLength);

  let h = FNV_OFFSET;
  for (let i = 0; i < words; i++) {
    h = ((h ^ view.getBigUint64(i * 8, true)) * FNV_PRIME) & MASK64;
  }
  const tail = n - words * 8;
  if (tail > 0) {
    let w = 0n;
    for (let i = 0; i < tail; i++) {
      w |= BigInt(payload[words * 8 + i]) << BigInt(8 * i);
    }
    h = ((h ^ w) * FNV_PRIME) & MASK64;
  }

  h ^= BigInt(n);
  h ^= h >> 33n;
  h = (h * 0xff51afd7ed558ccdn) & MASK64;
  h ^= h >> 33n;
  h = (h * 0xc4ceb9fe1a85ec53n) & MASK64;
  h ^= h >> 33n;
  return h === 0n ? 1n : h;
}
