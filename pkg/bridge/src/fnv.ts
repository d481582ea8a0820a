const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;
const MASK64 = 0xffffffffffffffffn;

/** 64-bit FNV-1a over raw bytes. */
export function fnv1a64(data: Uint8Array): bigint {
  let h = FNV_OFFSET;
  for (const byte of data) {
    h ^= BigInt(byte);
    h = (h * FNV_PRIME) & MASK64;
  }
  return h;
}

/** Digest as the 16-char lowercase hex string used in stream headers. */
export function fnv1a64Hex(data: Uint8Array): string {
  return fnv1a64(data).toString(16).padStart(16, "0");
}
