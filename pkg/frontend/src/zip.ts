/** Minimal reader for the service's result archives.
 *
 * The service writes uncompressed (stored) zip entries with fixed
 * timestamps so identical requests produce identical bytes. Only that
 * subset is supported here; compressed entries are rejected.
 */

const EOCD_SIG = 0x06054b50;
const CENTRAL_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

function findEocd(view: DataView): number {
  // EOCD is at least 22 bytes; the trailing comment can push it forward.
  for (let i = view.byteLength - 22; i >= 0; i--) {
    if (view.getUint32(i, true) === EOCD_SIG) return i;
  }
  throw new Error("not a zip archive: end record missing");
}

/** Extract every entry of a stored-only zip into a name -> bytes map. */
export function readStoredZip(bytes: Uint8Array): Map<string, Uint8Array> {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const eocd = findEocd(view);
  const count = view.getUint16(eocd + 10, true);
  let pos = view.getUint32(eocd + 16, true);

  const out = new Map<string, Uint8Array>();
  const decoder = new TextDecoder();
  for (let i = 0; i < count; i++) {
    if (view.getUint32(pos, true) !== CENTRAL_SIG) {
      throw new Error("corrupt zip: bad central directory entry");
    }
    const method = view.getUint16(pos + 10, true);
    const size = view.getUint32(pos + 24, true);
    const nameLen = view.getUint16(pos + 28, true);
    const extraLen = view.getUint16(pos + 30, true);
    const commentLen = view.getUint16(pos + 32, true);
    const localOffset = view.getUint32(pos + 42, true);
    const name = decoder.decode(bytes.subarray(pos + 46, pos + 46 + nameLen));
    if (method !== 0) throw new Error(`unsupported compression for ${name}`);

    if (view.getUint32(localOffset, true) !== LOCAL_SIG) {
      throw new Error("corrupt zip: bad local header");
    }
    const localNameLen = view.getUint16(localOffset + 26, true);
    const localExtraLen = view.getUint16(localOffset + 28, true);
    const dataStart = localOffset + 30 + localNameLen + localExtraLen;
    out.set(name, bytes.subarray(dataStart, dataStart + size));
    pos += 46 + nameLen + extraLen + commentLen;
  }
  return out;
}

/** Pull the frame PNGs out of a result archive, ordered by frame index. */
export function resultFrames(archive: Map<string, Uint8Array>): Uint8Array[] {
  const names = [...archive.keys()]
    .filter((n) => n.startsWith("frames/") && n.endsWith(".png"))
    .sort();
  return names.map((n) => archive.get(n)!);
}
