/** Result-archive reader against a server-written fixture zip. */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { readStoredZip, resultFrames } from "../src/zip.js";

const zipcase = JSON.parse(
  readFileSync(new URL("./fixtures/zipcase.json", import.meta.url), "utf-8"),
) as { zip_b64: string; entries: Record<string, string> };

const bytes = new Uint8Array(Buffer.from(zipcase.zip_b64, "base64"));

describe("readStoredZip", () => {
  it("extracts every entry byte for byte", () => {
    const archive = readStoredZip(bytes);
    const names = Object.keys(zipcase.entries).sort();
    expect([...archive.keys()].sort()).toEqual(names);
    for (const name of names) {
      const want = new Uint8Array(Buffer.from(zipcase.entries[name]!, "base64"));
      expect(archive.get(name)).toEqual(want);
    }
  });

  it("orders frame images by index and skips metadata", () => {
    const frames = resultFrames(readStoredZip(bytes));
    expect(frames.length).toBe(3);
    const want0 = new Uint8Array(Buffer.from(zipcase.entries["frames/0000.png"]!, "base64"));
    expect(frames[0]).toEqual(want0);
  });

  it("rejects non-zip input", () => {
    expect(() => readStoredZip(new TextEncoder().encode("not a zip"))).toThrow(/end record/);
  });
});
