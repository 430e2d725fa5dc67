/** Bridges to the inference engine's on-disk formats.
 *
 * Weight file: "SNN1" magic, little-endian uint32 value count, then float32
 * LE values; per parameterized layer in network order, kernel tensor first
 * (conv (out, in, ky, kx) row-major, dense (out, in)), bias after. Images are
 * raw float32 LE, row-major H x W x C. Prediction logs are CSV with
 * logit_0..logit_{C-1}, label, and an optional condition tag.
 */

import { Sample } from "./data.js";
import { Net } from "./nn.js";

export const WEIGHT_MAGIC = "SNN1";

export function exportWeights(net: Net): Uint8Array {
  const params = net.params();
  let count = 0;
  for (const p of params) count += p.data.length;
  const buf = new ArrayBuffer(8 + 4 * count);
  const view = new DataView(buf);
  for (let i = 0; i < 4; i++) view.setUint8(i, WEIGHT_MAGIC.charCodeAt(i));
  view.setUint32(4, count, true);
  let off = 8;
  for (const p of params) {
    for (let i = 0; i < p.data.length; i++, off += 4) {
      view.setFloat32(off, p.data[i], true);
    }
  }
  return new Uint8Array(buf);
}

/** Parse a weight file back into flat float values (for round-trip checks). */
export function importWeights(bytes: Uint8Array): Float64Array {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  for (let i = 0; i < 4; i++) {
    if (view.getUint8(i) !== WEIGHT_MAGIC.charCodeAt(i)) {
      throw new RangeError("magic mismatch: not a weight file");
    }
  }
  const count = view.getUint32(4, true);
  if (bytes.byteLength !== 8 + 4 * count) {
    throw new RangeError(`length mismatch: header says ${count} values`);
  }
  const out = new Float64Array(count);
  for (let i = 0; i < count; i++) out[i] = view.getFloat32(8 + 4 * i, true);
  return out;
}

/** Load exported weights into a net with identical layout. */
export function loadWeightsInto(net: Net, bytes: Uint8Array): void {
  const flat = importWeights(bytes);
  if (flat.length !== net.paramCount()) {
    throw new RangeError(`length mismatch: file has ${flat.length}, net needs ${net.paramCount()}`);
  }
  let off = 0;
  for (const p of net.params()) {
    p.data.set(flat.subarray(off, off + p.data.length));
    off += p.data.length;
  }
}

export function imageBytes(image: Float64Array): Uint8Array {
  const buf = new ArrayBuffer(4 * image.length);
  const view = new DataView(buf);
  for (let i = 0; i < image.length; i++) view.setFloat32(4 * i, image[i], true);
  return new Uint8Array(buf);
}

/** CSV prediction log; zero samples produce the header line only. */
export function predictionLogCsv(net: Net, samples: Sample[], condition?: string): string {
  const cols = ["logit_0", "logit_1", "label"];
  if (condition !== undefined) cols.push("condition");
  const lines = [cols.join(",")];
  for (const s of samples) {
    const logits = net.forward(s.image);
    const row = [String(logits[0]), String(logits[1]), String(s.label)];
    if (condition !== undefined) row.push(condition);
    lines.push(row.join(","));
  }
  return lines.join("\n") + "\n";
}
