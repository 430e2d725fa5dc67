import { describe, expect, it } from "vitest";

import { makeDataset } from "../src/data.js";
import {
  exportWeights,
  imageBytes,
  importWeights,
  loadWeightsInto,
  predictionLogCsv,
} from "../src/export.js";
import { STUDENT_PARAMS, buildStudent, buildTeacher, distillStudent, makeKDConfig } from "../src/kd.js";
import { Rng } from "../src/rng.js";

describe("student layout", () => {
  const student = buildStudent(new Rng(1));

  it("has exactly 5682 parameters", () => {
    expect(student.paramCount()).toBe(STUDENT_PARAMS);
  });

  it("exports tensors in engine order, kernel then bias", () => {
    const shapes = student.params().map((p) => p.shape);
    expect(shapes).toEqual([
      [2, 1, 3, 3], [2],
      [4, 2, 3, 3], [4],
      [38, 144], [38],
      [2, 38],
    ]);
  });
});

describe("weight file", () => {
  const student = buildStudent(new Rng(2));
  const bytes = exportWeights(student);

  it("has magic, LE count, and float32 payload", () => {
    expect(bytes.byteLength).toBe(8 + 4 * STUDENT_PARAMS);
    expect(String.fromCharCode(...bytes.slice(0, 4))).toBe("SNN1");
    const view = new DataView(bytes.buffer, bytes.byteOffset);
    expect(view.getUint32(4, true)).toBe(STUDENT_PARAMS);
  });

  it("stores values float32-rounded in parameter order", () => {
    const flat = importWeights(bytes);
    let off = 0;
    for (const p of student.params()) {
      for (let i = 0; i < p.data.length; i++) {
        expect(flat[off++]).toBe(Math.fround(p.data[i]));
      }
    }
  });

  it("round trips byte-exactly through a second net", () => {
    const clone = buildStudent(new Rng(999));
    loadWeightsInto(clone, bytes);
    expect(exportWeights(clone)).toEqual(bytes);
  });

  it("rejects corrupted magic", () => {
    const bad = Uint8Array.from(bytes);
    bad[0] = 0x58;
    expect(() => importWeights(bad)).toThrow(/magic/);
  });

  it("rejects truncated payload", () => {
    expect(() => importWeights(bytes.slice(0, bytes.byteLength - 4))).toThrow(/length/);
  });
});

describe("architecture guard", () => {
  it("rejects a student that does not match the engine config", () => {
    const rng = new Rng(3);
    const teacher = buildTeacher(rng);
    const data = makeDataset(rng, 4);
    expect(() =>
      distillStudent(teacher, makeKDConfig({ epochs: 1 }), data, buildTeacher(rng)),
    ).toThrow(/architecture mismatch/);
  });
});

describe("image and log artifacts", () => {
  it("image bytes are float32 LE, 4 bytes per pixel", () => {
    const img = Float64Array.from([0.25, 1, 0.5, 0.125]);
    const bytes = imageBytes(img);
    expect(bytes.byteLength).toBe(16);
    const view = new DataView(bytes.buffer);
    expect(view.getFloat32(0, true)).toBe(0.25);
    expect(view.getFloat32(12, true)).toBe(0.125);
  });

  it("zero-sample log is header only", () => {
    const net = buildStudent(new Rng(4));
    expect(predictionLogCsv(net, [], "clean")).toBe("logit_0,logit_1,label,condition\n");
    expect(predictionLogCsv(net, [])).toBe("logit_0,logit_1,label\n");
  });

  it("rows carry the condition tag and parse back numerically", () => {
    const net = buildStudent(new Rng(5));
    const data = makeDataset(new Rng(6), 3);
    const csv = predictionLogCsv(net, data, "shift");
    const lines = csv.trimEnd().split("\n");
    expect(lines).toHaveLength(4);
    for (let i = 1; i < lines.length; i++) {
      const [l0, l1, label, cond] = lines[i].split(",");
      expect(Number.isFinite(Number(l0))).toBe(true);
      expect(Number.isFinite(Number(l1))).toBe(true);
      expect(["0", "1"]).toContain(label);
      expect(cond).toBe("shift");
      const logits = net.forward(data[i - 1].image);
      expect(Number(l0)).toBe(logits[0]);
      expect(Number(l1)).toBe(logits[1]);
    }
  });
});
