/** Batch entry point: train teacher + distilled student on the surrogate
 * dataset and write inference-engine artifacts (weights, raw images,
 * clean/shift prediction logs, metrics) into --out. */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { corruptLabels, makeDataset } from "./data.js";
import { exportWeights, imageBytes, predictionLogCsv } from "./export.js";
import { distillStudent, evaluate, makeKDConfig, shiftSplit, trainScratch, trainTeacher } from "./kd.js";
import { Rng } from "./rng.js";

function main(): number {
  const { values } = parseArgs({
    options: {
      out: { type: "string", default: "out" },
      seed: { type: "string", default: "1" },
      "teacher-epochs": { type: "string", default: "5" },
      "student-epochs": { type: "string", default: "8" },
      "train-size": { type: "string", default: "300" },
      "subset-size": { type: "string", default: "120" },
      "eval-size": { type: "string", default: "400" },
      "log-size": { type: "string", default: "100" },
      alpha: { type: "string", default: "0.5" },
      temperature: { type: "string", default: "4" },
      cutmix: { type: "boolean", default: false },
      mixup: { type: "boolean", default: false },
    },
  });
  const seed = Number(values.seed);
  const outDir = values.out as string;

  const dataRng = new Rng(seed);
  const train = makeDataset(dataRng, Number(values["train-size"]));
  const evalClean = makeDataset(dataRng, Number(values["eval-size"]));
  const subset = corruptLabels(dataRng, train.slice(0, Number(values["subset-size"])), 0.15);

  console.log(`training teacher: ${train.length} images, ${values["teacher-epochs"]} epochs`);
  const teacher = trainTeacher(train, Number(values["teacher-epochs"]), {
    seed: seed + 1,
    val: evalClean,
  });
  console.log(`teacher accuracy: ${teacher.accuracy.toFixed(3)}`);

  const cfg = makeKDConfig({
    seed: seed + 2,
    epochs: Number(values["student-epochs"]),
    alpha: Number(values.alpha),
    temperature: Number(values.temperature),
    cutMix: Boolean(values.cutmix),
    mixUp: Boolean(values.mixup),
  });
  console.log(`distilling student: ${subset.length} images, ${cfg.epochs} epochs`);
  const student = distillStudent(teacher.net, cfg, subset);
  const scratch = trainScratch(cfg, subset);

  const evalShift = shiftSplit(evalClean, seed + 3, cfg.shift);
  const metrics = {
    teacher_accuracy: teacher.accuracy,
    student_kd_clean: evaluate(student, evalClean),
    student_kd_shift: evaluate(student, evalShift),
    student_scratch_clean: evaluate(scratch, evalClean),
    config: { alpha: cfg.alpha, temperature: cfg.temperature, epochs: cfg.epochs },
  };
  console.log(
    `student clean ${metrics.student_kd_clean.toFixed(3)} ` +
      `shift ${metrics.student_kd_shift.toFixed(3)} ` +
      `scratch ${metrics.student_scratch_clean.toFixed(3)}`,
  );

  fs.mkdirSync(path.join(outDir, "images"), { recursive: true });
  fs.writeFileSync(path.join(outDir, "weights.bin"), exportWeights(student));
  const logSize = Math.min(Number(values["log-size"]), evalClean.length);
  const logged = evalClean.slice(0, logSize);
  logged.forEach((s, i) => {
    const name = `img_${String(i).padStart(3, "0")}.raw`;
    fs.writeFileSync(path.join(outDir, "images", name), imageBytes(s.image));
  });
  fs.writeFileSync(path.join(outDir, "clean.csv"), predictionLogCsv(student, logged, "clean"));
  fs.writeFileSync(
    path.join(outDir, "shift.csv"),
    predictionLogCsv(student, evalShift.slice(0, logSize), "shift"),
  );
  fs.writeFileSync(path.join(outDir, "metrics.json"), JSON.stringify(metrics, null, 2) + "\n");
  console.log(`artifacts written to ${outDir}/`);
  return 0;
}

process.exit(main());
