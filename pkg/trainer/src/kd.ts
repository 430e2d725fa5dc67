/** Teacher/student construction and the distillation training loops. */

import { DEFAULT_SHIFT, Sample, ShiftParams, applyShift, augment, cutMix, mixUp } from "./data.js";
import { Target, argmax, crossEntropy, kdLoss } from "./losses.js";
import { Adam, Conv2dSame, Dense, MaxPool, Net, Relu } from "./nn.js";
import { Rng } from "./rng.js";

export const STUDENT_PARAMS = 5682;
const MIN_IMAGES_PER_CLASS = 100;

export interface KDConfig {
  /** Softening temperature for the soft-target term; > 0. */
  temperature: number;
  /** Hard-label loss weight in [0, 1]; 1 - alpha goes to the soft term. */
  alpha: number;
  epochs: number;
  cutMix: boolean;
  mixUp: boolean;
  /** Feed the identical augmented view to teacher and student. */
  consistentViews: boolean;
  shift: ShiftParams;
  lr: number;
  seed: number;
}

export function makeKDConfig(overrides: Partial<KDConfig> = {}): KDConfig {
  const cfg: KDConfig = {
    temperature: 4,
    alpha: 0.5,
    epochs: 8,
    cutMix: false,
    mixUp: false,
    consistentViews: true,
    shift: DEFAULT_SHIFT,
    lr: 0.001,
    seed: 1,
    ...overrides,
  };
  if (!(cfg.temperature > 0) || !Number.isFinite(cfg.temperature)) {
    throw new RangeError(`temperature must be > 0, got ${cfg.temperature}`);
  }
  if (!(cfg.alpha >= 0 && cfg.alpha <= 1)) {
    throw new RangeError(`alpha must be in [0, 1], got ${cfg.alpha}`);
  }
  if (!Number.isInteger(cfg.epochs) || cfg.epochs < 1) {
    throw new RangeError(`epochs must be a positive integer, got ${cfg.epochs}`);
  }
  return cfg;
}

/** The deployed architecture: conv(2) pool relu conv(4) pool relu pool
 * flatten fc(38) relu fc(2, no bias). 5682 parameters. */
export function buildStudent(rng: Rng): Net {
  return new Net([
    new Conv2dSame(48, 48, 1, 2, 3, rng, "conv1"),
    new MaxPool(48, 48, 2, 2),
    new Relu(24 * 24 * 2),
    new Conv2dSame(24, 24, 2, 4, 3, rng, "conv2"),
    new MaxPool(24, 24, 4, 2),
    new Relu(12 * 12 * 4),
    new MaxPool(12, 12, 4, 2),
    // flatten is a no-op in this layout
    new Dense(6 * 6 * 4, 38, rng, true, "fc1"),
    new Relu(38),
    new Dense(38, 2, rng, false, "fc2"),
  ]);
}

/** A wider CNN than the student; desk-scale stand-in for a big backbone. */
export function buildTeacher(rng: Rng): Net {
  return new Net([
    new Conv2dSame(48, 48, 1, 4, 3, rng, "tconv1"),
    new MaxPool(48, 48, 4, 4),
    new Relu(12 * 12 * 4),
    new Conv2dSame(12, 12, 4, 8, 3, rng, "tconv2"),
    new MaxPool(12, 12, 8, 4),
    new Relu(3 * 3 * 8),
    new Dense(3 * 3 * 8, 16, rng, true, "tfc1"),
    new Relu(16),
    new Dense(16, 2, rng, true, "tfc2"),
  ]);
}

export function evaluate(net: Net, samples: Sample[]): number {
  if (samples.length === 0) return 0;
  let correct = 0;
  for (const s of samples) {
    if (argmax(net.forward(s.image)) === s.label) correct++;
  }
  return correct / samples.length;
}

/** Shifted copy of an evaluation split, seeded for reproducibility. */
export function shiftSplit(samples: Sample[], seed: number, params: ShiftParams = DEFAULT_SHIFT): Sample[] {
  const rng = new Rng(seed);
  return samples.map((s) => ({ image: applyShift(s.image, rng, params), label: s.label }));
}

function ensureTrainable(data: Sample[]): void {
  if (data.length === 0) throw new RangeError("empty dataset");
  const counts = [0, 0];
  for (const s of data) counts[s.label]++;
  if (counts[0] < MIN_IMAGES_PER_CLASS || counts[1] < MIN_IMAGES_PER_CLASS) {
    throw new RangeError(
      `dataset too small: need >= ${MIN_IMAGES_PER_CLASS} images per class, got ${counts[0]}/${counts[1]}`,
    );
  }
}

export interface TeacherResult {
  net: Net;
  accuracy: number;
}

export interface TrainOptions {
  seed?: number;
  lr?: number;
  val?: Sample[];
}

/** Supervised teacher training (single-sample Adam, per-epoch reshuffle). */
export function trainTeacher(data: Sample[], epochs: number, options: TrainOptions = {}): TeacherResult {
  ensureTrainable(data);
  if (!Number.isInteger(epochs) || epochs < 1) throw new RangeError("epochs must be >= 1");
  const rng = new Rng(options.seed ?? 7);
  const net = buildTeacher(rng);
  const opt = new Adam(net, options.lr ?? 0.001);
  const order = [...data];
  for (let epoch = 0; epoch < epochs; epoch++) {
    rng.shuffle(order);
    for (const sample of order) {
      const view = augment(sample.image, rng);
      const { grad } = crossEntropy(net.forward(view), sample.label);
      net.zeroGrad();
      net.backward(grad);
      opt.step();
    }
  }
  return { net, accuracy: evaluate(net, options.val ?? data) };
}

/** Student training loop; with a teacher it optimizes the KD mix, without it
 * plain cross entropy. Both paths draw identical augmentation randomness, so
 * a KD-vs-scratch pair differs only in the loss. */
function runStudent(data: Sample[], cfg: KDConfig, teacher: Net | null, prebuilt?: Net): Net {
  if (data.length === 0) throw new RangeError("empty dataset");
  const rng = new Rng(cfg.seed);
  const student = prebuilt ?? buildStudent(rng);
  const opt = new Adam(student, cfg.lr);
  const order = [...data];
  for (let epoch = 0; epoch < cfg.epochs; epoch++) {
    rng.shuffle(order);
    for (const sample of order) {
      let img = augment(sample.image, rng);
      let target: Target = sample.label;
      if (cfg.cutMix && rng.bernoulli(0.5)) {
        const mixed = cutMix({ image: img, label: sample.label }, order[rng.int(order.length)], rng);
        img = mixed.image;
        target = mixed.target;
      } else if (cfg.mixUp && rng.bernoulli(0.5)) {
        const mixed = mixUp({ image: img, label: sample.label }, order[rng.int(order.length)], rng);
        img = mixed.image;
        target = mixed.target;
      }
      const logits = student.forward(img);
      const { grad } = teacher
        ? kdLoss(
            logits,
            teacher.forward(cfg.consistentViews ? img : sample.image),
            target,
            cfg.alpha,
            cfg.temperature,
          )
        : crossEntropy(logits, target);
      student.zeroGrad();
      student.backward(grad);
      opt.step();
    }
  }
  return student;
}

/** Distill the student against a trained teacher. */
export function distillStudent(teacher: Net, cfg: KDConfig, data: Sample[], student?: Net): Net {
  if (student && student.paramCount() !== STUDENT_PARAMS) {
    throw new RangeError(
      `architecture mismatch: student has ${student.paramCount()} params, expected ${STUDENT_PARAMS}`,
    );
  }
  return runStudent(data, cfg, teacher, student);
}

/** Equal-budget baseline: same config, same seeds, hard labels only. */
export function trainScratch(cfg: KDConfig, data: Sample[]): Net {
  return runStudent(data, cfg, null);
}
