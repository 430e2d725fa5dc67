/** Synthetic surrogate dataset: 48x48 grayscale cell-like blobs.
 *
 * Class 0 is a small cell, class 1 a large one; radii meet at the class
 * boundary and edges are soft, so the task is nontrivial but learnable.
 * Intensity and position carry no label signal. Pixels are in [0, 1],
 * channels-last with C = 1 (so a flat 48*48 array).
 */

import { Rng } from "./rng.js";

export const SIDE = 48;
export const PIXELS = SIDE * SIDE;

export interface Sample {
  image: Float64Array;
  label: number;
}

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/** One blob image. Radius ranges meet at 9; soft edges keep boundary cases hard. */
export function makeImage(rng: Rng, label: number): Float64Array {
  const cx = SIDE / 2 + rng.uniform(-6, 6);
  const cy = SIDE / 2 + rng.uniform(-6, 6);
  const radius = label === 0 ? rng.uniform(5, 9) : rng.uniform(9, 13);
  const amp = rng.uniform(0.5, 0.8);
  const edge = rng.uniform(0.8, 1.4);
  const img = new Float64Array(PIXELS);
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      const d = Math.hypot(x - cx, y - cy);
      const body = amp / (1 + Math.exp((d - radius) / edge));
      img[y * SIDE + x] = clamp01(body + 0.08 * rng.normal());
    }
  }
  return img;
}

/** Balanced dataset, labels alternating then shuffled. */
export function makeDataset(rng: Rng, n: number): Sample[] {
  const samples: Sample[] = [];
  for (let i = 0; i < n; i++) {
    const label = i % 2;
    samples.push({ image: makeImage(rng, label), label });
  }
  rng.shuffle(samples);
  return samples;
}

/** Flip a fraction of labels; returns a new array (images shared). */
export function corruptLabels(rng: Rng, samples: Sample[], fraction: number): Sample[] {
  return samples.map((s) =>
    rng.bernoulli(fraction) ? { image: s.image, label: 1 - s.label } : s,
  );
}

// --- transforms -----------------------------------------------------------

export interface ShiftParams {
  brightnessJitter: number;
  contrastJitter: number;
  maxRotationDeg: number;
  hflipProb: number;
  blur: boolean;
}

export const DEFAULT_SHIFT: ShiftParams = {
  brightnessJitter: 0.4,
  contrastJitter: 0.4,
  maxRotationDeg: 30,
  hflipProb: 0.5,
  blur: true,
};

export function flipH(img: Float64Array): Float64Array {
  const out = new Float64Array(PIXELS);
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      out[y * SIDE + x] = img[y * SIDE + (SIDE - 1 - x)];
    }
  }
  return out;
}

/** Nearest-neighbor rotation about the image center; outside pixels are 0. */
export function rotate(img: Float64Array, degrees: number): Float64Array {
  const rad = (degrees * Math.PI) / 180;
  const cos = Math.cos(rad);
  const sin = Math.sin(rad);
  const c = (SIDE - 1) / 2;
  const out = new Float64Array(PIXELS);
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      const sx = Math.round(c + (x - c) * cos - (y - c) * sin);
      const sy = Math.round(c + (x - c) * sin + (y - c) * cos);
      if (sx >= 0 && sx < SIDE && sy >= 0 && sy < SIDE) {
        out[y * SIDE + x] = img[sy * SIDE + sx];
      }
    }
  }
  return out;
}

/** 3x3 box blur with edge clamping. */
export function boxBlur(img: Float64Array): Float64Array {
  const out = new Float64Array(PIXELS);
  for (let y = 0; y < SIDE; y++) {
    for (let x = 0; x < SIDE; x++) {
      let acc = 0;
      for (let dy = -1; dy <= 1; dy++) {
        for (let dx = -1; dx <= 1; dx++) {
          const sy = Math.min(SIDE - 1, Math.max(0, y + dy));
          const sx = Math.min(SIDE - 1, Math.max(0, x + dx));
          acc += img[sy * SIDE + sx];
        }
      }
      out[y * SIDE + x] = acc / 9;
    }
  }
  return out;
}

export function adjustBrightnessContrast(
  img: Float64Array,
  brightness: number,
  contrast: number,
): Float64Array {
  let mean = 0;
  for (const v of img) mean += v;
  mean /= img.length;
  const out = new Float64Array(PIXELS);
  for (let i = 0; i < img.length; i++) {
    out[i] = clamp01((img[i] - mean) * contrast + mean + brightness);
  }
  return out;
}

/** Domain-shift recipe applied to an evaluation image. */
export function applyShift(img: Float64Array, rng: Rng, p: ShiftParams = DEFAULT_SHIFT): Float64Array {
  let out = adjustBrightnessContrast(
    img,
    rng.uniform(-p.brightnessJitter, p.brightnessJitter),
    1 + rng.uniform(-p.contrastJitter, p.contrastJitter),
  );
  out = rotate(out, rng.uniform(-p.maxRotationDeg, p.maxRotationDeg));
  if (rng.bernoulli(p.hflipProb)) out = flipH(out);
  if (p.blur) out = boxBlur(out);
  return out;
}

/** Light training-time augmentation (shared view for teacher and student). */
export function augment(img: Float64Array, rng: Rng): Float64Array {
  let out = adjustBrightnessContrast(img, rng.uniform(-0.15, 0.15), 1 + rng.uniform(-0.15, 0.15));
  if (rng.bernoulli(0.5)) out = flipH(out);
  return out;
}

// --- mixing augmentations -------------------------------------------------

export interface MixedSample {
  image: Float64Array;
  /** Label-weight vector over the two classes; sums to 1. */
  target: Float64Array;
}

function mixTarget(labelA: number, labelB: number, lam: number): Float64Array {
  const t = new Float64Array(2);
  t[labelA] += lam;
  t[labelB] += 1 - lam;
  return t;
}

/** Paste a rectangle of b into a; the label mix is the exact area fraction kept from a. */
export function cutMix(a: Sample, b: Sample, rng: Rng): MixedSample {
  const lamDraw = rng.uniform(0.25, 0.75);
  const side = Math.round(SIDE * Math.sqrt(1 - lamDraw));
  const x0 = rng.int(SIDE - side + 1);
  const y0 = rng.int(SIDE - side + 1);
  const image = Float64Array.from(a.image);
  for (let y = y0; y < y0 + side; y++) {
    for (let x = x0; x < x0 + side; x++) {
      image[y * SIDE + x] = b.image[y * SIDE + x];
    }
  }
  const lam = 1 - (side * side) / PIXELS;
  return { image, target: mixTarget(a.label, b.label, lam) };
}

/** Pixelwise convex blend of two samples. */
export function mixUp(a: Sample, b: Sample, rng: Rng): MixedSample {
  const lam = rng.uniform(0.2, 0.8);
  const image = new Float64Array(PIXELS);
  for (let i = 0; i < PIXELS; i++) image[i] = lam * a.image[i] + (1 - lam) * b.image[i];
  return { image, target: mixTarget(a.label, b.label, lam) };
}
