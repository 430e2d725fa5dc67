/** Classification losses: cross entropy and the distillation mix. */

export function softmax(logits: Float64Array, temperature = 1): Float64Array {
  let max = -Infinity;
  for (const v of logits) {
    const t = v / temperature;
    if (t > max) max = t;
  }
  const out = new Float64Array(logits.length);
  let sum = 0;
  for (let i = 0; i < logits.length; i++) {
    out[i] = Math.exp(logits[i] / temperature - max);
    sum += out[i];
  }
  for (let i = 0; i < logits.length; i++) out[i] /= sum;
  return out;
}

export function logSoftmax(logits: Float64Array, temperature = 1): Float64Array {
  let max = -Infinity;
  for (const v of logits) {
    const t = v / temperature;
    if (t > max) max = t;
  }
  let sum = 0;
  for (const v of logits) sum += Math.exp(v / temperature - max);
  const lse = max + Math.log(sum);
  const out = new Float64Array(logits.length);
  for (let i = 0; i < logits.length; i++) out[i] = logits[i] / temperature - lse;
  return out;
}

export function argmax(v: Float64Array): number {
  let best = 0;
  for (let i = 1; i < v.length; i++) if (v[i] > v[best]) best = i;
  return best;
}

export interface LossResult {
  loss: number;
  /** dLoss/dLogits. */
  grad: Float64Array;
}

/** Hard targets are a class index or a mixed label-weight vector (CutMix/MixUp). */
export type Target = number | Float64Array;

function targetWeight(target: Target, i: number): number {
  return typeof target === "number" ? (i === target ? 1 : 0) : target[i];
}

/** Cross entropy from logits; grad = softmax - target. */
export function crossEntropy(logits: Float64Array, target: Target): LossResult {
  const ls = logSoftmax(logits);
  const p = softmax(logits);
  let loss = 0;
  const grad = new Float64Array(logits.length);
  for (let i = 0; i < logits.length; i++) {
    const y = targetWeight(target, i);
    loss -= y * ls[i];
    grad[i] = p[i] - y;
  }
  return { loss, grad };
}

/** T^2-scaled KL(teacher || student) over temperature-softened distributions.
 * The T^2 factor keeps soft-target gradient magnitudes comparable across T. */
export function softTargetLoss(
  studentLogits: Float64Array,
  teacherLogits: Float64Array,
  temperature: number,
): LossResult {
  const t = temperature;
  const p = softmax(teacherLogits, t);
  const lq = logSoftmax(studentLogits, t);
  const lp = logSoftmax(teacherLogits, t);
  let kl = 0;
  for (let i = 0; i < p.length; i++) {
    if (p[i] > 0) kl += p[i] * (lp[i] - lq[i]);
  }
  const q = softmax(studentLogits, t);
  const grad = new Float64Array(studentLogits.length);
  // d(T^2 * KL)/dz = T * (q - p)
  for (let i = 0; i < grad.length; i++) grad[i] = t * (q[i] - p[i]);
  return { loss: t * t * kl, grad };
}

/** alpha * hard cross entropy + (1 - alpha) * T^2 * soft KL. */
export function kdLoss(
  studentLogits: Float64Array,
  teacherLogits: Float64Array,
  target: Target,
  alpha: number,
  temperature: number,
): LossResult {
  const hard = crossEntropy(studentLogits, target);
  const soft = softTargetLoss(studentLogits, teacherLogits, temperature);
  const grad = new Float64Array(studentLogits.length);
  for (let i = 0; i < grad.length; i++) {
    grad[i] = alpha * hard.grad[i] + (1 - alpha) * soft.grad[i];
  }
  return { loss: alpha * hard.loss + (1 - alpha) * soft.loss, grad };
}
