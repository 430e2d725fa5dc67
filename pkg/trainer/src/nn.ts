/** Minimal CNN layers with explicit forward/backward passes.
 *
 * Tensors are flat Float64Array in channels-last row-major order
 * ((y * W + x) * C + c), matching the inference engine's layout, so flatten
 * is a no-op and exported weights line up index-for-index.
 */

import { Rng } from "./rng.js";

export interface Param {
  name: string;
  data: Float64Array;
  grad: Float64Array;
  /** Tensor dims as exported: conv (out, in, ky, kx), dense (out, in), bias (out). */
  shape: number[];
}

export interface Layer {
  outSize: number;
  forward(x: Float64Array): Float64Array;
  backward(gradOut: Float64Array): Float64Array;
  params(): Param[];
}

function zeros(n: number): Float64Array {
  return new Float64Array(n);
}

/** He-style uniform init, U(-sqrt(6/fanIn), sqrt(6/fanIn)). Biases stay zero
 * so every channel starts sign-symmetric; a narrow net with a bad bias draw
 * can otherwise put a whole relu layer in the dead region at init. */
function initUniform(rng: Rng, data: Float64Array, fanIn: number): void {
  const bound = Math.sqrt(6 / fanIn);
  for (let i = 0; i < data.length; i++) data[i] = rng.uniform(-bound, bound);
}

/** 3x3-style same-padding convolution, stride 1, zero padding. */
export class Conv2dSame implements Layer {
  readonly outSize: number;
  readonly w: Param;
  readonly b: Param;
  private input: Float64Array = zeros(0);

  constructor(
    readonly h: number,
    readonly wIn: number,
    readonly cIn: number,
    readonly cOut: number,
    readonly k: number,
    rng: Rng,
    readonly name = "conv",
  ) {
    if (k % 2 === 0) throw new RangeError("kernel side must be odd");
    this.outSize = h * wIn * cOut;
    const fanIn = cIn * k * k;
    this.w = {
      name: `${name}.w`,
      data: zeros(cOut * cIn * k * k),
      grad: zeros(cOut * cIn * k * k),
      shape: [cOut, cIn, k, k],
    };
    this.b = { name: `${name}.b`, data: zeros(cOut), grad: zeros(cOut), shape: [cOut] };
    initUniform(rng, this.w.data, fanIn);
  }

  forward(x: Float64Array): Float64Array {
    const { h, wIn, cIn, cOut, k } = this;
    const p = k >> 1;
    this.input = x;
    const out = zeros(this.outSize);
    const wd = this.w.data;
    const bd = this.b.data;
    for (let y = 0; y < h; y++) {
      for (let xx = 0; xx < wIn; xx++) {
        const outBase = (y * wIn + xx) * cOut;
        for (let o = 0; o < cOut; o++) {
          let acc = bd[o];
          const wBase = o * cIn * k * k;
          for (let ky = 0; ky < k; ky++) {
            const sy = y + ky - p;
            if (sy < 0 || sy >= h) continue;
            for (let kx = 0; kx < k; kx++) {
              const sx = xx + kx - p;
              if (sx < 0 || sx >= wIn) continue;
              const inBase = (sy * wIn + sx) * cIn;
              const wRow = wBase + (ky * k + kx);
              for (let i = 0; i < cIn; i++) {
                acc += x[inBase + i] * wd[wRow + i * k * k];
              }
            }
          }
          out[outBase + o] = acc;
        }
      }
    }
    return out;
  }

  backward(gradOut: Float64Array): Float64Array {
    const { h, wIn, cIn, cOut, k } = this;
    const p = k >> 1;
    const x = this.input;
    const wd = this.w.data;
    const gw = this.w.grad;
    const gb = this.b.grad;
    const gx = zeros(x.length);
    for (let y = 0; y < h; y++) {
      for (let xx = 0; xx < wIn; xx++) {
        const outBase = (y * wIn + xx) * cOut;
        for (let o = 0; o < cOut; o++) {
          const g = gradOut[outBase + o];
          if (g === 0) continue;
          gb[o] += g;
          const wBase = o * cIn * k * k;
          for (let ky = 0; ky < k; ky++) {
            const sy = y + ky - p;
            if (sy < 0 || sy >= h) continue;
            for (let kx = 0; kx < k; kx++) {
              const sx = xx + kx - p;
              if (sx < 0 || sx >= wIn) continue;
              const inBase = (sy * wIn + sx) * cIn;
              const wRow = wBase + (ky * k + kx);
              for (let i = 0; i < cIn; i++) {
                gw[wRow + i * k * k] += g * x[inBase + i];
                gx[inBase + i] += g * wd[wRow + i * k * k];
              }
            }
          }
        }
      }
    }
    return gx;
  }

  params(): Param[] {
    return [this.w, this.b];
  }
}

export class MaxPool implements Layer {
  readonly outSize: number;
  private argmax: Int32Array;

  constructor(
    readonly h: number,
    readonly w: number,
    readonly c: number,
    readonly win: number,
  ) {
    if (h % win || w % win) throw new RangeError(`pool window ${win} does not divide ${h}x${w}`);
    this.outSize = (h / win) * (w / win) * c;
    this.argmax = new Int32Array(this.outSize);
  }

  forward(x: Float64Array): Float64Array {
    const { h, w, c, win } = this;
    const oh = h / win;
    const ow = w / win;
    const out = zeros(this.outSize);
    for (let y = 0; y < oh; y++) {
      for (let xx = 0; xx < ow; xx++) {
        for (let ch = 0; ch < c; ch++) {
          let best = -Infinity;
          let bestIdx = -1;
          for (let dy = 0; dy < win; dy++) {
            for (let dx = 0; dx < win; dx++) {
              const idx = ((y * win + dy) * w + (xx * win + dx)) * c + ch;
              if (x[idx] > best) {
                best = x[idx];
                bestIdx = idx;
              }
            }
          }
          const o = (y * ow + xx) * c + ch;
          out[o] = best;
          this.argmax[o] = bestIdx;
        }
      }
    }
    return out;
  }

  backward(gradOut: Float64Array): Float64Array {
    const gx = zeros(this.h * this.w * this.c);
    for (let o = 0; o < gradOut.length; o++) {
      gx[this.argmax[o]] += gradOut[o];
    }
    return gx;
  }

  params(): Param[] {
    return [];
  }
}

export class Relu implements Layer {
  private input: Float64Array = zeros(0);

  constructor(readonly outSize: number) {}

  forward(x: Float64Array): Float64Array {
    this.input = x;
    const out = zeros(x.length);
    for (let i = 0; i < x.length; i++) out[i] = x[i] > 0 ? x[i] : 0;
    return out;
  }

  backward(gradOut: Float64Array): Float64Array {
    const gx = zeros(gradOut.length);
    for (let i = 0; i < gradOut.length; i++) {
      gx[i] = this.input[i] > 0 ? gradOut[i] : 0;
    }
    return gx;
  }

  params(): Param[] {
    return [];
  }
}

export class Dense implements Layer {
  readonly outSize: number;
  readonly w: Param;
  readonly b: Param | null;
  private input: Float64Array = zeros(0);

  constructor(
    readonly nIn: number,
    readonly nOut: number,
    rng: Rng,
    bias = true,
    readonly name = "dense",
  ) {
    this.outSize = nOut;
    this.w = {
      name: `${name}.w`,
      data: zeros(nOut * nIn),
      grad: zeros(nOut * nIn),
      shape: [nOut, nIn],
    };
    initUniform(rng, this.w.data, nIn);
    if (bias) {
      this.b = { name: `${name}.b`, data: zeros(nOut), grad: zeros(nOut), shape: [nOut] };
    } else {
      this.b = null;
    }
  }

  forward(x: Float64Array): Float64Array {
    const { nIn, nOut } = this;
    this.input = x;
    const out = zeros(nOut);
    const wd = this.w.data;
    for (let o = 0; o < nOut; o++) {
      let acc = this.b ? this.b.data[o] : 0;
      const row = o * nIn;
      for (let i = 0; i < nIn; i++) acc += wd[row + i] * x[i];
      out[o] = acc;
    }
    return out;
  }

  backward(gradOut: Float64Array): Float64Array {
    const { nIn, nOut } = this;
    const x = this.input;
    const wd = this.w.data;
    const gw = this.w.grad;
    const gx = zeros(nIn);
    for (let o = 0; o < nOut; o++) {
      const g = gradOut[o];
      if (this.b) this.b.grad[o] += g;
      const row = o * nIn;
      for (let i = 0; i < nIn; i++) {
        gw[row + i] += g * x[i];
        gx[i] += g * wd[row + i];
      }
    }
    return gx;
  }

  params(): Param[] {
    return this.b ? [this.w, this.b] : [this.w];
  }
}

/** Linear layer stack; forward returns logits, backward takes dLoss/dLogits. */
export class Net {
  constructor(readonly layers: Layer[]) {}

  forward(image: Float64Array): Float64Array {
    let x = image;
    for (const layer of this.layers) x = layer.forward(x);
    return x;
  }

  backward(gradLogits: Float64Array): void {
    let g = gradLogits;
    for (let i = this.layers.length - 1; i >= 0; i--) g = this.layers[i].backward(g);
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const layer of this.layers) out.push(...layer.params());
    return out;
  }

  paramCount(): number {
    let n = 0;
    for (const p of this.params()) n += p.data.length;
    return n;
  }

  zeroGrad(): void {
    for (const p of this.params()) p.grad.fill(0);
  }
}

/** Adam with bias correction. Adaptive steps keep the narrow relu stacks out
 * of the all-dead region that plain SGD falls into on small noisy data. */
export class Adam {
  private t = 0;
  private m: Float64Array[];
  private v: Float64Array[];

  constructor(
    readonly net: Net,
    readonly lr: number,
    readonly beta1 = 0.9,
    readonly beta2 = 0.999,
    readonly eps = 1e-8,
  ) {
    this.m = net.params().map((p) => zeros(p.data.length));
    this.v = net.params().map((p) => zeros(p.data.length));
  }

  step(): void {
    this.t++;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    const ps = this.net.params();
    for (let j = 0; j < ps.length; j++) {
      const { data, grad } = ps[j];
      const m = this.m[j];
      const v = this.v[j];
      for (let i = 0; i < data.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * grad[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * grad[i] * grad[i];
        data[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    }
  }
}
