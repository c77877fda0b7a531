/**
 * Tiny sigma-conditioned convolutional denoiser with hand-rolled backprop.
 *
 * U-shaped: two 3x3 conv+relu stages, 2x average-pool, two more conv+relu
 * stages at half resolution, nearest upsample, skip concatenation, one fused
 * conv+relu, linear 3x3 head. Sigma conditioning is a constant extra input
 * channel. Default base width 32 gives ~94k parameters.
 *
 * The network regresses the sigma^2-scaled target (bounded across noise
 * levels); the served score divides the raw output by sigma^2. Per-level
 * loss weighting does not move the per-(input, sigma) conditional mean, so
 * the trained score still approximates the annealed-score objective.
 */

export interface Tensor {
  c: number;
  h: number;
  w: number;
  data: Float32Array;
}

export function tensor(c: number, h: number, w: number): Tensor {
  return { c, h, w, data: new Float32Array(c * h * w) };
}

/** Deterministic PRNG (mulberry32) so weight init is reproducible. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussian(rand: () => number): number {
  const u = Math.max(rand(), 1e-12);
  const v = rand();
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
}

export class Param {
  data: Float32Array;
  grad: Float32Array;
  m: Float32Array;
  v: Float32Array;

  constructor(size: number) {
    this.data = new Float32Array(size);
    this.grad = new Float32Array(size);
    this.m = new Float32Array(size);
    this.v = new Float32Array(size);
  }
}

export class Conv3x3 {
  inC: number;
  outC: number;
  weight: Param;
  bias: Param;
  private cachedInput: Tensor | null = null;

  constructor(inC: number, outC: number, rand: () => number) {
    this.inC = inC;
    this.outC = outC;
    this.weight = new Param(outC * inC * 9);
    this.bias = new Param(outC);
    const scale = 1 / Math.sqrt(inC * 9);
    for (let i = 0; i < this.weight.data.length; i++) {
      this.weight.data[i] = gaussian(rand) * scale;
    }
  }

  forward(x: Tensor): Tensor {
    const { h, w } = x;
    const y = tensor(this.outC, h, w);
    const wd = this.weight.data;
    const xd = x.data;
    for (let oc = 0; oc < this.outC; oc++) {
      const b = this.bias.data[oc];
      for (let iy = 0; iy < h; iy++) {
        for (let ix = 0; ix < w; ix++) {
          let acc = b;
          for (let ic = 0; ic < this.inC; ic++) {
            const wBase = (oc * this.inC + ic) * 9;
            const xBase = ic * h * w;
            for (let ky = 0; ky < 3; ky++) {
              const yy = iy + ky - 1;
              if (yy < 0 || yy >= h) continue;
              for (let kx = 0; kx < 3; kx++) {
                const xx = ix + kx - 1;
                if (xx < 0 || xx >= w) continue;
                acc += wd[wBase + ky * 3 + kx] * xd[xBase + yy * w + xx];
              }
            }
          }
          y.data[(oc * h + iy) * w + ix] = acc;
        }
      }
    }
    this.cachedInput = x;
    return y;
  }

  backward(gy: Tensor): Tensor {
    const x = this.cachedInput!;
    const { h, w } = x;
    const gx = tensor(this.inC, h, w);
    const wd = this.weight.data;
    const gw = this.weight.grad;
    const gb = this.bias.grad;
    for (let oc = 0; oc < this.outC; oc++) {
      for (let iy = 0; iy < h; iy++) {
        for (let ix = 0; ix < w; ix++) {
          const g = gy.data[(oc * h + iy) * w + ix];
          if (g === 0) continue;
          gb[oc] += g;
          for (let ic = 0; ic < this.inC; ic++) {
            const wBase = (oc * this.inC + ic) * 9;
            const xBase = ic * h * w;
            for (let ky = 0; ky < 3; ky++) {
              const yy = iy + ky - 1;
              if (yy < 0 || yy >= h) continue;
              for (let kx = 0; kx < 3; kx++) {
                const xx = ix + kx - 1;
                if (xx < 0 || xx >= w) continue;
                const idx = xBase + yy * w + xx;
                gw[wBase + ky * 3 + kx] += g * x.data[idx];
                gx.data[idx] += g * wd[wBase + ky * 3 + kx];
              }
            }
          }
        }
      }
    }
    return gx;
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }
}

export class Relu {
  private mask: Uint8Array = new Uint8Array(0);

  forward(x: Tensor): Tensor {
    const y = tensor(x.c, x.h, x.w);
    this.mask = new Uint8Array(x.data.length);
    for (let i = 0; i < x.data.length; i++) {
      if (x.data[i] > 0) {
        y.data[i] = x.data[i];
        this.mask[i] = 1;
      }
    }
    return y;
  }

  backward(gy: Tensor): Tensor {
    const gx = tensor(gy.c, gy.h, gy.w);
    for (let i = 0; i < gy.data.length; i++) {
      if (this.mask[i]) gx.data[i] = gy.data[i];
    }
    return gx;
  }
}

export function avgPool2(x: Tensor): Tensor {
  const oh = x.h >> 1;
  const ow = x.w >> 1;
  const y = tensor(x.c, oh, ow);
  for (let c = 0; c < x.c; c++) {
    for (let oy = 0; oy < oh; oy++) {
      for (let ox = 0; ox < ow; ox++) {
        const base = c * x.h * x.w;
        const iy = 2 * oy;
        const ix = 2 * ox;
        y.data[(c * oh + oy) * ow + ox] =
          0.25 *
          (x.data[base + iy * x.w + ix] +
            x.data[base + iy * x.w + ix + 1] +
            x.data[base + (iy + 1) * x.w + ix] +
            x.data[base + (iy + 1) * x.w + ix + 1]);
      }
    }
  }
  return y;
}

export function avgPool2Backward(gy: Tensor, h: number, w: number): Tensor {
  const gx = tensor(gy.c, h, w);
  for (let c = 0; c < gy.c; c++) {
    for (let oy = 0; oy < gy.h; oy++) {
      for (let ox = 0; ox < gy.w; ox++) {
        const g = 0.25 * gy.data[(c * gy.h + oy) * gy.w + ox];
        const base = c * h * w;
        const iy = 2 * oy;
        const ix = 2 * ox;
        gx.data[base + iy * w + ix] += g;
        gx.data[base + iy * w + ix + 1] += g;
        gx.data[base + (iy + 1) * w + ix] += g;
        gx.data[base + (iy + 1) * w + ix + 1] += g;
      }
    }
  }
  return gx;
}

export function upsample2(x: Tensor): Tensor {
  const y = tensor(x.c, x.h * 2, x.w * 2);
  for (let c = 0; c < x.c; c++) {
    for (let iy = 0; iy < x.h; iy++) {
      for (let ix = 0; ix < x.w; ix++) {
        const v = x.data[(c * x.h + iy) * x.w + ix];
        const base = c * y.h * y.w;
        y.data[base + 2 * iy * y.w + 2 * ix] = v;
        y.data[base + 2 * iy * y.w + 2 * ix + 1] = v;
        y.data[base + (2 * iy + 1) * y.w + 2 * ix] = v;
        y.data[base + (2 * iy + 1) * y.w + 2 * ix + 1] = v;
      }
    }
  }
  return y;
}

export function upsample2Backward(gy: Tensor): Tensor {
  const gx = tensor(gy.c, gy.h >> 1, gy.w >> 1);
  for (let c = 0; c < gx.c; c++) {
    for (let iy = 0; iy < gx.h; iy++) {
      for (let ix = 0; ix < gx.w; ix++) {
        const base = c * gy.h * gy.w;
        gx.data[(c * gx.h + iy) * gx.w + ix] =
          gy.data[base + 2 * iy * gy.w + 2 * ix] +
          gy.data[base + 2 * iy * gy.w + 2 * ix + 1] +
          gy.data[base + (2 * iy + 1) * gy.w + 2 * ix] +
          gy.data[base + (2 * iy + 1) * gy.w + 2 * ix + 1];
      }
    }
  }
  return gx;
}

export function concatChannels(a: Tensor, b: Tensor): Tensor {
  const y = tensor(a.c + b.c, a.h, a.w);
  y.data.set(a.data, 0);
  y.data.set(b.data, a.data.length);
  return y;
}

export function splitChannels(g: Tensor, cA: number): [Tensor, Tensor] {
  const a = tensor(cA, g.h, g.w);
  const b = tensor(g.c - cA, g.h, g.w);
  a.data.set(g.data.subarray(0, a.data.length));
  b.data.set(g.data.subarray(a.data.length));
  return [a, b];
}

export type Mode = 'poisson' | 'complex';

export interface ModelConfig {
  mode: Mode;
  baseChannels: number;
  seed: number;
}

/** Signal channels only; the sigma channel is conditioning plumbing. */
export function signalChannels(mode: Mode): number {
  return mode === 'complex' ? 2 : 1;
}

export class DenoiserNet {
  config: ModelConfig;
  enc1: Conv3x3;
  enc2: Conv3x3;
  mid1: Conv3x3;
  mid2: Conv3x3;
  dec: Conv3x3;
  head: Conv3x3;
  private r1 = new Relu();
  private r2 = new Relu();
  private r3 = new Relu();
  private r4 = new Relu();
  private r5 = new Relu();
  private skip: Tensor | null = null;
  private poolIn: { h: number; w: number } = { h: 0, w: 0 };

  constructor(config: ModelConfig) {
    this.config = config;
    const f = config.baseChannels;
    const inC = signalChannels(config.mode) + 1;
    const outC = signalChannels(config.mode);
    const rand = rng(config.seed);
    this.enc1 = new Conv3x3(inC, f, rand);
    this.enc2 = new Conv3x3(f, f, rand);
    this.mid1 = new Conv3x3(f, 2 * f, rand);
    this.mid2 = new Conv3x3(2 * f, 2 * f, rand);
    this.dec = new Conv3x3(3 * f, f, rand);
    this.head = new Conv3x3(f, outC, rand);
  }

  /** Raw (sigma^2-scaled) prediction; input already carries the sigma channel. */
  forward(x: Tensor): Tensor {
    if (x.h % 2 !== 0 || x.w % 2 !== 0) {
      throw new Error(`image dims must be even, got ${x.h}x${x.w}`);
    }
    const e = this.r2.forward(this.enc2.forward(this.r1.forward(this.enc1.forward(x))));
    this.skip = e;
    this.poolIn = { h: e.h, w: e.w };
    const p = avgPool2(e);
    const m = this.r4.forward(this.mid2.forward(this.r3.forward(this.mid1.forward(p))));
    const u = upsample2(m);
    const d = this.r5.forward(this.dec.forward(concatChannels(u, e)));
    return this.head.forward(d);
  }

  backward(gy: Tensor): void {
    const gd = this.dec.backward(this.r5.backward(this.head.backward(gy)));
    const [gu, gSkip] = splitChannels(gd, 2 * this.config.baseChannels);
    const gm = this.mid1.backward(
      this.r3.backward(this.mid2.backward(this.r4.backward(upsample2Backward(gu)))),
    );
    const ge = avgPool2Backward(gm, this.poolIn.h, this.poolIn.w);
    for (let i = 0; i < ge.data.length; i++) ge.data[i] += gSkip.data[i];
    this.enc1.backward(this.r1.backward(this.enc2.backward(this.r2.backward(ge))));
  }

  params(): Param[] {
    return [this.enc1, this.enc2, this.mid1, this.mid2, this.dec, this.head].flatMap((l) =>
      l.params(),
    );
  }

  paramCount(): number {
    return this.params().reduce((n, p) => n + p.data.length, 0);
  }

  zeroGrad(): void {
    for (const p of this.params()) p.grad.fill(0);
  }

  /**
   * Score for one image at noise level sigma: raw prediction / sigma^2.
   * `signal` holds the signal channels (1 or 2 planes, row-major).
   */
  score(signal: Float32Array, h: number, w: number, sigma: number): Float32Array {
    const sc = signalChannels(this.config.mode);
    const x = tensor(sc + 1, h, w);
    x.data.set(signal.subarray(0, sc * h * w));
    x.data.fill(sigma, sc * h * w);
    const raw = this.forward(x);
    const out = new Float32Array(sc * h * w);
    const inv = 1 / (sigma * sigma);
    for (let i = 0; i < out.length; i++) out[i] = raw.data[i] * inv;
    return out;
  }
}

export class Adam {
  lr: number;
  beta1 = 0.9;
  beta2 = 0.999;
  eps = 1e-8;
  private t = 0;

  constructor(lr = 1e-3) {
    this.lr = lr;
  }

  step(params: Param[]): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    for (const p of params) {
      for (let i = 0; i < p.data.length; i++) {
        const g = p.grad[i];
        p.m[i] = this.beta1 * p.m[i] + (1 - this.beta1) * g;
        p.v[i] = this.beta2 * p.v[i] + (1 - this.beta2) * g * g;
        p.data[i] -= (this.lr * (p.m[i] / c1)) / (Math.sqrt(p.v[i] / c2) + this.eps);
      }
    }
  }
}

interface SavedModel {
  config: ModelConfig;
  configHash: string;
  weights: { [name: string]: string };
}

function toBase64(arr: Float32Array): string {
  return Buffer.from(arr.buffer, arr.byteOffset, arr.byteLength).toString('base64');
}

function fromBase64(text: string): Float32Array {
  const buf = Buffer.from(text, 'base64');
  return new Float32Array(buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.length));
}

function layerNames(net: DenoiserNet): [string, Param][] {
  const entries: [string, Param][] = [];
  const layers: [string, Conv3x3][] = [
    ['enc1', net.enc1],
    ['enc2', net.enc2],
    ['mid1', net.mid1],
    ['mid2', net.mid2],
    ['dec', net.dec],
    ['head', net.head],
  ];
  for (const [name, layer] of layers) {
    entries.push([`${name}.weight`, layer.weight]);
    entries.push([`${name}.bias`, layer.bias]);
  }
  return entries;
}

export async function configHash(config: ModelConfig): Promise<string> {
  const { createHash } = await import('node:crypto');
  return createHash('sha256').update(JSON.stringify(config)).digest('hex');
}

export async function saveModel(net: DenoiserNet, path: string): Promise<void> {
  const { writeFileSync } = await import('node:fs');
  const weights: { [name: string]: string } = {};
  for (const [name, param] of layerNames(net)) {
    weights[name] = toBase64(param.data);
  }
  const saved: SavedModel = {
    config: net.config,
    configHash: await configHash(net.config),
    weights,
  };
  writeFileSync(path, JSON.stringify(saved));
}

export async function loadModel(path: string): Promise<DenoiserNet> {
  const { readFileSync } = await import('node:fs');
  const saved: SavedModel = JSON.parse(readFileSync(path, 'utf-8'));
  const net = new DenoiserNet(saved.config);
  for (const [name, param] of layerNames(net)) {
    const data = fromBase64(saved.weights[name]);
    if (data.length !== param.data.length) {
      throw new Error(`weight ${name} has ${data.length} values, expected ${param.data.length}`);
    }
    param.data.set(data);
  }
  return net;
}
