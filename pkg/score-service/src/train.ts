/**
 * Training loop for the score denoiser.
 *
 * Each step draws an image and a noise level from the annealing schedule,
 * corrupts per the mode's convention (real: x' = x + sqrt(x) sigma n;
 * complex: independent Gaussian of std sigma/2 on Re and Im), and regresses
 * the sigma^2-scaled target. The served score divides by sigma^2 again, so
 * the endpoint approximates the annealed prior score at every level.
 */

import { readdirSync } from 'node:fs';
import { join } from 'node:path';

import { DTYPE_C64, loadContainer } from './container.js';
import { Adam, DenoiserNet, Mode, ModelConfig, rng, signalChannels, tensor } from './net.js';

export interface Dataset {
  height: number;
  width: number;
  /** one entry per image: signal planes (1 or 2 of h*w), channel-major */
  images: Float32Array[];
}

export interface TrainOptions {
  mode: Mode;
  epochs: number;
  batch: number;
  baseChannels: number;
  sigma1: number;
  sigmaT: number;
  levels: number;
  lr: number;
  seed: number;
  minImages: number;
  log?: (line: string) => void;
}

export const DEFAULT_OPTIONS: TrainOptions = {
  mode: 'poisson',
  epochs: 10,
  batch: 8,
  baseChannels: 32,
  sigma1: 0.2,
  sigmaT: 0.01,
  levels: 10,
  lr: 1e-3,
  seed: 1,
  minImages: 64,
};

export function loadDataset(dir: string, mode: Mode): Dataset {
  const files = readdirSync(dir)
    .filter((f) => f.endsWith('.cvl'))
    .sort();
  if (files.length === 0) throw new Error(`no .cvl files in ${dir}`);
  const images: Float32Array[] = [];
  let height = 0;
  let width = 0;
  for (const file of files) {
    const stack = loadContainer(join(dir, file));
    if (height === 0) {
      height = stack.height;
      width = stack.width;
    } else if (stack.height !== height || stack.width !== width) {
      throw new Error(`${file}: dims ${stack.height}x${stack.width} differ from ${height}x${width}`);
    }
    const wantComplex = mode === 'complex';
    if (wantComplex !== (stack.dtype === DTYPE_C64)) {
      throw new Error(`${file}: dtype does not match mode ${mode}`);
    }
    for (const img of stack.images) {
      if (wantComplex) {
        // interleaved (re, im) -> two channel planes
        const planes = new Float32Array(2 * height * width);
        for (let p = 0; p < height * width; p++) {
          planes[p] = img[2 * p];
          planes[height * width + p] = img[2 * p + 1];
        }
        images.push(planes);
      } else {
        images.push(img);
      }
    }
  }
  return { height, width, images };
}

export function geometricLevels(sigma1: number, sigmaT: number, count: number): number[] {
  if (count === 1) return [sigma1];
  const out: number[] = [];
  for (let i = 0; i < count; i++) {
    out.push(sigma1 * Math.pow(sigmaT / sigma1, i / (count - 1)));
  }
  return out;
}

function gaussianFrom(rand: () => number): number {
  const u = Math.max(rand(), 1e-12);
  return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * rand());
}

/** Corrupt one image and return [input planes, raw target planes]. */
export function corrupt(
  signal: Float32Array,
  pixels: number,
  mode: Mode,
  sigma: number,
  rand: () => number,
): [Float32Array, Float32Array] {
  const sc = mode === 'complex' ? 2 : 1;
  const noisy = new Float32Array(sc * pixels);
  const target = new Float32Array(sc * pixels);
  if (mode === 'poisson') {
    for (let p = 0; p < pixels; p++) {
      const x = Math.max(signal[p], 1e-3);
      const xn = signal[p] + Math.sqrt(x) * sigma * gaussianFrom(rand);
      noisy[p] = xn;
      target[p] = (signal[p] - xn) / x; // sigma^2 * (x - x') / (sigma^2 x)
    }
  } else {
    const half = sigma / 2; // quarter convention: variance sigma^2/4 per component
    for (let p = 0; p < sc * pixels; p++) {
      const on = signal[p] + half * gaussianFrom(rand);
      noisy[p] = on;
      target[p] = signal[p] - on; // sigma^2 * (o - o') / sigma^2
    }
  }
  return [noisy, target];
}

export function train(dataset: Dataset, options: TrainOptions): DenoiserNet {
  if (dataset.images.length < options.minImages) {
    throw new Error(
      `dataset has ${dataset.images.length} images, need at least ${options.minImages}`,
    );
  }
  const config: ModelConfig = {
    mode: options.mode,
    baseChannels: options.baseChannels,
    seed: options.seed,
  };
  const net = new DenoiserNet(config);
  if (options.epochs === 0) return net;

  const { height: h, width: w } = dataset;
  const pixels = h * w;
  const sc = signalChannels(options.mode);
  const levels = geometricLevels(options.sigma1, options.sigmaT, options.levels);
  const optimizer = new Adam(options.lr);
  const rand = rng(options.seed ^ 0x5f3759df);
  const stepsPerEpoch = Math.ceil(dataset.images.length / options.batch);

  for (let epoch = 0; epoch < options.epochs; epoch++) {
    let epochLoss = 0;
    for (let step = 0; step < stepsPerEpoch; step++) {
      net.zeroGrad();
      let loss = 0;
      for (let b = 0; b < options.batch; b++) {
        const img = dataset.images[Math.floor(rand() * dataset.images.length)];
        const sigma = levels[Math.floor(rand() * levels.length)];
        const [noisy, target] = corrupt(img, pixels, options.mode, sigma, rand);
        const x = tensor(sc + 1, h, w);
        x.data.set(noisy);
        x.data.fill(sigma, sc * pixels);
        const pred = net.forward(x);
        const gy = tensor(sc, h, w);
        const scale = 2 / (sc * pixels * options.batch);
        for (let i = 0; i < sc * pixels; i++) {
          const diff = pred.data[i] - target[i];
          loss += (diff * diff) / (sc * pixels * options.batch);
          gy.data[i] = scale * diff;
        }
        net.backward(gy);
      }
      optimizer.step(net.params());
      epochLoss += loss / stepsPerEpoch;
    }
    options.log?.(`epoch ${epoch + 1}/${options.epochs} loss ${epochLoss.toExponential(3)}`);
  }
  return net;
}
