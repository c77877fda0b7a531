import { writeFileSync } from 'node:fs';

/** Write a CVL1 container of real f32 images (the primary's array format). */
export function writeRealContainer(
  path: string,
  images: Float32Array[],
  height: number,
  width: number,
): void {
  const header = Buffer.alloc(17);
  header.write('CVL1', 0, 'ascii');
  header.writeUInt8(0, 4);
  header.writeUInt32LE(height, 5);
  header.writeUInt32LE(width, 9);
  header.writeUInt32LE(images.length, 13);
  const chunks = [header];
  for (const img of images) {
    chunks.push(Buffer.from(img.buffer, img.byteOffset, img.byteLength));
  }
  writeFileSync(path, Buffer.concat(chunks));
}

/** Two separated Gaussian bumps on an 8x8 grid, strictly positive. */
export function twoBlobAtoms(): { atoms: Float32Array[]; height: number; width: number } {
  const h = 8;
  const w = 8;
  const make = (cy: number, cx: number) => {
    const img = new Float32Array(h * w);
    for (let y = 0; y < h; y++) {
      for (let x = 0; x < w; x++) {
        const d2 = (y - cy) ** 2 + (x - cx) ** 2;
        img[y * w + x] = 0.15 + 0.7 * Math.exp(-d2 / (2 * 1.5 ** 2));
      }
    }
    return img;
  };
  return { atoms: [make(2, 2), make(5, 5)], height: h, width: w };
}

/**
 * Exact score of the discrete mixture smoothed with signal-dependent noise
 * (variance sigma^2 * atom per pixel) -- the same analytic prior the primary
 * implements, used here as the comparison oracle.
 */
export function mixtureScore(x: Float32Array, sigma: number, atoms: Float32Array[]): Float32Array {
  const n = x.length;
  const lls = atoms.map((a) => {
    let ll = 0;
    for (let p = 0; p < n; p++) {
      const v = sigma * sigma * a[p];
      ll += -0.5 * Math.log(2 * Math.PI * v) - ((x[p] - a[p]) ** 2) / (2 * v);
    }
    return ll;
  });
  const peak = Math.max(...lls);
  const weights = lls.map((ll) => Math.exp(ll - peak));
  const total = weights.reduce((s, v) => s + v, 0);
  const score = new Float32Array(n);
  for (let i = 0; i < atoms.length; i++) {
    const pi = weights[i] / total;
    for (let p = 0; p < n; p++) {
      score[p] += (pi * (atoms[i][p] - x[p])) / (sigma * sigma * atoms[i][p]);
    }
  }
  return score;
}
