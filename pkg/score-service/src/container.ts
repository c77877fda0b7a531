/**
 * Reader for the primary's CVL1 array container (training data comes in as
 * these files). Little-endian: magic "CVL1", dtype u8 (0 = f32 real,
 * 1 = f32 complex interleaved, 2 = u16), height u32, width u32, count u32,
 * then the payload row-major.
 */

import { readFileSync } from 'node:fs';

export const DTYPE_F32 = 0;
export const DTYPE_C64 = 1;
export const DTYPE_U16 = 2;

export interface ImageStack {
  dtype: number;
  height: number;
  width: number;
  count: number;
  /** f32 real: h*w per image; complex: 2*h*w (re, im interleaved); u16 widened to f32. */
  images: Float32Array[];
}

export function loadContainer(path: string): ImageStack {
  const raw = readFileSync(path);
  if (raw.length < 17) throw new Error(`${path}: truncated header`);
  if (raw.subarray(0, 4).toString('ascii') !== 'CVL1') {
    throw new Error(`${path}: bad magic`);
  }
  const dtype = raw.readUInt8(4);
  const height = raw.readUInt32LE(5);
  const width = raw.readUInt32LE(9);
  const count = raw.readUInt32LE(13);
  const pixels = height * width;
  const perImage = dtype === DTYPE_C64 ? 2 * pixels : pixels;
  const bytesPer = dtype === DTYPE_U16 ? 2 : 4;
  if (raw.length !== 17 + count * perImage * bytesPer) {
    throw new Error(`${path}: payload size does not match header`);
  }
  const images: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const img = new Float32Array(perImage);
    const base = 17 + i * perImage * bytesPer;
    if (dtype === DTYPE_U16) {
      for (let p = 0; p < perImage; p++) img[p] = raw.readUInt16LE(base + 2 * p);
    } else {
      for (let p = 0; p < perImage; p++) img[p] = raw.readFloatLE(base + 4 * p);
    }
    images.push(img);
  }
  return { dtype, height, width, count, images };
}
