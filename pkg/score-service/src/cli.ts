#!/usr/bin/env node
/**
 * score-service: train a toy score denoiser and serve it over the wire protocol.
 *
 *   score-service train --data <dir> --out <model.json> [--mode poisson|complex]
 *                       [--epochs N] [--batch N] [--base-channels N]
 *                       [--sigma1 S] [--sigmaT S] [--levels N] [--lr R] [--seed N]
 *   score-service serve --model <model.json> (--stdio | --tcp <port>)
 */

import { loadModel, saveModel } from './net.js';
import { serveStdio, serveTcp } from './serve.js';
import { DEFAULT_OPTIONS, loadDataset, train, TrainOptions } from './train.js';

function parseArgs(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (!arg.startsWith('--')) throw new Error(`unexpected argument ${arg}`);
    const key = arg.slice(2);
    if (key === 'stdio') {
      out.set(key, 'true');
    } else {
      const value = argv[++i];
      if (value === undefined) throw new Error(`missing value for --${key}`);
      out.set(key, value);
    }
  }
  return out;
}

async function cmdTrain(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  const dataDir = args.get('data');
  const outPath = args.get('out');
  if (!dataDir || !outPath) {
    console.error('train requires --data <dir> and --out <model.json>');
    return 2;
  }
  const options: TrainOptions = {
    ...DEFAULT_OPTIONS,
    mode: (args.get('mode') ?? DEFAULT_OPTIONS.mode) as TrainOptions['mode'],
    epochs: Number(args.get('epochs') ?? DEFAULT_OPTIONS.epochs),
    batch: Number(args.get('batch') ?? DEFAULT_OPTIONS.batch),
    baseChannels: Number(args.get('base-channels') ?? DEFAULT_OPTIONS.baseChannels),
    sigma1: Number(args.get('sigma1') ?? DEFAULT_OPTIONS.sigma1),
    sigmaT: Number(args.get('sigmaT') ?? DEFAULT_OPTIONS.sigmaT),
    levels: Number(args.get('levels') ?? DEFAULT_OPTIONS.levels),
    lr: Number(args.get('lr') ?? DEFAULT_OPTIONS.lr),
    seed: Number(args.get('seed') ?? DEFAULT_OPTIONS.seed),
    minImages: Number(args.get('min-images') ?? DEFAULT_OPTIONS.minImages),
    log: (line) => console.error(line),
  };
  if (options.mode !== 'poisson' && options.mode !== 'complex') {
    console.error(`unknown mode ${options.mode}`);
    return 2;
  }
  const dataset = loadDataset(dataDir, options.mode);
  const net = train(dataset, options);
  await saveModel(net, outPath);
  console.error(`saved ${net.paramCount()} parameters to ${outPath}`);
  return 0;
}

async function cmdServe(argv: string[]): Promise<number> {
  const args = parseArgs(argv);
  const modelPath = args.get('model');
  if (!modelPath) {
    console.error('serve requires --model <model.json>');
    return 2;
  }
  const net = await loadModel(modelPath);
  if (args.get('stdio')) {
    serveStdio(net);
    return await new Promise<number>((resolve) => {
      process.stdin.on('end', () => resolve(0));
      process.stdin.on('close', () => resolve(0));
    });
  }
  const tcp = args.get('tcp');
  if (tcp) {
    serveTcp(net, Number(tcp));
    console.error(`serving ${net.config.mode} scores on tcp port ${tcp}`);
    return await new Promise<number>(() => undefined); // runs until killed
  }
  console.error('serve requires --stdio or --tcp <port>');
  return 2;
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === 'train') return await cmdTrain(rest);
    if (command === 'serve') return await cmdServe(rest);
    console.error('usage: score-service train|serve ...');
    return 2;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 2;
  }
}

main().then((code) => {
  if (code !== 0) process.exit(code);
});
