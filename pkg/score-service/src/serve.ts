/**
 * Protocol server: answers score requests over stdio or TCP.
 *
 * One request in flight per connection. A malformed frame gets a 0xFF error
 * frame and the connection stays open; a corrupted length prefix also gets
 * an error frame, after which the stream buffer is reset.
 */

import { createServer, Server, Socket } from 'node:net';

import { DenoiserNet, signalChannels } from './net.js';
import {
  FLAG_COMPLEX,
  Frame,
  FrameReader,
  MSG_REQUEST,
  MSG_RESPONSE,
  decodePayload,
  encodeImage,
  errorFrame,
  isComplex,
  packFrame,
  parseFrameBody,
} from './protocol.js';

export function handleRequest(net: DenoiserNet, body: Buffer): Buffer {
  let frame: Frame;
  try {
    frame = parseFrameBody(body);
  } catch (err) {
    return errorFrame(`malformed frame: ${(err as Error).message}`);
  }
  if (frame.msgType !== MSG_REQUEST) {
    return errorFrame(`unexpected msg_type 0x${frame.msgType.toString(16)}`);
  }
  const wantComplex = net.config.mode === 'complex';
  if (isComplex(frame) !== wantComplex) {
    return errorFrame(`model mode is ${net.config.mode}; complex flag mismatch`);
  }
  if (!(frame.sigma > 0) || !Number.isFinite(frame.sigma)) {
    return errorFrame(`sigma must be positive and finite, got ${frame.sigma}`);
  }
  const { height: h, width: w } = frame;
  if (h === 0 || w === 0 || h % 2 !== 0 || w % 2 !== 0) {
    return errorFrame(`image dims must be positive and even, got ${h}x${w}`);
  }
  let values: Float32Array;
  try {
    values = decodePayload(frame);
  } catch (err) {
    return errorFrame((err as Error).message);
  }
  const pixels = h * w;
  const sc = signalChannels(net.config.mode);
  const signal = new Float32Array(sc * pixels);
  if (wantComplex) {
    for (let p = 0; p < pixels; p++) {
      signal[p] = values[2 * p];
      signal[pixels + p] = values[2 * p + 1];
    }
  } else {
    signal.set(values);
  }
  const score = net.score(signal, h, w, frame.sigma);
  let payload: Float32Array;
  if (wantComplex) {
    payload = new Float32Array(2 * pixels);
    for (let p = 0; p < pixels; p++) {
      payload[2 * p] = score[p];
      payload[2 * p + 1] = score[pixels + p];
    }
  } else {
    payload = score;
  }
  return packFrame(
    MSG_RESPONSE,
    wantComplex ? FLAG_COMPLEX : 0,
    h,
    w,
    frame.sigma,
    encodeImage(payload),
  );
}

function attach(net: DenoiserNet, readable: NodeJS.ReadableStream, write: (b: Buffer) => void) {
  const reader = new FrameReader();
  readable.on('data', (chunk: Buffer) => {
    reader.feed(chunk);
    while (true) {
      let body: Buffer | null;
      try {
        body = reader.next();
      } catch (err) {
        write(errorFrame((err as Error).message));
        reader.reset();
        break;
      }
      if (body === null) break;
      write(handleRequest(net, body));
    }
  });
}

export function serveStdio(net: DenoiserNet): void {
  attach(net, process.stdin, (b) => process.stdout.write(b));
}

export function serveTcp(net: DenoiserNet, port: number): Server {
  const server = createServer((socket: Socket) => {
    attach(net, socket, (b) => socket.write(b));
  });
  server.listen(port);
  return server;
}
