import { describe, expect, it } from 'vitest';

import {
  FLAG_COMPLEX,
  FrameReader,
  MSG_ERROR,
  MSG_REQUEST,
  MSG_RESPONSE,
  decodePayload,
  encodeImage,
  errorFrame,
  packFrame,
  parseFrameBody,
} from '../src/protocol.js';

// Golden frames shared byte-for-byte with the primary client's test suite.
const GOLDEN_REQUEST_HEX =
  '2800000053435231010000000200000002000000000000000000d03f' +
  '0000003f0000803f0000c03f00000040';
const GOLDEN_RESPONSE_HEX =
  '3800000053435231810100000200000002000000000000000000e83f' +
  '0000803f000080bf00000040000000c000004040000040c000008040000080c0';
const GOLDEN_ERROR_HEX =
  '2100000053435231ff00000000000000000000000000000000000000626164206672616d65';

describe('golden frames', () => {
  it('re-encodes the request frame bit-exactly', () => {
    const payload = encodeImage(new Float32Array([0.5, 1.0, 1.5, 2.0]));
    const frame = packFrame(MSG_REQUEST, 0, 2, 2, 0.25, payload);
    expect(frame.toString('hex')).toBe(GOLDEN_REQUEST_HEX);
  });

  it('re-encodes the complex response frame bit-exactly', () => {
    // scores (1,-1) (2,-2) (3,-3) (4,-4), interleaved re/im
    const payload = encodeImage(new Float32Array([1, -1, 2, -2, 3, -3, 4, -4]));
    const frame = packFrame(MSG_RESPONSE, FLAG_COMPLEX, 2, 2, 0.75, payload);
    expect(frame.toString('hex')).toBe(GOLDEN_RESPONSE_HEX);
  });

  it('re-encodes the error frame bit-exactly', () => {
    expect(errorFrame('bad frame').toString('hex')).toBe(GOLDEN_ERROR_HEX);
  });

  it('parses the golden request', () => {
    const body = Buffer.from(GOLDEN_REQUEST_HEX, 'hex').subarray(4);
    const frame = parseFrameBody(body);
    expect(frame.msgType).toBe(MSG_REQUEST);
    expect(frame.flags).toBe(0);
    expect(frame.height).toBe(2);
    expect(frame.width).toBe(2);
    expect(frame.sigma).toBe(0.25);
    expect(Array.from(decodePayload(frame))).toEqual([0.5, 1.0, 1.5, 2.0]);
  });

  it('parses the golden error message', () => {
    const body = Buffer.from(GOLDEN_ERROR_HEX, 'hex').subarray(4);
    const frame = parseFrameBody(body);
    expect(frame.msgType).toBe(MSG_ERROR);
    expect(frame.payload.toString('utf-8')).toBe('bad frame');
  });
});

describe('frame reader', () => {
  it('reassembles frames from arbitrary chunking', () => {
    const a = packFrame(MSG_REQUEST, 0, 1, 1, 0.5, encodeImage(new Float32Array([7])));
    const b = packFrame(MSG_REQUEST, 0, 1, 1, 0.25, encodeImage(new Float32Array([9])));
    const stream = Buffer.concat([a, b]);
    const reader = new FrameReader();
    const got: Buffer[] = [];
    for (let i = 0; i < stream.length; i += 3) {
      reader.feed(stream.subarray(i, Math.min(i + 3, stream.length)));
      let body;
      while ((body = reader.next()) !== null) got.push(Buffer.from(body));
    }
    expect(got).toHaveLength(2);
    expect(parseFrameBody(got[0]).sigma).toBe(0.5);
    expect(parseFrameBody(got[1]).sigma).toBe(0.25);
  });

  it('rejects implausible declared lengths', () => {
    const reader = new FrameReader();
    reader.feed(Buffer.from('this is not a frame at all', 'ascii'));
    expect(() => reader.next()).toThrow(/implausible/);
  });

  it('rejects bad magic', () => {
    const frame = Buffer.from(GOLDEN_REQUEST_HEX, 'hex');
    frame.write('NOPE', 4, 'ascii');
    expect(() => parseFrameBody(frame.subarray(4))).toThrow(/magic/);
  });

  it('rejects payload size mismatches', () => {
    const payload = encodeImage(new Float32Array([1, 2, 3])); // 3 values for a 2x2 image
    const frame = packFrame(MSG_REQUEST, 0, 2, 2, 0.5, payload);
    expect(() => decodePayload(parseFrameBody(frame.subarray(4)))).toThrow(/payload length/);
  });
});
