/**
 * Score wire protocol: length-prefixed frames over a byte stream.
 *
 * Layout (little-endian):
 *   u32  frame length (header + payload, excluding this prefix)
 *   4s   magic "SCR1"
 *   u8   msg_type: 0x01 request / 0x81 response / 0xFF error
 *   u8   flags: bit0 = complex payload
 *   u16  reserved (zero)
 *   u32  height
 *   u32  width
 *   f64  sigma
 *   ...  payload: f32 values, row-major; complex interleaves (re, im).
 *        Error frames carry a UTF-8 message instead.
 */

export const MAGIC = Buffer.from('SCR1', 'ascii');
export const MSG_REQUEST = 0x01;
export const MSG_RESPONSE = 0x81;
export const MSG_ERROR = 0xff;
export const FLAG_COMPLEX = 0x01;
export const HEADER_SIZE = 24;
export const MAX_FRAME_BYTES = 1 << 28;

export interface Frame {
  msgType: number;
  flags: number;
  height: number;
  width: number;
  sigma: number;
  payload: Buffer;
}

export function isComplex(frame: Frame): boolean {
  return (frame.flags & FLAG_COMPLEX) !== 0;
}

export function packFrame(
  msgType: number,
  flags: number,
  height: number,
  width: number,
  sigma: number,
  payload: Buffer,
): Buffer {
  const header = Buffer.alloc(4 + HEADER_SIZE);
  header.writeUInt32LE(HEADER_SIZE + payload.length, 0);
  MAGIC.copy(header, 4);
  header.writeUInt8(msgType, 8);
  header.writeUInt8(flags, 9);
  header.writeUInt16LE(0, 10);
  header.writeUInt32LE(height, 12);
  header.writeUInt32LE(width, 16);
  header.writeDoubleLE(sigma, 20);
  return Buffer.concat([header, payload]);
}

export function parseFrameBody(body: Buffer): Frame {
  if (body.length < HEADER_SIZE) {
    throw new Error(`frame body too short: ${body.length} bytes`);
  }
  if (!body.subarray(0, 4).equals(MAGIC)) {
    throw new Error(`bad frame magic ${body.subarray(0, 4).toString('hex')}`);
  }
  return {
    msgType: body.readUInt8(4),
    flags: body.readUInt8(5),
    height: body.readUInt32LE(8),
    width: body.readUInt32LE(12),
    sigma: body.readDoubleLE(16),
    payload: body.subarray(HEADER_SIZE),
  };
}

export function errorFrame(message: string): Buffer {
  return packFrame(MSG_ERROR, 0, 0, 0, 0, Buffer.from(message, 'utf-8'));
}

/** Row-major f32 payload; complex interleaves (re, im) per pixel. */
export function encodeImage(values: Float32Array): Buffer {
  return Buffer.from(values.buffer, values.byteOffset, values.byteLength);
}

export function decodePayload(frame: Frame): Float32Array {
  const perPixel = isComplex(frame) ? 8 : 4;
  const expected = frame.height * frame.width * perPixel;
  if (frame.payload.length !== expected) {
    throw new Error(
      `payload length ${frame.payload.length} does not match ` +
        `${frame.height}x${frame.width} (expected ${expected})`,
    );
  }
  return new Float32Array(
    frame.payload.buffer.slice(
      frame.payload.byteOffset,
      frame.payload.byteOffset + frame.payload.length,
    ),
  );
}

/**
 * Incremental frame splitter: feed arbitrary chunks, get whole frame bodies.
 * A declared length outside sane bounds poisons the stream (the caller should
 * answer with an error frame and reset).
 */
export class FrameReader {
  private buffer: Buffer = Buffer.alloc(0);

  feed(chunk: Buffer): void {
    this.buffer = Buffer.concat([this.buffer, chunk]);
  }

  /** Returns the next complete frame body, or null if more bytes are needed. */
  next(): Buffer | null {
    if (this.buffer.length < 4) return null;
    const length = this.buffer.readUInt32LE(0);
    if (length < HEADER_SIZE || length > MAX_FRAME_BYTES) {
      throw new Error(`implausible declared frame length ${length}`);
    }
    if (this.buffer.length < 4 + length) return null;
    const body = this.buffer.subarray(4, 4 + length);
    this.buffer = this.buffer.subarray(4 + length);
    return body;
  }

  reset(): void {
    this.buffer = Buffer.alloc(0);
  }
}
