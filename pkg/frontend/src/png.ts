/** Dependency-free 8-bit grayscale PNG codec for lossless mask export.
 *
 * The encoder writes stored (uncompressed) deflate blocks, so the stream is
 * valid zlib without needing a compressor in the browser; any standard PNG
 * reader accepts it. The decoder handles exactly what the encoder emits and
 * rejects everything else loudly, since results from the server are decoded
 * by the browser itself, not by this module.
 */

import { MaskRaster } from "./raster.js";

const SIGNATURE = [137, 80, 78, 71, 13, 10, 26, 10];
const MAX_STORED_BLOCK = 65535;

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let c = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function adler32(bytes: Uint8Array): number {
  let a = 1;
  let b = 0;
  for (let i = 0; i < bytes.length; i++) {
    a = (a + bytes[i]) % 65521;
    b = (b + a) % 65521;
  }
  return ((b << 16) | a) >>> 0;
}

class ByteWriter {
  private parts: Uint8Array[] = [];

  push(bytes: number[] | Uint8Array): void {
    this.parts.push(bytes instanceof Uint8Array ? bytes : Uint8Array.from(bytes));
  }

  pushU32(value: number): void {
    this.push([(value >>> 24) & 0xff, (value >>> 16) & 0xff, (value >>> 8) & 0xff, value & 0xff]);
  }

  concat(): Uint8Array {
    const total = this.parts.reduce((n, p) => n + p.length, 0);
    const out = new Uint8Array(total);
    let at = 0;
    for (const part of this.parts) {
      out.set(part, at);
      at += part.length;
    }
    return out;
  }
}

function chunk(type: string, data: Uint8Array): Uint8Array {
  const body = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) body[i] = type.charCodeAt(i);
  body.set(data, 4);
  const w = new ByteWriter();
  w.pushU32(data.length);
  w.push(body);
  w.pushU32(crc32(body));
  return w.concat();
}

function zlibStored(raw: Uint8Array): Uint8Array {
  const w = new ByteWriter();
  w.push([0x78, 0x01]); // 32K window, fastest; (CMF*256+FLG) % 31 == 0
  let at = 0;
  do {
    const len = Math.min(MAX_STORED_BLOCK, raw.length - at);
    const final = at + len >= raw.length ? 1 : 0;
    w.push([final, len & 0xff, (len >>> 8) & 0xff, ~len & 0xff, (~len >>> 8) & 0xff]);
    w.push(raw.subarray(at, at + len));
    at += len;
  } while (at < raw.length);
  w.pushU32(adler32(raw));
  return w.concat();
}

export function encodeGrayPng(width: number, height: number, gray: Uint8Array): Uint8Array {
  if (gray.length !== width * height) {
    throw new RangeError(`expected ${width * height} pixels, got ${gray.length}`);
  }
  const ihdr = new Uint8Array(13);
  const view = new DataView(ihdr.buffer);
  view.setUint32(0, width);
  view.setUint32(4, height);
  ihdr[8] = 8; // bit depth
  ihdr[9] = 0; // grayscale
  // compression 0, filter 0, interlace 0

  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // per-row filter: none
    raw.set(gray.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }

  const w = new ByteWriter();
  w.push(SIGNATURE);
  w.push(chunk("IHDR", ihdr));
  w.push(chunk("IDAT", zlibStored(raw)));
  w.push(chunk("IEND", new Uint8Array(0)));
  return w.concat();
}

export class PngFormatError extends Error {}

class ByteReader {
  at = 0;

  constructor(private bytes: Uint8Array) {}

  take(n: number): Uint8Array {
    if (this.at + n > this.bytes.length) throw new PngFormatError("truncated PNG");
    const out = this.bytes.subarray(this.at, this.at + n);
    this.at += n;
    return out;
  }

  u32(): number {
    const b = this.take(4);
    return ((b[0] << 24) | (b[1] << 16) | (b[2] << 8) | b[3]) >>> 0;
  }

  done(): boolean {
    return this.at >= this.bytes.length;
  }
}

function inflateStored(stream: Uint8Array): Uint8Array {
  if (stream.length < 6) throw new PngFormatError("zlib stream too short");
  if ((stream[0] & 0x0f) !== 8) throw new PngFormatError("not a deflate stream");
  if (((stream[0] << 8) + stream[1]) % 31 !== 0) throw new PngFormatError("bad zlib header");
  const out: Uint8Array[] = [];
  let at = 2;
  for (;;) {
    if (at >= stream.length - 4) throw new PngFormatError("zlib stream ran out of blocks");
    const header = stream[at];
    if ((header & 0x06) !== 0) {
      throw new PngFormatError("compressed deflate blocks are not supported");
    }
    const len = stream[at + 1] | (stream[at + 2] << 8);
    const nlen = stream[at + 3] | (stream[at + 4] << 8);
    if ((len ^ nlen) !== 0xffff) throw new PngFormatError("corrupt stored block length");
    out.push(stream.subarray(at + 5, at + 5 + len));
    at += 5 + len;
    if (header & 1) break;
  }
  const raw = new Uint8Array(out.reduce((n, p) => n + p.length, 0));
  let cursor = 0;
  for (const part of out) {
    raw.set(part, cursor);
    cursor += part.length;
  }
  const stored = new ByteReader(stream.subarray(at)).u32();
  if (stored !== adler32(raw)) throw new PngFormatError("zlib checksum mismatch");
  return raw;
}

export function decodeGrayPng(bytes: Uint8Array): { width: number; height: number; gray: Uint8Array } {
  const r = new ByteReader(bytes);
  const sig = r.take(8);
  if (!SIGNATURE.every((b, i) => sig[i] === b)) throw new PngFormatError("not a PNG file");

  let width = 0;
  let height = 0;
  let sawHeader = false;
  const idat: Uint8Array[] = [];
  while (!r.done()) {
    const length = r.u32();
    const body = r.take(4 + length);
    const crc = r.u32();
    if (crc !== crc32(body)) throw new PngFormatError("chunk checksum mismatch");
    const type = String.fromCharCode(...body.subarray(0, 4));
    const data = body.subarray(4);
    if (type === "IHDR") {
      const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
      width = view.getUint32(0);
      height = view.getUint32(4);
      if (data[8] !== 8 || data[9] !== 0) {
        throw new PngFormatError("only 8-bit grayscale PNGs are supported");
      }
      if (data[12] !== 0) throw new PngFormatError("interlaced PNGs are not supported");
      sawHeader = true;
    } else if (type === "IDAT") {
      idat.push(data);
    } else if (type === "IEND") {
      break;
    }
    // ancillary chunks are skipped
  }
  if (!sawHeader || idat.length === 0) throw new PngFormatError("missing IHDR or IDAT");

  const stream = new Uint8Array(idat.reduce((n, p) => n + p.length, 0));
  let at = 0;
  for (const part of idat) {
    stream.set(part, at);
    at += part.length;
  }
  const raw = inflateStored(stream);
  if (raw.length !== height * (width + 1)) throw new PngFormatError("scanline size mismatch");

  const gray = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) {
      throw new PngFormatError("filtered scanlines are not supported");
    }
    gray.set(raw.subarray(y * (width + 1) + 1, (y + 1) * (width + 1)), y * width);
  }
  return { width, height, gray };
}

/** Export a painted raster as a mask PNG (0 stays 0, 1 becomes 255). */
export function maskToPng(mask: MaskRaster): Uint8Array {
  const gray = new Uint8Array(mask.data.length);
  for (let i = 0; i < mask.data.length; i++) gray[i] = mask.data[i] ? 255 : 0;
  return encodeGrayPng(mask.width, mask.height, gray);
}

/** Read a mask PNG back into a binary raster (>= 128 counts as painted). */
export function pngToMask(bytes: Uint8Array): MaskRaster {
  const { width, height, gray } = decodeGrayPng(bytes);
  const data = new Uint8Array(gray.length);
  for (let i = 0; i < gray.length; i++) data[i] = gray[i] >= 128 ? 1 : 0;
  return { width, height, data };
}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const step = 0x8000;
  for (let i = 0; i < bytes.length; i += step) {
    binary += String.fromCharCode(...bytes.subarray(i, i + step));
  }
  return btoa(binary);
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) out[i] = binary.charCodeAt(i);
  return out;
}
