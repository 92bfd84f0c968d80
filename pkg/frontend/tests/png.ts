/**
 * Minimal PNG decoder for tests: non-interlaced 8-bit RGB / RGBA / gray and
 * 16-bit gray, all five scanline filters. Enough to compare service
 * responses against files on disk pixel by pixel.
 */

import { inflateSync } from "node:zlib";

export interface DecodedPng {
  width: number;
  height: number;
  channels: number;
  bitDepth: number;
  /** row-major, channel-interleaved samples scaled to [0, 1] */
  pixels: Float64Array;
}

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export function decodePng(data: Uint8Array): DecodedPng {
  for (let i = 0; i < 8; i++) {
    if (data[i] !== SIGNATURE[i]) throw new Error("not a PNG");
  }
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength);
  let offset = 8;
  let width = 0;
  let height = 0;
  let bitDepth = 0;
  let colorType = 0;
  const idat: Uint8Array[] = [];
  while (offset < data.length) {
    const length = view.getUint32(offset);
    const type = String.fromCharCode(...data.subarray(offset + 4, offset + 8));
    const body = data.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      width = view.getUint32(offset + 8);
      height = view.getUint32(offset + 12);
      bitDepth = data[offset + 16];
      colorType = data[offset + 17];
      if (data[offset + 20] !== 0) throw new Error("interlaced PNG unsupported");
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 12 + length;
  }
  const channels = { 0: 1, 2: 3, 4: 2, 6: 4 }[colorType];
  if (channels === undefined) throw new Error(`unsupported color type ${colorType}`);
  if (bitDepth !== 8 && bitDepth !== 16) throw new Error(`unsupported bit depth ${bitDepth}`);

  const raw = inflateSync(Buffer.concat(idat.map((c) => Buffer.from(c))));
  const bytesPerSample = bitDepth / 8;
  const bpp = channels * bytesPerSample;
  const stride = width * bpp;
  const recon = new Uint8Array(height * stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const out = recon.subarray(y * stride, (y + 1) * stride);
    const prev = y > 0 ? recon.subarray((y - 1) * stride, y * stride) : null;
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? out[x - bpp] : 0;
      const b = prev ? prev[x] : 0;
      const c = prev && x >= bpp ? prev[x - bpp] : 0;
      let value = row[x];
      switch (filter) {
        case 0: break;
        case 1: value = (value + a) & 0xff; break;
        case 2: value = (value + b) & 0xff; break;
        case 3: value = (value + ((a + b) >> 1)) & 0xff; break;
        case 4: value = (value + paeth(a, b, c)) & 0xff; break;
        default: throw new Error(`unknown filter ${filter}`);
      }
      out[x] = value;
    }
  }

  const count = width * height * channels;
  const pixels = new Float64Array(count);
  const scale = bitDepth === 8 ? 255 : 65535;
  for (let i = 0; i < count; i++) {
    const value =
      bitDepth === 8 ? recon[i] : (recon[2 * i] << 8) | recon[2 * i + 1];
    pixels[i] = value / scale;
  }
  return { width, height, channels, bitDepth, pixels };
}

/** Largest per-sample difference between two decodes (RGB channels only). */
export function maxPixelDifference(a: DecodedPng, b: DecodedPng): number {
  if (a.width !== b.width || a.height !== b.height) {
    throw new Error("size mismatch");
  }
  const channels = Math.min(a.channels, b.channels, 3);
  let worst = 0;
  for (let p = 0; p < a.width * a.height; p++) {
    for (let c = 0; c < channels; c++) {
      const va = a.pixels[p * a.channels + c];
      const vb = b.pixels[p * b.channels + c];
      worst = Math.max(worst, Math.abs(va - vb));
    }
  }
  return worst;
}
