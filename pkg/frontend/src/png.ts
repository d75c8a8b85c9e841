/**
 * Minimal 8-bit grayscale PNG encoder/decoder.
 *
 * The encoder emits uncompressed (stored) deflate blocks, which every PNG
 * reader accepts; the decoder handles exactly that subset plus filter
 * type 0, i.e. it can round-trip anything this module wrote.
 */

const SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
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

function u32be(value: number): number[] {
  return [(value >>> 24) & 0xff, (value >>> 16) & 0xff,
          (value >>> 8) & 0xff, value & 0xff];
}

function chunk(type: string, data: Uint8Array): number[] {
  const typed = new Uint8Array(4 + data.length);
  for (let i = 0; i < 4; i++) typed[i] = type.charCodeAt(i);
  typed.set(data, 4);
  return [...u32be(data.length), ...typed, ...u32be(crc32(typed))];
}

/** zlib stream made of stored deflate blocks (no compression). */
function zlibStored(raw: Uint8Array): Uint8Array {
  const blocks: number[] = [0x78, 0x01];
  for (let offset = 0; offset < raw.length; offset += 65535) {
    const len = Math.min(65535, raw.length - offset);
    const final = offset + len >= raw.length ? 1 : 0;
    blocks.push(final, len & 0xff, len >>> 8, ~len & 0xff, (~len >>> 8) & 0xff);
    for (let i = 0; i < len; i++) blocks.push(raw[offset + i]);
  }
  blocks.push(...u32be(adler32(raw)));
  return Uint8Array.from(blocks);
}

export function encodeGrayPng(pixels: Uint8Array, width: number,
                              height: number): Uint8Array {
  if (pixels.length !== width * height) {
    throw new Error(`pixel buffer length ${pixels.length} does not match ` +
                    `${width}x${height}`);
  }
  const raw = new Uint8Array(height * (width + 1));
  for (let y = 0; y < height; y++) {
    raw[y * (width + 1)] = 0; // filter type 0 per scanline
    raw.set(pixels.subarray(y * width, (y + 1) * width), y * (width + 1) + 1);
  }
  const ihdr = Uint8Array.from([
    ...u32be(width), ...u32be(height),
    8, 0, 0, 0, 0, // bit depth 8, grayscale, deflate, adaptive, no interlace
  ]);
  return Uint8Array.from([
    ...SIGNATURE,
    ...chunk("IHDR", ihdr),
    ...chunk("IDAT", zlibStored(raw)),
    ...chunk("IEND", new Uint8Array(0)),
  ]);
}

export interface GrayImage {
  width: number;
  height: number;
  pixels: Uint8Array;
}

export function decodeGrayPng(bytes: Uint8Array): GrayImage {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== SIGNATURE[i]) throw new Error("not a PNG file");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: number[] = [];
  while (pos < bytes.length) {
    const length = view.getUint32(pos);
    const type = String.fromCharCode(...bytes.subarray(pos + 4, pos + 8));
    const data = bytes.subarray(pos + 8, pos + 8 + length);
    if (type === "IHDR") {
      width = view.getUint32(pos + 8);
      height = view.getUint32(pos + 12);
      if (data[8] !== 8 || data[9] !== 0) {
        throw new Error("only 8-bit grayscale PNGs are supported");
      }
    } else if (type === "IDAT") {
      idat.push(...data);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + length;
  }
  const raw = inflateStored(Uint8Array.from(idat));
  const pixels = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    if (raw[y * (width + 1)] !== 0) {
      throw new Error("only filter type 0 is supported");
    }
    pixels.set(raw.subarray(y * (width + 1) + 1, (y + 1) * (width + 1)),
               y * width);
  }
  return { width, height, pixels };
}

function inflateStored(stream: Uint8Array): Uint8Array {
  const out: number[] = [];
  let pos = 2; // skip zlib header
  for (;;) {
    const header = stream[pos];
    if ((header & 0x06) !== 0) {
      throw new Error("only stored deflate blocks are supported");
    }
    const len = stream[pos + 1] | (stream[pos + 2] << 8);
    for (let i = 0; i < len; i++) out.push(stream[pos + 5 + i]);
    pos += 5 + len;
    if (header & 1) break;
  }
  return Uint8Array.from(out);
}
