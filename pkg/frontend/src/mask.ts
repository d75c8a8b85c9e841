/**
 * Binary inpainting mask edited in unfolded roll coordinates (512 ticks
 * wide, 128 pitch rows tall).  Value 1 = generate, 0 = keep.  The 8-row
 * chord borders at the top and bottom are locked: no tool can paint them
 * and exports always leave them at 0.
 */
import { decodeGrayPng, encodeGrayPng } from "./png.js";

export const ROLL_WIDTH = 512;
export const ROLL_HEIGHT = 128;
export const BORDER_ROWS = 8;

export type Tool = "brush" | "rect" | "polygon" | "erase";

export interface Point {
  x: number;
  y: number;
}

export class EmptyMaskError extends Error {
  constructor() {
    super("mask is empty: paint a region to generate before submitting");
  }
}

function rowLocked(y: number): boolean {
  return y < BORDER_ROWS || y >= ROLL_HEIGHT - BORDER_ROWS;
}

export class MaskLayer {
  readonly data: Uint8Array;

  constructor(data?: Uint8Array) {
    if (data && data.length !== ROLL_WIDTH * ROLL_HEIGHT) {
      throw new Error(`mask buffer must be ${ROLL_WIDTH}x${ROLL_HEIGHT}`);
    }
    this.data = data ?? new Uint8Array(ROLL_WIDTH * ROLL_HEIGHT);
  }

  get(x: number, y: number): number {
    return this.data[y * ROLL_WIDTH + x];
  }

  private set(x: number, y: number, value: number): void {
    if (x < 0 || x >= ROLL_WIDTH || y < 0 || y >= ROLL_HEIGHT) return;
    if (rowLocked(y)) return;
    this.data[y * ROLL_WIDTH + x] = value;
  }

  isEmpty(): boolean {
    return !this.data.some((v) => v !== 0);
  }

  clear(): void {
    this.data.fill(0);
  }

  /** Paint a filled disc; erase = paint 0. */
  brush(cx: number, cy: number, radius: number, erase = false): void {
    const value = erase ? 0 : 1;
    const r = Math.max(0, radius);
    for (let y = Math.floor(cy - r); y <= Math.ceil(cy + r); y++) {
      for (let x = Math.floor(cx - r); x <= Math.ceil(cx + r); x++) {
        if ((x - cx) ** 2 + (y - cy) ** 2 <= r * r) {
          this.set(x, y, value);
        }
      }
    }
  }

  /** Paint an axis-aligned rectangle given any two corners (inclusive). */
  rect(a: Point, b: Point, erase = false): void {
    const value = erase ? 0 : 1;
    const x0 = Math.min(a.x, b.x);
    const x1 = Math.max(a.x, b.x);
    const y0 = Math.min(a.y, b.y);
    const y1 = Math.max(a.y, b.y);
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        this.set(x, y, value);
      }
    }
  }

  /** Scanline fill with the nonzero winding rule. */
  polygon(vertices: Point[], erase = false): void {
    if (vertices.length < 3) return;
    const value = erase ? 0 : 1;
    for (let y = 0; y < ROLL_HEIGHT; y++) {
      if (rowLocked(y)) continue;
      const yc = y + 0.5;
      // collect signed crossings of the scanline
      const crossings: { x: number; dir: number }[] = [];
      for (let i = 0; i < vertices.length; i++) {
        const a = vertices[i];
        const b = vertices[(i + 1) % vertices.length];
        if (a.y === b.y) continue;
        const [lo, hi] = a.y < b.y ? [a.y, b.y] : [b.y, a.y];
        if (yc < lo || yc >= hi) continue;
        const t = (yc - a.y) / (b.y - a.y);
        crossings.push({ x: a.x + t * (b.x - a.x), dir: b.y > a.y ? 1 : -1 });
      }
      crossings.sort((p, q) => p.x - q.x);
      let winding = 0;
      for (let i = 0; i < crossings.length - 1; i++) {
        winding += crossings[i].dir;
        if (winding === 0) continue;
        const x0 = Math.max(0, Math.ceil(crossings[i].x - 0.5));
        const x1 = Math.min(ROLL_WIDTH - 1,
                            Math.ceil(crossings[i + 1].x - 0.5) - 1);
        for (let x = x0; x <= x1; x++) this.set(x, y, value);
      }
    }
  }

  /**
   * Export as a 512x128 grayscale PNG, 255 = generate.  Matches the edit
   * layer pixel for pixel at 1:1 zoom; border rows are always 0.
   */
  exportPng(): Uint8Array {
    if (this.isEmpty()) throw new EmptyMaskError();
    const pixels = new Uint8Array(ROLL_WIDTH * ROLL_HEIGHT);
    for (let i = 0; i < pixels.length; i++) {
      pixels[i] = this.data[i] ? 255 : 0;
    }
    return encodeGrayPng(pixels, ROLL_WIDTH, ROLL_HEIGHT);
  }

  static fromPng(bytes: Uint8Array): MaskLayer {
    const image = decodeGrayPng(bytes);
    if (image.width !== ROLL_WIDTH || image.height !== ROLL_HEIGHT) {
      throw new Error(`mask PNG must be ${ROLL_WIDTH}x${ROLL_HEIGHT}, got ` +
                      `${image.width}x${image.height}`);
    }
    const layer = new MaskLayer();
    for (let y = 0; y < ROLL_HEIGHT; y++) {
      if (rowLocked(y)) continue;
      for (let x = 0; x < ROLL_WIDTH; x++) {
        layer.data[y * ROLL_WIDTH + x] =
          image.pixels[y * ROLL_WIDTH + x] >= 128 ? 1 : 0;
      }
    }
    return layer;
  }
}
