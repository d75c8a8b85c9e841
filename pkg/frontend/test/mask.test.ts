import { describe, expect, it } from "vitest";
import { EmptyMaskError, MaskLayer, ROLL_HEIGHT, ROLL_WIDTH } from "../src/mask.js";
import { decodeGrayPng } from "../src/png.js";

describe("mask export", () => {
  it("rectangle draw exports pixel-exactly", () => {
    const mask = new MaskLayer();
    mask.rect({ x: 100, y: 40 }, { x: 199, y: 79 });
    const { width, height, pixels } = decodeGrayPng(mask.exportPng());
    expect(width).toBe(ROLL_WIDTH);
    expect(height).toBe(ROLL_HEIGHT);
    for (let y = 0; y < ROLL_HEIGHT; y++) {
      for (let x = 0; x < ROLL_WIDTH; x++) {
        const inside = x >= 100 && x <= 199 && y >= 40 && y <= 79;
        expect(pixels[y * ROLL_WIDTH + x]).toBe(inside ? 255 : 0);
      }
    }
  });

  it("full-canvas fill lights every note-region pixel, borders stay 0", () => {
    const mask = new MaskLayer();
    mask.rect({ x: 0, y: 0 }, { x: ROLL_WIDTH - 1, y: ROLL_HEIGHT - 1 });
    const { pixels } = decodeGrayPng(mask.exportPng());
    for (let y = 0; y < ROLL_HEIGHT; y++) {
      const border = y < 8 || y >= 120;
      for (let x = 0; x < ROLL_WIDTH; x++) {
        expect(pixels[y * ROLL_WIDTH + x]).toBe(border ? 0 : 255);
      }
    }
  });

  it("empty mask blocks export", () => {
    expect(() => new MaskLayer().exportPng()).toThrow(EmptyMaskError);
  });

  it("export then re-import reproduces the identical layer", () => {
    const mask = new MaskLayer();
    mask.brush(250, 64, 9);
    mask.polygon([{ x: 20, y: 20 }, { x: 90, y: 25 }, { x: 55, y: 100 }]);
    mask.rect({ x: 300, y: 30 }, { x: 420, y: 90 });
    mask.brush(310, 50, 5, true);
    const round = MaskLayer.fromPng(mask.exportPng());
    expect(round.data).toEqual(mask.data);
  });

  it("brush cannot paint locked border rows", () => {
    const mask = new MaskLayer();
    mask.brush(10, 2, 6);
    mask.brush(10, 126, 6);
    for (let y = 0; y < 8; y++) {
      for (let x = 0; x < 20; x++) expect(mask.get(x, y)).toBe(0);
    }
    for (let y = 120; y < 128; y++) {
      for (let x = 0; x < 20; x++) expect(mask.get(x, y)).toBe(0);
    }
    expect(mask.get(10, 8)).toBe(1); // spill lands on the first open row
  });

  it("polygon fills a rectangle like the rect tool", () => {
    const poly = new MaskLayer();
    poly.polygon([{ x: 50, y: 20 }, { x: 150, y: 20 },
                  { x: 150, y: 60 }, { x: 50, y: 60 }]);
    const rect = new MaskLayer();
    rect.rect({ x: 50, y: 20 }, { x: 149, y: 59 });
    expect(poly.data).toEqual(rect.data);
  });

  it("erase removes previously painted pixels", () => {
    const mask = new MaskLayer();
    mask.rect({ x: 10, y: 30 }, { x: 30, y: 50 });
    mask.rect({ x: 10, y: 30 }, { x: 30, y: 50 }, true);
    expect(mask.isEmpty()).toBe(true);
  });
});
