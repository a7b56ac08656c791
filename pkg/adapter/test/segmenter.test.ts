import { describe, expect, it } from "vitest";
import { GrayImage } from "../src/pgm.js";
import { fillHoles, grow, segment } from "../src/segmenter.js";

function makeImage(height: number, width: number, fill: number): GrayImage {
  return { height, width, data: new Uint8Array(height * width).fill(fill) };
}

function ringImage(): GrayImage {
  // Dark chamber disk surrounded by a bright ring on a mid background.
  const image = makeImage(60, 60, 40);
  for (let r = 0; r < 60; r++) {
    for (let c = 0; c < 60; c++) {
      const d = Math.hypot(r - 30, c - 30);
      if (d < 15) image.data[r * 60 + c] = 15;
      else if (d < 22) image.data[r * 60 + c] = 170;
    }
  }
  return image;
}

describe("region growing", () => {
  it("fills a uniform region up to its boundary", () => {
    const image = ringImage();
    const mask = grow(image, [[30, 30]], 10);
    expect(mask[30 * 60 + 30]).toBe(1);
    expect(mask[30 * 60 + 40]).toBe(1); // still chamber (d=10)
    expect(mask[30 * 60 + 48]).toBe(0); // ring (d=18)
    expect(mask[5 * 60 + 5]).toBe(0); // background
  });

  it("includes bright specks inside the region via hole filling", () => {
    const image = ringImage();
    image.data[28 * 60 + 28] = 200; // particle inside the chamber
    const mask = grow(image, [[30, 30]], 10);
    expect(mask[28 * 60 + 28]).toBe(1);
  });

  it("grows from every prompt", () => {
    const image = makeImage(10, 11, 30);
    for (let r = 0; r < 10; r++) image.data[r * 11 + 5] = 255; // wall
    const mask = grow(image, [[4, 1], [4, 9]], 5);
    expect(mask[4 * 11 + 1]).toBe(1);
    expect(mask[4 * 11 + 9]).toBe(1);
    expect(mask[4 * 11 + 5]).toBe(0);
  });

  it("rejects out-of-bounds prompts", () => {
    expect(() => segment(makeImage(5, 5, 0), [[9, 9]])).toThrow();
  });
});

describe("fillHoles", () => {
  it("fills enclosed background only", () => {
    // 5x5 ring of object pixels with a hole in the middle.
    const mask = Uint8Array.from([
      1, 1, 1, 1, 1,
      1, 0, 0, 0, 1,
      1, 0, 0, 0, 1,
      1, 0, 0, 0, 1,
      1, 1, 1, 1, 1,
    ]);
    fillHoles(mask, 5, 5);
    expect([...mask].every((v) => v === 1)).toBe(true);
  });

  it("leaves border-reaching background open", () => {
    const mask = new Uint8Array(25);
    mask[12] = 1;
    fillHoles(mask, 5, 5);
    expect(mask.reduce((a, b) => a + b, 0)).toBe(1);
  });
});

describe("segment", () => {
  it("returns scored candidates that all contain the prompts", () => {
    const candidates = segment(ringImage(), [[30, 28], [30, 32]]);
    expect(candidates.length).toBeGreaterThanOrEqual(1);
    for (const cand of candidates) {
      expect(cand.mask[30 * 60 + 28]).toBe(1);
      expect(cand.mask[30 * 60 + 32]).toBe(1);
      expect(cand.score).toBeGreaterThanOrEqual(0);
      expect(cand.score).toBeLessThanOrEqual(1);
    }
  });

  it("gives edge-bounded regions high stability scores", () => {
    const candidates = segment(ringImage(), [[30, 30]]);
    const best = candidates.reduce((a, b) => (b.score > a.score ? b : a));
    expect(best.score).toBeGreaterThan(0.95);
  });

  it("is deterministic", () => {
    const image = ringImage();
    const a = segment(image, [[30, 30]]);
    const b = segment(image, [[30, 30]]);
    expect(a.map((c) => [...c.mask])).toEqual(b.map((c) => [...c.mask]));
    expect(a.map((c) => c.score)).toEqual(b.map((c) => c.score));
  });
});
