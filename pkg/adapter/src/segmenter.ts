/**
 * Built-in promptable segmenter: multi-tolerance region growing.
 *
 * For each candidate tolerance, an 8-connected region is grown from every
 * prompt over pixels whose intensity stays within the tolerance of that
 * prompt's intensity; the union is closed by filling enclosed holes so a
 * segmented object comes back whole. Each candidate is scored by its
 * stability: the overlap between the regions grown at the tolerance and
 * at a slightly larger one. Objects bounded by strong edges barely move,
 * scoring near 1.
 */

import { GrayImage } from "./pgm.js";

export interface Candidate {
  mask: Uint8Array;
  score: number;
}

export const CANDIDATE_TOLERANCES = [6, 12, 24];
const STABILITY_DELTA = 2;

export function segment(image: GrayImage, points: [number, number][]): Candidate[] {
  for (const [r, c] of points) {
    if (r < 0 || r >= image.height || c < 0 || c >= image.width) {
      throw new Error(`prompt (${r}, ${c}) outside ${image.height}x${image.width} image`);
    }
  }
  const candidates: Candidate[] = [];
  for (const tolerance of CANDIDATE_TOLERANCES) {
    const mask = grow(image, points, tolerance);
    const wider = grow(image, points, tolerance + STABILITY_DELTA);
    candidates.push({ mask, score: overlap(mask, wider) });
  }
  return candidates;
}

export function grow(image: GrayImage, points: [number, number][], tolerance: number): Uint8Array {
  const { height, width, data } = image;
  const mask = new Uint8Array(height * width);
  const queue = new Int32Array(height * width);
  for (const [pr, pc] of points) {
    const seedValue = data[pr * width + pc];
    const start = pr * width + pc;
    if (mask[start]) continue;
    let head = 0;
    let tail = 0;
    queue[tail++] = start;
    mask[start] = 1;
    while (head < tail) {
      const idx = queue[head++];
      const r = (idx / width) | 0;
      const c = idx % width;
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          if (dr === 0 && dc === 0) continue;
          const nr = r + dr;
          const nc = c + dc;
          if (nr < 0 || nr >= height || nc < 0 || nc >= width) continue;
          const nidx = nr * width + nc;
          if (mask[nidx]) continue;
          if (Math.abs(data[nidx] - seedValue) <= tolerance) {
            mask[nidx] = 1;
            queue[tail++] = nidx;
          }
        }
      }
    }
  }
  fillHoles(mask, height, width);
  return mask;
}

/** Fill regions of background not reachable from the image border. */
export function fillHoles(mask: Uint8Array, height: number, width: number): void {
  const outside = new Uint8Array(height * width);
  const queue = new Int32Array(height * width);
  let tail = 0;
  const push = (idx: number) => {
    if (!outside[idx] && !mask[idx]) {
      outside[idx] = 1;
      queue[tail++] = idx;
    }
  };
  for (let c = 0; c < width; c++) {
    push(c);
    push((height - 1) * width + c);
  }
  for (let r = 0; r < height; r++) {
    push(r * width);
    push(r * width + width - 1);
  }
  let head = 0;
  while (head < tail) {
    const idx = queue[head++];
    const r = (idx / width) | 0;
    const c = idx % width;
    if (r > 0) push(idx - width);
    if (r < height - 1) push(idx + width);
    if (c > 0) push(idx - 1);
    if (c < width - 1) push(idx + 1);
  }
  for (let i = 0; i < mask.length; i++) {
    if (!mask[i] && !outside[i]) mask[i] = 1;
  }
}

function overlap(a: Uint8Array, b: Uint8Array): number {
  let intersection = 0;
  let union = 0;
  for (let i = 0; i < a.length; i++) {
    if (a[i] && b[i]) intersection++;
    if (a[i] || b[i]) union++;
  }
  return union === 0 ? 1 : intersection / union;
}
