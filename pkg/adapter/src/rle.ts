/**
 * Run-length codec for binary masks over the row-major scan.
 * The first count covers leading false bits (possibly zero); runs then
 * alternate true/false and always sum to the pixel count.
 */

export function rleEncode(bits: Uint8Array): number[] {
  if (bits.length === 0) return [0];
  const runs: number[] = [];
  let current = 0;
  let count = 0;
  for (let i = 0; i < bits.length; i++) {
    const b = bits[i] ? 1 : 0;
    if (b === current) {
      count++;
    } else {
      runs.push(count);
      current = b;
      count = 1;
    }
  }
  runs.push(count);
  return runs;
}

export function rleDecode(runs: number[], height: number, width: number): Uint8Array {
  const total = runs.reduce((a, b) => a + b, 0);
  if (total !== height * width) {
    throw new Error(`run lengths sum to ${total}, expected ${height * width}`);
  }
  const bits = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of runs) {
    if (run < 0) throw new Error("negative run length");
    if (value) bits.fill(1, pos, pos + run);
    pos += run;
    value = 1 - value;
  }
  return bits;
}
