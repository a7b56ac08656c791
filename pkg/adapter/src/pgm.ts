/** Binary PGM (P5, maxval 255) parsing and serialization. */

export interface GrayImage {
  height: number;
  width: number;
  /** row-major intensities in [0, 255] */
  data: Uint8Array;
}

export function decodePgm(bytes: Uint8Array): GrayImage {
  if (bytes[0] !== 0x50 || bytes[1] !== 0x35) {
    throw new Error("not a binary PGM (P5) stream");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < bytes.length && isSpace(bytes[pos])) pos++;
    if (bytes[pos] === 0x23) {
      // comment: skip to end of line
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
      continue;
    }
    let value = 0;
    let digits = 0;
    while (pos < bytes.length && bytes[pos] >= 0x30 && bytes[pos] <= 0x39) {
      value = value * 10 + (bytes[pos] - 0x30);
      pos++;
      digits++;
    }
    if (digits === 0) throw new Error("malformed PGM header");
    fields.push(value);
  }
  pos++; // single whitespace byte after maxval
  const [width, height, maxval] = fields;
  if (maxval !== 255) throw new Error(`unsupported PGM maxval ${maxval}`);
  const expected = height * width;
  if (bytes.length - pos < expected) throw new Error("truncated PGM payload");
  return { height, width, data: bytes.subarray(pos, pos + expected) };
}

export function encodePgm(image: GrayImage): Uint8Array {
  const header = Buffer.from(`P5\n${image.width} ${image.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(image.data)]);
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
