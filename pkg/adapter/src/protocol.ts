/**
 * Wire protocol types: newline-delimited JSON over the process's
 * standard streams. One request line yields exactly one response line;
 * the handshake is emitted once on startup.
 */

export const PROTOCOL_VERSION = 1;

export interface Handshake {
  ready: true;
  protocol: typeof PROTOCOL_VERSION;
}

export interface SegmentRequest {
  id: number;
  op: "segment";
  height: number;
  width: number;
  /** base64 of binary PGM (P5, maxval 255) bytes */
  image_pgm_b64: string;
  /** foreground point prompts as [row, col] pairs */
  points: [number, number][];
}

export interface MaskPayload {
  /** run lengths over the row-major scan: leading false count first */
  rle: number[];
  score: number;
}

export interface SegmentResponse {
  id: number;
  masks: MaskPayload[];
}

export interface ErrorResponse {
  id: number | null;
  error: string;
}

export type Response = SegmentResponse | ErrorResponse;

export function handshake(): Handshake {
  return { ready: true, protocol: PROTOCOL_VERSION };
}
