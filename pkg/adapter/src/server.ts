/**
 * Serve the segmentation protocol over stdin/stdout: emit the handshake,
 * then answer one response line per request line until end of input.
 * Protocol output goes only to stdout; diagnostics go to stderr.
 */

import * as readline from "node:readline";
import { decodePgm } from "./pgm.js";
import { handshake, Response, SegmentRequest } from "./protocol.js";
import { rleEncode } from "./rle.js";
import { segment } from "./segmenter.js";

export interface AdapterConfig {
  variant: string;
  checkpointPath?: string;
  device: string;
}

export function handleRequest(req: SegmentRequest): Response {
  if (req.op !== "segment") {
    return { id: req.id ?? null, error: `unsupported op ${String(req.op)}` };
  }
  try {
    const image = decodePgm(Buffer.from(req.image_pgm_b64, "base64"));
    if (image.height !== req.height || image.width !== req.width) {
      return { id: req.id, error: "image dimensions do not match the header fields" };
    }
    const candidates = segment(image, req.points ?? []);
    return {
      id: req.id,
      masks: candidates.map((c) => ({ rle: rleEncode(c.mask), score: c.score })),
    };
  } catch (err) {
    return { id: req.id ?? null, error: err instanceof Error ? err.message : String(err) };
  }
}

export function serve(
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
): Promise<void> {
  output.write(JSON.stringify(handshake()) + "\n");
  const rl = readline.createInterface({ input, terminal: false });
  rl.on("line", (line) => {
    const text = line.trim();
    if (!text) return;
    let response: Response;
    try {
      response = handleRequest(JSON.parse(text) as SegmentRequest);
    } catch {
      response = { id: null, error: "malformed request line" };
    }
    output.write(JSON.stringify(response) + "\n");
  });
  return new Promise((resolve) => rl.once("close", () => resolve()));
}
