#!/usr/bin/env node
/**
 * Adapter entry point.
 *
 * Flags: --variant (model variant; "builtin" is the self-contained
 * region-growing segmenter and needs no weights), --checkpoint (weights
 * file for model-backed variants), --device (compute device identifier,
 * informational for the builtin variant).
 *
 * An unsupported variant or an unreadable checkpoint is a startup
 * failure: one error line on stderr, nonzero exit, no handshake.
 */

import * as fs from "node:fs";
import { AdapterConfig, serve } from "./server.js";

const SUPPORTED_VARIANTS = ["builtin"];

export function parseArgs(argv: string[]): AdapterConfig {
  const config: AdapterConfig = { variant: "builtin", device: "cpu" };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--variant") config.variant = argv[++i];
    else if (arg === "--checkpoint") config.checkpointPath = argv[++i];
    else if (arg === "--device") config.device = argv[++i];
    else throw new Error(`unknown flag ${arg}`);
  }
  return config;
}

function validate(config: AdapterConfig): void {
  if (!SUPPORTED_VARIANTS.includes(config.variant)) {
    throw new Error(
      `unsupported variant "${config.variant}" (supported: ${SUPPORTED_VARIANTS.join(", ")})`,
    );
  }
  if (config.checkpointPath !== undefined && !fs.existsSync(config.checkpointPath)) {
    throw new Error(`checkpoint not found: ${config.checkpointPath}`);
  }
}

async function main(): Promise<void> {
  let config: AdapterConfig;
  try {
    config = parseArgs(process.argv.slice(2));
    validate(config);
  } catch (err) {
    process.stderr.write(`error: ${err instanceof Error ? err.message : String(err)}\n`);
    process.exit(1);
  }
  await serve();
}

main().catch((err) => {
  process.stderr.write(`fatal: ${err instanceof Error ? err.message : String(err)}\n`);
  process.exit(1);
});
