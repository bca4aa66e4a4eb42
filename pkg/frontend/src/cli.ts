#!/usr/bin/env node
/** memaccel-report --kind stacked_time --input grid.csv --output fig.svg
 *                  [--normalize-to halo_sa] [--model llama2-7b] */

import { render } from "./index.js";
import { FigureKind } from "./figures.js";

const KINDS: FigureKind[] = [
  "roofline",
  "stacked_time",
  "stacked_energy",
  "batch_lines",
  "normalized_bars",
];

function usage(): never {
  console.error(
    `usage: memaccel-report --kind <${KINDS.join("|")}> --input <csv> --output <svg>` +
      ` [--normalize-to <strategy>] [--model <name>]`,
  );
  process.exit(2);
}

function parseArgs(argv: string[]): Record<string, string> {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) usage();
    args[flag.slice(2)] = value;
  }
  return args;
}

const args = parseArgs(process.argv.slice(2));
const kind = args["kind"] as FigureKind | undefined;
if (!kind || !KINDS.includes(kind) || !args["input"] || !args["output"]) usage();

try {
  render({
    kind,
    inputCsv: args["input"],
    outputImage: args["output"],
    normalizeTo: args["normalize-to"],
    model: args["model"],
  });
  console.log(`wrote ${args["output"]}`);
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
}
