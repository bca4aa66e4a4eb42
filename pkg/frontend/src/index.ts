import { readFileSync, writeFileSync } from "node:fs";

import { parseCsv } from "./csv.js";
import {
  FigureKind,
  FigureSpec,
  buildBatchLines,
  buildNormalizedBars,
  buildRoofline,
  buildStacked,
} from "./figures.js";
import {
  renderBatchLines,
  renderNormalizedBars,
  renderRoofline,
  renderStacked,
} from "./svg.js";

export * from "./csv.js";
export * from "./figures.js";
export * from "./svg.js";

/** Render a figure spec's CSV to SVG markup (pure given the CSV text). */
export function renderCsvText(kind: FigureKind, csvText: string, spec: Partial<FigureSpec> = {}): string {
  const rows = parseCsv(csvText);
  const full: FigureSpec = { kind, inputCsv: "", outputImage: "", ...spec };
  switch (kind) {
    case "stacked_time":
    case "stacked_energy":
      return renderStacked(buildStacked(rows, full));
    case "normalized_bars":
      return renderNormalizedBars(buildNormalizedBars(rows, full));
    case "batch_lines":
      return renderBatchLines(buildBatchLines(rows, full));
    case "roofline":
      return renderRoofline(buildRoofline(rows, full));
    default:
      throw new Error(`unknown figure kind "${kind}"`);
  }
}

/** Read the spec's input CSV and write the image file. */
export function render(spec: FigureSpec): void {
  const csvText = readFileSync(spec.inputCsv, "utf-8");
  const svg = renderCsvText(spec.kind, csvText, spec);
  writeFileSync(spec.outputImage, svg);
}
