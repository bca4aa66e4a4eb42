/** Data shaping for each figure kind: grouping, normalization, ordering.
 * Everything here is pure and deterministic; rendering happens in svg.ts. */

import { MissingColumnError, Row, num, requireColumns } from "./csv.js";

export type FigureKind =
  | "roofline"
  | "stacked_time"
  | "stacked_energy"
  | "batch_lines"
  | "normalized_bars";

export interface FigureSpec {
  kind: FigureKind;
  inputCsv: string;
  outputImage: string;
  /** Normalize each grid point to this strategy; default: the slowest one. */
  normalizeTo?: string;
  /** Restrict to one model (otherwise points are labelled model/l_in/l_out). */
  model?: string;
}

/** Presentation order for the known mappings; others follow alphabetically. */
const STRATEGY_ORDER = [
  "attacc1",
  "attacc2",
  "fully_cid",
  "cent",
  "fully_cim",
  "halo_sa",
  "halo1",
  "halo2",
];

export function orderStrategies(present: Iterable<string>): string[] {
  const unique = [...new Set(present)];
  return unique.sort((a, b) => {
    const ia = STRATEGY_ORDER.indexOf(a);
    const ib = STRATEGY_ORDER.indexOf(b);
    if (ia !== -1 && ib !== -1) return ia - ib;
    if (ia !== -1) return -1;
    if (ib !== -1) return 1;
    return a.localeCompare(b);
  });
}

export interface GridPoint {
  model: string;
  lIn: number;
  lOut: number;
  batch: number;
  label: string;
}

function pointKey(row: Row): string {
  return `${row.model}|${row.l_in}|${row.l_out}|${row.batch}`;
}

function collectPoints(rows: Row[], multiModel: boolean): GridPoint[] {
  const seen = new Map<string, GridPoint>();
  for (const row of rows) {
    const key = pointKey(row);
    if (!seen.has(key)) {
      const label = multiModel
        ? `${row.model} (${row.l_in},${row.l_out})`
        : `(${row.l_in},${row.l_out})`;
      seen.set(key, {
        model: row.model,
        lIn: num(row, "l_in"),
        lOut: num(row, "l_out"),
        batch: num(row, "batch"),
        label,
      });
    }
  }
  return [...seen.values()].sort(
    (a, b) =>
      a.model.localeCompare(b.model) || a.lIn - b.lIn || a.lOut - b.lOut || a.batch - b.batch,
  );
}

function okRows(rows: Row[], spec: FigureSpec): Row[] {
  let out = rows.filter((r) => r.status === "ok");
  if (spec.model) {
    out = out.filter((r) => r.model === spec.model);
  }
  if (out.length === 0) {
    throw new Error("no usable rows after filtering");
  }
  return out;
}

export interface StackedBar {
  point: GridPoint;
  strategy: string;
  /** bottom-to-top normalized segment heights (prefill, decode) */
  segments: [number, number];
  /** normalized total (the overlaid marker) */
  total: number;
}

export interface StackedFigure {
  points: GridPoint[];
  strategies: string[];
  bars: StackedBar[];
  yLabel: string;
}

/** Stacked phase bars, normalized per grid point; by default the slowest
 * (or most energy-hungry) strategy's bar is exactly 1.0. */
export function buildStacked(rows: Row[], spec: FigureSpec): StackedFigure {
  const time = spec.kind === "stacked_time";
  const cols = time
    ? ["model", "strategy", "l_in", "l_out", "batch", "status", "prefill_s", "decode_s", "e2e_s"]
    : ["model", "strategy", "l_in", "l_out", "batch", "status", "prefill_J", "decode_J", "total_J"];
  requireColumns(rows, cols, spec.kind);
  const usable = okRows(rows, spec);
  const [preCol, decCol, totCol] = time
    ? ["prefill_s", "decode_s", "e2e_s"]
    : ["prefill_J", "decode_J", "total_J"];

  const strategies = orderStrategies(usable.map((r) => r.strategy));
  if (spec.normalizeTo && !strategies.includes(spec.normalizeTo)) {
    throw new Error(`normalize_to strategy "${spec.normalizeTo}" not present in the data`);
  }
  const points = collectPoints(usable, new Set(usable.map((r) => r.model)).size > 1);

  const byCell = new Map<string, Row>();
  for (const row of usable) {
    byCell.set(`${pointKey(row)}|${row.strategy}`, row);
  }

  const bars: StackedBar[] = [];
  for (const point of points) {
    const key = `${point.model}|${point.lIn}|${point.lOut}|${point.batch}`;
    const cell = (s: string) => byCell.get(`${key}|${s}`);
    const base = spec.normalizeTo
      ? num(cell(spec.normalizeTo)!, totCol)
      : Math.max(...strategies.map((s) => (cell(s) ? num(cell(s)!, totCol) : -Infinity)));
    for (const strategy of strategies) {
      const row = cell(strategy);
      if (!row) continue;
      bars.push({
        point,
        strategy,
        segments: [num(row, preCol) / base, num(row, decCol) / base],
        total: num(row, totCol) / base,
      });
    }
  }
  return {
    points,
    strategies,
    bars,
    yLabel: time ? "normalized execution time" : "normalized energy",
  };
}

export interface BarGroup {
  point: GridPoint;
  values: { strategy: string; value: number }[];
}

export interface NormalizedBarFigure {
  points: GridPoint[];
  strategies: string[];
  groups: BarGroup[];
  yLabel: string;
}

/** Plain normalized end-to-end bars (no phase stacking). */
export function buildNormalizedBars(rows: Row[], spec: FigureSpec): NormalizedBarFigure {
  requireColumns(
    rows,
    ["model", "strategy", "l_in", "l_out", "batch", "status", "e2e_s"],
    spec.kind,
  );
  const usable = okRows(rows, spec);
  const strategies = orderStrategies(usable.map((r) => r.strategy));
  if (spec.normalizeTo && !strategies.includes(spec.normalizeTo)) {
    throw new Error(`normalize_to strategy "${spec.normalizeTo}" not present in the data`);
  }
  const points = collectPoints(usable, new Set(usable.map((r) => r.model)).size > 1);
  const byCell = new Map<string, Row>();
  for (const row of usable) {
    byCell.set(`${pointKey(row)}|${row.strategy}`, row);
  }
  const groups: BarGroup[] = points.map((point) => {
    const key = `${point.model}|${point.lIn}|${point.lOut}|${point.batch}`;
    const cell = (s: string) => byCell.get(`${key}|${s}`);
    const base = spec.normalizeTo
      ? num(cell(spec.normalizeTo)!, "e2e_s")
      : Math.max(...strategies.map((s) => (cell(s) ? num(cell(s)!, "e2e_s") : -Infinity)));
    return {
      point,
      values: strategies
        .filter((s) => cell(s))
        .map((s) => ({ strategy: s, value: num(cell(s)!, "e2e_s") / base })),
    };
  });
  return { points, strategies, groups, yLabel: "normalized execution time" };
}

export interface LineSeries {
  strategy: string;
  points: { x: number; y: number }[];
}

export interface BatchLineFigure {
  series: LineSeries[];
  xLabel: string;
  yLabel: string;
}

/** End-to-end time vs batch size, one line per strategy (log-log). */
export function buildBatchLines(rows: Row[], spec: FigureSpec): BatchLineFigure {
  requireColumns(rows, ["model", "strategy", "batch", "status", "e2e_s"], spec.kind);
  const usable = okRows(rows, spec);
  const strategies = orderStrategies(usable.map((r) => r.strategy));
  const series = strategies.map((strategy) => ({
    strategy,
    points: usable
      .filter((r) => r.strategy === strategy)
      .map((r) => ({ x: num(r, "batch"), y: num(r, "e2e_s") }))
      .sort((a, b) => a.x - b.x),
  }));
  return { series, xLabel: "batch size", yLabel: "end-to-end time (s)" };
}

export interface RooflinePoint {
  op: string;
  phase: string;
  batch: number;
  intensity: number;
  achieved: number;
}

export interface RooflineFigure {
  points: RooflinePoint[];
  computeCeiling: number;
  bandwidthCeiling: number;
  xLabel: string;
  yLabel: string;
}

/** Roofline scatter with the engine's compute and bandwidth ceilings. */
export function buildRoofline(rows: Row[], spec: FigureSpec): RooflineFigure {
  requireColumns(
    rows,
    ["op", "phase", "batch", "intensity", "achieved", "compute_ceiling", "bandwidth_ceiling"],
    spec.kind,
  );
  if (rows.length === 0) {
    throw new Error("no roofline rows");
  }
  const points = rows
    .map((r) => ({
      op: r.op,
      phase: r.phase,
      batch: num(r, "batch"),
      intensity: num(r, "intensity"),
      achieved: num(r, "achieved"),
    }))
    .sort((a, b) => a.intensity - b.intensity || a.op.localeCompare(b.op));
  return {
    points,
    computeCeiling: num(rows[0], "compute_ceiling"),
    bandwidthCeiling: num(rows[0], "bandwidth_ceiling"),
    xLabel: "arithmetic intensity (FLOP/byte)",
    yLabel: "performance (FLOP/s)",
  };
}

export { MissingColumnError };
