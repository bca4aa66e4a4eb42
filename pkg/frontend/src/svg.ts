/** Deterministic SVG rendering: fixed canvas, fixed palette, numbers
 * formatted to fixed precision, so identical inputs give identical bytes. */

import {
  BatchLineFigure,
  NormalizedBarFigure,
  RooflineFigure,
  StackedFigure,
} from "./figures.js";

const PALETTE = [
  "#4c72b0",
  "#dd8452",
  "#55a868",
  "#c44e52",
  "#8172b3",
  "#937860",
  "#da8bc3",
  "#8c8c8c",
];

const W = 960;
const H = 440;
const MARGIN = { left: 70, right: 170, top: 30, bottom: 70 };

const fmt = (v: number): string => v.toFixed(2);

function open(): string[] {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="#ffffff"/>`,
  ];
}

function text(x: number, y: number, s: string, opts = ""): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-family="sans-serif" font-size="11" ${opts}>${s}</text>`;
}

function legend(parts: string[], strategies: string[], colorOf: (s: string) => string): void {
  strategies.forEach((s, i) => {
    const y = MARGIN.top + 16 * i;
    parts.push(
      `<rect x="${W - MARGIN.right + 14}" y="${fmt(y)}" width="10" height="10" fill="${colorOf(s)}"/>`,
      text(W - MARGIN.right + 30, y + 9, s),
    );
  });
}

function yAxisLinear(parts: string[], yMax: number, label: string, plotH: number): void {
  const x0 = MARGIN.left;
  parts.push(
    `<line x1="${x0}" y1="${MARGIN.top}" x2="${x0}" y2="${MARGIN.top + plotH}" stroke="#000"/>`,
  );
  const ticks = 5;
  for (let i = 0; i <= ticks; i++) {
    const v = (yMax * i) / ticks;
    const y = MARGIN.top + plotH - (plotH * i) / ticks;
    parts.push(
      `<line x1="${x0 - 4}" y1="${fmt(y)}" x2="${x0}" y2="${fmt(y)}" stroke="#000"/>`,
      text(x0 - 8, y + 4, fmt(v), 'text-anchor="end"'),
    );
  }
  parts.push(
    `<text x="18" y="${fmt(MARGIN.top + plotH / 2)}" font-family="sans-serif" font-size="12" transform="rotate(-90 18 ${fmt(MARGIN.top + plotH / 2)})" text-anchor="middle">${label}</text>`,
  );
}

export function renderStacked(fig: StackedFigure): string {
  const parts = open();
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const colorOf = (s: string) => PALETTE[fig.strategies.indexOf(s) % PALETTE.length];
  const yMax = Math.max(1, ...fig.bars.map((b) => b.total)) * 1.05;
  const groupW = plotW / fig.points.length;
  const barW = (groupW * 0.8) / fig.strategies.length;

  yAxisLinear(parts, yMax, fig.yLabel, plotH);
  fig.points.forEach((point, pi) => {
    const gx = MARGIN.left + groupW * pi + groupW * 0.1;
    parts.push(
      text(MARGIN.left + groupW * (pi + 0.5), H - MARGIN.bottom + 16, point.label, 'text-anchor="middle"'),
    );
    fig.strategies.forEach((strategy, si) => {
      const bar = fig.bars.find((b) => b.point === point && b.strategy === strategy);
      if (!bar) return;
      const x = gx + barW * si;
      let yBase = MARGIN.top + plotH;
      const shades = [1.0, 0.55];
      bar.segments.forEach((seg, k) => {
        const h = (seg / yMax) * plotH;
        yBase -= h;
        parts.push(
          `<rect x="${fmt(x)}" y="${fmt(yBase)}" width="${fmt(barW * 0.9)}" height="${fmt(h)}" fill="${colorOf(strategy)}" fill-opacity="${shades[k]}"/>`,
        );
      });
      const dotY = MARGIN.top + plotH - (bar.total / yMax) * plotH;
      parts.push(
        `<circle cx="${fmt(x + barW * 0.45)}" cy="${fmt(dotY)}" r="3" fill="#d62728"/>`,
      );
    });
  });
  legend(parts, fig.strategies, colorOf);
  parts.push(
    text(W - MARGIN.right + 14, MARGIN.top + 16 * fig.strategies.length + 14, "light: decode share"),
    text(W - MARGIN.right + 14, MARGIN.top + 16 * fig.strategies.length + 28, "dot: normalized total"),
    "</svg>",
  );
  return parts.join("\n") + "\n";
}

export function renderNormalizedBars(fig: NormalizedBarFigure): string {
  const parts = open();
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const colorOf = (s: string) => PALETTE[fig.strategies.indexOf(s) % PALETTE.length];
  const yMax = Math.max(1, ...fig.groups.flatMap((g) => g.values.map((v) => v.value))) * 1.05;
  const groupW = plotW / fig.groups.length;
  const barW = (groupW * 0.8) / fig.strategies.length;

  yAxisLinear(parts, yMax, fig.yLabel, plotH);
  fig.groups.forEach((group, pi) => {
    const gx = MARGIN.left + groupW * pi + groupW * 0.1;
    parts.push(
      text(MARGIN.left + groupW * (pi + 0.5), H - MARGIN.bottom + 16, group.point.label, 'text-anchor="middle"'),
    );
    group.values.forEach(({ strategy, value }) => {
      const si = fig.strategies.indexOf(strategy);
      const h = (value / yMax) * plotH;
      parts.push(
        `<rect x="${fmt(gx + barW * si)}" y="${fmt(MARGIN.top + plotH - h)}" width="${fmt(barW * 0.9)}" height="${fmt(h)}" fill="${colorOf(strategy)}"/>`,
      );
    });
  });
  legend(parts, fig.strategies, colorOf);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function logTicks(min: number, max: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(min)); e <= Math.ceil(Math.log10(max)); e++) {
    ticks.push(10 ** e);
  }
  return ticks;
}

export function renderBatchLines(fig: BatchLineFigure): string {
  const parts = open();
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const strategies = fig.series.map((s) => s.strategy);
  const colorOf = (s: string) => PALETTE[strategies.indexOf(s) % PALETTE.length];
  const xs = fig.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = fig.series.flatMap((s) => s.points.map((p) => p.y));
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  const yMin = Math.min(...ys), yMax = Math.max(...ys);
  const px = (x: number) =>
    MARGIN.left + ((Math.log10(x) - Math.log10(xMin)) / (Math.log10(xMax) - Math.log10(xMin) || 1)) * plotW;
  const py = (y: number) =>
    MARGIN.top + plotH - ((Math.log10(y) - Math.log10(yMin)) / (Math.log10(yMax) - Math.log10(yMin) || 1)) * plotH;

  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" y2="${MARGIN.top + plotH}" stroke="#000"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" y2="${MARGIN.top + plotH}" stroke="#000"/>`,
  );
  for (const x of [...new Set(xs)].sort((a, b) => a - b)) {
    parts.push(text(px(x), H - MARGIN.bottom + 16, String(x), 'text-anchor="middle"'));
  }
  for (const t of logTicks(yMin, yMax)) {
    parts.push(text(MARGIN.left - 8, py(t) + 4, t.toExponential(0), 'text-anchor="end"'));
  }
  for (const series of fig.series) {
    const d = series.points
      .map((p, i) => `${i === 0 ? "M" : "L"}${fmt(px(p.x))},${fmt(py(p.y))}`)
      .join(" ");
    parts.push(`<path d="${d}" fill="none" stroke="${colorOf(series.strategy)}" stroke-width="2"/>`);
    for (const p of series.points) {
      parts.push(
        `<circle cx="${fmt(px(p.x))}" cy="${fmt(py(p.y))}" r="3" fill="${colorOf(series.strategy)}"/>`,
      );
    }
  }
  legend(parts, strategies, colorOf);
  parts.push(
    text(MARGIN.left + plotW / 2, H - MARGIN.bottom + 40, fig.xLabel, 'text-anchor="middle"'),
    "</svg>",
  );
  return parts.join("\n") + "\n";
}

export function renderRoofline(fig: RooflineFigure): string {
  const parts = open();
  const plotW = W - MARGIN.left - MARGIN.right;
  const plotH = H - MARGIN.top - MARGIN.bottom;
  const xs = fig.points.map((p) => p.intensity);
  const ys = fig.points.map((p) => p.achieved).concat(fig.computeCeiling);
  const xMin = Math.min(...xs) / 2, xMax = Math.max(...xs) * 2;
  const yMin = Math.min(...ys) / 2, yMax = Math.max(...ys) * 2;
  const px = (x: number) =>
    MARGIN.left + ((Math.log10(x) - Math.log10(xMin)) / (Math.log10(xMax) - Math.log10(xMin))) * plotW;
  const py = (y: number) =>
    MARGIN.top + plotH - ((Math.log10(y) - Math.log10(yMin)) / (Math.log10(yMax) - Math.log10(yMin))) * plotH;
  const clampY = (y: number) => Math.min(Math.max(y, MARGIN.top), MARGIN.top + plotH);

  // memory roof: attainable = intensity x bandwidth, clipped at the compute roof
  const ridge = fig.computeCeiling / fig.bandwidthCeiling;
  parts.push(
    `<line x1="${fmt(px(xMin))}" y1="${fmt(clampY(py(xMin * fig.bandwidthCeiling)))}" x2="${fmt(px(Math.min(ridge, xMax)))}" y2="${fmt(clampY(py(Math.min(ridge, xMax) * fig.bandwidthCeiling)))}" stroke="#333" stroke-dasharray="6,3"/>`,
  );
  if (ridge < xMax) {
    parts.push(
      `<line x1="${fmt(px(ridge))}" y1="${fmt(py(fig.computeCeiling))}" x2="${fmt(px(xMax))}" y2="${fmt(py(fig.computeCeiling))}" stroke="#333"/>`,
    );
  }
  const groups = [...new Set(fig.points.map((p) => `${p.phase} bs=${p.batch}`))].sort();
  const colorOf = (g: string) => PALETTE[groups.indexOf(g) % PALETTE.length];
  for (const p of fig.points) {
    const g = `${p.phase} bs=${p.batch}`;
    const marker = p.phase === "prefill" ? "circle" : "rect";
    if (marker === "circle") {
      parts.push(
        `<circle cx="${fmt(px(p.intensity))}" cy="${fmt(py(p.achieved))}" r="4" fill="${colorOf(g)}" fill-opacity="0.8"/>`,
      );
    } else {
      parts.push(
        `<rect x="${fmt(px(p.intensity) - 3.5)}" y="${fmt(py(p.achieved) - 3.5)}" width="7" height="7" fill="${colorOf(g)}" fill-opacity="0.8"/>`,
      );
    }
  }
  for (const t of logTicks(xMin, xMax)) {
    parts.push(text(px(t), H - MARGIN.bottom + 16, t.toExponential(0), 'text-anchor="middle"'));
  }
  for (const t of logTicks(yMin, yMax)) {
    parts.push(text(MARGIN.left - 8, py(t) + 4, t.toExponential(0), 'text-anchor="end"'));
  }
  legend(parts, groups, colorOf);
  parts.push(
    text(MARGIN.left + plotW / 2, H - MARGIN.bottom + 40, fig.xLabel, 'text-anchor="middle"'),
    `<text x="18" y="${fmt(MARGIN.top + plotH / 2)}" font-family="sans-serif" font-size="12" transform="rotate(-90 18 ${fmt(MARGIN.top + plotH / 2)})" text-anchor="middle">${fig.yLabel}</text>`,
    "</svg>",
  );
  return parts.join("\n") + "\n";
}
