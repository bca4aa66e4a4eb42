/** Strict parser for the simulator's CSV output (plain comma-separated,
 * no quoting — the producer never emits commas inside fields). */

export type Row = Record<string, string>;

export class MissingColumnError extends Error {
  constructor(column: string, context: string) {
    super(`missing column "${column}" required by ${context}`);
    this.name = "MissingColumnError";
  }
}

export function parseCsv(text: string): Row[] {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const header = lines[0].split(",");
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${i + 2}: expected ${header.length} cells, got ${cells.length}`);
    }
    const row: Row = {};
    header.forEach((name, j) => (row[name] = cells[j]));
    return row;
  });
}

export function requireColumns(rows: Row[], columns: string[], context: string): void {
  const present = rows.length > 0 ? rows[0] : {};
  for (const column of columns) {
    if (!(column in present)) {
      throw new MissingColumnError(column, context);
    }
  }
}

export function num(row: Row, column: string): number {
  const value = Number(row[column]);
  if (!Number.isFinite(value)) {
    throw new Error(`column "${column}": not a finite number (${row[column]})`);
  }
  return value;
}
