/**
 * Minimal CSV reader for the harness result schema.
 *
 * Handles quoted fields (RFC 4180 style: doubled quotes inside quoted
 * fields), which the harness emits for scenario ids containing commas.
 */

export interface CsvTable {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): CsvTable {
  const records: string[][] = [];
  let field = "";
  let record: string[] = [];
  let inQuotes = false;
  let i = 0;
  const pushField = () => {
    record.push(field);
    field = "";
  };
  const pushRecord = () => {
    pushField();
    records.push(record);
    record = [];
  };
  while (i < text.length) {
    const ch = text[i];
    if (inQuotes) {
      if (ch === '"') {
        if (text[i + 1] === '"') {
          field += '"';
          i += 2;
          continue;
        }
        inQuotes = false;
        i += 1;
        continue;
      }
      field += ch;
      i += 1;
      continue;
    }
    if (ch === '"') {
      inQuotes = true;
      i += 1;
    } else if (ch === ",") {
      pushField();
      i += 1;
    } else if (ch === "\n") {
      pushRecord();
      i += 1;
    } else if (ch === "\r") {
      i += 1; // tolerate CRLF
    } else {
      field += ch;
      i += 1;
    }
  }
  if (field.length > 0 || record.length > 0) {
    pushRecord();
  }
  if (records.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = records[0];
  const rows = records.slice(1).filter((r) => !(r.length === 1 && r[0] === ""));
  for (const r of rows) {
    if (r.length !== header.length) {
      throw new SchemaError(
        `row has ${r.length} fields, header has ${header.length}`,
      );
    }
  }
  return { header, rows };
}

/** Column accessor that names the missing column in its error. */
export function columnIndex(table: CsvTable, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`missing column: ${name}`);
  }
  return idx;
}
