/**
 * Writers and independent re-parsers for the portable dataset formats.
 *
 * Both file kinds are UTF-8 with a leading `#version 1` line. Graph split
 * files carry a JSON manifest line then `head<TAB>relation<TAB>tail`
 * triples; query files carry one record per line:
 * `type<TAB>anchors<TAB>relations<TAB>easy<TAB>hard`, comma-separated ids,
 * `-` for an empty set.
 */

export const FORMAT_VERSION = 1;

export type Triple = [number, number, number];

export interface QueryRecord {
  tag: string;
  anchors: number[];
  relations: number[];
  easy: number[];
  hard: number[];
}

const idList = (ids: number[]): string =>
  ids.length ? ids.join(",") : "-";

export function renderGraphSplit(
  triples: Triple[],
  entities: number,
  relations: number,
  split: string,
): string {
  const manifest = JSON.stringify({ entities, relations, split });
  const lines = [`#version ${FORMAT_VERSION}`, manifest];
  for (const [h, r, t] of triples) lines.push(`${h}\t${r}\t${t}`);
  return lines.join("\n") + "\n";
}

export function renderQueryFile(records: QueryRecord[]): string {
  const lines = [`#version ${FORMAT_VERSION}`];
  for (const q of records) {
    lines.push(
      [
        q.tag,
        q.anchors.join(","),
        q.relations.join(","),
        idList(q.easy),
        idList(q.hard),
      ].join("\t"),
    );
  }
  return lines.join("\n") + "\n";
}

export class FormatError extends Error {
  constructor(file: string, line: number, message: string) {
    super(`${file}:${line}: ${message}`);
  }
}

/** Line-by-line re-parse of a graph split file (the verification reader;
 * deliberately independent of the writer above). */
export function parseGraphSplit(
  text: string,
  file: string,
): { entities: number; relations: number; split: string; triples: Triple[] } {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  if (lines[0] !== `#version ${FORMAT_VERSION}`) {
    throw new FormatError(file, 1, `bad or missing version line: ${lines[0]}`);
  }
  let header: { entities: number; relations: number; split: string };
  try {
    header = JSON.parse(lines[1]);
  } catch {
    throw new FormatError(file, 2, "manifest line is not valid JSON");
  }
  const triples: Triple[] = [];
  for (let i = 2; i < lines.length; i++) {
    const parts = lines[i].split("\t");
    if (parts.length !== 3) {
      throw new FormatError(file, i + 1, `expected 3 fields, got ${parts.length}`);
    }
    const [h, r, t] = parts.map(Number);
    if (![h, r, t].every(Number.isInteger)) {
      throw new FormatError(file, i + 1, `non-integer id in ${lines[i]}`);
    }
    triples.push([h, r, t]);
  }
  return { ...header, triples };
}

const parseIds = (cell: string, file: string, line: number): number[] => {
  if (cell === "-") return [];
  const ids = cell.split(",").map(Number);
  if (!ids.every(Number.isInteger)) {
    throw new FormatError(file, line, `bad id list ${cell}`);
  }
  return ids;
};

export function parseQueryFile(text: string, file: string): QueryRecord[] {
  const lines = text.split("\n");
  if (lines[lines.length - 1] === "") lines.pop();
  if (lines[0] !== `#version ${FORMAT_VERSION}`) {
    throw new FormatError(file, 1, `bad or missing version line: ${lines[0]}`);
  }
  const records: QueryRecord[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split("\t");
    if (parts.length !== 5) {
      throw new FormatError(file, i + 1, `expected 5 fields, got ${parts.length}`);
    }
    records.push({
      tag: parts[0],
      anchors: parseIds(parts[1], file, i + 1),
      relations: parseIds(parts[2], file, i + 1),
      easy: parseIds(parts[3], file, i + 1),
      hard: parseIds(parts[4], file, i + 1),
    });
  }
  return records;
}

/** Lexicographic comparison of number arrays. */
export function compareIds(a: number[], b: number[]): number {
  const n = Math.min(a.length, b.length);
  for (let i = 0; i < n; i++) {
    if (a[i] !== b[i]) return a[i] - b[i];
  }
  return a.length - b.length;
}
