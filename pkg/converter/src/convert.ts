/**
 * Conversion of the publicly distributed benchmark archives into the
 * portable dataset formats, plus independent verification.
 *
 * Expected source layout (the open logical-query benchmark distribution):
 *
 *   stats.txt                       "numentity: N" / "numrelations: R"
 *   train.txt valid.txt test.txt    tab-separated integer triples
 *   train-queries.pkl               {structure key: set of instances}
 *   train-answers.pkl               {instance: set of entity ids}
 *   valid-queries.pkl, valid-easy-answers.pkl, valid-hard-answers.pkl
 *   test-queries.pkl,  test-easy-answers.pkl,  test-hard-answers.pkl
 *
 * Conversion is deterministic (canonical tag order, instances sorted), so
 * re-running on the same sources is byte-identical.
 */

import * as crypto from "node:crypto";
import * as fs from "node:fs";
import * as path from "node:path";

import {
  QueryRecord,
  Triple,
  compareIds,
  parseGraphSplit,
  parseQueryFile,
  renderGraphSplit,
  renderQueryFile,
} from "./formats.js";
import { PickleDict, PickleSet, PValue, loads } from "./pickle.js";
import { QUERY_TAGS, QueryTag, flattenInstance, structureTag } from "./structures.js";

export const MANIFEST_VERSION = 1;

export interface ConversionManifest {
  format_version: number;
  dataset: string | null;
  entities: number;
  relations: number;
  source_checksums: Record<string, string>;
  triples: Record<string, number>;
  queries: Record<string, Record<string, number>>;
}

export class ConversionError extends Error {}

/** Per-type query counts of the published benchmark datasets. Training
 * counts apply to each existential-positive type (1p/2p/3p/2i/3i) and each
 * negation type respectively; evaluation counts are per type. */
export const PUBLISHED_COUNTS: Record<
  string,
  {
    trainEpfoEach: number;
    trainNegationEach: number;
    valid1p: number;
    validOthersEach: number;
    test1p: number;
    testOthersEach: number;
  }
> = {
  "fb15k-237": {
    trainEpfoEach: 149689,
    trainNegationEach: 14968,
    valid1p: 20101,
    validOthersEach: 5000,
    test1p: 22812,
    testOthersEach: 5000,
  },
  nell995: {
    trainEpfoEach: 107982,
    trainNegationEach: 10798,
    valid1p: 16927,
    validOthersEach: 4000,
    test1p: 17034,
    testOthersEach: 4000,
  },
};

const TRAIN_EPFO: QueryTag[] = ["1p", "2p", "3p", "2i", "3i"];
const NEGATION: QueryTag[] = ["2in", "3in", "inp", "pin", "pni"];

function sha256(filePath: string): string {
  return crypto.createHash("sha256").update(fs.readFileSync(filePath)).digest("hex");
}

function readStats(srcDir: string): { entities: number; relations: number } {
  const statsPath = path.join(srcDir, "stats.txt");
  if (!fs.existsSync(statsPath)) {
    throw new ConversionError(`missing ${statsPath}`);
  }
  const text = fs.readFileSync(statsPath, "utf8");
  const entities = /numentity\s*:\s*(\d+)/.exec(text);
  const relations = /numrelations\s*:\s*(\d+)/.exec(text);
  if (!entities || !relations) {
    throw new ConversionError(`cannot parse entity/relation counts from ${statsPath}`);
  }
  return { entities: Number(entities[1]), relations: Number(relations[1]) };
}

function readTriples(filePath: string): Triple[] {
  const triples: Triple[] = [];
  const lines = fs.readFileSync(filePath, "utf8").split("\n");
  lines.forEach((lineText, i) => {
    if (!lineText.trim()) return;
    const parts = lineText.split("\t").map(Number);
    if (parts.length !== 3 || !parts.every(Number.isInteger)) {
      throw new ConversionError(`${filePath}:${i + 1}: bad triple ${lineText}`);
    }
    triples.push(parts as Triple);
  });
  return triples;
}

function asDict(value: PValue, what: string): PickleDict {
  if (!(value instanceof PickleDict)) {
    throw new ConversionError(`${what}: expected a dict at the top level`);
  }
  return value;
}

function answerIds(value: PValue | undefined): number[] {
  if (value === undefined) return [];
  if (!(value instanceof PickleSet)) {
    throw new ConversionError("answers must be sets of entity ids");
  }
  return value.items.map((v) => {
    if (typeof v !== "number") {
      throw new ConversionError("answers must be sets of entity ids");
    }
    return v;
  }).sort((a, b) => a - b);
}

interface SplitSpec {
  queriesFile: string;
  easyFile: string | null;
  hardFile: string | null;
  evaluation: boolean;
}

const SPLITS: Record<string, SplitSpec> = {
  train: {
    queriesFile: "train-queries.pkl",
    easyFile: "train-answers.pkl",
    hardFile: null,
    evaluation: false,
  },
  valid: {
    queriesFile: "valid-queries.pkl",
    easyFile: "valid-easy-answers.pkl",
    hardFile: "valid-hard-answers.pkl",
    evaluation: true,
  },
  test: {
    queriesFile: "test-queries.pkl",
    easyFile: "test-easy-answers.pkl",
    hardFile: "test-hard-answers.pkl",
    evaluation: true,
  },
};

function convertSplit(
  srcDir: string,
  spec: SplitSpec,
): QueryRecord[] {
  const queries = asDict(
    loads(fs.readFileSync(path.join(srcDir, spec.queriesFile))),
    spec.queriesFile,
  );
  const easy = spec.easyFile
    ? asDict(loads(fs.readFileSync(path.join(srcDir, spec.easyFile))), spec.easyFile)
    : null;
  const hard = spec.hardFile
    ? asDict(loads(fs.readFileSync(path.join(srcDir, spec.hardFile))), spec.hardFile)
    : null;

  const byTag = new Map<QueryTag, Map<string, QueryRecord>>();
  for (const [structureKey, instancesValue] of queries.entries) {
    const { tag } = structureTag(structureKey);
    if (!(instancesValue instanceof PickleSet)) {
      throw new ConversionError(
        `${spec.queriesFile}: instances of ${tag} must be a set`,
      );
    }
    const bucket = byTag.get(tag) ?? new Map<string, QueryRecord>();
    byTag.set(tag, bucket);
    for (const instance of instancesValue.items) {
      const flat = flattenInstance(structureKey, instance);
      const easyIds = answerIds(easy?.get(instance));
      const hardIds = answerIds(hard?.get(instance));
      if (spec.evaluation && hardIds.length === 0) {
        throw new ConversionError(
          `${spec.queriesFile}: evaluation query ${tag} ` +
            `anchors=${flat.anchors} relations=${flat.relations} has no hard answers`,
        );
      }
      const hardSet = new Set(hardIds);
      const record: QueryRecord = {
        tag,
        anchors: flat.anchors,
        relations: flat.relations,
        easy: easyIds.filter((id) => !hardSet.has(id)),
        hard: hardIds,
      };
      // Dedupe on the grounding (De-Morgan twins collapse onto DNF form).
      bucket.set(`${flat.anchors.join(",")}|${flat.relations.join(",")}`, record);
    }
  }

  const records: QueryRecord[] = [];
  for (const tag of QUERY_TAGS) {
    const bucket = byTag.get(tag);
    if (!bucket) continue;
    const sorted = [...bucket.values()].sort(
      (a, b) => compareIds(a.anchors, b.anchors) || compareIds(a.relations, b.relations),
    );
    records.push(...sorted);
  }
  return records;
}

export function convert(
  srcDir: string,
  outDir: string,
  dataset: string | null = null,
): ConversionManifest {
  const { entities, relations } = readStats(srcDir);
  fs.mkdirSync(outDir, { recursive: true });

  const previousManifest = path.join(outDir, "manifest.json");
  let previous: ConversionManifest | null = null;
  if (fs.existsSync(previousManifest)) {
    try {
      previous = JSON.parse(fs.readFileSync(previousManifest, "utf8"));
    } catch {
      previous = null;
    }
  }

  const checksums: Record<string, string> = {};
  const tripleCounts: Record<string, number> = {};
  const queryCounts: Record<string, Record<string, number>> = {};

  for (const split of ["train", "valid", "test"]) {
    const triplePath = path.join(srcDir, `${split}.txt`);
    if (!fs.existsSync(triplePath)) {
      throw new ConversionError(`missing ${triplePath}`);
    }
    checksums[`${split}.txt`] = sha256(triplePath);
    const triples = readTriples(triplePath);
    for (const [h, r, t] of triples) {
      if (h < 0 || h >= entities || t < 0 || t >= entities) {
        throw new ConversionError(`entity id out of range in ${split}.txt`);
      }
      if (r < 0 || r >= relations) {
        throw new ConversionError(`relation id out of range in ${split}.txt`);
      }
    }
    tripleCounts[split] = triples.length;
    fs.writeFileSync(
      path.join(outDir, `${split}.txt`),
      renderGraphSplit(triples, entities, relations, split),
    );

    const spec = SPLITS[split];
    for (const f of [spec.queriesFile, spec.easyFile, spec.hardFile]) {
      if (f) {
        const p = path.join(srcDir, f);
        if (!fs.existsSync(p)) throw new ConversionError(`missing ${p}`);
        checksums[f] = sha256(p);
      }
    }
    const records = convertSplit(srcDir, spec);
    for (const record of records) {
      const ids = [...record.anchors, ...record.easy, ...record.hard];
      if (ids.some((id) => id < 0 || id >= entities)) {
        throw new ConversionError(`entity id out of range in ${split} queries`);
      }
      if (record.relations.some((id) => id < 0 || id >= relations)) {
        throw new ConversionError(`relation id out of range in ${split} queries`);
      }
    }
    queryCounts[split] = {};
    for (const record of records) {
      queryCounts[split][record.tag] = (queryCounts[split][record.tag] ?? 0) + 1;
    }
    fs.writeFileSync(
      path.join(outDir, `${split}-queries.txt`),
      renderQueryFile(records),
    );
  }

  if (previous && JSON.stringify(previous.source_checksums) !==
      JSON.stringify(checksums)) {
    console.warn(
      "warning: source checksums differ from the previous conversion in " +
        outDir,
    );
  }

  const manifest: ConversionManifest = {
    format_version: MANIFEST_VERSION,
    dataset,
    entities,
    relations,
    source_checksums: checksums,
    triples: tripleCounts,
    queries: queryCounts,
  };
  // Stable key order keeps re-runs byte-identical.
  fs.writeFileSync(
    path.join(outDir, "manifest.json"),
    stableJson(manifest) + "\n",
  );
  return manifest;
}

function stableJson(value: unknown): string {
  return JSON.stringify(sortKeys(value), null, 2);
}

function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) return value.map(sortKeys);
  if (value && typeof value === "object") {
    return Object.fromEntries(
      Object.entries(value as Record<string, unknown>)
        .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
        .map(([k, v]) => [k, sortKeys(v)]),
    );
  }
  return value;
}

export interface VerifyIssue {
  file: string;
  message: string;
}

export interface VerifyReport {
  ok: boolean;
  issues: VerifyIssue[];
  checked: string[];
}

/** Re-parse converted outputs with the independent reader and check them
 * against the manifest (and the published per-type counts when the
 * manifest names a known dataset). Fails on the first divergent record
 * per file. */
export function verify(outDir: string, manifestPath: string): VerifyReport {
  const issues: VerifyIssue[] = [];
  const checked: string[] = [];
  const manifest: ConversionManifest = JSON.parse(
    fs.readFileSync(manifestPath, "utf8"),
  );

  for (const split of ["train", "valid", "test"]) {
    const graphFile = path.join(outDir, `${split}.txt`);
    checked.push(graphFile);
    try {
      const parsed = parseGraphSplit(fs.readFileSync(graphFile, "utf8"), graphFile);
      if (parsed.entities !== manifest.entities ||
          parsed.relations !== manifest.relations) {
        issues.push({ file: graphFile, message: "header counts disagree with manifest" });
      }
      if (parsed.triples.length !== manifest.triples[split]) {
        issues.push({
          file: graphFile,
          message: `expected ${manifest.triples[split]} triples, ` +
            `found ${parsed.triples.length}`,
        });
      }
      const bad = parsed.triples.findIndex(
        ([h, r, t]) =>
          h < 0 || h >= manifest.entities || t < 0 || t >= manifest.entities ||
          r < 0 || r >= manifest.relations,
      );
      if (bad >= 0) {
        issues.push({
          file: graphFile,
          message: `id out of range at triple ${bad + 1}: ` +
            parsed.triples[bad].join("\t"),
        });
      }
    } catch (err) {
      issues.push({ file: graphFile, message: String(err) });
      continue;
    }

    const queryFile = path.join(outDir, `${split}-queries.txt`);
    checked.push(queryFile);
    try {
      const records = parseQueryFile(fs.readFileSync(queryFile, "utf8"), queryFile);
      const counts: Record<string, number> = {};
      for (const [i, record] of records.entries()) {
        counts[record.tag] = (counts[record.tag] ?? 0) + 1;
        const ids = [...record.anchors, ...record.easy, ...record.hard];
        if (ids.some((id) => id < 0 || id >= manifest.entities) ||
            record.relations.some((id) => id < 0 || id >= manifest.relations)) {
          issues.push({
            file: queryFile,
            message: `id out of range at record ${i + 1}`,
          });
          break;
        }
        if (record.easy.some((id) => record.hard.includes(id))) {
          issues.push({
            file: queryFile,
            message: `easy/hard overlap at record ${i + 1}`,
          });
          break;
        }
        if (split !== "train" && record.hard.length === 0) {
          issues.push({
            file: queryFile,
            message: `evaluation record ${i + 1} has no hard answers`,
          });
          break;
        }
      }
      const want = manifest.queries[split] ?? {};
      const allTags = new Set([...Object.keys(want), ...Object.keys(counts)]);
      for (const tag of [...allTags].sort()) {
        if ((want[tag] ?? 0) !== (counts[tag] ?? 0)) {
          issues.push({
            file: queryFile,
            message: `${tag}: manifest says ${want[tag] ?? 0}, file has ` +
              `${counts[tag] ?? 0}`,
          });
        }
      }
      if (manifest.dataset && PUBLISHED_COUNTS[manifest.dataset]) {
        const expected = PUBLISHED_COUNTS[manifest.dataset];
        const expectTag = (tag: string): number => {
          if (split === "train") {
            if ((TRAIN_EPFO as string[]).includes(tag)) return expected.trainEpfoEach;
            if ((NEGATION as string[]).includes(tag)) return expected.trainNegationEach;
            return 0;
          }
          const oneP = split === "valid" ? expected.valid1p : expected.test1p;
          const others = split === "valid"
            ? expected.validOthersEach
            : expected.testOthersEach;
          return tag === "1p" ? oneP : others;
        };
        for (const tag of Object.keys(counts).sort()) {
          if (counts[tag] !== expectTag(tag)) {
            issues.push({
              file: queryFile,
              message: `${tag}: published count ${expectTag(tag)}, ` +
                `file has ${counts[tag]}`,
            });
          }
        }
      }
    } catch (err) {
      issues.push({ file: queryFile, message: String(err) });
    }
  }

  return { ok: issues.length === 0, issues, checked };
}
