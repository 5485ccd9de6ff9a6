/**
 * Mapping from the benchmark's nested-tuple structure keys to the fourteen
 * canonical query tags, and flattening of query instances into anchor and
 * relation id lists.
 *
 * A structure key mirrors the query DAG with the placeholder strings
 * "e" (anchor), "r" (relation hop), "u" (union), "n" (negation); instances
 * carry ids in the e/r positions and the sentinels -1 (u) / -2 (n).
 * De-Morgan-form union keys (negations plus an outer "n") are normalized to
 * their disjunctive-normal-form twins.
 */

import { PValue, canonKey } from "./pickle.js";

export const QUERY_TAGS = [
  "1p", "2p", "3p", "2i", "3i", "pi", "ip", "2u", "up",
  "2in", "3in", "inp", "pin", "pni",
] as const;

export type QueryTag = (typeof QUERY_TAGS)[number];

type Structure = string | Structure[];

const e = "e";
const oneHop: Structure = [e, ["r"]];

const STRUCTURES: Array<[Structure, QueryTag, boolean]> = [
  // [structure, tag, isDeMorganForm]
  [[e, ["r"]], "1p", false],
  [[e, ["r", "r"]], "2p", false],
  [[e, ["r", "r", "r"]], "3p", false],
  [[oneHop, oneHop], "2i", false],
  [[oneHop, oneHop, oneHop], "3i", false],
  [[[e, ["r", "r"]], oneHop], "pi", false],
  [[[oneHop, oneHop], ["r"]], "ip", false],
  [[oneHop, oneHop, ["u"]], "2u", false],
  [[[oneHop, oneHop, ["u"]], ["r"]], "up", false],
  [[oneHop, [e, ["r", "n"]]], "2in", false],
  [[oneHop, oneHop, [e, ["r", "n"]]], "3in", false],
  [[[oneHop, [e, ["r", "n"]]], ["r"]], "inp", false],
  [[[e, ["r", "r"]], [e, ["r", "n"]]], "pin", false],
  [[[e, ["r", "r", "n"]], oneHop], "pni", false],
  // De-Morgan twins of the two union structures
  [[[e, ["r", "n"]], [e, ["r", "n"]], ["n"]], "2u", true],
  [[[[e, ["r", "n"]], [e, ["r", "n"]], ["n"]], ["n", "r"]], "up", true],
];

const BY_KEY = new Map<string, { tag: QueryTag; structure: Structure; dm: boolean }>(
  STRUCTURES.map(([structure, tag, dm]) => [
    canonKey(structure as PValue),
    { tag, structure, dm },
  ]),
);

export class UnknownStructureError extends Error {
  constructor(key: PValue) {
    super(`unknown query-structure key: ${canonKey(key)}`);
  }
}

export function structureTag(key: PValue): { tag: QueryTag; dm: boolean } {
  const hit = BY_KEY.get(canonKey(key));
  if (!hit) throw new UnknownStructureError(key);
  return { tag: hit.tag, dm: hit.dm };
}

export interface FlatQuery {
  anchors: number[];
  relations: number[];
}

/**
 * Extract anchors and relations from an instance, walking the structure
 * template in parallel (depth-first, left to right - the same slot order
 * the downstream query files use).
 */
export function flattenInstance(key: PValue, instance: PValue): FlatQuery {
  const { structure } = BY_KEY.get(canonKey(key)) ?? (() => {
    throw new UnknownStructureError(key);
  })();
  const anchors: number[] = [];
  const relations: number[] = [];

  const walk = (tmpl: Structure, inst: PValue): void => {
    if (typeof tmpl === "string") {
      if (typeof inst !== "number") {
        throw new Error(`expected an id or sentinel, got ${canonKey(inst)}`);
      }
      if (tmpl === "e") anchors.push(inst);
      else if (tmpl === "r") relations.push(inst);
      // "u" (-1) and "n" (-2) are structural sentinels, not ids.
      return;
    }
    if (!Array.isArray(inst) || inst.length !== tmpl.length) {
      throw new Error(
        `instance shape ${canonKey(inst)} does not match its structure`,
      );
    }
    tmpl.forEach((part, i) => walk(part, inst[i]));
  };

  walk(structure, instance);
  return { anchors, relations };
}

/**
 * Rewrite a De-Morgan-form union instance into its DNF twin: strip the
 * inner negation sentinels and the outer negation/projection wrapper
 * layout, preserving anchors and relations.
 */
export function normalizeDeMorgan(tag: QueryTag, flat: FlatQuery): FlatQuery {
  // The DM structures carry the same anchors and hop relations in the same
  // depth-first order as their DNF twins, so the flattened form is already
  // normalized; this exists as an explicit seam (and assertion) for the
  // two union tags.
  if (tag !== "2u" && tag !== "up") {
    throw new Error(`no De-Morgan twin for ${tag}`);
  }
  return flat;
}
