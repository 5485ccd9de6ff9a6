import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { PickleDict, PickleSet, canonKey, loads } from "../src/pickle.js";

const FIXTURES = path.join(__dirname, "fixtures");

function pyPickle(expr: string, protocol = 3): Buffer {
  return execFileSync("python3", [
    "-c",
    `import sys, pickle, collections
sys.stdout.buffer.write(pickle.dumps(${expr}, protocol=${protocol}))`,
  ]);
}

describe("pickle loads", () => {
  it("reads ints, strings, tuples, and lists", () => {
    const value = loads(pyPickle("(1, 300, 70000, -2, 'e', ['a', 'b'], ())"));
    expect(value).toEqual([1, 300, 70000, -2, "e", ["a", "b"], []]);
  });

  it("reads big and negative longs", () => {
    const value = loads(pyPickle("(2**40, -(2**40), 2**31)"));
    expect(value).toEqual([2 ** 40, -(2 ** 40), 2 ** 31]);
  });

  it("reads none and booleans", () => {
    expect(loads(pyPickle("(None, True, False)"))).toEqual([null, true, false]);
  });

  it("reads sets", () => {
    const value = loads(pyPickle("{(0, (1,)), (2, (3,))}")) as PickleSet;
    expect(value).toBeInstanceOf(PickleSet);
    const keys = value.items.map((v) => canonKey(v)).sort();
    expect(keys).toEqual(["(i0,(i1))", "(i2,(i3))"]);
  });

  it("reads dicts with tuple keys", () => {
    const value = loads(
      pyPickle("{('e', ('r',)): {1, 2}, ('e', ('r', 'r')): {3}}"),
    ) as PickleDict;
    expect(value).toBeInstanceOf(PickleDict);
    expect(value.size).toBe(2);
    const hit = value.get(["e", ["r"]]) as PickleSet;
    expect([...hit.items].sort()).toEqual([1, 2]);
  });

  it("reads defaultdicts of sets", () => {
    const value = loads(
      pyPickle(
        "collections.defaultdict(set, {(0, (1,)): {4, 5}})",
      ),
    ) as PickleDict;
    expect(value).toBeInstanceOf(PickleDict);
    const hit = value.get([0, [1]]) as PickleSet;
    expect([...hit.items].sort()).toEqual([4, 5]);
  });

  it("handles memoized shared objects", () => {
    const value = loads(pyPickle("(lambda t: (t, t))(('e', ('r',)))", 3));
    const [a, b] = value as unknown[];
    expect(a).toEqual(["e", ["r"]]);
    expect(b).toEqual(a);
  });

  it.each([2, 3, 4, 5])("reads protocol %d", (protocol) => {
    const value = loads(
      pyPickle("{('e', ('r',)): {(0, (1,)), (2, (3,))}}", protocol),
    ) as PickleDict;
    const hit = value.get(["e", ["r"]]) as PickleSet;
    expect(hit.items.length).toBe(2);
  });

  it("reads the committed protocol variants identically", () => {
    const base = loads(
      fs.readFileSync(path.join(FIXTURES, "toy", "train-queries.pkl")),
    ) as PickleDict;
    for (const proto of [2, 4, 5]) {
      const other = loads(
        fs.readFileSync(path.join(FIXTURES, `train-queries.proto${proto}.pkl`)),
      ) as PickleDict;
      expect(other.size).toBe(base.size);
      for (const [key, value] of base.entries) {
        const twin = other.get(key) as PickleSet;
        expect(twin, canonKey(key)).toBeInstanceOf(PickleSet);
        expect(
          twin.items.map((v) => canonKey(v)).sort(),
        ).toEqual((value as PickleSet).items.map((v) => canonKey(v)).sort());
      }
    }
  });

  it("names unsupported opcodes", () => {
    // 0x88 NEWTRUE is supported; craft an unknown byte stream instead
    expect(() => loads(Buffer.from([0x80, 0x03, 0x99]))).toThrow(/opcode/);
  });

  it("rejects unsupported globals", () => {
    expect(() => loads(pyPickle("collections.Counter({1: 2})"))).toThrow(
      /unsupported global/,
    );
  });
});
