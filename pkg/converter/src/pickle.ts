/**
 * Minimal pickle reader for the benchmark archives.
 *
 * The query/answer files are plain Python containers: dicts keyed by nested
 * tuples of small ints and the structure strings "e"/"r"/"u"/"n", with sets
 * of tuples (or ints) as values. This covers the opcodes such pickles use
 * across protocols 2-5; anything else raises with the opcode named.
 */

export type PValue =
  | number
  | string
  | boolean
  | null
  | PValue[]
  | PickleSet
  | PickleDict;

export class PickleSet {
  constructor(public items: PValue[] = []) {}
}

/** Dict with structural (value-based) key lookup. */
export class PickleDict {
  readonly entries: Array<[PValue, PValue]> = [];
  private index = new Map<string, number>();

  set(key: PValue, value: PValue): void {
    const canon = canonKey(key);
    const at = this.index.get(canon);
    if (at === undefined) {
      this.index.set(canon, this.entries.length);
      this.entries.push([key, value]);
    } else {
      this.entries[at] = [key, value];
    }
  }

  get(key: PValue): PValue | undefined {
    const at = this.index.get(canonKey(key));
    return at === undefined ? undefined : this.entries[at][1];
  }

  get size(): number {
    return this.entries.length;
  }
}

/** Canonical string form of a hashable pickle value (ints, strings, bools,
 * None, and tuples thereof). */
export function canonKey(value: PValue): string {
  if (typeof value === "number") return `i${value}`;
  if (typeof value === "string") return JSON.stringify(value);
  if (typeof value === "boolean") return value ? "T" : "F";
  if (value === null) return "N";
  if (Array.isArray(value)) return `(${value.map(canonKey).join(",")})`;
  throw new PickleError(`unhashable key of type ${value.constructor.name}`);
}

export class PickleError extends Error {}

type GlobalRef = { module: string; name: string };

const MARK: unique symbol = Symbol("mark");

export function loads(buf: Buffer): PValue {
  let pos = 0;
  const stack: Array<PValue | GlobalRef | typeof MARK> = [];
  const memo: Array<PValue | GlobalRef> = [];

  const u8 = () => buf.readUInt8(pos++);
  const u16 = () => {
    const v = buf.readUInt16LE(pos);
    pos += 2;
    return v;
  };
  const u32 = () => {
    const v = buf.readUInt32LE(pos);
    pos += 4;
    return v;
  };
  const i32 = () => {
    const v = buf.readInt32LE(pos);
    pos += 4;
    return v;
  };
  const utf8 = (n: number) => {
    const s = buf.toString("utf8", pos, pos + n);
    pos += n;
    return s;
  };
  const line = () => {
    const end = buf.indexOf(0x0a, pos);
    if (end < 0) throw new PickleError("unterminated text line");
    const s = buf.toString("ascii", pos, end);
    pos = end + 1;
    return s;
  };

  // Class references (e.g. the set factory of a defaultdict) ride along as
  // opaque values inside reduce-argument tuples; they never escape the
  // decoded result because only REDUCE consumes them.
  const pop = (): PValue => {
    const v = stack.pop();
    if (v === undefined || v === MARK) {
      throw new PickleError("stack underflow");
    }
    return v as PValue;
  };
  const popToMark = (): PValue[] => {
    const items: PValue[] = [];
    for (;;) {
      const v = stack.pop();
      if (v === undefined) throw new PickleError("missing MARK");
      if (v === MARK) break;
      items.push(v as PValue);
    }
    return items.reverse();
  };

  const reduce = (callable: GlobalRef, args: PValue[]): PValue => {
    const what = `${callable.module}.${callable.name}`;
    switch (what) {
      case "builtins.set":
      case "__builtin__.set":
        return new PickleSet(args.length ? (args[0] as PValue[]).slice() : []);
      case "builtins.frozenset":
      case "__builtin__.frozenset":
        return new PickleSet(args.length ? (args[0] as PValue[]).slice() : []);
      case "builtins.list":
      case "__builtin__.list":
        return args.length ? (args[0] as PValue[]).slice() : [];
      case "builtins.dict":
      case "__builtin__.dict":
      case "collections.OrderedDict":
        return new PickleDict();
      case "collections.defaultdict":
        // default factory ignored: readers only see materialized entries
        return new PickleDict();
      default:
        throw new PickleError(`unsupported global ${what}`);
    }
  };

  for (;;) {
    const op = u8();
    switch (op) {
      case 0x80: // PROTO
        u8();
        break;
      case 0x95: // FRAME (length ignored; opcodes stream through)
        pos += 8;
        break;
      case 0x2e: // STOP
        return pop();
      case 0x28: // MARK
        stack.push(MARK);
        break;
      case 0x4e: // NONE
        stack.push(null);
        break;
      case 0x88: // NEWTRUE
        stack.push(true);
        break;
      case 0x89: // NEWFALSE
        stack.push(false);
        break;
      case 0x4a: // BININT
        stack.push(i32());
        break;
      case 0x4b: // BININT1
        stack.push(u8());
        break;
      case 0x4d: // BININT2
        stack.push(u16());
        break;
      case 0x8a: {
        // LONG1: little-endian two's-complement of given width
        const n = u8();
        let value = 0n;
        for (let i = 0; i < n; i++) {
          value |= BigInt(u8()) << BigInt(8 * i);
        }
        if (n > 0 && buf[pos - 1] >= 0x80) value -= 1n << BigInt(8 * n);
        if (value > BigInt(Number.MAX_SAFE_INTEGER) ||
            value < BigInt(Number.MIN_SAFE_INTEGER)) {
          throw new PickleError(`integer out of safe range: ${value}`);
        }
        stack.push(Number(value));
        break;
      }
      case 0x47: { // BINFLOAT (big-endian double)
        const v = buf.readDoubleBE(pos);
        pos += 8;
        stack.push(v);
        break;
      }
      case 0x58: // BINUNICODE
        stack.push(utf8(u32()));
        break;
      case 0x8c: // SHORT_BINUNICODE
        stack.push(utf8(u8()));
        break;
      case 0x29: // EMPTY_TUPLE
        stack.push([]);
        break;
      case 0x85: { // TUPLE1
        const a = pop();
        stack.push([a]);
        break;
      }
      case 0x86: { // TUPLE2
        const b = pop();
        const a = pop();
        stack.push([a, b]);
        break;
      }
      case 0x87: { // TUPLE3
        const c = pop();
        const b = pop();
        const a = pop();
        stack.push([a, b, c]);
        break;
      }
      case 0x74: // TUPLE
        stack.push(popToMark());
        break;
      case 0x5d: // EMPTY_LIST
        stack.push([]);
        break;
      case 0x7d: // EMPTY_DICT
        stack.push(new PickleDict());
        break;
      case 0x8f: // EMPTY_SET
        stack.push(new PickleSet());
        break;
      case 0x91: // FROZENSET
        stack.push(new PickleSet(popToMark()));
        break;
      case 0x90: { // ADDITEMS
        const items = popToMark();
        const target = stack[stack.length - 1];
        if (!(target instanceof PickleSet)) {
          throw new PickleError("ADDITEMS onto a non-set");
        }
        target.items.push(...items);
        break;
      }
      case 0x61: { // APPEND
        const item = pop();
        const target = stack[stack.length - 1];
        if (!Array.isArray(target)) throw new PickleError("APPEND onto a non-list");
        target.push(item);
        break;
      }
      case 0x65: { // APPENDS
        const items = popToMark();
        const target = stack[stack.length - 1];
        if (!Array.isArray(target)) throw new PickleError("APPENDS onto a non-list");
        target.push(...items);
        break;
      }
      case 0x73: { // SETITEM
        const value = pop();
        const key = pop();
        const target = stack[stack.length - 1];
        if (!(target instanceof PickleDict)) {
          throw new PickleError("SETITEM onto a non-dict");
        }
        target.set(key, value);
        break;
      }
      case 0x75: { // SETITEMS
        const items = popToMark();
        const target = stack[stack.length - 1];
        if (!(target instanceof PickleDict)) {
          throw new PickleError("SETITEMS onto a non-dict");
        }
        for (let i = 0; i + 1 < items.length; i += 2) {
          target.set(items[i], items[i + 1]);
        }
        break;
      }
      case 0x71: // BINPUT
        memo[u8()] = stack[stack.length - 1] as PValue | GlobalRef;
        break;
      case 0x72: // LONG_BINPUT
        memo[u32()] = stack[stack.length - 1] as PValue | GlobalRef;
        break;
      case 0x94: // MEMOIZE
        memo.push(stack[stack.length - 1] as PValue | GlobalRef);
        break;
      case 0x68: // BINGET
        stack.push(require_memo(memo, u8()));
        break;
      case 0x6a: // LONG_BINGET
        stack.push(require_memo(memo, u32()));
        break;
      case 0x63: { // GLOBAL
        const module = line();
        const name = line();
        stack.push({ module, name });
        break;
      }
      case 0x93: { // STACK_GLOBAL
        const name = pop();
        const module = pop();
        if (typeof module !== "string" || typeof name !== "string") {
          throw new PickleError("STACK_GLOBAL expects two strings");
        }
        stack.push({ module, name });
        break;
      }
      case 0x52: { // REDUCE
        const argsValue = pop();
        const callable = stack.pop();
        if (callable === undefined || !isGlobal(callable)) {
          throw new PickleError("REDUCE without a callable");
        }
        const args = Array.isArray(argsValue) ? argsValue : [argsValue];
        stack.push(reduce(callable, args as PValue[]));
        break;
      }
      default:
        throw new PickleError(
          `unsupported pickle opcode 0x${op.toString(16)} at offset ${pos - 1}`,
        );
    }
  }
}

function isGlobal(v: unknown): v is GlobalRef {
  return typeof v === "object" && v !== null && !Array.isArray(v) &&
    !(v instanceof PickleSet) && !(v instanceof PickleDict) &&
    "module" in (v as object);
}

function require_memo(
  memo: Array<PValue | GlobalRef>,
  idx: number,
): PValue | GlobalRef {
  const v = memo[idx];
  if (v === undefined) throw new PickleError(`memo miss at index ${idx}`);
  return v;
}
