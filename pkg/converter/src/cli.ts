#!/usr/bin/env node
/**
 * Command line:
 *   rocone-convert convert <src> <out> [--dataset fb15k-237|nell995]
 *   rocone-convert verify <out> <manifest>
 *
 * Exit codes: 0 success / verification pass, 1 failure, 2 usage error.
 */

import { convert, verify, PUBLISHED_COUNTS } from "./convert.js";

const USAGE = `usage:
  rocone-convert convert <src-dir> <out-dir> [--dataset <name>]
  rocone-convert verify <out-dir> <manifest.json>

known --dataset names: ${Object.keys(PUBLISHED_COUNTS).join(", ")}`;

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  if (command === "convert") {
    const positional = rest.filter((a) => !a.startsWith("--"));
    let dataset: string | null = null;
    const flagIndex = rest.indexOf("--dataset");
    if (flagIndex >= 0) {
      dataset = rest[flagIndex + 1] ?? null;
      if (!dataset) {
        console.error("--dataset needs a value\n" + USAGE);
        return 2;
      }
    }
    if (positional.length !== 2) {
      console.error(USAGE);
      return 2;
    }
    try {
      const manifest = convert(positional[0], positional[1], dataset);
      const total = Object.values(manifest.queries)
        .flatMap((counts) => Object.values(counts))
        .reduce((a, b) => a + b, 0);
      console.log(
        `converted ${manifest.entities} entities / ${manifest.relations} ` +
          `relations, ${total} queries -> ${positional[1]}`,
      );
      return 0;
    } catch (err) {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      return 1;
    }
  }
  if (command === "verify") {
    if (rest.length !== 2) {
      console.error(USAGE);
      return 2;
    }
    try {
      const report = verify(rest[0], rest[1]);
      for (const issue of report.issues) {
        console.error(`FAIL ${issue.file}: ${issue.message}`);
      }
      console.log(
        report.ok
          ? `PASS: ${report.checked.length} files verified`
          : `FAIL: ${report.issues.length} issue(s)`,
      );
      return report.ok ? 0 : 1;
    } catch (err) {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
      return 1;
    }
  }
  console.error(USAGE);
  return 2;
}

const isMain = process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (isMain) {
  process.exit(main(process.argv.slice(2)));
}
