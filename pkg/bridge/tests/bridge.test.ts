import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  PredictionLogError,
  StreamDigestError,
  StreamFormatError,
  StreamReader,
  StreamVersionError,
  formatPredictionLog,
  readPredictionLog,
  writePredictionLog,
} from "../src/index.js";

const HERE = path.dirname(fileURLToPath(import.meta.url));
const REPO = path.resolve(HERE, "..", "..");
const GOLDEN = path.join(REPO, "golden");
const MODES = ["hard", "gaussian", "global_mix", "boundary_local"];

const goldenStream = (mode: string) => path.join(GOLDEN, `stream_${mode}.txt`);

describe("stream round trip", () => {
  for (const mode of MODES) {
    it(`opens, iterates, and re-serializes stream_${mode}.txt byte-identically`, () => {
      const source = readFileSync(goldenStream(mode));
      const reader = StreamReader.open(goldenStream(mode));
      expect(reader.header.mode).toBe(mode);
      expect(reader.length).toBe(reader.header.stream_length);

      let count = 0;
      let lastIndex = -1;
      for (const batch of reader.iterateBatches()) {
        expect(batch.index).toBe(lastIndex + 1);
        expect(batch.nodes.length).toBeGreaterThan(0);
        lastIndex = batch.index;
        count += 1;
      }
      expect(count).toBe(reader.header.stream_length);

      expect(Buffer.compare(Buffer.from(reader.serialize()), source)).toBe(0);
    });
  }
});

describe("validation", () => {
  it("rejects a corrupted body with a digest error", () => {
    const raw = Buffer.from(readFileSync(goldenStream("hard")));
    const colon = raw.lastIndexOf(":".charCodeAt(0));
    raw[colon + 1] = raw[colon + 1] === "9".charCodeAt(0) ? "8".charCodeAt(0) : "9".charCodeAt(0);
    expect(() => StreamReader.fromBytes(raw, "corrupt")).toThrow(StreamDigestError);
  });

  it("rejects unknown format versions before anything else", () => {
    const text = readFileSync(goldenStream("hard"), "utf-8");
    const newline = text.indexOf("\n");
    const header = JSON.parse(text.slice(0, newline));
    header.format_version = 99;
    const mangled = JSON.stringify(header) + text.slice(newline);
    expect(() => StreamReader.fromBytes(Buffer.from(mangled, "utf-8"), "versioned"))
      .toThrow(StreamVersionError);
  });

  it("rejects truncated files", () => {
    const text = readFileSync(goldenStream("hard"), "utf-8");
    const lines = text.split("\n");
    lines.splice(lines.length - 2, 1); // drop the final batch line
    expect(() => StreamReader.fromBytes(Buffer.from(lines.join("\n"), "utf-8"), "short"))
      .toThrow(StreamFormatError);
  });
});

describe("origin blindness", () => {
  it("hides origin tasks unless analysis mode is requested", () => {
    const reader = StreamReader.open(goldenStream("gaussian"));
    const first = reader.iterateBatches().next().value!;
    expect(first.nodes).toBeDefined();
    expect(Object.keys(first)).toEqual(["index", "nodes"]);
    expect(JSON.stringify(first)).not.toContain("task");

    const annotated = reader.iterateBatches({ analysis: true }).next().value!;
    expect(annotated.items.length).toBe(first.nodes.length);
    for (const item of annotated.items) {
      expect(item.task).toBeGreaterThanOrEqual(0);
      expect(item.task).toBeLessThan(reader.header.task_count);
    }
  });
});

describe("prediction log", () => {
  it("emits the exact schema on a 3-record log", () => {
    const text = formatPredictionLog([
      { evalStep: 5, nodeIndex: 7, predictedClass: 1 },
      { evalStep: 5, nodeIndex: 9, predictedClass: 0 },
      { evalStep: 10, nodeIndex: 7, predictedClass: 2 },
    ]);
    expect(text).toBe(
      "eval_step,node_index,predicted_class\n5,7,1\n5,9,0\n10,7,2\n");
  });

  it("rejects duplicate (eval_step, node) pairs at write time", () => {
    expect(() => formatPredictionLog([
      { evalStep: 1, nodeIndex: 3, predictedClass: 0 },
      { evalStep: 1, nodeIndex: 3, predictedClass: 1 },
    ])).toThrow(PredictionLogError);
  });

  it("round-trips records through a file", () => {
    const dir = mkdtempSync(path.join(tmpdir(), "bridge-"));
    const file = path.join(dir, "log.csv");
    const records = [
      { evalStep: 2, nodeIndex: 0, predictedClass: 3 },
      { evalStep: 4, nodeIndex: 1, predictedClass: 2 },
    ];
    writePredictionLog(records, file);
    expect(readPredictionLog(file)).toEqual(records);
  });
});

describe("cross-component scoring", () => {
  it("bridge-written log scores identically to the core's own scoring", () => {
    const records = readPredictionLog(path.join(GOLDEN, "predictions.csv"));
    const dir = mkdtempSync(path.join(tmpdir(), "bridge-"));
    const bridgeLog = path.join(dir, "bridge_log.csv");
    writePredictionLog(records, bridgeLog);

    const matrixOut = path.join(dir, "matrix.csv");
    execFileSync("python3", [
      "-m", "mixstream.cli", "eval",
      "--config", path.join(GOLDEN, "config.json"),
      "--log", bridgeLog,
      "--matrix-out", matrixOut,
    ], { cwd: REPO });

    const expected = parseMatrixCsv(path.join(GOLDEN, "expected_matrix.csv"));
    const actual = parseMatrixCsv(matrixOut);
    expect(actual.header).toEqual(expected.header);
    expect(actual.rows.length).toBe(expected.rows.length);
    for (let i = 0; i < expected.rows.length; i++) {
      for (let j = 0; j < expected.rows[i].length; j++) {
        expect(Math.abs(actual.rows[i][j] - expected.rows[i][j])).toBeLessThanOrEqual(1e-12);
      }
    }
  });
});

function parseMatrixCsv(file: string): { header: string[]; rows: number[][] } {
  const lines = readFileSync(file, "utf-8").split("\n")
    .map((l) => l.replace(/\r$/, ""))
    .filter((l) => l.length > 0);
  return {
    header: lines[0].split(","),
    rows: lines.slice(1).map((l) => l.split(",").map(Number)),
  };
}
