/**
 * Prediction-log emission in the exact CSV schema the core evaluator scores:
 * a header row `eval_step,node_index,predicted_class` followed by one integer
 * row per (evaluation step, test node). Duplicate (step, node) pairs are a
 * caller bug and are rejected at write time, mirroring the core's validation.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const LOG_HEADER = "eval_step,node_index,predicted_class";

export class PredictionLogError extends Error {}

export interface PredictionRecord {
  evalStep: number;
  nodeIndex: number;
  predictedClass: number;
}

export function formatPredictionLog(records: Iterable<PredictionRecord>): string {
  const seen = new Set<string>();
  const lines = [LOG_HEADER];
  for (const rec of records) {
    for (const [name, value] of Object.entries(rec)) {
      if (!Number.isInteger(value)) {
        throw new PredictionLogError(`${name} must be an integer, got ${value}`);
      }
    }
    const key = `${rec.evalStep},${rec.nodeIndex}`;
    if (seen.has(key)) {
      throw new PredictionLogError(`duplicate prediction for (${key})`);
    }
    seen.add(key);
    lines.push(`${rec.evalStep},${rec.nodeIndex},${rec.predictedClass}`);
  }
  return lines.map((l) => l + "\n").join("");
}

export function writePredictionLog(records: Iterable<PredictionRecord>, path: string): void {
  writeFileSync(path, formatPredictionLog(records), "utf-8");
}

/** Parse a log back into records (tolerates \r\n from other writers). */
export function readPredictionLog(path: string): PredictionRecord[] {
  const lines = readFileSync(path, "utf-8").split("\n")
    .map((l) => l.replace(/\r$/, ""))
    .filter((l) => l.length > 0);
  if (lines[0] !== LOG_HEADER) {
    throw new PredictionLogError(`${path}: bad or missing header`);
  }
  return lines.slice(1).map((line, i) => {
    const parts = line.split(",");
    if (parts.length !== 3 || parts.some((p) => !/^-?\d+$/.test(p))) {
      throw new PredictionLogError(`${path}: malformed row ${i + 2}`);
    }
    return {
      evalStep: Number(parts[0]),
      nodeIndex: Number(parts[1]),
      predictedClass: Number(parts[2]),
    };
  });
}
