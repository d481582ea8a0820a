/**
 * Reader for canonical stream files.
 *
 * Line 1 is a sorted-key JSON header carrying an FNV-1a digest over the body
 * bytes; each body line is one batch, `t|node:task,node:task,...`. The
 * digest is verified before any batch is handed out. Default iteration
 * yields node ids only; origin-task annotations require an explicit
 * analysis-mode opt-in and never reach training code by accident.
 *
 * `serialize()` reproduces the source file byte for byte: the header line is
 * kept verbatim and the integer-only body is rebuilt from the parsed
 * batches, so a successful round trip proves the parse was lossless.
 */

import { readFileSync } from "node:fs";

import { fnv1a64Hex } from "./fnv.js";

export class StreamFormatError extends Error {}
export class StreamVersionError extends StreamFormatError {}
export class StreamDigestError extends StreamFormatError {}

export const KNOWN_VERSIONS = [1];
export const DIGEST_ALGO = "fnv1a64";

export interface StreamHeader {
  format_version: number;
  dataset: string;
  mode: string;
  batch_size: number;
  sampling: string;
  seed: number;
  task_count: number;
  stream_length: number;
  digest: string;
  digest_algo: string;
  sigma?: number;
  mix_fraction?: number;
  window_batches?: number;
}

export interface BatchItem {
  node: number;
  task: number;
}

/** Learner-facing batch view: node ids only. */
export interface Batch {
  index: number;
  nodes: number[];
}

/** Analysis-mode view including hidden origin tasks. */
export interface AnnotatedBatch {
  index: number;
  items: BatchItem[];
}

const REQUIRED_KEYS = [
  "format_version", "dataset", "mode", "batch_size", "sampling", "seed",
  "task_count", "stream_length", "digest", "digest_algo",
] as const;

export class StreamReader {
  readonly header: StreamHeader;
  private readonly headerLine: string;
  private readonly batches: AnnotatedBatch[];

  private constructor(header: StreamHeader, headerLine: string, batches: AnnotatedBatch[]) {
    this.header = header;
    this.headerLine = headerLine;
    this.batches = batches;
  }

  get length(): number {
    return this.batches.length;
  }

  static fromBytes(data: Uint8Array, source = "<bytes>"): StreamReader {
    const newline = data.indexOf(0x0a);
    if (newline < 0) {
      throw new StreamFormatError(`${source}: missing header line`);
    }
    const headerLine = Buffer.from(data.subarray(0, newline)).toString("utf-8");
    let parsed: unknown;
    try {
      parsed = JSON.parse(headerLine);
    } catch (err) {
      throw new StreamFormatError(`${source}: bad header: ${String(err)}`);
    }
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      throw new StreamFormatError(`${source}: header must be an object`);
    }
    const header = parsed as Record<string, unknown>;
    const version = header["format_version"];
    if (typeof version !== "number" || !KNOWN_VERSIONS.includes(version)) {
      throw new StreamVersionError(
        `${source}: unknown format_version ${JSON.stringify(version)}`);
    }
    for (const key of REQUIRED_KEYS) {
      if (!(key in header)) {
        throw new StreamFormatError(`${source}: header missing '${key}'`);
      }
    }
    if (header["digest_algo"] !== DIGEST_ALGO) {
      throw new StreamFormatError(
        `${source}: unknown digest_algo ${JSON.stringify(header["digest_algo"])}`);
    }

    const body = data.subarray(newline + 1);
    if (fnv1a64Hex(body) !== header["digest"]) {
      throw new StreamDigestError(`${source}: body digest mismatch`);
    }

    const text = Buffer.from(body).toString("utf-8");
    const lines = text.length === 0 ? [] : text.split("\n");
    if (lines.length && lines[lines.length - 1] === "") {
      lines.pop();
    }
    const declared = header["stream_length"] as number;
    if (lines.length !== declared) {
      throw new StreamFormatError(
        `${source}: header declares ${declared} batches, found ${lines.length}`);
    }
    const taskCount = header["task_count"] as number;
    const batches: AnnotatedBatch[] = lines.map((line, i) => {
      const bar = line.indexOf("|");
      if (bar < 0) {
        throw new StreamFormatError(`${source}: batch line ${i} lacks '|'`);
      }
      const index = parseStrictInt(line.slice(0, bar), source, i);
      if (index !== i) {
        throw new StreamFormatError(`${source}: batch index ${index} out of order at line ${i}`);
      }
      const rest = line.slice(bar + 1);
      if (rest.length === 0) {
        throw new StreamFormatError(`${source}: batch ${i} is empty`);
      }
      const items = rest.split(",").map((pair) => {
        const colon = pair.indexOf(":");
        if (colon < 0) {
          throw new StreamFormatError(`${source}: batch ${i} item '${pair}' lacks ':'`);
        }
        const node = parseStrictInt(pair.slice(0, colon), source, i);
        const task = parseStrictInt(pair.slice(colon + 1), source, i);
        if (node < 0 || task < 0 || task >= taskCount) {
          throw new StreamFormatError(
            `${source}: batch ${i} item (${node},${task}) out of range`);
        }
        return { node, task };
      });
      return { index, items };
    });
    return new StreamReader(header as unknown as StreamHeader, headerLine, batches);
  }

  static open(path: string): StreamReader {
    return StreamReader.fromBytes(readFileSync(path), path);
  }

  /** Batches in stream order; origin tasks stay hidden unless analysis is set. */
  iterateBatches(): Generator<Batch>;
  iterateBatches(options: { analysis: true }): Generator<AnnotatedBatch>;
  *iterateBatches(options?: { analysis?: boolean }): Generator<Batch | AnnotatedBatch> {
    for (const batch of this.batches) {
      if (options?.analysis) {
        yield { index: batch.index, items: batch.items.map((it) => ({ ...it })) };
      } else {
        yield { index: batch.index, nodes: batch.items.map((it) => it.node) };
      }
    }
  }

  /** Reproduce the source file bytes from the parsed representation. */
  serialize(): Uint8Array {
    const lines = this.batches.map(
      (b) => `${b.index}|` + b.items.map((it) => `${it.node}:${it.task}`).join(","));
    return Buffer.from(
      this.headerLine + "\n" + lines.map((l) => l + "\n").join(""), "utf-8");
  }
}

function parseStrictInt(text: string, source: string, line: number): number {
  if (!/^-?\d+$/.test(text)) {
    throw new StreamFormatError(`${source}: malformed integer '${text}' in batch line ${line}`);
  }
  return Number(text);
}
