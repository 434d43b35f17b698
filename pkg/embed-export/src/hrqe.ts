/** HRQE v1 binary embedding format: magic "HRQE", u32 version=1, u32 dim,
 * u64 count, then count*dim IEEE-754 float32 values, little-endian,
 * row-major, no padding. */

import { writeFileSync } from "node:fs";

export const HRQE_MAGIC = "HRQE";
export const HRQE_VERSION = 1;
export const HEADER_BYTES = 4 + 4 + 4 + 8;

export function encodeHrqe(rows: Float32Array[], dim: number): Buffer {
  for (const row of rows) {
    if (row.length !== dim) {
      throw new Error(`row length ${row.length} != dim ${dim}`);
    }
  }
  const buffer = Buffer.alloc(HEADER_BYTES + rows.length * dim * 4);
  buffer.write(HRQE_MAGIC, 0, "ascii");
  buffer.writeUInt32LE(HRQE_VERSION, 4);
  buffer.writeUInt32LE(dim, 8);
  buffer.writeBigUInt64LE(BigInt(rows.length), 12);
  let offset = HEADER_BYTES;
  for (const row of rows) {
    for (const value of row) {
      buffer.writeFloatLE(value, offset);
      offset += 4;
    }
  }
  return buffer;
}

export function writeHrqe(path: string, rows: Float32Array[], dim: number): void {
  writeFileSync(path, encodeHrqe(rows, dim));
}

export interface HrqeHeader {
  dim: number;
  count: number;
}

/** Parse the header and validate payload length (used by tests). */
export function parseHrqe(buffer: Buffer): { header: HrqeHeader; rows: Float32Array[] } {
  if (buffer.length < HEADER_BYTES) throw new Error("file too short for HRQE header");
  if (buffer.toString("ascii", 0, 4) !== HRQE_MAGIC) throw new Error("bad magic");
  const version = buffer.readUInt32LE(4);
  if (version !== HRQE_VERSION) throw new Error(`unsupported version ${version}`);
  const dim = buffer.readUInt32LE(8);
  const count = Number(buffer.readBigUInt64LE(12));
  const expected = HEADER_BYTES + count * dim * 4;
  if (buffer.length !== expected) {
    throw new Error(`payload is ${buffer.length - HEADER_BYTES} bytes, header implies ${expected - HEADER_BYTES}`);
  }
  const rows: Float32Array[] = [];
  for (let i = 0; i < count; i++) {
    const row = new Float32Array(dim);
    for (let j = 0; j < dim; j++) {
      row[j] = buffer.readFloatLE(HEADER_BYTES + (i * dim + j) * 4);
    }
    rows.push(row);
  }
  return { header: { dim, count }, rows };
}
