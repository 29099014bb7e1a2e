/**
 * Binary file formats shared with the repdensity toolkit (little-endian).
 *
 * Representation file: "REPR" | version u16 | precision u8 (4=f32, 8=f64) |
 * reserved u8 | n u64 | d u64 | stage length u16 + UTF-8 | labels n x u32 |
 * row-major floats.
 *
 * Trial records: "TRLS" | version u16 | n_examples u64 | n_trials u64 |
 * per trial an inclusion bitmask then a correctness bitmask, each
 * ceil(n/8) bytes with big-endian bit order within a byte.
 */

import { writeFileSync, readFileSync } from 'node:fs';

export const FORMAT_VERSION = 1;

export interface RepresentationData {
  rows: Float64Array | Float32Array;
  n: number;
  d: number;
  labels: Uint32Array;
  stage: string;
  precision: 4 | 8;
}

export function encodeRepresentations(data: RepresentationData): Buffer {
  const { rows, n, d, labels, stage, precision } = data;
  if (labels.length !== n) {
    throw new Error(`labels length ${labels.length} does not match n=${n}`);
  }
  if (rows.length !== n * d) {
    throw new Error(`rows length ${rows.length} does not match n*d=${n * d}`);
  }
  const stageBytes = Buffer.from(stage, 'utf-8');
  const itemSize = precision;
  const total = 4 + 2 + 1 + 1 + 8 + 8 + 2 + stageBytes.length
    + n * 4 + n * d * itemSize;
  const buf = Buffer.alloc(total);
  let off = 0;
  off += buf.write('REPR', off, 'ascii');
  off = buf.writeUInt16LE(FORMAT_VERSION, off);
  off = buf.writeUInt8(precision, off);
  off = buf.writeUInt8(0, off);
  off = buf.writeBigUInt64LE(BigInt(n), off);
  off = buf.writeBigUInt64LE(BigInt(d), off);
  off = buf.writeUInt16LE(stageBytes.length, off);
  off += stageBytes.copy(buf, off);
  for (let i = 0; i < n; i++) {
    off = buf.writeUInt32LE(labels[i], off);
  }
  if (precision === 4) {
    for (let i = 0; i < n * d; i++) {
      off = buf.writeFloatLE(Math.fround(rows[i]), off);
    }
  } else {
    for (let i = 0; i < n * d; i++) {
      off = buf.writeDoubleLE(rows[i], off);
    }
  }
  return buf;
}

export function writeRepresentations(data: RepresentationData,
                                     path: string): void {
  writeFileSync(path, encodeRepresentations(data));
}

/** Parse a representation file; used by the round-trip tests. */
export function readRepresentations(path: string): RepresentationData {
  const buf = readFileSync(path);
  if (buf.subarray(0, 4).toString('ascii') !== 'REPR') {
    throw new Error(`${path}: bad magic`);
  }
  let off = 4;
  const version = buf.readUInt16LE(off); off += 2;
  if (version !== FORMAT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const precision = buf.readUInt8(off) as 4 | 8; off += 1;
  off += 1; // reserved
  const n = Number(buf.readBigUInt64LE(off)); off += 8;
  const d = Number(buf.readBigUInt64LE(off)); off += 8;
  const stageLen = buf.readUInt16LE(off); off += 2;
  const stage = buf.subarray(off, off + stageLen).toString('utf-8');
  off += stageLen;
  const labels = new Uint32Array(n);
  for (let i = 0; i < n; i++) {
    labels[i] = buf.readUInt32LE(off); off += 4;
  }
  const rows = precision === 4 ? new Float32Array(n * d)
    : new Float64Array(n * d);
  for (let i = 0; i < n * d; i++) {
    rows[i] = precision === 4 ? buf.readFloatLE(off) : buf.readDoubleLE(off);
    off += precision;
  }
  if (off !== buf.length) {
    throw new Error(`${path}: trailing bytes`);
  }
  return { rows, n, d, labels, stage, precision };
}

/** Pack booleans most-significant-bit first, matching numpy packbits. */
export function packBits(mask: ArrayLike<boolean | number>): Buffer {
  const out = Buffer.alloc(Math.ceil(mask.length / 8));
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      out[i >> 3] |= 1 << (7 - (i & 7));
    }
  }
  return out;
}

export interface TrialData {
  inclusion: boolean[][];
  correctness: boolean[][];
}

export function encodeTrialRecords(data: TrialData): Buffer {
  const trials = data.inclusion.length;
  if (trials === 0 || data.correctness.length !== trials) {
    throw new Error('inclusion and correctness must align');
  }
  const n = data.inclusion[0].length;
  const parts: Buffer[] = [];
  const header = Buffer.alloc(4 + 2 + 8 + 8);
  header.write('TRLS', 0, 'ascii');
  header.writeUInt16LE(FORMAT_VERSION, 4);
  header.writeBigUInt64LE(BigInt(n), 6);
  header.writeBigUInt64LE(BigInt(trials), 14);
  parts.push(header);
  for (let t = 0; t < trials; t++) {
    if (data.inclusion[t].length !== n || data.correctness[t].length !== n) {
      throw new Error(`trial ${t} masks have the wrong length`);
    }
    parts.push(packBits(data.inclusion[t]));
    parts.push(packBits(data.correctness[t]));
  }
  return Buffer.concat(parts);
}

export function writeTrialRecords(data: TrialData, path: string): void {
  writeFileSync(path, encodeTrialRecords(data));
}
