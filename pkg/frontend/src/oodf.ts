/**
 * OODF interchange format (little-endian):
 *
 *   magic   4 bytes  "OODF"
 *   version u8       1
 *   N       u32
 *   D       u32
 *   f32[N*D] features, row-major
 *   i32[N]   labels
 *   u8[N]    OOD flags; 0xFF = not applicable (always written here: the
 *            exporter knows labels, not distribution membership)
 */

import * as fs from 'fs';

export const OODF_MAGIC = 'OODF';
export const OODF_VERSION = 1;
export const FLAG_NA = 0xff;

export interface EmbeddingFile {
  features: Float32Array; // N*D row-major
  labels: Int32Array;
  n: number;
  dim: number;
}

export function encodeOodf(features: Float32Array, labels: Int32Array, dim: number): Buffer {
  const n = labels.length;
  if (features.length !== n * dim) {
    throw new Error(`feature buffer holds ${features.length} floats, expected ${n * dim}`);
  }
  const buf = Buffer.alloc(4 + 1 + 4 + 4 + 4 * n * dim + 4 * n + n);
  let off = buf.write(OODF_MAGIC, 0, 'ascii');
  off = buf.writeUInt8(OODF_VERSION, off);
  off = buf.writeUInt32LE(n, off);
  off = buf.writeUInt32LE(dim, off);
  for (let i = 0; i < features.length; i++) {
    off = buf.writeFloatLE(features[i], off);
  }
  for (let i = 0; i < n; i++) {
    off = buf.writeInt32LE(labels[i], off);
  }
  buf.fill(FLAG_NA, off);
  return buf;
}

export function writeOodf(path: string, features: Float32Array, labels: Int32Array, dim: number): void {
  fs.writeFileSync(path, encodeOodf(features, labels, dim));
}

/** Reader used by the test suite to verify the byte layout round-trips. */
export function readOodf(path: string): EmbeddingFile {
  const buf = fs.readFileSync(path);
  if (buf.toString('ascii', 0, 4) !== OODF_MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = buf.readUInt8(4);
  if (version !== OODF_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const n = buf.readUInt32LE(5);
  const dim = buf.readUInt32LE(9);
  const expected = 13 + 4 * n * dim + 4 * n + n;
  if (buf.length !== expected) {
    throw new Error(`${path}: expected ${expected} bytes, found ${buf.length}`);
  }
  const features = new Float32Array(n * dim);
  let off = 13;
  for (let i = 0; i < n * dim; i++, off += 4) {
    features[i] = buf.readFloatLE(off);
  }
  const labels = new Int32Array(n);
  for (let i = 0; i < n; i++, off += 4) {
    labels[i] = buf.readInt32LE(off);
  }
  return { features, labels, n, dim };
}
