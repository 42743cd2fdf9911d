/**
 * Binary feature-file format shared with the fetril engine.
 *
 * Layout (little-endian): magic "FTRL1", u32 class_id, u32 rows, u32 dim,
 * then rows*dim float32 values row-major. Manifests are JSON documents:
 * {name, dim, split, classes: [{class_id, count, path}]} with paths
 * relative to the manifest file.
 */

import * as fs from 'fs'
import * as path from 'path'

export const FEATURE_MAGIC = Buffer.from('FTRL1', 'ascii')
const HEADER_BYTES = FEATURE_MAGIC.length + 12

export interface ManifestEntry {
  class_id: number
  count: number
  path: string
}

export function encodeFeatureFile(classId: number, rows: number, dim: number,
                                  data: Float32Array): Buffer {
  if (data.length !== rows * dim) {
    throw new Error(`feature payload ${data.length} != ${rows}x${dim}`)
  }
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error('non-finite feature value')
  }
  const buf = Buffer.alloc(HEADER_BYTES + data.length * 4)
  FEATURE_MAGIC.copy(buf, 0)
  buf.writeUInt32LE(classId >>> 0, 5)
  buf.writeUInt32LE(rows >>> 0, 9)
  buf.writeUInt32LE(dim >>> 0, 13)
  Buffer.from(data.buffer, data.byteOffset, data.byteLength).copy(buf, HEADER_BYTES)
  return buf
}

export function writeFeatureFile(file: string, classId: number, rows: number,
                                 dim: number, data: Float32Array): void {
  fs.writeFileSync(file, encodeFeatureFile(classId, rows, dim, data))
}

export function readFeatureFile(file: string): {
  classId: number; rows: number; dim: number; data: Float32Array
} {
  const buf = fs.readFileSync(file)
  if (!buf.subarray(0, 5).equals(FEATURE_MAGIC)) {
    throw new Error(`${file}: bad magic`)
  }
  const classId = buf.readUInt32LE(5)
  const rows = buf.readUInt32LE(9)
  const dim = buf.readUInt32LE(13)
  const expected = HEADER_BYTES + rows * dim * 4
  if (buf.length !== expected) {
    throw new Error(`${file}: expected ${expected} bytes, got ${buf.length}`)
  }
  const payload = buf.subarray(HEADER_BYTES)
  // copy so the view is aligned and detached from the file buffer
  const data = new Float32Array(rows * dim)
  for (let i = 0; i < data.length; i++) data[i] = payload.readFloatLE(i * 4)
  return { classId, rows, dim, data }
}

export function writeManifest(file: string, name: string, dim: number,
                              split: string, entries: ManifestEntry[]): void {
  const doc = {
    name,
    dim,
    split,
    classes: entries.map((e) => ({ class_id: e.class_id, count: e.count, path: e.path })),
  }
  fs.writeFileSync(file, JSON.stringify(doc, null, 2) + '\n')
}

export function featurePath(outDir: string, classId: number, split: string): string {
  return path.join(outDir, `class_${String(classId).padStart(4, '0')}_${split}.bin`)
}
