import { execFileSync } from 'child_process'
import * as fs from 'fs'
import * as os from 'os'
import * as path from 'path'
import { afterAll, describe, expect, it } from 'vitest'
import {
  encodeFeatureFile, featurePath, readFeatureFile, writeFeatureFile,
  writeManifest,
} from '../src/featfile'

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'featfile-'))
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }))

function fetrilAvailable(): boolean {
  try {
    execFileSync('fetril', ['--help'], { stdio: 'pipe' })
    return true
  } catch {
    return false
  }
}

describe('feature file encoding', () => {
  it('lays out header and payload exactly', () => {
    const data = new Float32Array([1.5, -2.0, 0.25, 4.0, 8.0, -0.5])
    const buf = encodeFeatureFile(7, 2, 3, data)
    expect(buf.subarray(0, 5).toString('ascii')).toBe('FTRL1')
    expect(buf.readUInt32LE(5)).toBe(7)
    expect(buf.readUInt32LE(9)).toBe(2)
    expect(buf.readUInt32LE(13)).toBe(3)
    expect(buf.length).toBe(17 + 6 * 4)
    expect(buf.readFloatLE(17)).toBe(1.5)
    expect(buf.readFloatLE(17 + 5 * 4)).toBe(-0.5)
  })

  it('round-trips through a file', () => {
    const data = new Float32Array(12).map((_, i) => i / 3 - 1)
    const file = path.join(tmp, 'rt.bin')
    writeFeatureFile(file, 9, 4, 3, data)
    const back = readFeatureFile(file)
    expect(back.classId).toBe(9)
    expect(back.rows).toBe(4)
    expect(back.dim).toBe(3)
    expect(Array.from(back.data)).toEqual(Array.from(data))
  })

  it('rejects non-finite values and bad shapes', () => {
    expect(() => encodeFeatureFile(0, 1, 2, new Float32Array([1, NaN])))
      .toThrow(/non-finite/)
    expect(() => encodeFeatureFile(0, 2, 2, new Float32Array(3)))
      .toThrow(/payload/)
  })

  it('writes a dataset the fetril engine validates', () => {
    if (!fetrilAvailable()) return // engine not installed in this environment
    const out = path.join(tmp, 'ds')
    fs.mkdirSync(out, { recursive: true })
    const entries = []
    for (let classId = 0; classId < 3; classId++) {
      const rows = 5
      const dim = 8
      const data = new Float32Array(rows * dim).map(() => Math.random() - 0.5)
      const file = featurePath(out, classId, 'train')
      writeFeatureFile(file, classId, rows, dim, data)
      entries.push({ class_id: classId, count: rows, path: path.basename(file) })
    }
    writeManifest(path.join(out, 'train.json'), 'ts-unit', 8, 'train', entries)
    const stdout = execFileSync(
      'fetril', ['extract-check', '--manifest', path.join(out, 'train.json')],
      { encoding: 'utf8' })
    expect(stdout).toContain('ok: 3 classes, dim 8')
  })
})
