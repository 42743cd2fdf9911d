/**
 * Image-folder dataset access.
 *
 * Expected layout: <root>/<split>/<class_name>/<image files>, the usual
 * one-directory-per-class convention. Class names map to ids by sorted
 * order, identically for both splits. Supported formats: PNG and binary
 * PPM (P6); pixels come out as float32 RGB in [0, 1].
 */

import * as fs from 'fs'
import * as path from 'path'
import { PNG } from 'pngjs'

export interface DecodedImage {
  width: number
  height: number
  /** RGB interleaved, length = width*height*3, values in [0,1] */
  data: Float32Array
}

export interface ClassFolder {
  classId: number
  name: string
  files: string[]
}

const IMAGE_EXTENSIONS = new Set(['.png', '.ppm'])

export function decodePng(buf: Buffer): DecodedImage {
  const png = PNG.sync.read(buf)
  const out = new Float32Array(png.width * png.height * 3)
  for (let p = 0; p < png.width * png.height; p++) {
    out[p * 3] = png.data[p * 4] / 255
    out[p * 3 + 1] = png.data[p * 4 + 1] / 255
    out[p * 3 + 2] = png.data[p * 4 + 2] / 255
  }
  return { width: png.width, height: png.height, data: out }
}

export function decodePpm(buf: Buffer): DecodedImage {
  if (buf.subarray(0, 2).toString('ascii') !== 'P6') {
    throw new Error('not a binary PPM (P6) file')
  }
  // header: P6 <width> <height> <maxval> followed by a single whitespace
  let pos = 2
  const fields: number[] = []
  while (fields.length < 3) {
    while (pos < buf.length && /\s/.test(String.fromCharCode(buf[pos]))) pos++
    if (buf[pos] === 0x23) { // comment line
      while (pos < buf.length && buf[pos] !== 0x0a) pos++
      continue
    }
    let start = pos
    while (pos < buf.length && !/\s/.test(String.fromCharCode(buf[pos]))) pos++
    fields.push(parseInt(buf.subarray(start, pos).toString('ascii'), 10))
  }
  pos++
  const [width, height, maxval] = fields
  if (maxval > 255) throw new Error('16-bit PPM not supported')
  const out = new Float32Array(width * height * 3)
  for (let i = 0; i < width * height * 3; i++) out[i] = buf[pos + i] / maxval
  return { width, height, data: out }
}

export function decodeImage(file: string): DecodedImage {
  const buf = fs.readFileSync(file)
  return file.toLowerCase().endsWith('.ppm') ? decodePpm(buf) : decodePng(buf)
}

export function listSplit(root: string, split: string): ClassFolder[] {
  const dir = path.join(root, split)
  if (!fs.existsSync(dir)) throw new Error(`missing split directory: ${dir}`)
  const names = fs.readdirSync(dir, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort()
  if (names.length === 0) throw new Error(`no class folders under ${dir}`)
  return names.map((name, classId) => {
    const files = fs.readdirSync(path.join(dir, name))
      .filter((f) => IMAGE_EXTENSIONS.has(path.extname(f).toLowerCase()))
      .sort()
      .map((f) => path.join(dir, name, f))
    if (files.length === 0) throw new Error(`class folder ${name} has no images`)
    return { classId, name, files }
  })
}

/** Load a whole class folder as one flat float32 batch (n, h, w, 3). */
export function loadClassImages(files: string[], imageSize: number): Float32Array {
  const batch = new Float32Array(files.length * imageSize * imageSize * 3)
  files.forEach((file, i) => {
    const img = decodeImage(file)
    if (img.width !== imageSize || img.height !== imageSize) {
      throw new Error(
        `${file}: expected ${imageSize}x${imageSize}, got ${img.width}x${img.height}`)
    }
    batch.set(img.data, i * imageSize * imageSize * 3)
  })
  return batch
}

export function encodePng(width: number, height: number,
                          rgb: Uint8Array): Buffer {
  const png = new PNG({ width, height })
  for (let p = 0; p < width * height; p++) {
    png.data[p * 4] = rgb[p * 3]
    png.data[p * 4 + 1] = rgb[p * 3 + 1]
    png.data[p * 4 + 2] = rgb[p * 3 + 2]
    png.data[p * 4 + 3] = 255
  }
  return PNG.sync.write(png)
}
