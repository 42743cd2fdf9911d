/**
 * Minimal file-system save/load for tfjs layers models. The browser-oriented
 * tfjs build registers no file:// IO handler under node, so the two-file
 * layout (model.json + weights.bin) is handled directly.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'

function joinBuffers(data: ArrayBuffer | ArrayBuffer[]): ArrayBuffer {
  if (!Array.isArray(data)) return data
  const total = data.reduce((n, b) => n + b.byteLength, 0)
  const out = new Uint8Array(total)
  let offset = 0
  for (const b of data) {
    out.set(new Uint8Array(b), offset)
    offset += b.byteLength
  }
  return out.buffer
}

export async function saveModel(model: tf.LayersModel, dir: string): Promise<void> {
  fs.mkdirSync(dir, { recursive: true })
  await model.save(tf.io.withSaveHandler(async (artifacts) => {
    const weightData = joinBuffers(artifacts.weightData as ArrayBuffer | ArrayBuffer[])
    fs.writeFileSync(path.join(dir, 'weights.bin'), Buffer.from(weightData))
    fs.writeFileSync(path.join(dir, 'model.json'), JSON.stringify({
      modelTopology: artifacts.modelTopology,
      weightSpecs: artifacts.weightSpecs,
    }))
    return { modelArtifactsInfo: { dateSaved: new Date(), modelTopologyType: 'JSON' } }
  }))
}

export async function loadModel(dir: string): Promise<tf.LayersModel> {
  const meta = JSON.parse(fs.readFileSync(path.join(dir, 'model.json'), 'utf8'))
  const weights = fs.readFileSync(path.join(dir, 'weights.bin'))
  const weightData = weights.buffer.slice(
    weights.byteOffset, weights.byteOffset + weights.byteLength)
  return tf.loadLayersModel(tf.io.fromMemory({
    modelTopology: meta.modelTopology,
    weightSpecs: meta.weightSpecs,
    weightData,
  }))
}
