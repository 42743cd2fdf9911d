/**
 * Frozen-backbone feature extraction.
 *
 * Runs every image of every class through the penultimate layer in
 * inference mode and writes one binary feature file per class per split,
 * plus train/test manifests in the format the fetril engine loads. The
 * backbone never updates here, so re-extraction is deterministic.
 */

import * as fs from 'fs'
import * as path from 'path'
import * as tf from '@tensorflow/tfjs'
import { ManifestEntry, featurePath, writeFeatureFile, writeManifest } from './featfile'
import { ClassFolder, listSplit, loadClassImages } from './images'

export interface ExtractOptions {
  datasetDir: string
  outDir: string
  imageSize: number
  datasetName: string
  batchSize?: number
}

async function extractClass(featureModel: tf.LayersModel, folder: ClassFolder,
                            imageSize: number, batchSize: number): Promise<Float32Array> {
  const flat = loadClassImages(folder.files, imageSize)
  const n = folder.files.length
  const dim = featureModel.outputs[0].shape[1] as number
  const out = new Float32Array(n * dim)
  for (let start = 0; start < n; start += batchSize) {
    const size = Math.min(batchSize, n - start)
    const batch = tf.tensor4d(
      flat.subarray(start * imageSize * imageSize * 3,
                    (start + size) * imageSize * imageSize * 3),
      [size, imageSize, imageSize, 3])
    const feats = featureModel.predict(batch) as tf.Tensor2D
    out.set(await feats.data() as Float32Array, start * dim)
    feats.dispose()
    batch.dispose()
  }
  return out
}

export async function extractSplit(featureModel: tf.LayersModel, split: string,
                                   options: ExtractOptions): Promise<string> {
  const folders = listSplit(options.datasetDir, split)
  const dim = featureModel.outputs[0].shape[1] as number
  fs.mkdirSync(options.outDir, { recursive: true })
  const entries: ManifestEntry[] = []
  for (const folder of folders) {
    const features = await extractClass(featureModel, folder, options.imageSize,
                                        options.batchSize ?? 128)
    const file = featurePath(options.outDir, folder.classId, split)
    writeFeatureFile(file, folder.classId, folder.files.length, dim, features)
    entries.push({
      class_id: folder.classId,
      count: folder.files.length,
      path: path.basename(file),
    })
  }
  const manifestPath = path.join(options.outDir, `${split}.json`)
  writeManifest(manifestPath, options.datasetName, dim, split, entries)
  return manifestPath
}

export async function extractAll(featureModel: tf.LayersModel,
                                 options: ExtractOptions): Promise<string[]> {
  const manifests = []
  for (const split of ['train', 'test']) {
    manifests.push(await extractSplit(featureModel, split, options))
  }
  return manifests
}
